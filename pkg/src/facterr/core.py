"""Core domain types shared by every detector, plus label-set normalization."""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import AbstractSet, Any, Iterable, Mapping, Optional


class ErrorClass(Enum):
    """Sentence-level factual error classes, plus the clean-sentence class."""

    NO_ERROR = "NoError"
    ENTITY = "EntE"
    PREDICATE = "PredE"
    CIRCUMSTANCE = "CirE"
    COREFERENCE = "CorefE"
    LINK = "LinkE"
    OTHERS = "Others"

    def __str__(self) -> str:
        return self.value


class Verifiability(Enum):
    """Whether an error span is built from dialogue tokens or hallucinated."""

    INTRINSIC = "Intrinsic"
    EXTRINSIC = "Extrinsic"

    def __str__(self) -> str:
        return self.value


#: Classes that may carry a verifiability annotation.
VERIFIABLE_CLASSES = frozenset(
    {ErrorClass.ENTITY, ErrorClass.PREDICATE, ErrorClass.CIRCUMSTANCE}
)

#: All error classes, excluding the clean-sentence class.
ERROR_ONLY_CLASSES = tuple(c for c in ErrorClass if c is not ErrorClass.NO_ERROR)


def error_class_from_string(value: str) -> ErrorClass:
    """Parse a label string such as ``"EntE"``; raises ValueError on unknown labels."""
    for cls in ErrorClass:
        if cls.value == value:
            return cls
    raise ValueError(f"unknown error class label: {value!r}")


def verifiability_from_string(value: str) -> Verifiability:
    for v in Verifiability:
        if v.value == value:
            return v
    raise ValueError(f"unknown verifiability label: {value!r}")


def validate_label_set(labels: AbstractSet[ErrorClass]) -> frozenset[ErrorClass]:
    """Check the exclusivity rule and return the labels as a frozenset.

    A label set is valid when it is non-empty and NoError, if present, is the
    only member.
    """
    labels = frozenset(labels)
    if not labels:
        raise ValueError("label set must not be empty")
    if ErrorClass.NO_ERROR in labels and len(labels) > 1:
        raise ValueError(
            "NoError cannot co-occur with other classes: "
            + ", ".join(sorted(c.value for c in labels))
        )
    return labels


def normalize_labels(
    labels: AbstractSet[ErrorClass], merge_linke: bool
) -> frozenset[ErrorClass]:
    """Normalize a label set for reporting.

    With ``merge_linke`` every LinkE label becomes Others (the merged report
    convention); without it the input is returned unchanged. Invalid sets
    (NoError alongside an error class) are rejected.
    """
    labels = validate_label_set(labels)
    if not merge_linke or ErrorClass.LINK not in labels:
        return labels
    return frozenset(
        ErrorClass.OTHERS if c is ErrorClass.LINK else c for c in labels
    )


@dataclass(frozen=True)
class Utterance:
    """One dialogue turn."""

    speaker: str
    text: str
    index: int

    def __post_init__(self) -> None:
        if not self.speaker:
            raise ValueError("utterance speaker must be non-empty")
        if self.index < 0:
            raise ValueError("utterance index must be non-negative")


@dataclass(frozen=True)
class Dialogue:
    """A source dialogue, optionally with a query (meeting-style corpora)."""

    id: str
    utterances: tuple[Utterance, ...]
    query: Optional[str] = None

    def __post_init__(self) -> None:
        if not self.id:
            raise ValueError("dialogue id must be non-empty")
        if not self.utterances:
            raise ValueError(f"dialogue {self.id!r} has no utterances")
        indices = [u.index for u in self.utterances]
        if any(b <= a for a, b in zip(indices, indices[1:])):
            raise ValueError(f"dialogue {self.id!r} utterance indices must increase")

    def speakers(self) -> tuple[str, ...]:
        """Speaker names in first-appearance order."""
        seen: dict[str, None] = {}
        for utt in self.utterances:
            seen.setdefault(utt.speaker, None)
        return tuple(seen)

    def texts(self, include_query: bool = False) -> tuple[str, ...]:
        """Utterance texts in order, optionally with the query prepended."""
        texts = tuple(u.text for u in self.utterances)
        if include_query and self.query:
            return (self.query,) + texts
        return texts

    def render(self) -> str:
        """Plain-text rendering used as scoring context and on wire protocols."""
        lines = []
        if self.query:
            lines.append(self.query)
        lines.extend(f"{u.speaker}: {u.text}" for u in self.utterances)
        return "\n".join(lines)

    def contains_text(self, needle: str) -> bool:
        """Case-insensitive check whether a string occurs in the dialogue.

        Speaker names count as dialogue content.
        """
        folded = needle.casefold()
        return any(
            folded in u.text.casefold() or folded == u.speaker.casefold()
            for u in self.utterances
        )


@dataclass(frozen=True)
class SummarySentence:
    """One sentence of a generated summary, tied to its source dialogue."""

    dialogue_id: str
    model_id: str
    text: str
    sentence_index: int

    def __post_init__(self) -> None:
        if not self.text.strip():
            raise ValueError("summary sentence text is empty")
        if self.sentence_index < 0:
            raise ValueError("sentence_index must be non-negative")

    @property
    def key(self) -> tuple[str, str, int]:
        return (self.dialogue_id, self.model_id, self.sentence_index)


@dataclass(frozen=True)
class LabeledSpan:
    """A character span of a sentence carrying one error class.

    Offsets are half-open ``[start, end)`` code-point offsets into the
    sentence text.
    """

    start: int
    end: int
    error_class: ErrorClass
    verifiability: Optional[Verifiability] = None

    def __post_init__(self) -> None:
        if self.start < 0 or self.end <= self.start:
            raise ValueError(f"invalid span offsets [{self.start}, {self.end})")
        if self.error_class is ErrorClass.NO_ERROR:
            raise ValueError("spans cannot carry the NoError class")
        if self.verifiability is not None and self.error_class not in VERIFIABLE_CLASSES:
            raise ValueError(
                f"verifiability is not defined for {self.error_class.value}"
            )


@dataclass(frozen=True)
class GoldAnnotation:
    """Adjudicated labels for one sentence, with optional spans and explanation."""

    labels: frozenset[ErrorClass]
    spans: tuple[LabeledSpan, ...] = ()
    explanation: Optional[str] = None

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", validate_label_set(self.labels))
        span_classes = {s.error_class for s in self.spans}
        if not span_classes <= self.labels:
            extra = ", ".join(sorted(c.value for c in span_classes - self.labels))
            raise ValueError(f"span classes not covered by labels: {extra}")
        if ErrorClass.NO_ERROR in self.labels and self.spans:
            raise ValueError("a NoError annotation cannot carry spans")

    def check_within(self, text: str) -> None:
        """Validate that every span lies inside the given sentence text."""
        for span in self.spans:
            if span.end > len(text):
                raise ValueError(
                    f"span [{span.start}, {span.end}) exceeds sentence length {len(text)}"
                )


@dataclass(frozen=True)
class PredictionSet:
    """A detector's multi-label output for one sentence."""

    labels: frozenset[ErrorClass]
    diagnostics: Optional[Mapping[str, Any]] = field(default=None, compare=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "labels", validate_label_set(self.labels))

    @property
    def is_clean(self) -> bool:
        return self.labels == frozenset({ErrorClass.NO_ERROR})


def prediction_from_classes(
    classes: Iterable[ErrorClass],
    diagnostics: Optional[Mapping[str, Any]] = None,
) -> PredictionSet:
    """Build a PredictionSet, substituting {NoError} for an empty class set."""
    labels = frozenset(classes)
    if not labels:
        labels = frozenset({ErrorClass.NO_ERROR})
    return PredictionSet(labels=labels, diagnostics=diagnostics)

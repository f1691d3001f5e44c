"""Span analysis: spans of interest, candidate spans, and role-based error classes.

All linguistic analysis (tokens, POS, entities, noun chunks, semantic roles)
comes through the :class:`AnnotatorProvider` contract so the toolkit never
depends on a particular NLP backend; a deterministic table-driven provider
and a subprocess bridge live in :mod:`facterr.providers`.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

from . import morph
from .core import Dialogue, ErrorClass, SummarySentence

#: A semantic role label: "ARG0".."ARG5", "ARGM-*", "V", or "NONE".
SemanticRole = str

NO_ROLE: SemanticRole = "NONE"

_CORE_ROLES = frozenset({"ARG0", "ARG1", "ARG2", "ARG3", "ARG4", "ARG5"})

#: Pronoun inventory used for the coreference branch of the role mapping.
PRONOUNS = (
    "i", "we", "us", "you", "he", "him", "she", "her",
    "it", "they", "them", "this", "that", "these", "those", "myself",
    "yourself", "himself", "herself", "ourselves", "yourselves",
    "themselves",
)

_PRONOUN_SET = frozenset(PRONOUNS)


def is_core_role(role: SemanticRole) -> bool:
    return role.upper() in _CORE_ROLES


def is_modifier_role(role: SemanticRole) -> bool:
    return "ARGM" in role.upper()


def is_pronoun(text: str) -> bool:
    return text.lower() in _PRONOUN_SET


def map_role_to_class(span_text: str, role: SemanticRole) -> ErrorClass:
    """Route a span to an error class by its semantic role.

    Core arguments split on the pronoun list (coreference vs entity);
    modifier roles are circumstance errors; the verb role is a predicate
    error; anything else lands in Others. Total over all inputs.
    """
    if is_core_role(role):
        return ErrorClass.COREFERENCE if is_pronoun(span_text) else ErrorClass.ENTITY
    if is_modifier_role(role):
        return ErrorClass.CIRCUMSTANCE
    if role.upper() == "V":
        return ErrorClass.PREDICATE
    return ErrorClass.OTHERS


class AnalysisError(Exception):
    """Raised when a provider fails to analyse a piece of text."""


@dataclass(frozen=True)
class Token:
    text: str
    start: int
    end: int


@dataclass(frozen=True)
class Span:
    """A character span of some text, optionally labelled (NE class, role)."""

    text: str
    start: int
    end: int
    label: Optional[str] = None


@dataclass(frozen=True)
class RoleSpan:
    role: SemanticRole
    start: int
    end: int


#: One predicate-argument structure: the V span plus its argument spans.
Frame = tuple[RoleSpan, ...]


@dataclass(frozen=True)
class TextAnalysis:
    """Everything a provider knows about one piece of text."""

    tokens: tuple[Token, ...]
    pos: tuple[str, ...]
    entities: tuple[Span, ...]
    noun_chunks: tuple[Span, ...]
    frames: tuple[Frame, ...]

    def __post_init__(self) -> None:
        if len(self.tokens) != len(self.pos):
            raise ValueError("tokens and pos tags must be parallel")

    def verb_tokens(self) -> tuple[Token, ...]:
        return tuple(t for t, p in zip(self.tokens, self.pos) if p == "VERB")


class AnnotatorProvider(ABC):
    """Contract for linguistic analysis backends.

    Implementations must be deterministic for a fixed input and return
    offsets that lie within the input text. ``concurrency_safe`` declares
    whether the instance may be called from concurrent tasks; callers
    serialize around providers that say no.
    """

    concurrency_safe: bool = True

    @abstractmethod
    def analyze(self, text: str) -> TextAnalysis:
        """Return tokens, POS tags, entities, noun chunks and SRL frames."""

    def tokenize(self, text: str) -> tuple[Token, ...]:
        return self.analyze(text).tokens

    def pos_tags(self, text: str) -> tuple[str, ...]:
        return self.analyze(text).pos

    def named_entities(self, text: str) -> tuple[Span, ...]:
        return self.analyze(text).entities

    def noun_chunks(self, text: str) -> tuple[Span, ...]:
        return self.analyze(text).noun_chunks

    def srl(self, text: str) -> tuple[Frame, ...]:
        return self.analyze(text).frames


class SpanKind(Enum):
    NAMED_ENTITY = "NamedEntity"
    NOUN_PHRASE = "NounPhrase"
    VERB = "Verb"


# Exact-span duplicates keep the highest-priority kind.
_KIND_PRIORITY = {SpanKind.NAMED_ENTITY: 0, SpanKind.VERB: 1, SpanKind.NOUN_PHRASE: 2}


@dataclass(frozen=True)
class SpanOfInterest:
    """A snippet of a summary sentence checked for factual error."""

    text: str
    start: int
    end: int
    kind: SpanKind
    ne_class: Optional[str] = None
    role: SemanticRole = NO_ROLE

    def __post_init__(self) -> None:
        if self.kind is SpanKind.NAMED_ENTITY and not self.ne_class:
            raise ValueError("named-entity span of interest requires ne_class")


class CandidateSource(Enum):
    SAME_DIALOGUE = "SameDialogue"
    SPEAKER_NAME = "SpeakerName"


@dataclass(frozen=True)
class CandidateSpan:
    """A dialogue-derived replacement of the same category as a span of interest."""

    text: str
    source: CandidateSource
    kind: SpanKind


def _analyze(provider: AnnotatorProvider, text: str, what: str) -> TextAnalysis:
    try:
        return provider.analyze(text)
    except AnalysisError:
        raise
    except Exception as exc:
        raise AnalysisError(f"provider failed on {what}: {exc}") from exc


def role_of_span(frames: Sequence[Frame], start: int, end: int) -> SemanticRole:
    """Role of the shortest SRL span containing [start, end).

    Ties on length go to the earliest frame (then earliest span within it);
    a span covered by no frame gets the NONE role.
    """
    best_role = NO_ROLE
    best_len: Optional[int] = None
    for frame in frames:
        for role_span in frame:
            if role_span.start <= start and end <= role_span.end:
                length = role_span.end - role_span.start
                if best_len is None or length < best_len:
                    best_len = length
                    best_role = role_span.role
    return best_role


def identify_sois(
    sentence: SummarySentence, provider: AnnotatorProvider
) -> list[SpanOfInterest]:
    """Extract the spans of interest of a sentence.

    Named entities, noun chunks, and verb tokens all become spans of
    interest. Overlapping spans are kept; only exact-offset duplicates are
    collapsed (named entity beats verb beats noun phrase). Each span carries
    the role of the shortest SRL span containing it.
    """
    text = sentence.text
    if not text.strip():
        return []
    analysis = _analyze(provider, text, f"sentence {sentence.key}")

    raw: list[tuple[int, int, str, SpanKind, Optional[str]]] = []
    for span in analysis.entities:
        raw.append((span.start, span.end, span.text, SpanKind.NAMED_ENTITY, span.label))
    for token in analysis.verb_tokens():
        raw.append((token.start, token.end, token.text, SpanKind.VERB, None))
    for span in analysis.noun_chunks:
        raw.append((span.start, span.end, span.text, SpanKind.NOUN_PHRASE, None))

    by_offsets: dict[tuple[int, int], tuple[int, int, str, SpanKind, Optional[str]]] = {}
    for item in raw:
        key = (item[0], item[1])
        kept = by_offsets.get(key)
        if kept is None or _KIND_PRIORITY[item[3]] < _KIND_PRIORITY[kept[3]]:
            by_offsets[key] = item

    sois = []
    for start, end, span_text, kind, ne_class in sorted(
        by_offsets.values(), key=lambda it: (it[0], it[1], _KIND_PRIORITY[it[3]])
    ):
        if end > len(text):
            raise AnalysisError(
                f"provider span [{start}, {end}) exceeds sentence length {len(text)}"
            )
        role = role_of_span(analysis.frames, start, end)
        sois.append(
            SpanOfInterest(
                text=span_text, start=start, end=end, kind=kind,
                ne_class=ne_class, role=role,
            )
        )
    return sois


def generate_candidates(
    soi: SpanOfInterest,
    dialogue: Dialogue,
    provider: AnnotatorProvider,
    include_query: bool = False,
) -> list[CandidateSpan]:
    """Collect same-category replacement spans for a span of interest.

    Named entities pull dialogue entities of the same NE class (speaker
    names are added first for the PERSON class); verbs pull every dialogue
    verb re-inflected to the span's form; noun phrases pull every dialogue
    noun chunk. Output is deduplicated, never contains the span's own text,
    and an empty list is a valid result.
    """
    analyses = [
        _analyze(provider, text, f"dialogue {dialogue.id}")
        for text in dialogue.texts(include_query=include_query)
    ]

    ordered: list[tuple[str, CandidateSource]] = []
    if soi.kind is SpanKind.NAMED_ENTITY:
        if soi.ne_class == "PERSON":
            ordered.extend((name, CandidateSource.SPEAKER_NAME) for name in dialogue.speakers())
        for analysis in analyses:
            for span in analysis.entities:
                if span.label == soi.ne_class:
                    ordered.append((span.text, CandidateSource.SAME_DIALOGUE))
    elif soi.kind is SpanKind.VERB:
        for analysis in analyses:
            for token in analysis.verb_tokens():
                lemma = morph.lemmatize_verb(token.text)
                inflected = morph.match_verb_form(soi.text, lemma)
                ordered.append((inflected, CandidateSource.SAME_DIALOGUE))
    else:
        for analysis in analyses:
            for span in analysis.noun_chunks:
                ordered.append((span.text, CandidateSource.SAME_DIALOGUE))

    seen: set[str] = set()
    candidates = []
    for text, source in ordered:
        if text == soi.text or text in seen:
            continue
        seen.add(text)
        candidates.append(CandidateSpan(text=text, source=source, kind=soi.kind))
    return candidates

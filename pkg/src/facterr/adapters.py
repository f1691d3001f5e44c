"""Adapters that turn external detector outputs into prediction sets.

Two upstream artifact kinds are consumed from files rather than computed:
dependency-arc entailment judgments (DAE-style checkers) and QA-based
span answers with similarity scores (QAFactEval-style checkers). The
mapping rules here, plus a uniform :class:`Detector` contract, make those
outputs comparable with the toolkit's own ranking detector.
"""
from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

from .core import Dialogue, ErrorClass, PredictionSet, SummarySentence, prediction_from_classes
from .dataset import Corpus
from .lingo import SemanticRole, map_role_to_class
from .metrics import evaluate

#: Sentence identity inside judgment/answer/prediction files.
SentenceKey = tuple[str, str, int]


class AdapterError(Exception):
    """Malformed or incomplete upstream detector artifacts."""


#: Dependency arc type -> error class. Unlisted arc types map to Others.
ARC_TYPE_TO_CLASS: dict[str, ErrorClass] = {
    "nsubj": ErrorClass.ENTITY,
    "obj": ErrorClass.ENTITY,
    "obl:agent": ErrorClass.ENTITY,
    "iobj": ErrorClass.ENTITY,
    "dobj": ErrorClass.ENTITY,
    "nmod": ErrorClass.ENTITY,
    "vocative": ErrorClass.ENTITY,
    "appos": ErrorClass.ENTITY,
    "nummod": ErrorClass.ENTITY,
    "compound": ErrorClass.ENTITY,
    "amod": ErrorClass.ENTITY,
    "det": ErrorClass.ENTITY,
    "clf": ErrorClass.ENTITY,
    "flat": ErrorClass.ENTITY,
    "obl:tmod": ErrorClass.CIRCUMSTANCE,
    "advmod": ErrorClass.CIRCUMSTANCE,
    "aux": ErrorClass.PREDICATE,
}

#: Similarity thresholds explored when tuning the QA adapter.
QA_THRESHOLD_GRID = (0.5, 1.0, 1.5, 2.0)


@dataclass(frozen=True)
class ArcJudgment:
    """Entailment judgment for one dependency arc of a sentence.

    ``erroneous`` means the positive (entailed) probability fell below 0.5;
    when a probability is given the flag is derived from it, and a
    contradictory explicit flag is rejected.
    """

    arc_type: str
    erroneous: bool
    probability: Optional[float] = None
    head: str = ""
    dependent: str = ""

    def __post_init__(self) -> None:
        if self.probability is not None:
            if not 0.0 <= self.probability <= 1.0:
                raise ValueError(f"arc probability {self.probability} outside [0, 1]")
            if self.erroneous != (self.probability < 0.5):
                raise ValueError(
                    "erroneous flag contradicts probability "
                    f"{self.probability} (erroneous iff < 0.5)"
                )


def arc_judgment(
    arc_type: str,
    probability: Optional[float] = None,
    erroneous: Optional[bool] = None,
    head: str = "",
    dependent: str = "",
) -> ArcJudgment:
    """Build an :class:`ArcJudgment`, deriving the flag from the probability."""
    if probability is not None:
        derived = probability < 0.5
        if erroneous is not None and erroneous != derived:
            raise ValueError("erroneous flag contradicts probability")
        erroneous = derived
    if erroneous is None:
        raise ValueError("arc judgment needs a probability or an erroneous flag")
    return ArcJudgment(
        arc_type=arc_type, erroneous=erroneous, probability=probability,
        head=head, dependent=dependent,
    )


@dataclass(frozen=True)
class SpanAnswer:
    """A question-worthy span with the similarity of its predicted answer."""

    span_text: str
    role: SemanticRole
    similarity: float


def dae_to_classes(judgments: Sequence[ArcJudgment]) -> PredictionSet:
    """Union of the classes mapped from erroneous arcs; clean if none.

    Arc types outside the mapping table land in Others, per the catch-all
    row. Note the table reaches neither CorefE nor LinkE.
    """
    classes = {
        ARC_TYPE_TO_CLASS.get(j.arc_type, ErrorClass.OTHERS)
        for j in judgments
        if j.erroneous
    }
    return prediction_from_classes(classes)


def qafe_to_classes(answers: Sequence[SpanAnswer], threshold_qa: float) -> PredictionSet:
    """Classes for spans whose answer similarity fell below the threshold."""
    classes = {
        map_role_to_class(a.span_text, a.role)
        for a in answers
        if a.similarity < threshold_qa
    }
    return prediction_from_classes(classes)


class Detector(ABC):
    """Uniform contract for anything that labels one sentence.

    ``prepare`` receives the non-test portion of the corpus before each
    evaluation fold so detectors can tune hyper-parameters or fit
    combiners; stateless detectors ignore it. ``predict`` must be total
    over valid inputs and deterministic given fixed upstream artifacts.
    """

    name: str = "detector"

    def prepare(self, corpus: Corpus, train_indices: Sequence[int], seed: int) -> None:
        return None

    @abstractmethod
    def predict(self, dialogue: Dialogue, sentence: SummarySentence) -> PredictionSet:
        ...


def _load_keyed_records(path: str | Path, payload_key: str) -> dict[SentenceKey, Any]:
    from .fileio import read_jsonl

    table: dict[SentenceKey, Any] = {}
    for line_no, record in read_jsonl(path):
        try:
            key = (record["dialogue_id"], record["model_id"], record["sentence_index"])
            payload = record[payload_key]
        except (KeyError, TypeError) as exc:
            raise AdapterError(f"{path}: line {line_no}: missing field {exc}") from exc
        if key in table:
            raise AdapterError(f"{path}: line {line_no}: duplicate sentence key {key}")
        table[key] = payload
    return table


def load_arc_judgments(path: str | Path) -> dict[SentenceKey, list[ArcJudgment]]:
    """Read per-sentence arc judgment records.

    Record shape: ``{"dialogue_id", "model_id", "sentence_index",
    "arcs": [{"type", "probability"? , "erroneous"?, "head"?, "dependent"?}]}``.
    """
    table = {}
    for key, arcs in _load_keyed_records(path, "arcs").items():
        try:
            table[key] = [
                arc_judgment(
                    arc_type=a["type"],
                    probability=a.get("probability"),
                    erroneous=a.get("erroneous"),
                    head=a.get("head", ""),
                    dependent=a.get("dependent", ""),
                )
                for a in arcs
            ]
        except (KeyError, ValueError) as exc:
            raise AdapterError(f"{path}: sentence {key}: {exc}") from exc
    return table


def load_span_answers(path: str | Path) -> dict[SentenceKey, list[SpanAnswer]]:
    """Read per-sentence QA span records.

    Record shape: ``{"dialogue_id", "model_id", "sentence_index",
    "spans": [{"text", "role", "similarity"}]}``.
    """
    table = {}
    for key, spans in _load_keyed_records(path, "spans").items():
        try:
            table[key] = [
                SpanAnswer(span_text=s["text"], role=s["role"], similarity=float(s["similarity"]))
                for s in spans
            ]
        except (KeyError, TypeError, ValueError) as exc:
            raise AdapterError(f"{path}: sentence {key}: {exc}") from exc
    return table


def load_label_predictions(path: str | Path) -> dict[SentenceKey, frozenset[ErrorClass]]:
    """Read per-sentence label predictions (the ``detect`` output format)."""
    from .core import error_class_from_string

    table = {}
    for key, labels in _load_keyed_records(path, "labels").items():
        try:
            table[key] = frozenset(error_class_from_string(s) for s in labels)
        except ValueError as exc:
            raise AdapterError(f"{path}: sentence {key}: {exc}") from exc
    return table


def _lookup(table: Mapping[SentenceKey, Any], sentence: SummarySentence, what: str) -> Any:
    try:
        return table[sentence.key]
    except KeyError:
        raise AdapterError(f"no {what} for sentence {sentence.key}") from None


class ArcFileDetector(Detector):
    """Detector backed by a file of dependency-arc entailment judgments."""

    def __init__(self, table: Mapping[SentenceKey, Sequence[ArcJudgment]], name: str = "dae"):
        self.table = dict(table)
        self.name = name

    @classmethod
    def from_file(cls, path: str | Path, name: str = "dae") -> "ArcFileDetector":
        return cls(load_arc_judgments(path), name=name)

    def predict(self, dialogue: Dialogue, sentence: SummarySentence) -> PredictionSet:
        return dae_to_classes(_lookup(self.table, sentence, "arc judgments"))


class QaFileDetector(Detector):
    """Detector backed by a file of QA span similarities.

    Without a fixed threshold, ``prepare`` picks the smallest grid value
    attaining the best macro-F1 on the training portion.
    """

    def __init__(
        self,
        table: Mapping[SentenceKey, Sequence[SpanAnswer]],
        threshold: Optional[float] = None,
        grid: Sequence[float] = QA_THRESHOLD_GRID,
        merge_linke: bool = True,
        name: str = "qafe",
    ):
        self.table = dict(table)
        self.fixed_threshold = threshold
        self.threshold = threshold
        self.grid = tuple(grid)
        self.merge_linke = merge_linke
        self.name = name

    @classmethod
    def from_file(cls, path: str | Path, **kwargs: Any) -> "QaFileDetector":
        return cls(load_span_answers(path), **kwargs)

    def prepare(self, corpus: Corpus, train_indices: Sequence[int], seed: int) -> None:
        if self.fixed_threshold is not None:
            return
        if not self.grid:
            raise ValueError("threshold grid is empty")
        examples = [corpus.examples[i] for i in train_indices]
        golds = [ex.gold.labels for ex in examples if ex.gold is not None]
        if len(golds) != len(examples):
            raise ValueError("threshold tuning requires gold annotations")
        answers = [_lookup(self.table, ex.sentence, "span answers") for ex in examples]
        best_threshold: Optional[float] = None
        best_score = float("-inf")
        for threshold in sorted(self.grid):
            preds = [qafe_to_classes(a, threshold) for a in answers]
            score = evaluate(preds, golds, self.merge_linke).macro_f1
            if score > best_score:
                best_score = score
                best_threshold = threshold
        self.threshold = best_threshold

    def predict(self, dialogue: Dialogue, sentence: SummarySentence) -> PredictionSet:
        if self.threshold is None:
            raise AdapterError("QA detector used before a threshold was set or tuned")
        return qafe_to_classes(_lookup(self.table, sentence, "span answers"), self.threshold)


class PredictionFileDetector(Detector):
    """Detector replaying per-sentence label predictions from a file.

    Covers any externally computed classifier (e.g. a weakly supervised
    model trained on corruption output) whose predictions are exported in
    the ``detect`` record format.
    """

    def __init__(self, table: Mapping[SentenceKey, frozenset[ErrorClass]], name: str = "labels"):
        self.table = dict(table)
        self.name = name

    @classmethod
    def from_file(cls, path: str | Path, name: str = "labels") -> "PredictionFileDetector":
        return cls(load_label_predictions(path), name=name)

    def predict(self, dialogue: Dialogue, sentence: SummarySentence) -> PredictionSet:
        return PredictionSet(labels=_lookup(self.table, sentence, "label predictions"))

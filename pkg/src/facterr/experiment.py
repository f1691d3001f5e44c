"""Cross-validation orchestration over the uniform detector contract.

One fold assignment is shared by every detector in a run: fold f serves as
the test set while the remaining folds are handed to ``prepare`` for
tuning or fitting. Ensemble detectors wrap base detectors and re-prepare
them per fold, so bases follow their own protocol inside ensembles too.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Mapping, Optional, Sequence

from .adapters import Detector
from .core import Dialogue, ErrorClass, PredictionSet, SummarySentence
from .dataset import Corpus, FoldAssignment, kfold_split, subsplit_seed, train_validation_split
from .ensemble import (
    LogisticEnsemble,
    binary_features,
    freq_vote,
    logistic_fit,
    logistic_predict,
)
from .fileio import derive_seed
from .metrics import (
    AggregateReport,
    EvalReport,
    REPORT_CLASS_ORDER,
    crossval_aggregate,
    evaluate,
    evaluated_classes,
)


class FreqVoteDetector(Detector):
    """Frequency vote over base detectors, each following its own protocol."""

    def __init__(self, bases: Sequence[Detector], name: str = "freq-voting"):
        if len(bases) < 2:
            raise ValueError("frequency voting needs at least two base detectors")
        self.bases = list(bases)
        self.name = name

    def prepare(self, corpus: Corpus, train_indices: Sequence[int], seed: int) -> None:
        for base in self.bases:
            base.prepare(corpus, train_indices, derive_seed(seed, base.name))

    def predict(self, dialogue: Dialogue, sentence: SummarySentence) -> PredictionSet:
        return freq_vote([base.predict(dialogue, sentence) for base in self.bases])


class LogisticEnsembleDetector(Detector):
    """Per-class logistic regression over base-detector binary outputs.

    ``prepare`` sub-splits the training folds 7:3, fits on the 70% portion,
    and leaves the 30% portion as held-out validation data (recorded in
    ``last_validation_indices`` for model selection by callers).
    """

    def __init__(
        self,
        bases: Sequence[Detector],
        merge_linke: bool = True,
        regularization_c: float = 100.0,
        name: str = "logistic",
    ):
        if len(bases) < 2:
            raise ValueError("the logistic ensemble needs at least two base detectors")
        self.bases = list(bases)
        self.merge_linke = merge_linke
        self.regularization_c = regularization_c
        self.name = name
        self.model: Optional[LogisticEnsemble] = None
        self.last_validation_indices: list[int] = []

    def _classes(self) -> tuple[ErrorClass, ...]:
        return tuple(
            c for c in evaluated_classes(self.merge_linke) if c is not ErrorClass.NO_ERROR
        )

    def _features(self, dialogue: Dialogue, sentence: SummarySentence):
        predictions = {base.name: base.predict(dialogue, sentence) for base in self.bases}
        return binary_features(predictions, [b.name for b in self.bases], self._classes())

    def prepare(self, corpus: Corpus, train_indices: Sequence[int], seed: int) -> None:
        for base in self.bases:
            base.prepare(corpus, train_indices, derive_seed(seed, base.name))
        fit_indices, val_indices = train_validation_split(
            train_indices, seed=derive_seed(seed, "train-val"), train_ratio=0.7
        )
        self.last_validation_indices = val_indices
        train = []
        for index in fit_indices:
            example = corpus.examples[index]
            if example.gold is None:
                raise ValueError(f"example {index} has no gold annotation")
            train.append(
                (self._features(example.dialogue, example.sentence), example.gold.labels)
            )
        self.model = logistic_fit(
            train,
            seed=derive_seed(seed, "logistic-fit"),
            detector_order=[b.name for b in self.bases],
            classes=self._classes(),
            regularization_c=self.regularization_c,
        )

    def predict(self, dialogue: Dialogue, sentence: SummarySentence) -> PredictionSet:
        if self.model is None:
            raise ValueError("logistic ensemble used before fitting")
        return logistic_predict(self.model, self._features(dialogue, sentence))


@dataclass
class DetectorResult:
    """Per-fold reports, their aggregate, and the pooled predictions."""

    name: str
    fold_reports: list[EvalReport]
    aggregate: AggregateReport
    predictions: dict[int, PredictionSet]

    def to_record(self) -> dict[str, Any]:
        return {
            "name": self.name,
            "folds": [r.to_record() for r in self.fold_reports],
            "aggregate": self.aggregate.to_record(),
        }


@dataclass
class CrossvalResult:
    folds: FoldAssignment
    merge_linke: bool
    detectors: dict[str, DetectorResult]

    def to_record(self) -> dict[str, Any]:
        return {
            "k": self.folds.k,
            "seed": self.folds.seed,
            "merge_linke": self.merge_linke,
            "detectors": {name: res.to_record() for name, res in self.detectors.items()},
        }


def run_crossval(
    corpus: Corpus,
    detectors: Sequence[Detector],
    k: int,
    seed: int,
    merge_linke: bool = True,
    folds: Optional[FoldAssignment] = None,
) -> CrossvalResult:
    """Evaluate every detector over one shared k-fold assignment.

    Detector names must be unique. Results aggregate per-fold reports with
    mean and population standard deviation.
    """
    names = [d.name for d in detectors]
    if len(set(names)) != len(names):
        raise ValueError(f"duplicate detector names: {names}")
    golds = corpus.gold_labels()
    if folds is None:
        folds = kfold_split(corpus, k=k, seed=seed)

    results: dict[str, DetectorResult] = {}
    for detector in detectors:
        fold_reports = []
        predictions: dict[int, PredictionSet] = {}
        for fold in range(folds.k):
            test_indices = folds.fold_indices(fold)
            train_indices = folds.complement_indices(fold)
            detector.prepare(
                corpus, train_indices, seed=derive_seed(seed, detector.name, fold)
            )
            fold_predictions = []
            for index in test_indices:
                example = corpus.examples[index]
                prediction = detector.predict(example.dialogue, example.sentence)
                predictions[index] = prediction
                fold_predictions.append(prediction)
            fold_reports.append(
                evaluate(fold_predictions, [golds[i] for i in test_indices], merge_linke)
            )
        results[detector.name] = DetectorResult(
            name=detector.name,
            fold_reports=fold_reports,
            aggregate=crossval_aggregate(fold_reports),
            predictions=predictions,
        )
    return CrossvalResult(folds=folds, merge_linke=merge_linke, detectors=results)


def predictions_to_records(
    corpus: Corpus, predictions: Mapping[int, PredictionSet], include_diagnostics: bool = False
) -> list[dict[str, Any]]:
    """Per-sentence prediction records in corpus example order."""
    records = []
    for index in sorted(predictions):
        sentence = corpus.examples[index].sentence
        record: dict[str, Any] = {
            "dialogue_id": sentence.dialogue_id,
            "model_id": sentence.model_id,
            "sentence_index": sentence.sentence_index,
            "labels": sorted(c.value for c in predictions[index].labels),
        }
        diagnostics = predictions[index].diagnostics
        if include_diagnostics and diagnostics is not None:
            record["diagnostics"] = diagnostics
        records.append(record)
    return records

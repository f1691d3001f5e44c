"""Multi-label evaluation: per-class/micro/macro F1, fold aggregation, Cohen's Kappa."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import AbstractSet, Any, Hashable, Mapping, Sequence, Union

from .core import ErrorClass, PredictionSet, normalize_labels

#: Report column order (clean class first, merged Others last).
REPORT_CLASS_ORDER = (
    ErrorClass.NO_ERROR,
    ErrorClass.ENTITY,
    ErrorClass.CIRCUMSTANCE,
    ErrorClass.PREDICATE,
    ErrorClass.COREFERENCE,
    ErrorClass.LINK,
    ErrorClass.OTHERS,
)


def evaluated_classes(merge_linke: bool) -> tuple[ErrorClass, ...]:
    if merge_linke:
        return tuple(c for c in REPORT_CLASS_ORDER if c is not ErrorClass.LINK)
    return REPORT_CLASS_ORDER


LabelSet = Union[PredictionSet, AbstractSet[ErrorClass]]


def _as_labels(item: LabelSet) -> frozenset[ErrorClass]:
    if isinstance(item, PredictionSet):
        return item.labels
    return frozenset(item)


@dataclass(frozen=True)
class EvalReport:
    """Per-class F1 plus micro/macro aggregates for one evaluation run."""

    per_class_f1: Mapping[ErrorClass, float]
    micro_f1: float
    macro_f1: float
    support: Mapping[ErrorClass, float]
    classes: tuple[ErrorClass, ...]

    def to_record(self) -> dict[str, Any]:
        return {
            "classes": [c.value for c in self.classes],
            "per_class_f1": {c.value: self.per_class_f1[c] for c in self.classes},
            "micro_f1": self.micro_f1,
            "macro_f1": self.macro_f1,
            "support": {c.value: self.support[c] for c in self.classes},
        }


@dataclass(frozen=True)
class AggregateReport:
    """Elementwise mean and population standard deviation across folds."""

    mean: EvalReport
    std: EvalReport
    k: int

    def to_record(self) -> dict[str, Any]:
        return {"k": self.k, "mean": self.mean.to_record(), "std": self.std.to_record()}


def _f1(tp: int, fp: int, fn: int) -> float:
    denominator = 2 * tp + fp + fn
    if denominator == 0:
        return 0.0
    return 2 * tp / denominator


def evaluate(
    predictions: Sequence[LabelSet],
    golds: Sequence[LabelSet],
    merge_linke: bool,
) -> EvalReport:
    """Sentence-level multi-label F1 over the evaluated class set.

    Both sides are normalized first (LinkE folded into Others when merging).
    Per-class F1 uses the 0-when-undefined convention so zero-support
    classes still appear in the report and in the macro average; the micro
    average pools counts over all classes including NoError.
    """
    if len(predictions) != len(golds):
        raise ValueError(
            f"predictions ({len(predictions)}) and golds ({len(golds)}) differ in length"
        )
    classes = evaluated_classes(merge_linke)
    pred_sets = [normalize_labels(_as_labels(p), merge_linke) for p in predictions]
    gold_sets = [normalize_labels(_as_labels(g), merge_linke) for g in golds]

    tp = {c: 0 for c in classes}
    fp = {c: 0 for c in classes}
    fn = {c: 0 for c in classes}
    for pred, gold in zip(pred_sets, gold_sets):
        for cls in classes:
            in_pred = cls in pred
            in_gold = cls in gold
            if in_pred and in_gold:
                tp[cls] += 1
            elif in_pred:
                fp[cls] += 1
            elif in_gold:
                fn[cls] += 1

    per_class = {c: _f1(tp[c], fp[c], fn[c]) for c in classes}
    micro = _f1(sum(tp.values()), sum(fp.values()), sum(fn.values()))
    macro = sum(per_class.values()) / len(classes)
    support = {c: float(sum(1 for g in gold_sets if c in g)) for c in classes}
    return EvalReport(
        per_class_f1=per_class, micro_f1=micro, macro_f1=macro,
        support=support, classes=classes,
    )


def _mean(values: Sequence[float]) -> float:
    return sum(values) / len(values)


def _population_std(values: Sequence[float]) -> float:
    mu = _mean(values)
    return math.sqrt(sum((v - mu) ** 2 for v in values) / len(values))


def crossval_aggregate(fold_reports: Sequence[EvalReport]) -> AggregateReport:
    """Mean and population std of every report field across folds."""
    if not fold_reports:
        raise ValueError("no fold reports to aggregate")
    classes = fold_reports[0].classes
    if any(r.classes != classes for r in fold_reports):
        raise ValueError("fold reports disagree on the evaluated class set")

    def collect(fetch) -> list[float]:
        return [fetch(r) for r in fold_reports]

    mean = EvalReport(
        per_class_f1={c: _mean(collect(lambda r: r.per_class_f1[c])) for c in classes},
        micro_f1=_mean(collect(lambda r: r.micro_f1)),
        macro_f1=_mean(collect(lambda r: r.macro_f1)),
        support={c: _mean(collect(lambda r: r.support[c])) for c in classes},
        classes=classes,
    )
    std = EvalReport(
        per_class_f1={c: _population_std(collect(lambda r: r.per_class_f1[c])) for c in classes},
        micro_f1=_population_std(collect(lambda r: r.micro_f1)),
        macro_f1=_population_std(collect(lambda r: r.macro_f1)),
        support={c: _population_std(collect(lambda r: r.support[c])) for c in classes},
        classes=classes,
    )
    return AggregateReport(mean=mean, std=std, k=len(fold_reports))


def cohens_kappa(labels_a: Sequence[Hashable], labels_b: Sequence[Hashable]) -> float:
    """Chance-corrected agreement between two categorical label sequences.

    Chance agreement comes from the product of the two marginal label
    distributions. Degenerate marginals (chance agreement of 1) return 1.0,
    which can only happen under perfect agreement.
    """
    if len(labels_a) != len(labels_b):
        raise ValueError("label sequences differ in length")
    n = len(labels_a)
    if n == 0:
        raise ValueError("label sequences are empty")

    observed = sum(1 for a, b in zip(labels_a, labels_b) if a == b) / n
    categories = set(labels_a) | set(labels_b)
    chance = sum(
        (sum(1 for a in labels_a if a == c) / n) * (sum(1 for b in labels_b if b == c) / n)
        for c in categories
    )
    if chance >= 1.0:
        return 1.0
    return (observed - chance) / (1.0 - chance)

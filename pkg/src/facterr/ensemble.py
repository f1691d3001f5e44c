"""Detector combination: frequency voting and per-class logistic regression."""
from __future__ import annotations

import json
import logging
import random
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import AbstractSet, Any, Mapping, Optional, Sequence

import numpy as np

from .core import ErrorClass, PredictionSet, error_class_from_string, prediction_from_classes
from .fileio import derive_seed
from .metrics import REPORT_CLASS_ORDER

logger = logging.getLogger(__name__)


def freq_vote(predictions: Sequence[PredictionSet]) -> PredictionSet:
    """Keep the class(es) predicted by the most detectors.

    NoError is counted like any class, but is dropped when it ties with
    error classes so the exclusivity rule holds. Permutation-invariant in
    the detector order.
    """
    if len(predictions) < 2:
        raise ValueError("frequency voting needs at least two detectors")
    counts: Counter[ErrorClass] = Counter()
    for prediction in predictions:
        counts.update(prediction.labels)
    top = max(counts.values())
    winners = {cls for cls, n in counts.items() if n == top}
    if ErrorClass.NO_ERROR in winners and len(winners) > 1:
        winners.discard(ErrorClass.NO_ERROR)
    return PredictionSet(labels=frozenset(winners))


@dataclass(frozen=True)
class ClassModel:
    """One binary logistic model: weights over detector indicators plus bias."""

    weights: tuple[float, ...]
    bias: float

    def decision(self, features: Sequence[float]) -> float:
        if len(features) != len(self.weights):
            raise ValueError(
                f"expected {len(self.weights)} features, got {len(features)}"
            )
        return float(np.dot(self.weights, features) + self.bias)


@dataclass
class LogisticEnsemble:
    """Per-class logistic models over base-detector binary outputs."""

    per_class: dict[ErrorClass, ClassModel]
    detector_order: tuple[str, ...]
    classes: tuple[ErrorClass, ...]
    notes: dict[ErrorClass, str] = field(default_factory=dict)

    def save(self, path: str | Path) -> None:
        payload = {
            "detector_order": list(self.detector_order),
            "classes": [c.value for c in self.classes],
            "models": {
                c.value: {"weights": list(m.weights), "bias": m.bias}
                for c, m in self.per_class.items()
            },
            "notes": {c.value: note for c, note in self.notes.items()},
        }
        Path(path).write_text(
            json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=1),
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "LogisticEnsemble":
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
        return cls(
            per_class={
                error_class_from_string(name): ClassModel(
                    weights=tuple(model["weights"]), bias=float(model["bias"])
                )
                for name, model in payload["models"].items()
            },
            detector_order=tuple(payload["detector_order"]),
            classes=tuple(error_class_from_string(c) for c in payload["classes"]),
            notes={
                error_class_from_string(c): note
                for c, note in payload.get("notes", {}).items()
            },
        )


#: Per-detector indicator vectors per class for one example.
FeatureMap = Mapping[ErrorClass, Sequence[float]]


def binary_features(
    predictions_by_detector: Mapping[str, PredictionSet],
    detector_order: Sequence[str],
    classes: Sequence[ErrorClass],
) -> dict[ErrorClass, list[float]]:
    """1.0 per detector that predicted the class, in detector order."""
    return {
        cls: [
            1.0 if cls in predictions_by_detector[name].labels else 0.0
            for name in detector_order
        ]
        for cls in classes
    }


def upsample_balanced(
    features: Sequence[Sequence[float]],
    targets: Sequence[bool],
    rng: random.Random,
) -> tuple[list[Sequence[float]], list[bool]]:
    """Replicate minority examples until both classes have equal counts.

    Whole copies first, then a random remainder sampled without
    replacement, so the set of distinct examples never changes.
    """
    positives = [i for i, t in enumerate(targets) if t]
    negatives = [i for i, t in enumerate(targets) if not t]
    if not positives or not negatives:
        raise ValueError("upsampling requires both classes present")
    minority, majority = sorted((positives, negatives), key=len)
    repeats, remainder = divmod(len(majority), len(minority))
    chosen = list(majority)
    for _ in range(repeats):
        chosen.extend(minority)
    chosen.extend(rng.sample(minority, remainder))
    return [features[i] for i in chosen], [targets[i] for i in chosen]


def _constant_model(n_features: int, positive: bool) -> ClassModel:
    return ClassModel(weights=(0.0,) * n_features, bias=1e9 if positive else -1e9)


def logistic_fit(
    train: Sequence[tuple[FeatureMap, AbstractSet[ErrorClass]]],
    seed: int,
    detector_order: Sequence[str],
    classes: Optional[Sequence[ErrorClass]] = None,
    regularization_c: float = 100.0,
) -> LogisticEnsemble:
    """Fit one binary logistic model per error class on upsampled data.

    ``train`` pairs a per-class feature map (one indicator per base
    detector) with the gold label set. Classes absent from the golds, or
    with constant features, produce constant models and are flagged in the
    ensemble notes. ``regularization_c`` is the inverse L2 strength
    (weak by default). Deterministic under the seed.
    """
    from sklearn.linear_model import LogisticRegression

    if not train:
        raise ValueError("empty training set")
    if classes is None:
        first = train[0][0]
        classes = tuple(c for c in REPORT_CLASS_ORDER if c in first)
    detector_order = tuple(detector_order)

    per_class: dict[ErrorClass, ClassModel] = {}
    notes: dict[ErrorClass, str] = {}
    for cls in classes:
        features = [tuple(float(v) for v in fmap[cls]) for fmap, _ in train]
        targets = [cls in gold for _, gold in train]
        if any(len(f) != len(detector_order) for f in features):
            raise ValueError(f"feature vectors for {cls.value} do not match detector order")

        if all(targets) or not any(targets):
            per_class[cls] = _constant_model(len(detector_order), positive=all(targets))
            notes[cls] = "constant: single-class training data"
            logger.warning("class %s has single-class training data", cls.value)
            continue

        rng = random.Random(derive_seed(seed, "upsample", cls.value))
        balanced_x, balanced_y = upsample_balanced(features, targets, rng)
        x = np.asarray(balanced_x, dtype=float)
        y = np.asarray(balanced_y, dtype=int)
        if np.allclose(x.var(axis=0), 0.0):
            notes[cls] = "constant: no feature variance"
            logger.warning("class %s has no feature variance", cls.value)
        model = LogisticRegression(C=regularization_c, solver="lbfgs", max_iter=1000)
        model.fit(x, y)
        per_class[cls] = ClassModel(
            weights=tuple(float(w) for w in model.coef_[0]),
            bias=float(model.intercept_[0]),
        )

    return LogisticEnsemble(
        per_class=per_class,
        detector_order=detector_order,
        classes=tuple(classes),
        notes=notes,
    )


def logistic_predict(model: LogisticEnsemble, features_per_class: FeatureMap) -> PredictionSet:
    """Union of classes whose model fires (sigmoid >= 0.5); clean if none."""
    positives = {
        cls
        for cls, class_model in model.per_class.items()
        if class_model.decision(features_per_class[cls]) >= 0.0
    }
    return prediction_from_classes(positives)

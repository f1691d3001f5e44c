"""Unsupervised ranking detector over sequence likelihoods.

A summary sentence is scored by the average conditional token
log-likelihood under a pluggable encoder-decoder scorer, once in its
original form and once per variant obtained by splicing a candidate span
over a span of interest. If the original ranks too low among the variants,
the span is reported as erroneous with the class given by its semantic
role; the union over all spans is the sentence prediction.
"""
from __future__ import annotations

import json
import logging
import math
import subprocess
from abc import ABC, abstractmethod
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Mapping, Optional, Sequence

from .adapters import Detector
from .core import (
    Dialogue,
    ErrorClass,
    PredictionSet,
    SummarySentence,
    prediction_from_classes,
)
from .dataset import Corpus
from .lingo import (
    AnnotatorProvider,
    CandidateSpan,
    SpanOfInterest,
    generate_candidates,
    identify_sois,
    map_role_to_class,
)
from .metrics import evaluate

logger = logging.getLogger(__name__)


class ScorerError(Exception):
    """A sequence scorer failed or returned malformed output."""


class SequenceScorer(ABC):
    """Contract for conditional sequence likelihood backends.

    Implementations own their tokenization: variants are built by character
    splicing and re-tokenized here. ``token_logprobs`` returns one value per
    token, each at most zero, deterministically for fixed inputs.
    ``concurrency_safe`` declares whether concurrent calls are allowed.
    """

    concurrency_safe: bool = True

    @abstractmethod
    def tokenize(self, text: str) -> list[str]:
        ...

    @abstractmethod
    def token_logprobs(self, dialogue: Dialogue, tokens: Sequence[str]) -> list[float]:
        """Conditional log-probability of each token given its prefix and the dialogue."""


class MockScorer(SequenceScorer):
    """Table-driven scorer for tests and offline experiments.

    Rows map ``(dialogue id, exact sentence text)`` to either a constant
    per-token probability or a per-token probability list; unlisted
    sentences fall back to ``default_probability``. Whitespace tokenization.
    """

    def __init__(
        self,
        rows: Optional[Mapping[tuple[str, str], float | Sequence[float]]] = None,
        default_probability: float = 0.5,
    ):
        if not 0.0 < default_probability <= 1.0:
            raise ValueError("default_probability must be in (0, 1]")
        self.rows = dict(rows or {})
        self.default_probability = default_probability

    @classmethod
    def from_json(cls, path: str | Path) -> "MockScorer":
        with Path(path).open("r", encoding="utf-8") as handle:
            payload = json.load(handle)
        rows = {
            (row["dialogue_id"], row["text"]): row["probability"]
            for row in payload.get("rows", [])
        }
        return cls(rows=rows, default_probability=payload.get("default_probability", 0.5))

    def to_json(self, path: str | Path) -> None:
        payload = {
            "default_probability": self.default_probability,
            "rows": [
                {"dialogue_id": did, "text": text, "probability": prob}
                for (did, text), prob in sorted(
                    self.rows.items(), key=lambda kv: (kv[0][0], kv[0][1])
                )
            ],
        }
        Path(path).write_text(
            json.dumps(payload, ensure_ascii=False, sort_keys=True, indent=1),
            encoding="utf-8",
        )

    def tokenize(self, text: str) -> list[str]:
        return text.split()

    def token_logprobs(self, dialogue: Dialogue, tokens: Sequence[str]) -> list[float]:
        probability = self.rows.get((dialogue.id, " ".join(tokens)), self.default_probability)
        if isinstance(probability, (int, float)):
            per_token = [float(probability)] * len(tokens)
        else:
            per_token = [float(p) for p in probability]
            if len(per_token) != len(tokens):
                raise ScorerError(
                    f"probability row length {len(per_token)} != token count {len(tokens)}"
                )
        if any(not 0.0 < p <= 1.0 for p in per_token):
            raise ScorerError("token probabilities must be in (0, 1]")
        return [math.log(p) for p in per_token]


class SubprocessScorer(SequenceScorer):
    """Bridge to an out-of-process scorer speaking JSON lines.

    Requests: ``{"tokenize": text}`` -> ``{"tokens": [...]}`` and
    ``{"context": <dialogue record>, "sentence_tokens": [...]}`` ->
    ``{"token_logprobs": [...]}``. A batch form
    ``{"context": ..., "sentences": [text, ...]}`` ->
    ``{"token_logprobs": [[...], ...]}`` lets implementations encode the
    dialogue once and reuse it across that dialogue's sentences.
    """

    concurrency_safe = False

    def __init__(self, argv: Sequence[str]):
        self.argv = list(argv)
        self._proc: Optional[subprocess.Popen] = None

    def _process(self) -> subprocess.Popen:
        if self._proc is None or self._proc.poll() is not None:
            self._proc = subprocess.Popen(
                self.argv,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                text=True,
                encoding="utf-8",
            )
        return self._proc

    def _rpc(self, request: Mapping[str, Any]) -> dict[str, Any]:
        proc = self._process()
        assert proc.stdin is not None and proc.stdout is not None
        proc.stdin.write(json.dumps(request, ensure_ascii=False) + "\n")
        proc.stdin.flush()
        line = proc.stdout.readline()
        if not line:
            raise ScorerError(f"scorer process {self.argv} closed its pipe")
        response = json.loads(line)
        if "error" in response:
            raise ScorerError(str(response["error"]))
        return response

    @staticmethod
    def _context(dialogue: Dialogue) -> dict[str, Any]:
        from .dataset import dialogue_to_record

        return dialogue_to_record(dialogue)["dialogue"]

    def tokenize(self, text: str) -> list[str]:
        return list(self._rpc({"tokenize": text})["tokens"])

    def token_logprobs(self, dialogue: Dialogue, tokens: Sequence[str]) -> list[float]:
        response = self._rpc(
            {"context": self._context(dialogue), "sentence_tokens": list(tokens)}
        )
        return [float(v) for v in response["token_logprobs"]]

    def score_batch(self, dialogue: Dialogue, texts: Sequence[str]) -> list[list[float]]:
        response = self._rpc({"context": self._context(dialogue), "sentences": list(texts)})
        return [[float(v) for v in row] for row in response["token_logprobs"]]

    def close(self) -> None:
        if self._proc is not None and self._proc.poll() is None:
            if self._proc.stdin is not None:
                self._proc.stdin.close()
            self._proc.wait(timeout=5)
        self._proc = None

    def __enter__(self) -> "SubprocessScorer":
        return self

    def __exit__(self, *exc_info: object) -> None:
        self.close()


@dataclass(frozen=True)
class RankResult:
    """Scores and the resulting rank of one span of interest."""

    soi_score: float
    candidate_scores: tuple[tuple[str, float], ...]
    rank: int

    def to_record(self) -> dict[str, Any]:
        return {
            "soi_score": self.soi_score,
            "candidate_scores": [[t, s] for t, s in self.candidate_scores],
            "rank": self.rank,
        }


@dataclass(frozen=True)
class RankerConfig:
    """Detection settings: rank threshold, candidate cap, label merging."""

    threshold_t: int = 3
    max_candidates: Optional[int] = None
    merge_linke: bool = False

    def __post_init__(self) -> None:
        if self.threshold_t < 1:
            raise ValueError("threshold_t must be at least 1")
        if self.max_candidates is not None and self.max_candidates < 1:
            raise ValueError("max_candidates must be positive when set")


def score_sentence(
    scorer: SequenceScorer, dialogue: Dialogue, sentence_tokens: Sequence[str]
) -> float:
    """Average conditional token log-likelihood of a tokenized sentence."""
    if not sentence_tokens:
        raise ValueError("cannot score an empty token list")
    logprobs = scorer.token_logprobs(dialogue, sentence_tokens)
    if len(logprobs) != len(sentence_tokens):
        raise ScorerError(
            f"scorer returned {len(logprobs)} values for {len(sentence_tokens)} tokens"
        )
    return sum(logprobs) / len(logprobs)


def compute_rank(soi_score: float, candidate_scores: Sequence[float]) -> int:
    """Descending-order rank of the original span among the candidates.

    The original wins ties, so its rank is one plus the number of strictly
    better candidates.
    """
    return 1 + sum(1 for s in candidate_scores if s > soi_score)


def rank_soi(
    scorer: SequenceScorer,
    dialogue: Dialogue,
    sentence: SummarySentence,
    soi: SpanOfInterest,
    candidates: Sequence[CandidateSpan],
) -> RankResult:
    """Score the sentence and one variant per candidate, then rank the original.

    Variants are plain character splices over the span's offsets,
    re-tokenized by the scorer.
    """
    text = sentence.text
    if soi.end > len(text) or text[soi.start:soi.end] != soi.text:
        raise ValueError(
            f"span {soi.text!r} does not match sentence {sentence.key} at "
            f"[{soi.start}, {soi.end})"
        )
    soi_score = score_sentence(scorer, dialogue, scorer.tokenize(text))
    scored = []
    for candidate in candidates:
        variant = text[: soi.start] + candidate.text + text[soi.end:]
        scored.append(
            (candidate.text, score_sentence(scorer, dialogue, scorer.tokenize(variant)))
        )
    rank = compute_rank(soi_score, [s for _, s in scored])
    return RankResult(soi_score=soi_score, candidate_scores=tuple(scored), rank=rank)


def detect(
    scorer: SequenceScorer,
    dialogue: Dialogue,
    sentence: SummarySentence,
    sois: Sequence[SpanOfInterest],
    candidates_by_soi: Mapping[SpanOfInterest, Sequence[CandidateSpan]],
    config: RankerConfig,
) -> PredictionSet:
    """Rank every span of interest and union the classes of low-ranked ones.

    A span is flagged when its rank strictly exceeds the threshold. A
    sentence with no spans, or none flagged, comes back clean. Scorer
    failures abort only the affected span; the failure is kept in the
    diagnostics.
    """
    if not sois:
        return PredictionSet(
            labels=frozenset({ErrorClass.NO_ERROR}), diagnostics={"no_soi": True}
        )

    diagnostics: dict[str, Any] = {}
    classes: set[ErrorClass] = set()
    for soi in sois:
        key = f"{soi.text}@{soi.start}"
        candidates = list(candidates_by_soi.get(soi, ()))
        if config.max_candidates is not None:
            candidates = candidates[: config.max_candidates]
        try:
            result = rank_soi(scorer, dialogue, sentence, soi, candidates)
        except (ScorerError, ValueError) as exc:
            logger.warning("skipping span %r of %s: %s", soi.text, sentence.key, exc)
            diagnostics[key] = {"error": str(exc), "role": soi.role}
            continue
        flagged = result.rank > config.threshold_t
        entry = result.to_record()
        entry["role"] = soi.role
        entry["flagged"] = flagged
        if flagged:
            error_class = map_role_to_class(soi.text, soi.role)
            classes.add(error_class)
            entry["error_class"] = error_class.value
        diagnostics[key] = entry

    if classes and config.merge_linke:
        classes = {
            ErrorClass.OTHERS if c is ErrorClass.LINK else c for c in classes
        }
    return prediction_from_classes(classes, diagnostics=diagnostics)


def _sentence_rank_pairs(
    scorer: SequenceScorer,
    provider: AnnotatorProvider,
    corpus: Corpus,
    max_candidates: Optional[int],
) -> list[list[tuple[SpanOfInterest, int]]]:
    """Per example: (span, rank) pairs, computed once since ranks don't depend on T."""
    per_example = []
    for ex in corpus.examples:
        pairs = []
        for soi in identify_sois(ex.sentence, provider):
            candidates = generate_candidates(soi, ex.dialogue, provider)
            if max_candidates is not None:
                candidates = candidates[:max_candidates]
            result = rank_soi(scorer, ex.dialogue, ex.sentence, soi, candidates)
            pairs.append((soi, result.rank))
        per_example.append(pairs)
    return per_example


def threshold_curve(
    scorer: SequenceScorer,
    provider: AnnotatorProvider,
    validation: Corpus,
    grid: Sequence[int],
    merge_linke: bool = True,
    max_candidates: Optional[int] = None,
) -> dict[int, float]:
    """Macro-F1 on the validation corpus for every threshold in the grid."""
    if not grid:
        raise ValueError("threshold grid is empty")
    golds = validation.gold_labels()
    per_example = _sentence_rank_pairs(scorer, provider, validation, max_candidates)
    curve: dict[int, float] = {}
    for threshold in sorted(set(grid)):
        predictions = []
        for pairs in per_example:
            classes = {
                map_role_to_class(soi.text, soi.role)
                for soi, rank in pairs
                if rank > threshold
            }
            predictions.append(prediction_from_classes(classes))
        curve[threshold] = evaluate(predictions, golds, merge_linke).macro_f1
    return curve


def tune_threshold(
    scorer: SequenceScorer,
    provider: AnnotatorProvider,
    validation: Corpus,
    grid: Sequence[int],
    merge_linke: bool = True,
    max_candidates: Optional[int] = None,
) -> int:
    """Smallest threshold in the grid attaining the best validation macro-F1."""
    curve = threshold_curve(scorer, provider, validation, grid, merge_linke, max_candidates)
    best_threshold, best_score = None, float("-inf")
    for threshold in sorted(curve):
        if curve[threshold] > best_score:
            best_score = curve[threshold]
            best_threshold = threshold
    assert best_threshold is not None
    return best_threshold


#: Default tuning grid for the rank threshold.
THRESHOLD_GRID = tuple(range(1, 11))


class RankerDetector(Detector):
    """The ranking detector behind the uniform detector contract.

    With a fixed threshold it is ready to use; otherwise ``prepare`` tunes
    the threshold on the training portion before each fold.
    """

    def __init__(
        self,
        scorer: SequenceScorer,
        provider: AnnotatorProvider,
        threshold: Optional[int] = None,
        grid: Sequence[int] = THRESHOLD_GRID,
        merge_linke: bool = False,
        max_candidates: Optional[int] = None,
        name: str = "ranker",
    ):
        self.scorer = scorer
        self.provider = provider
        self.fixed_threshold = threshold
        self.threshold = threshold
        self.grid = tuple(grid)
        self.merge_linke = merge_linke
        self.max_candidates = max_candidates
        self.name = name

    def prepare(self, corpus: Corpus, train_indices: Sequence[int], seed: int) -> None:
        if self.fixed_threshold is not None:
            return
        validation = corpus.subset(train_indices, name="validation")
        self.threshold = tune_threshold(
            self.scorer, self.provider, validation, self.grid,
            merge_linke=True, max_candidates=self.max_candidates,
        )

    def predict(self, dialogue: Dialogue, sentence: SummarySentence) -> PredictionSet:
        if self.threshold is None:
            raise ValueError("ranker used before a threshold was set or tuned")
        sois = identify_sois(sentence, self.provider)
        candidates = {
            soi: generate_candidates(soi, dialogue, self.provider) for soi in sois
        }
        config = RankerConfig(
            threshold_t=self.threshold,
            max_candidates=self.max_candidates,
            merge_linke=self.merge_linke,
        )
        return detect(self.scorer, dialogue, sentence, sois, candidates, config)

"""Corpus loading and validation, deterministic splits, and corpus statistics.

The corpus file format is JSON lines with two record shapes, freely
interleaved:

* dialogue records::

    {"dialogue": {"id": "...", "query": "...?", "utterances": [{"speaker": "...", "text": "..."}]}}

* sentence records::

    {"dialogue_id": "...", "model_id": "...", "sentence_index": 0, "text": "...",
     "gold": {"labels": ["EntE"], "spans": [{"start": 0, "end": 6, "class": "EntE",
     "verifiability": "Intrinsic"}], "explanation": "..."}}

Label strings are exactly NoError/EntE/PredE/CirE/CorefE/LinkE/Others;
verifiability strings are Intrinsic/Extrinsic. Files are UTF-8 and span
offsets are code-point offsets into ``text``. Unknown record keys are
ignored so records may carry extra payloads (e.g. provenance blocks).
"""
from __future__ import annotations

import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Iterable, Mapping, Optional, Sequence

from .core import (
    Dialogue,
    ErrorClass,
    GoldAnnotation,
    LabeledSpan,
    SummarySentence,
    Utterance,
    error_class_from_string,
    verifiability_from_string,
)
from .fileio import derive_seed, read_jsonl, write_jsonl_atomic


class CorpusFormatError(Exception):
    """A corpus file violates the record format or referential integrity."""


@dataclass(frozen=True)
class DialogueExample:
    """One (dialogue, summary sentence) classification unit."""

    dialogue: Dialogue
    sentence: SummarySentence
    gold: Optional[GoldAnnotation] = None


@dataclass
class Corpus:
    """A named collection of examples with their source dialogues.

    Read-only after loading; safe for concurrent readers.
    """

    name: str
    dialogues: dict[str, Dialogue]
    examples: list[DialogueExample]

    def __len__(self) -> int:
        return len(self.examples)

    def subset(self, indices: Sequence[int], name: Optional[str] = None) -> "Corpus":
        """A new corpus over the given example indices (dialogues shared)."""
        examples = [self.examples[i] for i in indices]
        dialogues = {ex.dialogue.id: ex.dialogue for ex in examples}
        return Corpus(name=name or f"{self.name}[{len(examples)}]",
                      dialogues=dialogues, examples=examples)

    def gold_labels(self) -> list[frozenset[ErrorClass]]:
        labels = []
        for i, ex in enumerate(self.examples):
            if ex.gold is None:
                raise ValueError(f"example {i} ({ex.sentence.key}) has no gold annotation")
            labels.append(ex.gold.labels)
        return labels


def _require(record: Mapping[str, Any], key: str, line_no: int) -> Any:
    if key not in record:
        raise CorpusFormatError(f"line {line_no}: missing field {key!r}")
    return record[key]


def _parse_dialogue(payload: Mapping[str, Any], line_no: int) -> Dialogue:
    utterances = []
    raw_utts = _require(payload, "utterances", line_no)
    for idx, utt in enumerate(raw_utts):
        utterances.append(
            Utterance(
                speaker=_require(utt, "speaker", line_no),
                text=_require(utt, "text", line_no),
                index=idx,
            )
        )
    try:
        return Dialogue(
            id=_require(payload, "id", line_no),
            utterances=tuple(utterances),
            query=payload.get("query"),
        )
    except ValueError as exc:
        raise CorpusFormatError(f"line {line_no}: {exc}") from exc


def _parse_gold(payload: Mapping[str, Any], line_no: int) -> GoldAnnotation:
    try:
        labels = frozenset(
            error_class_from_string(s) for s in _require(payload, "labels", line_no)
        )
        spans = tuple(
            LabeledSpan(
                start=_require(s, "start", line_no),
                end=_require(s, "end", line_no),
                error_class=error_class_from_string(_require(s, "class", line_no)),
                verifiability=(
                    verifiability_from_string(s["verifiability"])
                    if s.get("verifiability") is not None
                    else None
                ),
            )
            for s in payload.get("spans", [])
        )
        return GoldAnnotation(labels=labels, spans=spans, explanation=payload.get("explanation"))
    except ValueError as exc:
        raise CorpusFormatError(f"line {line_no}: {exc}") from exc


def load_corpus(path: str | Path, name: Optional[str] = None) -> Corpus:
    """Load and validate a corpus file.

    Raises :class:`CorpusFormatError` with a line number on parse failures,
    dangling dialogue references, duplicate keys, or invalid labels.
    """
    path = Path(path)
    dialogues: dict[str, Dialogue] = {}
    pending: list[tuple[int, Mapping[str, Any]]] = []
    try:
        for line_no, record in read_jsonl(path):
            if not isinstance(record, dict):
                raise CorpusFormatError(f"line {line_no}: record must be an object")
            if "dialogue" in record:
                dialogue = _parse_dialogue(record["dialogue"], line_no)
                if dialogue.id in dialogues:
                    raise CorpusFormatError(
                        f"line {line_no}: duplicate dialogue id {dialogue.id!r}"
                    )
                dialogues[dialogue.id] = dialogue
            elif "dialogue_id" in record:
                pending.append((line_no, record))
            else:
                raise CorpusFormatError(
                    f"line {line_no}: record is neither a dialogue nor a sentence"
                )
    except ValueError as exc:
        raise CorpusFormatError(str(exc)) from exc

    examples: list[DialogueExample] = []
    seen_keys: set[tuple[str, str, int]] = set()
    for line_no, record in pending:
        dialogue_id = record["dialogue_id"]
        dialogue = dialogues.get(dialogue_id)
        if dialogue is None:
            raise CorpusFormatError(
                f"line {line_no}: sentence references unknown dialogue {dialogue_id!r}"
            )
        try:
            sentence = SummarySentence(
                dialogue_id=dialogue_id,
                model_id=_require(record, "model_id", line_no),
                text=_require(record, "text", line_no),
                sentence_index=_require(record, "sentence_index", line_no),
            )
        except ValueError as exc:
            raise CorpusFormatError(f"line {line_no}: {exc}") from exc
        if sentence.key in seen_keys:
            raise CorpusFormatError(
                f"line {line_no}: duplicate sentence key {sentence.key}"
            )
        seen_keys.add(sentence.key)
        gold = None
        if record.get("gold") is not None:
            gold = _parse_gold(record["gold"], line_no)
            try:
                gold.check_within(sentence.text)
            except ValueError as exc:
                raise CorpusFormatError(f"line {line_no}: {exc}") from exc
        examples.append(DialogueExample(dialogue=dialogue, sentence=sentence, gold=gold))

    if not examples:
        raise CorpusFormatError(f"{path}: corpus contains no sentence records")
    return Corpus(name=name or path.stem, dialogues=dialogues, examples=examples)


def gold_to_record(gold: GoldAnnotation) -> dict[str, Any]:
    record: dict[str, Any] = {"labels": sorted(c.value for c in gold.labels)}
    if gold.spans:
        record["spans"] = [
            {
                "start": s.start,
                "end": s.end,
                "class": s.error_class.value,
                **(
                    {"verifiability": s.verifiability.value}
                    if s.verifiability is not None
                    else {}
                ),
            }
            for s in gold.spans
        ]
    if gold.explanation is not None:
        record["explanation"] = gold.explanation
    return record


def dialogue_to_record(dialogue: Dialogue) -> dict[str, Any]:
    payload: dict[str, Any] = {
        "id": dialogue.id,
        "utterances": [{"speaker": u.speaker, "text": u.text} for u in dialogue.utterances],
    }
    if dialogue.query is not None:
        payload["query"] = dialogue.query
    return {"dialogue": payload}


def corpus_records(corpus: Corpus) -> Iterable[dict[str, Any]]:
    """Records in save order: each dialogue before its first sentence."""
    written: set[str] = set()
    for ex in corpus.examples:
        if ex.dialogue.id not in written:
            written.add(ex.dialogue.id)
            yield dialogue_to_record(ex.dialogue)
        record: dict[str, Any] = {
            "dialogue_id": ex.sentence.dialogue_id,
            "model_id": ex.sentence.model_id,
            "sentence_index": ex.sentence.sentence_index,
            "text": ex.sentence.text,
        }
        if ex.gold is not None:
            record["gold"] = gold_to_record(ex.gold)
        yield record


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    write_jsonl_atomic(path, corpus_records(corpus))


def merge_corpora(corpora: Sequence[Corpus], name: str = "merged") -> Corpus:
    """Concatenate corpora; dialogue ids must not collide across inputs."""
    dialogues: dict[str, Dialogue] = {}
    examples: list[DialogueExample] = []
    for corpus in corpora:
        for did, dialogue in corpus.dialogues.items():
            if did in dialogues and dialogues[did] != dialogue:
                raise CorpusFormatError(f"conflicting dialogue id across corpora: {did!r}")
            dialogues[did] = dialogue
        examples.extend(corpus.examples)
    if not examples:
        raise CorpusFormatError("merged corpus contains no examples")
    return Corpus(name=name, dialogues=dialogues, examples=examples)


@dataclass(frozen=True)
class FoldAssignment:
    """A deterministic k-way partition of example indices."""

    k: int
    seed: int
    fold_of: Mapping[int, int]

    def fold_indices(self, fold: int) -> list[int]:
        return sorted(i for i, f in self.fold_of.items() if f == fold)

    def complement_indices(self, fold: int) -> list[int]:
        return sorted(i for i, f in self.fold_of.items() if f != fold)


def kfold_split(corpus: Corpus, k: int, seed: int) -> FoldAssignment:
    """Shuffle example indices with a seeded permutation and deal k folds.

    Folds partition the index set and differ in size by at most one;
    remainder examples go to the lowest-numbered folds. Deterministic for a
    fixed (corpus order, k, seed), so one assignment can be shared across
    all detectors of an experiment.
    """
    n = len(corpus.examples)
    if k < 2:
        raise ValueError("k must be at least 2")
    if k > n:
        raise ValueError(f"k={k} exceeds corpus size {n}")
    indices = list(range(n))
    random.Random(seed).shuffle(indices)
    fold_of: dict[int, int] = {}
    base, remainder = divmod(n, k)
    cursor = 0
    for fold in range(k):
        size = base + (1 if fold < remainder else 0)
        for idx in indices[cursor:cursor + size]:
            fold_of[idx] = fold
        cursor += size
    return FoldAssignment(k=k, seed=seed, fold_of=fold_of)


def train_validation_split(
    indices: Sequence[int], seed: int, train_ratio: float = 0.7
) -> tuple[list[int], list[int]]:
    """Split indices into train/validation with a seeded permutation.

    Used for the 7:3 sub-split of combined training folds when a fold-level
    model needs held-out validation data. Returns sorted index lists.
    """
    if not 0.0 < train_ratio < 1.0:
        raise ValueError("train_ratio must be in (0, 1)")
    shuffled = list(indices)
    random.Random(seed).shuffle(shuffled)
    n_train = int(len(shuffled) * train_ratio)
    return sorted(shuffled[:n_train]), sorted(shuffled[n_train:])


def subsplit_seed(seed: int, fold: int) -> int:
    """Stable sub-seed for per-fold splits derived from the master seed."""
    return derive_seed(seed, "fold-subsplit", fold)


@dataclass(frozen=True)
class StatsReport:
    """Corpus-level counts and averages (whitespace tokenization)."""

    example_count: int
    per_class_counts: Mapping[ErrorClass, int]
    inconsistent_count: int
    avg_tokens_per_dialogue: float
    avg_utterances_per_dialogue: float
    avg_tokens_per_sentence: float
    avg_errors_per_inconsistent_sentence: float

    @property
    def inconsistent_rate(self) -> float:
        return self.inconsistent_count / self.example_count

    def to_record(self) -> dict[str, Any]:
        return {
            "example_count": self.example_count,
            "per_class_counts": {c.value: n for c, n in self.per_class_counts.items()},
            "inconsistent_count": self.inconsistent_count,
            "inconsistent_rate": self.inconsistent_rate,
            "avg_tokens_per_dialogue": self.avg_tokens_per_dialogue,
            "avg_utterances_per_dialogue": self.avg_utterances_per_dialogue,
            "avg_tokens_per_sentence": self.avg_tokens_per_sentence,
            "avg_errors_per_inconsistent_sentence": self.avg_errors_per_inconsistent_sentence,
        }


def corpus_stats(corpus: Corpus) -> StatsReport:
    """Sentence-level label counts and corpus averages.

    Every example must carry a gold annotation. A sentence counts as
    inconsistent when its label set contains at least one error class;
    the per-error average divides total error labels by that count.
    """
    golds = corpus.gold_labels()
    counts = {cls: 0 for cls in ErrorClass}
    for labels in golds:
        for cls in labels:
            counts[cls] += 1
    inconsistent = sum(1 for labels in golds if ErrorClass.NO_ERROR not in labels)
    error_labels = sum(n for cls, n in counts.items() if cls is not ErrorClass.NO_ERROR)

    dialogues = list(corpus.dialogues.values())
    dialogue_tokens = [sum(len(u.text.split()) for u in d.utterances) for d in dialogues]
    sentence_tokens = [len(ex.sentence.text.split()) for ex in corpus.examples]

    return StatsReport(
        example_count=len(corpus.examples),
        per_class_counts=counts,
        inconsistent_count=inconsistent,
        avg_tokens_per_dialogue=sum(dialogue_tokens) / len(dialogues),
        avg_utterances_per_dialogue=sum(len(d.utterances) for d in dialogues) / len(dialogues),
        avg_tokens_per_sentence=sum(sentence_tokens) / len(sentence_tokens),
        avg_errors_per_inconsistent_sentence=(
            error_labels / inconsistent if inconsistent else 0.0
        ),
    )

"""Synthetic negative-example generation by corrupting reference sentences.

Each corruption replaces exactly one span of a sentence with a
same-category alternative: named entities by NE class, verbs (form
matched), modifier spans by semantic role, pronouns from a closed list,
and causal discourse markers flipped to reversed-causality markers.
Alternatives come from the sentence's own dialogue or from the rest of the
corpus, which also determines the intrinsic/extrinsic annotation.
"""
from __future__ import annotations

import dataclasses
import logging
import random
from dataclasses import dataclass
from enum import Enum
from typing import Iterable, Mapping, Optional, Sequence

from . import morph
from .core import (
    Dialogue,
    ErrorClass,
    GoldAnnotation,
    LabeledSpan,
    Verifiability,
    VERIFIABLE_CLASSES,
)
from .dataset import Corpus, DialogueExample, dialogue_to_record
from .fileio import derive_seed, write_jsonl_atomic
from .lingo import (
    AnnotatorProvider,
    PRONOUNS,
    Span,
    is_core_role,
    is_modifier_role,
    is_pronoun,
    role_of_span,
)

logger = logging.getLogger(__name__)

#: Discourse markers flipped for link corruption (bidirectional table).
CAUSAL_MARKERS = ("because", "since", "as", "cos")
CONSEQUENCE_MARKERS = ("so", "therefore", "thus", "hence")

_CAUSAL_SET = frozenset(CAUSAL_MARKERS)
_CONSEQUENCE_SET = frozenset(CONSEQUENCE_MARKERS)

#: Classes the corruptor can produce (NoError comes from uncorrupted sentences).
CORRUPTIBLE_CLASSES = (
    ErrorClass.ENTITY,
    ErrorClass.PREDICATE,
    ErrorClass.CIRCUMSTANCE,
    ErrorClass.COREFERENCE,
    ErrorClass.LINK,
)


class CorruptionError(Exception):
    pass


class NoReplaceableUnit(CorruptionError):
    """The sentence has no unit of the requested category."""


class EmptyPool(CorruptionError):
    """No eligible replacement exists for any unit of the sentence."""


class ReplacementScope(Enum):
    SAME_DIALOGUE = "SameDialogue"
    CORPUS_WIDE = "CorpusWide"


@dataclass(frozen=True)
class CorruptedExample:
    """One corrupted sentence with the provenance of its single edit."""

    original: str
    corrupted: str
    replaced: Span
    replacement: str
    label: ErrorClass
    dialogue_id: str
    verifiability: Optional[Verifiability] = None
    scope: Optional[ReplacementScope] = None
    source_model_id: str = ""
    source_sentence_index: int = 0

    def __post_init__(self) -> None:
        if self.label not in CORRUPTIBLE_CLASSES:
            raise ValueError(f"cannot corrupt towards {self.label.value}")
        expected = (
            self.original[: self.replaced.start]
            + self.replacement
            + self.original[self.replaced.end:]
        )
        if self.corrupted != expected:
            raise ValueError("corrupted text is not a single-span splice of the original")
        if self.corrupted == self.original:
            raise ValueError("corruption left the sentence unchanged")
        if self.label in VERIFIABLE_CLASSES:
            if self.verifiability is None or self.scope is None:
                raise ValueError(f"{self.label.value} corruption requires verifiability and scope")
        elif self.verifiability is not None or self.scope is not None:
            raise ValueError(f"{self.label.value} corruption carries no verifiability or scope")


@dataclass(frozen=True)
class ReplaceableUnit:
    """A span of the sentence that a given error class may replace."""

    span: Span
    role: str
    category: str


def corruption_units(
    text: str, provider: AnnotatorProvider
) -> dict[ErrorClass, list[ReplaceableUnit]]:
    """Replaceable units of a sentence, grouped by the class they would produce.

    Entity units are named entities in core-argument positions; predicate
    units are verbs carrying the V role; circumstance units are modifier
    spans; coreference units are core-argument pronouns. Those four groups
    re-map to their class through the role mapping by construction. Link
    units are occurrences of the causal/consequence markers.
    """
    analysis = provider.analyze(text)
    units: dict[ErrorClass, list[ReplaceableUnit]] = {cls: [] for cls in CORRUPTIBLE_CLASSES}

    for entity in analysis.entities:
        role = role_of_span(analysis.frames, entity.start, entity.end)
        if is_core_role(role) and not is_pronoun(entity.text):
            units[ErrorClass.ENTITY].append(
                ReplaceableUnit(span=entity, role=role, category=entity.label or "")
            )

    for token in analysis.verb_tokens():
        role = role_of_span(analysis.frames, token.start, token.end)
        if role.upper() == "V":
            units[ErrorClass.PREDICATE].append(
                ReplaceableUnit(
                    span=Span(token.text, token.start, token.end), role=role, category="verb"
                )
            )

    seen_modifiers: set[tuple[int, int, str]] = set()
    for frame in analysis.frames:
        for role_span in frame:
            if not is_modifier_role(role_span.role):
                continue
            key = (role_span.start, role_span.end, role_span.role.upper())
            if key in seen_modifiers:
                continue
            seen_modifiers.add(key)
            units[ErrorClass.CIRCUMSTANCE].append(
                ReplaceableUnit(
                    span=Span(
                        text[role_span.start:role_span.end], role_span.start, role_span.end
                    ),
                    role=role_span.role,
                    category=role_span.role.upper(),
                )
            )

    for token in analysis.tokens:
        role = role_of_span(analysis.frames, token.start, token.end)
        if is_pronoun(token.text) and is_core_role(role):
            units[ErrorClass.COREFERENCE].append(
                ReplaceableUnit(
                    span=Span(token.text, token.start, token.end), role=role, category="pronoun"
                )
            )
        lowered = token.text.lower()
        if lowered in _CAUSAL_SET or lowered in _CONSEQUENCE_SET:
            units[ErrorClass.LINK].append(
                ReplaceableUnit(
                    span=Span(token.text, token.start, token.end),
                    role=role,
                    category="causal" if lowered in _CAUSAL_SET else "consequence",
                )
            )
    return units


@dataclass(frozen=True)
class ReplacementPools:
    """Same-category replacement inventories extracted from dialogues."""

    entities: Mapping[str, tuple[str, ...]]
    verb_lemmas: tuple[str, ...]
    modifiers: Mapping[str, tuple[str, ...]]


def build_pools(dialogues: Iterable[Dialogue], provider: AnnotatorProvider) -> ReplacementPools:
    """Extract entity/verb/modifier pools from dialogue utterances.

    Speaker names join the PERSON entity pool. Order follows the dialogues,
    with exact duplicates dropped.
    """
    entities: dict[str, list[str]] = {}
    verb_lemmas: list[str] = []
    modifiers: dict[str, list[str]] = {}

    def add(bucket: list[str], text: str) -> None:
        if text not in bucket:
            bucket.append(text)

    for dialogue in dialogues:
        for name in dialogue.speakers():
            add(entities.setdefault("PERSON", []), name)
        for text in dialogue.texts():
            analysis = provider.analyze(text)
            for entity in analysis.entities:
                if entity.label:
                    add(entities.setdefault(entity.label, []), entity.text)
            for token in analysis.verb_tokens():
                add(verb_lemmas, morph.lemmatize_verb(token.text))
            for frame in analysis.frames:
                for role_span in frame:
                    if is_modifier_role(role_span.role):
                        add(
                            modifiers.setdefault(role_span.role.upper(), []),
                            text[role_span.start:role_span.end],
                        )

    return ReplacementPools(
        entities={k: tuple(v) for k, v in entities.items()},
        verb_lemmas=tuple(verb_lemmas),
        modifiers={k: tuple(v) for k, v in modifiers.items()},
    )


def merge_pools(pools: Sequence[ReplacementPools]) -> ReplacementPools:
    entities: dict[str, list[str]] = {}
    verb_lemmas: list[str] = []
    modifiers: dict[str, list[str]] = {}
    for pool in pools:
        for ne_class, texts in pool.entities.items():
            bucket = entities.setdefault(ne_class, [])
            bucket.extend(t for t in texts if t not in bucket)
        verb_lemmas.extend(v for v in pool.verb_lemmas if v not in verb_lemmas)
        for role, texts in pool.modifiers.items():
            bucket = modifiers.setdefault(role, [])
            bucket.extend(t for t in texts if t not in bucket)
    return ReplacementPools(
        entities={k: tuple(v) for k, v in entities.items()},
        verb_lemmas=tuple(verb_lemmas),
        modifiers={k: tuple(v) for k, v in modifiers.items()},
    )


def _match_case(replacement: str, original: str) -> str:
    if original[:1].isupper():
        return replacement[:1].upper() + replacement[1:]
    return replacement


def _eligible_replacements(
    unit: ReplaceableUnit, target_class: ErrorClass, pools: ReplacementPools
) -> list[str]:
    folded = unit.span.text.casefold()
    if target_class is ErrorClass.ENTITY:
        return [t for t in pools.entities.get(unit.category, ()) if t.casefold() != folded]
    if target_class is ErrorClass.PREDICATE:
        out: list[str] = []
        for lemma in pools.verb_lemmas:
            inflected = morph.match_verb_form(unit.span.text, lemma)
            if inflected.casefold() != folded and inflected not in out:
                out.append(inflected)
        return out
    if target_class is ErrorClass.CIRCUMSTANCE:
        return [t for t in pools.modifiers.get(unit.category, ()) if t.casefold() != folded]
    if target_class is ErrorClass.COREFERENCE:
        return [
            _match_case(p, unit.span.text) for p in PRONOUNS if p != folded
        ]
    if target_class is ErrorClass.LINK:
        other_side = CONSEQUENCE_MARKERS if unit.category == "causal" else CAUSAL_MARKERS
        return [_match_case(m, unit.span.text) for m in other_side]
    raise ValueError(f"cannot corrupt towards {target_class.value}")


def corrupt(
    sentence: str,
    dialogue: Dialogue,
    provider: AnnotatorProvider,
    pools: ReplacementPools,
    target_class: ErrorClass,
    scope: Optional[ReplacementScope],
    rng: random.Random,
) -> CorruptedExample:
    """Replace one randomly chosen unit of the sentence towards the target class.

    ``pools`` must match the requested scope (the dialogue's own pools for
    SameDialogue, pools excluding the dialogue for CorpusWide). Pronoun and
    marker corruption draws from closed inventories, takes no scope, and
    carries no verifiability. Raises :class:`NoReplaceableUnit` or
    :class:`EmptyPool` when the sentence or pools cannot support the class.
    """
    verifiable = target_class in VERIFIABLE_CLASSES
    if verifiable and scope is None:
        raise ValueError(f"{target_class.value} corruption requires a replacement scope")
    if not verifiable:
        scope = None

    units = corruption_units(sentence, provider)[target_class]
    if not units:
        raise NoReplaceableUnit(f"no {target_class.value} unit in {sentence!r}")

    for unit in rng.sample(units, len(units)):
        eligible = _eligible_replacements(unit, target_class, pools)
        if not eligible:
            continue
        replacement = rng.choice(eligible)
        corrupted = sentence[: unit.span.start] + replacement + sentence[unit.span.end:]
        verifiability = None
        if verifiable:
            intrinsic = scope is ReplacementScope.SAME_DIALOGUE or dialogue.contains_text(
                replacement
            )
            verifiability = Verifiability.INTRINSIC if intrinsic else Verifiability.EXTRINSIC
        return CorruptedExample(
            original=sentence,
            corrupted=corrupted,
            replaced=unit.span,
            replacement=replacement,
            label=target_class,
            dialogue_id=dialogue.id,
            verifiability=verifiability,
            scope=scope,
        )
    raise EmptyPool(f"no eligible {target_class.value} replacement for {sentence!r}")


@dataclass
class TrainingSet:
    """Corruption output: negatives per class plus clean positives."""

    negatives: list[CorruptedExample]
    positives: list[DialogueExample]
    achieved: dict[ErrorClass, int]
    requested_per_class: int

    def by_class(self, cls: ErrorClass) -> list[CorruptedExample]:
        return [n for n in self.negatives if n.label is cls]


def generate_training_set(
    corpus: Corpus,
    provider: AnnotatorProvider,
    per_class_count: int,
    seed: int,
) -> TrainingSet:
    """Corrupt corpus sentences into ``per_class_count`` negatives per class.

    Entity/predicate/circumstance corruption splits replacements evenly
    between same-dialogue and corpus-wide pools (the extra example of an odd
    count goes to same-dialogue); pronoun and marker corruption uses its
    closed inventories. Every uncorrupted sentence is emitted once as a
    clean positive. Deterministic for a fixed seed; classes that run out of
    material are reported with the achieved count and logged.
    """
    if per_class_count < 0:
        raise ValueError("per_class_count must be non-negative")

    units_by_example = [
        corruption_units(ex.sentence.text, provider) for ex in corpus.examples
    ]
    eligible = {
        cls: [i for i, units in enumerate(units_by_example) if units[cls]]
        for cls in CORRUPTIBLE_CLASSES
    }

    dialogue_order = list(corpus.dialogues)
    pieces = {
        did: build_pools([corpus.dialogues[did]], provider) for did in dialogue_order
    }
    wide_cache: dict[str, ReplacementPools] = {}

    def wide_pools(excluded: str) -> ReplacementPools:
        if excluded not in wide_cache:
            wide_cache[excluded] = merge_pools(
                [pieces[did] for did in dialogue_order if did != excluded]
            )
        return wide_cache[excluded]

    negatives: list[CorruptedExample] = []
    achieved: dict[ErrorClass, int] = {}
    for cls in CORRUPTIBLE_CLASSES:
        rng = random.Random(derive_seed(seed, "corrupt", cls.value))
        if cls in VERIFIABLE_CLASSES:
            quotas = [
                (ReplacementScope.SAME_DIALOGUE, (per_class_count + 1) // 2),
                (ReplacementScope.CORPUS_WIDE, per_class_count // 2),
            ]
        else:
            quotas = [(None, per_class_count)]

        produced_total = 0
        for scope, quota in quotas:
            produced = 0
            attempts = 0
            max_attempts = max(quota * 50, 50)
            while produced < quota and attempts < max_attempts and eligible[cls]:
                attempts += 1
                index = rng.choice(eligible[cls])
                example = corpus.examples[index]
                did = example.dialogue.id
                pools = (
                    wide_pools(did)
                    if scope is ReplacementScope.CORPUS_WIDE
                    else pieces[did]
                )
                try:
                    corrupted = corrupt(
                        example.sentence.text, example.dialogue, provider,
                        pools, cls, scope, rng,
                    )
                except CorruptionError:
                    continue
                negatives.append(
                    dataclasses.replace(
                        corrupted,
                        source_model_id=example.sentence.model_id,
                        source_sentence_index=example.sentence.sentence_index,
                    )
                )
                produced += 1
            if produced < quota:
                logger.warning(
                    "only %d/%d %s corruptions possible (scope=%s)",
                    produced, quota, cls.value, scope.value if scope else "closed-class",
                )
            produced_total += produced
        achieved[cls] = produced_total

    positives = [
        DialogueExample(
            dialogue=ex.dialogue,
            sentence=ex.sentence,
            gold=GoldAnnotation(labels=frozenset({ErrorClass.NO_ERROR})),
        )
        for ex in corpus.examples
    ]
    return TrainingSet(
        negatives=negatives,
        positives=positives,
        achieved=achieved,
        requested_per_class=per_class_count,
    )


def training_records(training: TrainingSet, corpus: Corpus) -> list[dict]:
    """Training data in the corpus record format with provenance blocks."""
    records: list[dict] = [
        dialogue_to_record(corpus.dialogues[did]) for did in corpus.dialogues
    ]
    for ex in training.positives:
        records.append(
            {
                "dialogue_id": ex.sentence.dialogue_id,
                "model_id": ex.sentence.model_id,
                "sentence_index": ex.sentence.sentence_index,
                "text": ex.sentence.text,
                "gold": {"labels": [ErrorClass.NO_ERROR.value]},
            }
        )
    for i, neg in enumerate(training.negatives):
        span = {
            "start": neg.replaced.start,
            "end": neg.replaced.start + len(neg.replacement),
            "class": neg.label.value,
        }
        if neg.verifiability is not None:
            span["verifiability"] = neg.verifiability.value
        records.append(
            {
                "dialogue_id": neg.dialogue_id,
                "model_id": f"synthetic-{neg.label.value}-{i:05d}",
                "sentence_index": neg.source_sentence_index,
                "text": neg.corrupted,
                "gold": {"labels": [neg.label.value], "spans": [span]},
                "provenance": {
                    "original": neg.original,
                    "replaced_span": {
                        "start": neg.replaced.start,
                        "end": neg.replaced.end,
                        "text": neg.replaced.text,
                    },
                    "replacement": neg.replacement,
                    "scope": neg.scope.value if neg.scope else None,
                    "source_model_id": neg.source_model_id,
                },
            }
        )
    return records


def write_training_file(path, training: TrainingSet, corpus: Corpus) -> None:
    write_jsonl_atomic(path, training_records(training, corpus))

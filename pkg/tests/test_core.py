from __future__ import annotations

import pytest
from hypothesis import given
from hypothesis import strategies as st

from facterr.core import (
    Dialogue,
    ErrorClass,
    GoldAnnotation,
    LabeledSpan,
    PredictionSet,
    SummarySentence,
    Utterance,
    Verifiability,
    error_class_from_string,
    normalize_labels,
    prediction_from_classes,
    validate_label_set,
)

E = ErrorClass


def test_label_strings_round_trip():
    for cls in ErrorClass:
        assert error_class_from_string(cls.value) is cls
    with pytest.raises(ValueError):
        error_class_from_string("EntityError")


def test_normalize_merges_linke_into_others():
    assert normalize_labels({E.LINK}, True) == {E.OTHERS}


def test_normalize_keeps_no_error():
    assert normalize_labels({E.NO_ERROR}, True) == {E.NO_ERROR}


def test_normalize_deduplicates_merge():
    assert normalize_labels({E.ENTITY, E.LINK}, True) == {E.ENTITY, E.OTHERS}
    assert normalize_labels({E.OTHERS, E.LINK}, True) == {E.OTHERS}


def test_normalize_rejects_mixed_no_error():
    with pytest.raises(ValueError):
        normalize_labels({E.NO_ERROR, E.ENTITY}, True)
    with pytest.raises(ValueError):
        validate_label_set({E.NO_ERROR, E.LINK})


def test_normalize_rejects_empty():
    with pytest.raises(ValueError):
        normalize_labels(set(), False)


_valid_label_sets = st.one_of(
    st.just(frozenset({E.NO_ERROR})),
    st.frozensets(
        st.sampled_from([c for c in ErrorClass if c is not E.NO_ERROR]),
        min_size=1,
    ),
)


@given(_valid_label_sets, st.booleans())
def test_normalize_idempotent(labels, merge):
    once = normalize_labels(labels, merge)
    assert normalize_labels(once, merge) == once


@given(_valid_label_sets)
def test_normalize_without_merge_is_identity(labels):
    assert normalize_labels(labels, False) == labels


@given(_valid_label_sets)
def test_normalize_never_grows(labels):
    assert len(normalize_labels(labels, True)) <= len(labels)


def test_prediction_from_empty_classes_is_clean():
    prediction = prediction_from_classes([])
    assert prediction.labels == {E.NO_ERROR}
    assert prediction.is_clean


def test_prediction_set_rejects_mixed_labels():
    with pytest.raises(ValueError):
        PredictionSet(labels=frozenset({E.NO_ERROR, E.ENTITY}))


def test_utterance_validation():
    with pytest.raises(ValueError):
        Utterance(speaker="", text="hi", index=0)
    with pytest.raises(ValueError):
        Utterance(speaker="A", text="hi", index=-1)


def test_dialogue_requires_increasing_indices():
    utts = (
        Utterance(speaker="A", text="hi", index=1),
        Utterance(speaker="B", text="yo", index=0),
    )
    with pytest.raises(ValueError):
        Dialogue(id="d", utterances=utts)


def test_dialogue_speakers_and_contains():
    dialogue = Dialogue(
        id="d",
        utterances=(
            Utterance(speaker="Ana", text="See you at the Station.", index=0),
            Utterance(speaker="Bo", text="Sure.", index=1),
            Utterance(speaker="Ana", text="Bye.", index=2),
        ),
    )
    assert dialogue.speakers() == ("Ana", "Bo")
    assert dialogue.contains_text("the station")
    assert dialogue.contains_text("bo")  # speaker names count
    assert not dialogue.contains_text("airport")


def test_dialogue_render_includes_query():
    dialogue = Dialogue(
        id="d",
        utterances=(Utterance(speaker="A", text="hi", index=0),),
        query="What was decided?",
    )
    assert dialogue.render() == "What was decided?\nA: hi"


def test_sentence_rejects_blank_text():
    with pytest.raises(ValueError):
        SummarySentence(dialogue_id="d", model_id="m", text="   ", sentence_index=0)


def test_labeled_span_verifiability_restriction():
    LabeledSpan(0, 3, E.ENTITY, Verifiability.INTRINSIC)
    with pytest.raises(ValueError):
        LabeledSpan(0, 3, E.COREFERENCE, Verifiability.INTRINSIC)
    with pytest.raises(ValueError):
        LabeledSpan(3, 3, E.ENTITY)


def test_gold_annotation_invariants():
    with pytest.raises(ValueError):
        GoldAnnotation(
            labels=frozenset({E.ENTITY}),
            spans=(LabeledSpan(0, 2, E.PREDICATE),),
        )
    with pytest.raises(ValueError):
        GoldAnnotation(
            labels=frozenset({E.NO_ERROR}),
            spans=(LabeledSpan(0, 2, E.ENTITY),),
        )
    gold = GoldAnnotation(labels=frozenset({E.ENTITY}), spans=(LabeledSpan(0, 2, E.ENTITY),))
    gold.check_within("abcd")
    with pytest.raises(ValueError):
        gold.check_within("a")

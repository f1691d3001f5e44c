from __future__ import annotations

import math
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fixture_data import ListScorer
from facterr.core import Dialogue, ErrorClass, SummarySentence, Utterance
from facterr.lingo import (
    CandidateSource,
    CandidateSpan,
    SpanKind,
    SpanOfInterest,
    identify_sois,
    generate_candidates,
)
from facterr.ranker import (
    MockScorer,
    RankerConfig,
    ScorerError,
    compute_rank,
    detect,
    rank_soi,
    score_sentence,
    threshold_curve,
    tune_threshold,
)

E = ErrorClass


def _dialogue(did="d"):
    return Dialogue(id=did, utterances=(Utterance(speaker="A", text="hi", index=0),))


def _sentence(text, did="d"):
    return SummarySentence(dialogue_id=did, model_id="m", text=text, sentence_index=0)


def _np_candidates(*texts):
    return [
        CandidateSpan(text=t, source=CandidateSource.SAME_DIALOGUE, kind=SpanKind.NOUN_PHRASE)
        for t in texts
    ]


class TestScoreSentence:
    def test_uniform_probability_gives_its_log(self):
        scorer = MockScorer(default_probability=0.5)
        for text in ("one", "one two", "one two three four"):
            score = score_sentence(scorer, _dialogue(), text.split())
            assert score == pytest.approx(math.log(0.5))

    def test_average_of_listed_probabilities(self):
        scorer = MockScorer(rows={("d", "a b"): [0.5, 0.25]})
        score = score_sentence(scorer, _dialogue(), ["a", "b"])
        assert score == pytest.approx((math.log(0.5) + math.log(0.25)) / 2)
        assert score == pytest.approx(-1.0397, abs=1e-4)

    def test_certain_token_scores_zero(self):
        scorer = MockScorer(rows={("d", "sure"): [1.0]})
        assert score_sentence(scorer, _dialogue(), ["sure"]) == 0.0

    def test_empty_tokens_rejected(self):
        with pytest.raises(ValueError):
            score_sentence(MockScorer(), _dialogue(), [])

    def test_row_length_mismatch_rejected(self):
        scorer = MockScorer(rows={("d", "a b"): [0.5]})
        with pytest.raises(ScorerError):
            score_sentence(scorer, _dialogue(), ["a", "b"])


class TestComputeRank:
    def test_middle_rank(self):
        assert compute_rank(-1.0, [-0.5, -1.5]) == 2

    def test_empty_candidates(self):
        assert compute_rank(-1.0, []) == 1

    def test_soi_wins_ties(self):
        assert compute_rank(-1.0, [-1.0, -1.0, -1.0]) == 1

    @settings(max_examples=200)
    @given(
        st.floats(-10, 0),
        st.lists(st.floats(-10, 0), max_size=20),
        st.floats(-10, 0),
    )
    def test_appending_changes_rank_by_at_most_one(self, soi, scores, extra):
        before = compute_rank(soi, scores)
        after = compute_rank(soi, scores + [extra])
        assert after - before in (0, 1)

    @settings(max_examples=200)
    @given(
        st.floats(-10, -0.01),
        st.lists(st.floats(-10, -0.01), max_size=20),
        st.floats(0.1, 3.0),
        st.floats(0.0, 5.0),
    )
    def test_rank_invariant_under_increasing_transform(self, soi, scores, scale, shift):
        transformed = [scale * s - shift for s in scores]
        assert compute_rank(soi, scores) == compute_rank(scale * soi - shift, transformed)


class TestRankSoi:
    def _soi(self, text, start, sentence):
        return SpanOfInterest(
            text=text, start=start, end=start + len(text),
            kind=SpanKind.NOUN_PHRASE, role="ARG1",
        )

    def test_variant_construction_and_rank(self):
        sentence = _sentence("the cat sat")
        soi = self._soi("the cat", 0, sentence)
        scorer = ListScorer(
            {"the cat sat": -1.0, "the dog sat": -0.5, "a hamster sat": -1.5}
        )
        result = rank_soi(scorer, _dialogue(), sentence, soi, _np_candidates("the dog", "a hamster"))
        assert result.rank == 2
        assert result.soi_score == pytest.approx(-1.0)
        assert result.candidate_scores == (("the dog", -0.5), ("a hamster", -1.5))

    def test_offset_mismatch_rejected(self):
        sentence = _sentence("the cat sat")
        soi = SpanOfInterest(
            text="dog", start=0, end=3, kind=SpanKind.NOUN_PHRASE, role="ARG1"
        )
        with pytest.raises(ValueError, match="does not match"):
            rank_soi(ListScorer({}), _dialogue(), sentence, soi, [])

    def test_no_candidates_rank_one(self):
        sentence = _sentence("the cat sat")
        soi = self._soi("the cat", 0, sentence)
        result = rank_soi(ListScorer({}), _dialogue(), sentence, soi, [])
        assert result.rank == 1


def _single_soi_setup(rank_target: int, role="ARG0", soi_text="Alice"):
    """Sentence with one span and candidates arranged to give a known rank."""
    sentence = _sentence(f"{soi_text} arrived")
    soi = SpanOfInterest(
        text=soi_text, start=0, end=len(soi_text), kind=SpanKind.NAMED_ENTITY,
        ne_class="PERSON", role=role,
    )
    names = ["Bruno", "Carla", "Derek", "Elena", "Felix"]
    scores = {sentence.text: -1.0}
    for i, name in enumerate(names):
        above = i < rank_target - 1
        scores[f"{name} arrived"] = -0.5 - 0.01 * i if above else -2.0 - 0.01 * i
    candidates = [
        CandidateSpan(text=n, source=CandidateSource.SAME_DIALOGUE, kind=SpanKind.NAMED_ENTITY)
        for n in names
    ]
    return sentence, soi, candidates, ListScorer(scores)


class TestDetect:
    def test_flagged_entity(self):
        sentence, soi, candidates, scorer = _single_soi_setup(rank_target=5)
        prediction = detect(
            scorer, _dialogue(), sentence, [soi], {soi: candidates},
            RankerConfig(threshold_t=3),
        )
        assert prediction.labels == {E.ENTITY}
        entry = prediction.diagnostics[f"{soi.text}@0"]
        assert entry["rank"] == 5
        assert entry["flagged"] is True
        assert entry["error_class"] == "EntE"

    def test_all_top_ranked_is_clean(self):
        sentence, soi, candidates, scorer = _single_soi_setup(rank_target=1)
        for threshold in (1, 2, 5):
            prediction = detect(
                scorer, _dialogue(), sentence, [soi], {soi: candidates},
                RankerConfig(threshold_t=threshold),
            )
            assert prediction.labels == {E.NO_ERROR}

    def test_rank_equal_to_threshold_not_flagged(self):
        sentence, soi, candidates, scorer = _single_soi_setup(rank_target=3)
        prediction = detect(
            scorer, _dialogue(), sentence, [soi], {soi: candidates},
            RankerConfig(threshold_t=3),
        )
        assert prediction.labels == {E.NO_ERROR}
        prediction = detect(
            scorer, _dialogue(), sentence, [soi], {soi: candidates},
            RankerConfig(threshold_t=2),
        )
        assert prediction.labels == {E.ENTITY}

    def test_zero_sois_yields_clean_with_diagnostic(self):
        prediction = detect(
            ListScorer({}), _dialogue(), _sentence("hello"), [], {}, RankerConfig()
        )
        assert prediction.labels == {E.NO_ERROR}
        assert prediction.diagnostics == {"no_soi": True}

    def test_union_over_sois(self):
        sentence = _sentence("Alice arrived late")
        soi_a = SpanOfInterest(
            text="Alice", start=0, end=5, kind=SpanKind.NAMED_ENTITY,
            ne_class="PERSON", role="ARG0",
        )
        soi_b = SpanOfInterest(text="late", start=14, end=18, kind=SpanKind.NOUN_PHRASE,
                               role="ARGM-TMP")
        scores = {
            "Alice arrived late": -1.0,
            "Bruno arrived late": -0.5,
            "Alice arrived early": -0.5,
        }
        candidates = {
            soi_a: [CandidateSpan("Bruno", CandidateSource.SAME_DIALOGUE, SpanKind.NAMED_ENTITY)],
            soi_b: [CandidateSpan("early", CandidateSource.SAME_DIALOGUE, SpanKind.NOUN_PHRASE)],
        }
        prediction = detect(
            ListScorer(scores), _dialogue(), sentence, [soi_a, soi_b], candidates,
            RankerConfig(threshold_t=1),
        )
        assert prediction.labels == {E.ENTITY, E.CIRCUMSTANCE}

    def test_scorer_failure_aborts_only_that_soi(self):
        sentence = _sentence("Alice arrived late")
        soi_a = SpanOfInterest(
            text="Alice", start=0, end=5, kind=SpanKind.NAMED_ENTITY,
            ne_class="PERSON", role="ARG0",
        )
        soi_b = SpanOfInterest(text="late", start=14, end=18, kind=SpanKind.NOUN_PHRASE,
                               role="ARGM-TMP")

        class Flaky(ListScorer):
            def token_logprobs(self, dialogue, tokens):
                if tokens[0] == "Bruno":
                    raise ScorerError("variant unavailable")
                return super().token_logprobs(dialogue, tokens)

        scorer = Flaky({"Alice arrived late": -1.0, "Alice arrived early": -0.5})
        candidates = {
            soi_a: [CandidateSpan("Bruno", CandidateSource.SAME_DIALOGUE, SpanKind.NAMED_ENTITY)],
            soi_b: [CandidateSpan("early", CandidateSource.SAME_DIALOGUE, SpanKind.NOUN_PHRASE)],
        }
        prediction = detect(
            scorer, _dialogue(), sentence, [soi_a, soi_b], candidates,
            RankerConfig(threshold_t=1),
        )
        assert prediction.labels == {E.CIRCUMSTANCE}
        assert "error" in prediction.diagnostics["Alice@0"]

    def test_max_candidates_truncates(self):
        sentence, soi, candidates, scorer = _single_soi_setup(rank_target=5)
        prediction = detect(
            scorer, _dialogue(), sentence, [soi], {soi: candidates},
            RankerConfig(threshold_t=3, max_candidates=2),
        )
        # only two candidates survive, so the rank cannot exceed 3
        assert prediction.labels == {E.NO_ERROR}

    def test_pronoun_soi_reports_coreference(self):
        sentence = _sentence("she arrived")
        soi = SpanOfInterest(text="she", start=0, end=3, kind=SpanKind.NOUN_PHRASE, role="ARG0")
        scores = {"she arrived": -1.0, "Alice arrived": -0.5}
        prediction = detect(
            ListScorer(scores), _dialogue(), sentence, [soi],
            {soi: _np_candidates("Alice")}, RankerConfig(threshold_t=1),
        )
        assert prediction.labels == {E.COREFERENCE}

    def test_detect_config_validation(self):
        with pytest.raises(ValueError):
            RankerConfig(threshold_t=0)
        with pytest.raises(ValueError):
            RankerConfig(max_candidates=0)


class TestDetectOnFixtures:
    def test_entity_error_found_in_fixture_sentence(self, provider, airport):
        text = "Vanessa is waiting at the airport."
        sentence = _sentence(text, did=airport.id)
        sois = identify_sois(sentence, provider)
        candidates = {s: generate_candidates(s, airport, provider) for s in sois}
        scorer = MockScorer(
            rows={
                (airport.id, text): 0.2,
                (airport.id, "Lucas is waiting at the airport."): 0.8,
            },
            default_probability=0.2,
        )
        prediction = detect(
            scorer, airport, sentence, sois, candidates, RankerConfig(threshold_t=1)
        )
        assert E.ENTITY in prediction.labels

    def test_affine_transform_of_probabilities_keeps_output(self, provider, airport):
        text = "Vanessa is waiting at the airport."
        sentence = _sentence(text, did=airport.id)
        sois = identify_sois(sentence, provider)
        candidates = {s: generate_candidates(s, airport, provider) for s in sois}
        rng = random.Random(5)
        rows = {}
        for soi in sois:
            for candidate in candidates[soi]:
                variant = text[: soi.start] + candidate.text + text[soi.end:]
                rows[(airport.id, variant)] = rng.uniform(0.1, 0.9)
        rows[(airport.id, text)] = 0.4
        base = MockScorer(rows=rows, default_probability=0.3)
        # raising every probability to a power scales all log scores by it
        powered = MockScorer(
            rows={k: v**2 for k, v in rows.items()}, default_probability=0.09
        )
        for threshold in (1, 2, 3):
            config = RankerConfig(threshold_t=threshold)
            first = detect(base, airport, sentence, sois, candidates, config)
            second = detect(powered, airport, sentence, sois, candidates, config)
            assert first.labels == second.labels


class TestTuneThreshold:
    def _world(self):
        from worldgen import make_tuning_case

        return make_tuning_case(seed=11)

    def test_curve_matches_rank_construction(self):
        corpus, provider, scorer, ranks = self._world()
        curve = threshold_curve(scorer, provider, corpus, grid=range(1, 11))
        from facterr.metrics import evaluate

        golds = corpus.gold_labels()
        for threshold, observed in curve.items():
            expected_preds = [
                {E.ENTITY} if rank > threshold else {E.NO_ERROR} for rank in ranks
            ]
            expected = evaluate(expected_preds, golds, merge_linke=True).macro_f1
            assert observed == pytest.approx(expected)

    def test_smallest_argmax_returned(self):
        corpus, provider, scorer, ranks = self._world()
        chosen = tune_threshold(scorer, provider, corpus, grid=range(1, 11))
        curve = threshold_curve(scorer, provider, corpus, grid=range(1, 11))
        best = max(curve.values())
        assert curve[chosen] == best
        assert all(curve[t] < best for t in curve if t < chosen)

    def test_singleton_grid(self):
        corpus, provider, scorer, _ = self._world()
        assert tune_threshold(scorer, provider, corpus, grid=[4]) == 4

    def test_empty_grid_rejected(self):
        corpus, provider, scorer, _ = self._world()
        with pytest.raises(ValueError):
            tune_threshold(scorer, provider, corpus, grid=[])

    def test_all_clean_golds_tie_returns_one(self):
        # every span ranks first, so all thresholds behave identically
        from facterr.core import GoldAnnotation
        from facterr.dataset import Corpus, DialogueExample
        from worldgen import make_tuning_case

        corpus, provider, scorer, ranks = make_tuning_case(seed=3)
        clean = Corpus(
            name="clean",
            dialogues=corpus.dialogues,
            examples=[
                DialogueExample(
                    dialogue=ex.dialogue,
                    sentence=ex.sentence,
                    gold=GoldAnnotation(labels=frozenset({E.NO_ERROR})),
                )
                for ex in corpus.examples
            ],
        )
        top_scorer = MockScorer(
            rows={
                key: (0.9 if text == ex.sentence.text else 0.1)
                for ex in clean.examples
                for key, text in [((ex.dialogue.id, ex.sentence.text), ex.sentence.text)]
            },
            default_probability=0.1,
        )
        assert tune_threshold(top_scorer, provider, clean, grid=[1, 2]) == 1

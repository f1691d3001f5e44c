from __future__ import annotations

import json
import subprocess
import sys
from pathlib import Path

import pytest

from fixture_data import fixture_provider, reference_corpus, summary_corpus
from worldgen import make_score_table, make_world
from facterr.cli import main
from facterr.dataset import load_corpus, save_corpus
from facterr.ranker import MockScorer


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    """Corpus, provider table, and score table files for CLI runs."""
    root = tmp_path_factory.mktemp("cli")
    corpus, provider = make_world(n_dialogues=6, sentences_per_dialogue=4, seed=3)
    scorer = make_score_table(corpus, provider, seed=5)
    save_corpus(corpus, root / "corpus.rec")
    provider.to_json(root / "annotations.json")
    scorer.to_json(root / "scores.json")

    fixture_provider().to_json(root / "fixture-annotations.json")
    save_corpus(summary_corpus(), root / "summaries.rec")
    save_corpus(reference_corpus(), root / "references.rec")
    return root


def _plugin_args(root: Path) -> list[str]:
    return [
        "--scorer", "mock", "--scorer-table", str(root / "scores.json"),
        "--provider", "fixture", "--provider-table", str(root / "annotations.json"),
    ]


class TestDetect:
    def test_writes_predictions_and_exits_zero(self, workdir, capsys):
        out = workdir / "preds.rec"
        code = main(
            ["detect", "--corpus", str(workdir / "corpus.rec"), *_plugin_args(workdir),
             "--T", "2", "--out", str(out)]
        )
        assert code == 0
        lines = out.read_text(encoding="utf-8").splitlines()
        corpus = load_corpus(workdir / "corpus.rec")
        assert len(lines) == len(corpus)
        record = json.loads(lines[0])
        assert set(record) == {"dialogue_id", "model_id", "sentence_index", "labels"}

    def test_diagnostics_flag(self, workdir):
        out = workdir / "preds-diag.rec"
        code = main(
            ["detect", "--corpus", str(workdir / "corpus.rec"), *_plugin_args(workdir),
             "--T", "2", "--diagnostics", "--out", str(out)]
        )
        assert code == 0
        record = json.loads(out.read_text(encoding="utf-8").splitlines()[0])
        assert "diagnostics" in record

    def test_missing_corpus_is_config_error(self, workdir):
        code = main(
            ["detect", "--corpus", str(workdir / "missing.rec"), *_plugin_args(workdir),
             "--out", str(workdir / "x.rec")]
        )
        assert code == 2

    def test_unknown_plugin_is_config_error(self, workdir):
        code = main(
            ["detect", "--corpus", str(workdir / "corpus.rec"),
             "--scorer", "bart", "--provider", "fixture",
             "--out", str(workdir / "x.rec")]
        )
        assert code == 2

    def test_corrupt_corpus_is_runtime_error(self, workdir):
        bad = workdir / "bad.rec"
        bad.write_text('{"dialogue_id": "ghost", "model_id": "m", "sentence_index": 0, '
                       '"text": "x"}\n', encoding="utf-8")
        code = main(
            ["detect", "--corpus", str(bad), *_plugin_args(workdir),
             "--out", str(workdir / "x.rec")]
        )
        assert code == 1


class TestStats:
    def test_prints_and_writes(self, workdir, capsys):
        out = workdir / "stats.json"
        code = main(
            ["stats", "--corpus", str(workdir / "summaries.rec"), "--out", str(out)]
        )
        assert code == 0
        captured = capsys.readouterr().out
        assert "class counts" in captured
        payload = json.loads(out.read_text(encoding="utf-8"))
        assert payload["summaries"]["example_count"] == 6
        assert payload["summaries"]["per_class_counts"]["EntE"] == 1
        assert out.with_suffix(".png").exists()

    def test_multiple_corpora_add_merged_section(self, workdir):
        out = workdir / "stats-two.json"
        code = main(
            ["stats", "--corpus", str(workdir / "summaries.rec"), str(workdir / "corpus.rec"),
             "--out", str(out), "--no-figures"]
        )
        assert code == 0
        payload = json.loads(out.read_text(encoding="utf-8"))
        assert set(payload) == {"summaries", "corpus", "all"}
        assert payload["all"]["example_count"] == payload["summaries"]["example_count"] + \
            payload["corpus"]["example_count"]


class TestTune:
    def test_writes_choice_and_curve(self, workdir):
        out = workdir / "tune.json"
        code = main(
            ["tune", "--corpus", str(workdir / "corpus.rec"), *_plugin_args(workdir),
             "--grid", "1", "2", "3", "--out", str(out)]
        )
        assert code == 0
        payload = json.loads(out.read_text(encoding="utf-8"))
        assert payload["chosen"] in (1, 2, 3)
        assert set(payload["macro_f1"]) == {"1", "2", "3"}
        assert out.with_suffix(".png").exists()


class TestEvaluate:
    def test_report_files_written(self, workdir, capsys):
        preds = workdir / "eval-preds.rec"
        main(
            ["detect", "--corpus", str(workdir / "corpus.rec"), *_plugin_args(workdir),
             "--T", "2", "--out", str(preds)]
        )
        out = workdir / "report.json"
        code = main(
            ["evaluate", "--corpus", str(workdir / "corpus.rec"), "--pred", str(preds),
             "--name", "ranker", "--out", str(out)]
        )
        assert code == 0
        table = capsys.readouterr().out
        assert "Macro Avg" in table and "ranker" in table
        payload = json.loads(out.read_text(encoding="utf-8"))
        assert "macro_f1" in payload["ranker"]
        assert out.with_suffix(".tsv").read_text(encoding="utf-8").startswith("model\tclass")
        assert out.with_suffix(".png").exists()


class TestCorrupt:
    def test_training_file_loads_back(self, workdir, capsys):
        out = workdir / "train.rec"
        code = main(
            ["corrupt", "--corpus", str(workdir / "references.rec"),
             "--provider", "fixture",
             "--provider-table", str(workdir / "fixture-annotations.json"),
             "--per-class", "3", "--seed", "11", "--out", str(out)]
        )
        assert code == 0
        assert "negatives" in capsys.readouterr().out
        loaded = load_corpus(out)
        synthetic = [ex for ex in loaded.examples if ex.sentence.model_id.startswith("synthetic-")]
        assert synthetic


class TestEnsembleCommand:
    def _two_prediction_files(self, workdir):
        a = workdir / "pred-a.rec"
        b = workdir / "pred-b.rec"
        if not a.exists():
            main(["detect", "--corpus", str(workdir / "corpus.rec"), *_plugin_args(workdir),
                  "--T", "1", "--out", str(a)])
            main(["detect", "--corpus", str(workdir / "corpus.rec"), *_plugin_args(workdir),
                  "--T", "3", "--out", str(b)])
        return a, b

    def test_freq_vote_combination(self, workdir):
        a, b = self._two_prediction_files(workdir)
        out = workdir / "combined.rec"
        code = main(
            ["ensemble", "--corpus", str(workdir / "corpus.rec"), "--mode", "freq",
             "--pred", f"low={a}", f"high={b}", "--out", str(out)]
        )
        assert code == 0
        assert len(out.read_text(encoding="utf-8").splitlines()) == 24

    def test_logistic_fit_then_apply(self, workdir):
        a, b = self._two_prediction_files(workdir)
        model = workdir / "ensemble.json"
        code = main(
            ["ensemble", "--corpus", str(workdir / "corpus.rec"), "--mode", "logistic",
             "--fit", "--pred", f"low={a}", f"high={b}", "--seed", "2",
             "--model-out", str(model)]
        )
        assert code == 0
        out = workdir / "combined-logistic.rec"
        code = main(
            ["ensemble", "--corpus", str(workdir / "corpus.rec"), "--mode", "logistic",
             "--model", str(model), "--pred", f"low={a}", f"high={b}", "--out", str(out)]
        )
        assert code == 0
        assert out.exists()

    def test_detector_order_mismatch_rejected(self, workdir):
        a, b = self._two_prediction_files(workdir)
        model = workdir / "ensemble.json"
        code = main(
            ["ensemble", "--corpus", str(workdir / "corpus.rec"), "--mode", "logistic",
             "--model", str(model), "--pred", f"high={b}", f"low={a}",
             "--out", str(workdir / "x.rec")]
        )
        assert code == 2


class TestCrossval:
    def _run(self, workdir, out_dir):
        external = workdir / "external.rec"
        if not external.exists():
            main(["detect", "--corpus", str(workdir / "corpus.rec"), *_plugin_args(workdir),
                  "--T", "1", "--out", str(external)])
        return main(
            ["crossval", "--corpus", str(workdir / "corpus.rec"), *_plugin_args(workdir),
             "--k", "3", "--seed", "7", "--ensemble", "freq",
             "--pred-file", f"external={external}",
             "--out-dir", str(out_dir)]
        )

    def test_outputs(self, workdir, capsys):
        out_dir = workdir / "cv"
        assert self._run(workdir, out_dir) == 0
        table = capsys.readouterr().out
        assert "ranker" in table and "freq-voting" in table
        payload = json.loads((out_dir / "report.json").read_text(encoding="utf-8"))
        assert payload["k"] == 3
        assert set(payload["detectors"]) == {"ranker", "external", "freq-voting"}
        assert len(payload["detectors"]["ranker"]["folds"]) == 3
        assert (out_dir / "report.tsv").exists()
        assert (out_dir / "report.txt").exists()
        assert (out_dir / "report.png").exists()
        assert (out_dir / "predictions-ranker.rec").exists()

    def test_byte_identical_reruns(self, workdir):
        first = workdir / "cv-a"
        second = workdir / "cv-b"
        assert self._run(workdir, first) == 0
        assert self._run(workdir, second) == 0
        for name in ("report.json", "report.tsv", "predictions-ranker.rec",
                     "predictions-freq-voting.rec"):
            assert (first / name).read_bytes() == (second / name).read_bytes(), name

    def test_requires_some_detector(self, workdir):
        code = main(
            ["crossval", "--corpus", str(workdir / "corpus.rec"),
             "--out-dir", str(workdir / "cv-none")]
        )
        assert code == 2


def test_module_entry_point_smoke(workdir):
    result = subprocess.run(
        [sys.executable, "-m", "facterr", "stats",
         "--corpus", str(workdir / "summaries.rec"), "--no-figures"],
        capture_output=True, text=True,
    )
    assert result.returncode == 0
    assert "class counts" in result.stdout


def test_bad_usage_exits_two():
    with pytest.raises(SystemExit) as excinfo:
        main(["detect"])  # missing required flags
    assert excinfo.value.code == 2

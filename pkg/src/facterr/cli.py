"""Command-line entry point wiring the toolkit into reproducible runs.

Commands: ``detect``, ``corrupt``, ``tune``, ``evaluate``, ``crossval``,
``stats``, ``ensemble``. Machine-readable outputs are written atomically
(temp-then-rename); report commands also render figures next to their
outputs unless ``--no-figures`` is given. Exit codes: 0 success, 1 runtime
failure, 2 bad configuration.
"""
from __future__ import annotations

import argparse
import logging
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Optional, Sequence

from .adapters import (
    AdapterError,
    ArcFileDetector,
    Detector,
    PredictionFileDetector,
    QaFileDetector,
    load_label_predictions,
)
from .core import ErrorClass, PredictionSet
from .corruptor import generate_training_set, write_training_file
from .dataset import Corpus, CorpusFormatError, corpus_stats, load_corpus, merge_corpora
from .ensemble import LogisticEnsemble, binary_features, freq_vote, logistic_fit, logistic_predict
from .experiment import (
    FreqVoteDetector,
    LogisticEnsembleDetector,
    predictions_to_records,
    run_crossval,
)
from .fileio import write_json_atomic, write_jsonl_atomic, write_text_atomic
from .metrics import evaluate, evaluated_classes
from .plugins import PluginError, load_registry, resolve_provider, resolve_scorer
from .ranker import RankerDetector, threshold_curve

logger = logging.getLogger(__name__)


class ConfigError(Exception):
    """Invalid configuration: missing files, bad ids, bad flag combinations."""


@dataclass
class RunConfig:
    """Validated shared settings for one CLI invocation."""

    command: str
    corpus_paths: list[Path] = field(default_factory=list)
    output_path: Optional[Path] = None
    scorer_id: Optional[str] = None
    provider_id: Optional[str] = None
    threshold_t: Optional[int] = None
    merge_linke: bool = True
    seed: int = 0
    k: int = 5
    registry_path: Optional[Path] = None

    def validate(self) -> None:
        for path in self.corpus_paths:
            if not path.exists():
                raise ConfigError(f"corpus file not found: {path}")
        if self.registry_path is not None and not self.registry_path.exists():
            raise ConfigError(f"registry file not found: {self.registry_path}")
        if self.threshold_t is not None and self.threshold_t < 1:
            raise ConfigError("--T must be at least 1")
        if self.k < 2:
            raise ConfigError("--k must be at least 2")


def _config_from_args(args: argparse.Namespace) -> RunConfig:
    corpus = getattr(args, "corpus", None)
    paths = [Path(p) for p in (corpus if isinstance(corpus, list) else [corpus] if corpus else [])]
    config = RunConfig(
        command=args.command,
        corpus_paths=paths,
        output_path=Path(args.out) if getattr(args, "out", None) else None,
        scorer_id=getattr(args, "scorer", None),
        provider_id=getattr(args, "provider", None),
        threshold_t=getattr(args, "T", None),
        merge_linke=not getattr(args, "no_merge_linke", False),
        seed=getattr(args, "seed", 0),
        k=getattr(args, "k", 5),
        registry_path=Path(args.registry) if getattr(args, "registry", None) else None,
    )
    config.validate()
    return config


def _require_file(path: str | Path, what: str) -> Path:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"{what} not found: {path}")
    return path


def _load_single_corpus(config: RunConfig) -> Corpus:
    corpora = [load_corpus(p) for p in config.corpus_paths]
    if len(corpora) == 1:
        return corpora[0]
    return merge_corpora(corpora)


def _plugins(config: RunConfig, args: argparse.Namespace):
    registry = load_registry(config.registry_path)
    scorer = provider = None
    if config.scorer_id:
        scorer = resolve_scorer(registry, config.scorer_id, getattr(args, "scorer_table", None))
    if config.provider_id:
        provider = resolve_provider(
            registry, config.provider_id, getattr(args, "provider_table", None)
        )
    return scorer, provider


def _maybe_figure(args: argparse.Namespace, render, path: Path) -> None:
    if getattr(args, "no_figures", False):
        return
    render(path)
    print(f"figure written to {path}")


def cmd_detect(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    scorer, provider = _plugins(config, args)
    if scorer is None or provider is None:
        raise ConfigError("detect requires --scorer and --provider")
    corpus = _load_single_corpus(config)
    detector = RankerDetector(
        scorer, provider,
        threshold=config.threshold_t or 3,
        merge_linke=getattr(args, "merge_linke", False),
        max_candidates=getattr(args, "max_candidates", None),
    )
    predictions = {
        i: detector.predict(ex.dialogue, ex.sentence)
        for i, ex in enumerate(corpus.examples)
    }
    records = predictions_to_records(corpus, predictions, include_diagnostics=args.diagnostics)
    write_jsonl_atomic(config.output_path, records)
    flagged = sum(1 for p in predictions.values() if not p.is_clean)
    print(f"{len(records)} sentences scored, {flagged} flagged -> {config.output_path}")
    return 0


def cmd_corrupt(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    _, provider = _plugins(config, args)
    if provider is None:
        raise ConfigError("corrupt requires --provider")
    corpus = _load_single_corpus(config)
    training = generate_training_set(corpus, provider, args.per_class, config.seed)
    write_training_file(config.output_path, training, corpus)
    achieved = ", ".join(f"{cls.value}={n}" for cls, n in training.achieved.items())
    print(
        f"{len(training.negatives)} negatives ({achieved}) and "
        f"{len(training.positives)} positives -> {config.output_path}"
    )
    return 0


def cmd_tune(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    scorer, provider = _plugins(config, args)
    if scorer is None or provider is None:
        raise ConfigError("tune requires --scorer and --provider")
    corpus = _load_single_corpus(config)
    grid = args.grid
    curve = threshold_curve(
        scorer, provider, corpus, grid, merge_linke=config.merge_linke
    )
    chosen = min(t for t, score in curve.items() if score == max(curve.values()))
    write_json_atomic(
        config.output_path,
        {"grid": sorted(set(grid)), "macro_f1": {str(t): s for t, s in curve.items()},
         "chosen": chosen},
    )
    print(f"chosen T={chosen} -> {config.output_path}")
    from .report import save_threshold_figure

    _maybe_figure(
        args,
        lambda p: save_threshold_figure(curve, chosen, p),
        config.output_path.with_suffix(".png"),
    )
    return 0


def _align_predictions(
    corpus: Corpus, table: dict[tuple[str, str, int], frozenset[ErrorClass]]
) -> list[frozenset[ErrorClass]]:
    aligned = []
    for ex in corpus.examples:
        if ex.sentence.key not in table:
            raise AdapterError(f"prediction file lacks sentence {ex.sentence.key}")
        aligned.append(table[ex.sentence.key])
    return aligned


def cmd_evaluate(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    corpus = _load_single_corpus(config)
    table = load_label_predictions(_require_file(args.pred, "prediction file"))
    predictions = _align_predictions(corpus, table)
    report = evaluate(predictions, corpus.gold_labels(), config.merge_linke)

    from .report import f1_table_tsv, format_f1_table, save_f1_figure

    name = getattr(args, "name", None) or Path(args.pred).stem
    write_json_atomic(config.output_path, {name: report.to_record()})
    write_text_atomic(config.output_path.with_suffix(".tsv"), f1_table_tsv({name: report}))
    print(format_f1_table({name: report}))
    print(f"report written to {config.output_path}")
    _maybe_figure(
        args,
        lambda p: save_f1_figure({name: report}, p),
        config.output_path.with_suffix(".png"),
    )
    return 0


def _parse_named_path(raw: str, what: str) -> tuple[str, Path]:
    if "=" not in raw:
        raise ConfigError(f"{what} must look like name=path: {raw!r}")
    name, _, path = raw.partition("=")
    return name, _require_file(path, f"{what} {name!r}")


def _build_crossval_detectors(args: argparse.Namespace, config: RunConfig) -> list[Detector]:
    detectors: list[Detector] = []
    scorer, provider = _plugins(config, args)
    if scorer is not None or provider is not None:
        if scorer is None or provider is None:
            raise ConfigError("the ranking detector needs both --scorer and --provider")
        detectors.append(
            RankerDetector(
                scorer, provider,
                threshold=config.threshold_t,
                max_candidates=getattr(args, "max_candidates", None),
            )
        )
    if args.dae_file:
        detectors.append(
            ArcFileDetector.from_file(_require_file(args.dae_file, "arc judgment file"))
        )
    if args.qa_file:
        detectors.append(
            QaFileDetector.from_file(
                _require_file(args.qa_file, "QA answer file"),
                threshold=args.qa_threshold,
                merge_linke=config.merge_linke,
            )
        )
    for raw in args.pred_file or []:
        name, path = _parse_named_path(raw, "--pred-file")
        detectors.append(PredictionFileDetector.from_file(path, name=name))
    if not detectors:
        raise ConfigError("no detectors configured; give --scorer/--provider or input files")

    bases = list(detectors)
    for kind in args.ensemble or []:
        if len(bases) < 2:
            raise ConfigError("ensembles need at least two base detectors")
        if kind == "freq":
            detectors.append(FreqVoteDetector(bases))
        elif kind == "logistic":
            detectors.append(LogisticEnsembleDetector(bases, merge_linke=config.merge_linke))
        else:
            raise ConfigError(f"unknown ensemble kind {kind!r}")
    return detectors


def cmd_crossval(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    corpus = _load_single_corpus(config)
    detectors = _build_crossval_detectors(args, config)
    result = run_crossval(
        corpus, detectors, k=config.k, seed=config.seed, merge_linke=config.merge_linke
    )

    out_dir = Path(args.out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    record: dict[str, Any] = result.to_record()
    record["fold_of"] = {str(i): f for i, f in sorted(result.folds.fold_of.items())}
    write_json_atomic(out_dir / "report.json", record)

    from .report import f1_table_tsv, format_f1_table, save_f1_figure

    aggregates = {name: res.aggregate for name, res in result.detectors.items()}
    table = format_f1_table(aggregates)
    write_text_atomic(out_dir / "report.txt", table + "\n")
    write_text_atomic(out_dir / "report.tsv", f1_table_tsv(aggregates))
    for name, res in result.detectors.items():
        write_jsonl_atomic(
            out_dir / f"predictions-{name}.rec",
            predictions_to_records(corpus, res.predictions),
        )
    print(table)
    print(f"reports written to {out_dir}")
    _maybe_figure(args, lambda p: save_f1_figure(aggregates, p), out_dir / "report.png")
    return 0


def cmd_stats(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    corpora = [load_corpus(p) for p in config.corpus_paths]
    if len(corpora) > 1:
        corpora.append(merge_corpora(corpora, name="all"))

    from .report import format_stats_table, save_stats_figure

    payload = {}
    for corpus in corpora:
        stats = corpus_stats(corpus)
        payload[corpus.name] = stats.to_record()
        print(f"== {corpus.name} ==")
        print(format_stats_table(stats))
        print()
    if config.output_path:
        write_json_atomic(config.output_path, payload)
        print(f"stats written to {config.output_path}")
        last = corpus_stats(corpora[-1])
        _maybe_figure(
            args,
            lambda p: save_stats_figure(last, p),
            config.output_path.with_suffix(".png"),
        )
    return 0


def cmd_ensemble(args: argparse.Namespace) -> int:
    config = _config_from_args(args)
    corpus = _load_single_corpus(config)
    named = [_parse_named_path(raw, "--pred") for raw in args.pred]
    tables = {name: load_label_predictions(path) for name, path in named}
    order = [name for name, _ in named]
    aligned = {name: _align_predictions(corpus, tables[name]) for name in order}

    if args.mode == "freq":
        combined = [
            freq_vote([PredictionSet(labels=aligned[name][i]) for name in order])
            for i in range(len(corpus.examples))
        ]
    else:
        classes = tuple(
            c for c in evaluated_classes(config.merge_linke) if c is not ErrorClass.NO_ERROR
        )

        def features(i: int):
            return binary_features(
                {name: PredictionSet(labels=aligned[name][i]) for name in order},
                order, classes,
            )

        if args.fit:
            train = [
                (features(i), ex.gold.labels if ex.gold else frozenset())
                for i, ex in enumerate(corpus.examples)
            ]
            model = logistic_fit(train, seed=config.seed, detector_order=order, classes=classes)
            model.save(args.model_out or config.output_path)
            print(f"fitted ensemble written to {args.model_out or config.output_path}")
            return 0
        if not args.model:
            raise ConfigError("logistic ensemble needs --fit or --model")
        model = LogisticEnsemble.load(_require_file(args.model, "ensemble model"))
        if model.detector_order != tuple(order):
            raise ConfigError(
                f"model expects detectors {model.detector_order}, got {tuple(order)}"
            )
        combined = [logistic_predict(model, features(i)) for i in range(len(corpus.examples))]

    records = predictions_to_records(corpus, dict(enumerate(combined)))
    write_jsonl_atomic(config.output_path, records)
    print(f"{len(records)} combined predictions -> {config.output_path}")
    return 0


def _add_plugin_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scorer", help="scorer id from the registry")
    parser.add_argument("--provider", help="annotator provider id from the registry")
    parser.add_argument("--scorer-table", help="override the scorer's table file")
    parser.add_argument("--provider-table", help="override the provider's table file")
    parser.add_argument("--registry", help="registry file (env FACTERR_REGISTRY overrides)")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="facterr",
        description="Fine-grained factual error detection for dialogue summaries.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("detect", help="run the ranking detector over a corpus")
    p.add_argument("--corpus", required=True, nargs="+")
    _add_plugin_flags(p)
    p.add_argument("--T", type=int, default=3, help="rank threshold (flag rank > T)")
    p.add_argument("--max-candidates", type=int)
    p.add_argument("--merge-linke", action="store_true", help="fold LinkE into Others")
    p.add_argument("--diagnostics", action="store_true", help="keep rank diagnostics")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_detect)

    p = sub.add_parser("corrupt", help="generate synthetic training data")
    p.add_argument("--corpus", required=True, nargs="+")
    _add_plugin_flags(p)
    p.add_argument("--per-class", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_corrupt)

    p = sub.add_parser("tune", help="tune the rank threshold on a validation corpus")
    p.add_argument("--corpus", required=True, nargs="+")
    _add_plugin_flags(p)
    p.add_argument("--grid", type=int, nargs="+", default=list(range(1, 11)))
    p.add_argument("--no-merge-linke", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_tune)

    p = sub.add_parser("evaluate", help="score a prediction file against gold labels")
    p.add_argument("--corpus", required=True, nargs="+")
    p.add_argument("--pred", required=True, help="prediction file (detect output format)")
    p.add_argument("--name", help="row label for the report")
    p.add_argument("--no-merge-linke", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_evaluate)

    p = sub.add_parser("crossval", help="k-fold evaluation of one or more detectors")
    p.add_argument("--corpus", required=True, nargs="+")
    _add_plugin_flags(p)
    p.add_argument("--k", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--T", type=int, help="fix the rank threshold instead of tuning")
    p.add_argument("--max-candidates", type=int)
    p.add_argument("--dae-file", help="dependency-arc judgment file")
    p.add_argument("--qa-file", help="QA span answer file")
    p.add_argument("--qa-threshold", type=float, help="fix the QA threshold instead of tuning")
    p.add_argument(
        "--pred-file", action="append",
        help="name=path of an external prediction file; repeatable",
    )
    p.add_argument(
        "--ensemble", action="append", choices=["freq", "logistic"],
        help="add an ensemble over all base detectors; repeatable",
    )
    p.add_argument("--no-merge-linke", action="store_true")
    p.add_argument("--no-figures", action="store_true")
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=cmd_crossval)

    p = sub.add_parser("stats", help="corpus statistics")
    p.add_argument("--corpus", required=True, nargs="+")
    p.add_argument("--out")
    p.add_argument("--no-figures", action="store_true")
    p.set_defaults(func=cmd_stats)

    p = sub.add_parser("ensemble", help="combine prediction files")
    p.add_argument("--corpus", required=True, nargs="+")
    p.add_argument("--mode", required=True, choices=["freq", "logistic"])
    p.add_argument("--pred", required=True, nargs="+", help="name=path prediction files")
    p.add_argument("--fit", action="store_true", help="fit a logistic ensemble on gold labels")
    p.add_argument("--model", help="fitted logistic ensemble file")
    p.add_argument("--model-out", help="where to write the fitted ensemble")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--no-merge-linke", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_ensemble)

    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except (ConfigError, PluginError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (CorpusFormatError, AdapterError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

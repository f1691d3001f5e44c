"""Report rendering: aligned text tables, TSV records, and figures.

Figures are rendered headlessly to files next to the machine-readable
outputs, one PNG per report.
"""
from __future__ import annotations

import os
import tempfile
from pathlib import Path
from typing import Mapping, Sequence, Union

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

from .core import ErrorClass
from .dataset import StatsReport
from .metrics import AggregateReport, EvalReport, REPORT_CLASS_ORDER

#: Column headers per class, report order.
CLASS_DISPLAY = {
    ErrorClass.NO_ERROR: "NoE",
    ErrorClass.ENTITY: "EntE",
    ErrorClass.CIRCUMSTANCE: "CirE",
    ErrorClass.PREDICATE: "PredE",
    ErrorClass.COREFERENCE: "CorefE",
    ErrorClass.LINK: "LinkE",
    ErrorClass.OTHERS: "Others",
}

Reportish = Union[EvalReport, AggregateReport]

def _save_atomic(fig, path: str | Path) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp_name = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".png")
    os.close(fd)
    try:
        fig.savefig(tmp_name, dpi=150)
        os.replace(tmp_name, path)
    except BaseException:
        try:
            os.unlink(tmp_name)
        except OSError:
            pass
        raise



def _cells(report: Reportish) -> list[str]:
    if isinstance(report, AggregateReport):
        classes = report.mean.classes
        cells = [
            f"{report.mean.per_class_f1[c]:.2f}±{report.std.per_class_f1[c]:.2f}"
            for c in classes
        ]
        cells.append(f"{report.mean.micro_f1:.2f}±{report.std.micro_f1:.2f}")
        cells.append(f"{report.mean.macro_f1:.2f}±{report.std.macro_f1:.2f}")
    else:
        classes = report.classes
        cells = [f"{report.per_class_f1[c]:.2f}" for c in classes]
        cells.append(f"{report.micro_f1:.2f}")
        cells.append(f"{report.macro_f1:.2f}")
    return cells


def _classes_of(report: Reportish) -> tuple[ErrorClass, ...]:
    return report.mean.classes if isinstance(report, AggregateReport) else report.classes


def format_f1_table(reports: Mapping[str, Reportish]) -> str:
    """One aligned row per model: per-class F1 then micro/macro averages."""
    if not reports:
        raise ValueError("nothing to report")
    classes = _classes_of(next(iter(reports.values())))
    header = ["Model"] + [CLASS_DISPLAY[c] for c in classes] + ["Micro Avg", "Macro Avg"]
    rows = [[name] + _cells(report) for name, report in reports.items()]
    widths = [
        max(len(row[i]) for row in [header] + rows) for i in range(len(header))
    ]
    lines = ["  ".join(cell.ljust(w) for cell, w in zip(row, widths)).rstrip()
             for row in [header] + rows]
    return "\n".join(lines)


def f1_table_tsv(reports: Mapping[str, Reportish]) -> str:
    """Long-form TSV: model, class, mean, std, support."""
    lines = ["model\tclass\tmean_f1\tstd_f1\tsupport"]
    for name, report in reports.items():
        if isinstance(report, AggregateReport):
            mean, std = report.mean, report.std
        else:
            mean, std = report, None
        for cls in mean.classes:
            std_value = f"{std.per_class_f1[cls]:.6f}" if std else ""
            lines.append(
                f"{name}\t{CLASS_DISPLAY[cls]}\t{mean.per_class_f1[cls]:.6f}"
                f"\t{std_value}\t{mean.support[cls]:g}"
            )
        micro_std = f"{std.micro_f1:.6f}" if std else ""
        macro_std = f"{std.macro_f1:.6f}" if std else ""
        lines.append(f"{name}\tmicro\t{mean.micro_f1:.6f}\t{micro_std}\t")
        lines.append(f"{name}\tmacro\t{mean.macro_f1:.6f}\t{macro_std}\t")
    return "\n".join(lines) + "\n"


def format_stats_table(stats: StatsReport) -> str:
    lines = [
        f"examples                {stats.example_count}",
        f"inconsistent sentences  {stats.inconsistent_count} "
        f"({100.0 * stats.inconsistent_rate:.1f}%)",
        f"errors per inconsistent {stats.avg_errors_per_inconsistent_sentence:.2f}",
        f"tokens per dialogue     {stats.avg_tokens_per_dialogue:.1f}",
        f"utterances per dialogue {stats.avg_utterances_per_dialogue:.1f}",
        f"tokens per sentence     {stats.avg_tokens_per_sentence:.1f}",
        "",
        "class counts:",
    ]
    for cls in REPORT_CLASS_ORDER:
        lines.append(f"  {CLASS_DISPLAY[cls]:<7} {stats.per_class_counts[cls]}")
    return "\n".join(lines)


def save_f1_figure(reports: Mapping[str, Reportish], path: str | Path) -> None:
    """Grouped per-class F1 bars, one group per class, one bar per model."""
    classes = _classes_of(next(iter(reports.values())))
    labels = [CLASS_DISPLAY[c] for c in classes] + ["Micro", "Macro"]
    n_models = len(reports)
    width = 0.8 / n_models

    fig, ax = plt.subplots(figsize=(1.6 + 1.1 * len(labels), 4.0))
    for slot, (name, report) in enumerate(reports.items()):
        if isinstance(report, AggregateReport):
            means = [report.mean.per_class_f1[c] for c in classes]
            means += [report.mean.micro_f1, report.mean.macro_f1]
            errs = [report.std.per_class_f1[c] for c in classes]
            errs += [report.std.micro_f1, report.std.macro_f1]
        else:
            means = [report.per_class_f1[c] for c in classes]
            means += [report.micro_f1, report.macro_f1]
            errs = None
        offsets = [i + (slot - (n_models - 1) / 2) * width for i in range(len(labels))]
        ax.bar(offsets, means, width=width, yerr=errs, capsize=2, label=name)
    ax.set_xticks(range(len(labels)))
    ax.set_xticklabels(labels)
    ax.set_ylabel("F1")
    ax.set_ylim(0.0, 1.0)
    ax.legend(fontsize="small")
    fig.tight_layout()
    _save_atomic(fig, path)
    plt.close(fig)


def save_stats_figure(stats: StatsReport, path: str | Path) -> None:
    """Bar chart of sentence-level class counts."""
    labels = [CLASS_DISPLAY[c] for c in REPORT_CLASS_ORDER]
    counts = [stats.per_class_counts[c] for c in REPORT_CLASS_ORDER]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.bar(labels, counts, color="steelblue")
    ax.set_ylabel("sentences")
    for i, count in enumerate(counts):
        ax.text(i, count, str(count), ha="center", va="bottom", fontsize=8)
    fig.tight_layout()
    _save_atomic(fig, path)
    plt.close(fig)


def save_threshold_figure(
    curve: Mapping[int, float], chosen: int, path: str | Path
) -> None:
    """Validation macro-F1 against the rank threshold, chosen value marked."""
    thresholds = sorted(curve)
    scores = [curve[t] for t in thresholds]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(thresholds, scores, marker="o")
    ax.axvline(chosen, color="firebrick", linestyle="--", label=f"chosen T={chosen}")
    ax.set_xlabel("rank threshold T")
    ax.set_ylabel("macro F1")
    ax.legend()
    fig.tight_layout()
    _save_atomic(fig, path)
    plt.close(fig)

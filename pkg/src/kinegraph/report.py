"""Evaluation reports: a per-demo CSV table, a JSON summary, and figures.

Figures are rendered headlessly (Agg) so report generation works in batch
jobs. The CSV and JSON writers format deterministically; rerunning on the
same inputs reproduces both files byte for byte.
"""
from __future__ import annotations

import csv
import json
import logging
from pathlib import Path

from .evaluation import EvalReport

LOGGER = logging.getLogger(__name__)

REPORT_FORMAT = "kinegraph-report"
FORMAT_VERSION = 1

CSV_NAME = "report.csv"
SUMMARY_NAME = "summary.json"
RATES_FIGURE = "success_rates.png"
ERROR_FIGURE = "param_error.png"

_CSV_COLUMNS = ("demo_id", "n_estimated", "n_true", "hard", "soft", "param_error_deg")


def write_csv(path: Path, report: EvalReport) -> None:
    """One row per demo; axis error blank when the demo had none to measure."""
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        writer.writerow(_CSV_COLUMNS)
        for result in report.results:
            error = "" if result.param_error_deg is None else f"{result.param_error_deg:.6f}"
            writer.writerow(
                [
                    result.demo_id,
                    result.n_estimated,
                    result.n_true,
                    int(result.hard),
                    int(result.soft),
                    error,
                ]
            )


def summary_to_dict(report: EvalReport) -> dict:
    return {
        "format": REPORT_FORMAT,
        "version": FORMAT_VERSION,
        "n_demos": len(report.results),
        "part_count_success": report.part_count_success,
        "hard_success_rate": report.hard_success_rate,
        "soft_success_rate": report.soft_success_rate,
        "param_error_deg": report.param_error_deg,
        "n_param_excluded": report.n_param_excluded,
    }


def write_summary(path: Path, report: EvalReport) -> None:
    Path(path).write_text(json.dumps(summary_to_dict(report), indent=2) + "\n")


def render_figures(outdir: Path, report: EvalReport) -> list[Path]:
    """Render rate and axis-error figures into ``outdir``; return written paths."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    outdir = Path(outdir)
    written = []

    labels = ["part count", "hard", "soft"]
    rates = [report.part_count_success, report.hard_success_rate, report.soft_success_rate]
    fig, ax = plt.subplots(figsize=(4.5, 3.2))
    bars = ax.bar(labels, rates, color=["#4878d0", "#ee854a", "#6acc64"])
    ax.set_ylim(0.0, 1.05)
    ax.set_ylabel("success rate")
    ax.set_title(f"Graph recovery over {len(report.results)} demos")
    for bar, rate in zip(bars, rates):
        ax.text(
            bar.get_x() + bar.get_width() / 2, rate + 0.02, f"{rate:.2f}", ha="center", fontsize=9
        )
    fig.tight_layout()
    rates_path = outdir / RATES_FIGURE
    fig.savefig(rates_path, dpi=120)
    plt.close(fig)
    written.append(rates_path)

    errors = [r.param_error_deg for r in report.results if r.param_error_deg is not None]
    if errors:
        fig, ax = plt.subplots(figsize=(4.5, 3.2))
        ax.hist(errors, bins=min(20, max(5, len(errors) // 2)), color="#4878d0", edgecolor="white")
        ax.axvline(report.param_error_deg, color="#d65f5f", linestyle="--", label="mean")
        ax.set_xlabel("axis error (degrees)")
        ax.set_ylabel("demos")
        ax.set_title("Joint axis error")
        ax.legend()
        fig.tight_layout()
        error_path = outdir / ERROR_FIGURE
        fig.savefig(error_path, dpi=120)
        plt.close(fig)
        written.append(error_path)
    else:
        LOGGER.warning("no demo had a measurable joint axis; skipping %s", ERROR_FIGURE)

    return written


def write_report(outdir: Path, report: EvalReport, figures: bool = True) -> dict[str, Path]:
    """Write the CSV table and JSON summary, plus figures unless disabled."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    paths = {"csv": outdir / CSV_NAME, "summary": outdir / SUMMARY_NAME}
    write_csv(paths["csv"], report)
    write_summary(paths["summary"], report)
    if figures:
        for figure_path in render_figures(outdir, report):
            paths[figure_path.stem] = figure_path
    return paths

"""Report rendering: delimited tables plus the companion figures.

Figures land next to the CSVs so a run's directory reads as a self-contained
report: per-metric boxplots comparing the training views, the relative-loss
distribution, and the per-drop-count performance spread.
"""

from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .stats import METRIC_NAMES, write_results_csv, write_stats_csv

METRIC_LABELS = {
    "precision": "Precision",
    "recall": "Recall",
    "f1": "F1",
    "kappa": "Cohen kappa",
    "mcc": "MCC",
    "auc": "AUC",
}


def write_losses_csv(rows: list[tuple], path) -> None:
    """relative_loss.csv: project, classifier, metric, value."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["project", "classifier", "metric", "relative_loss"])
        for project, classifier, metric, value in rows:
            writer.writerow([project, classifier, metric, f"{value:.9g}"])


def write_gains_csv(rows: list[tuple], path) -> None:
    """gains.csv: removed_releases, metric, mean relative gain, values used."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["removed_releases", "metric", "mean_gain", "n_used"])
        for k, metric, mean_gain, n_used in rows:
            writer.writerow([k, metric, f"{mean_gain:.9g}", n_used])


def write_permutation_csv(rows: list[tuple], path) -> None:
    """permutation.csv: metric, factor, statistic, iterations, p_value."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["metric", "factor", "statistic", "iterations", "p_value"])
        for metric, factor, statistic, iterations, p_value in rows:
            writer.writerow(
                [metric, factor, f"{statistic:.9g}", iterations, f"{p_value:.9g}"]
            )


def write_spearman_csv(rows: list[tuple], path) -> None:
    """spearman.csv: frequency, metric, rho, p_value."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(["frequency", "metric", "rho", "p_value"])
        for frequency, metric, rho, p_value in rows:
            writer.writerow([frequency, metric, f"{rho:.9g}", f"{p_value:.9g}"])


def _grouped_boxplot(ax, groups: dict[str, list[float]], title: str) -> None:
    labels = list(groups)
    data = [
        [v for v in groups[label] if not math.isnan(v)] or [float("nan")]
        for label in labels
    ]
    ax.boxplot(data, tick_labels=labels, showmeans=True)
    ax.set_title(title)
    ax.set_ylim(-0.05, 1.05)
    ax.grid(True, axis="y", alpha=0.3)


def render_variant_comparison(
    results: list[tuple], variants: list[str], path: Path
) -> None:
    """Per-metric boxplots of results.csv values, grouped by dataset variant."""
    fig, axes = plt.subplots(2, 3, figsize=(13, 7))
    for ax, metric in zip(axes.flat, METRIC_NAMES):
        groups = {
            variant: [
                value
                for _p, _c, v, m, value in results
                if v == variant and m == metric
            ]
            for variant in variants
        }
        _grouped_boxplot(ax, groups, METRIC_LABELS[metric])
    fig.suptitle("Classifier performance by training view")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_loss_distribution(losses: list[tuple], path: Path) -> None:
    """Boxplot of per-(project, classifier) relative loss, one box per metric."""
    fig, ax = plt.subplots(figsize=(9, 5))
    data = []
    labels = []
    for metric in METRIC_NAMES:
        values = [
            value
            for _p, _c, m, value in losses
            if m == metric and not math.isnan(value)
        ]
        data.append(values or [float("nan")])
        labels.append(METRIC_LABELS[metric])
    ax.boxplot(data, tick_labels=labels, showmeans=True)
    ax.set_ylabel("relative loss")
    ax.set_title("Relative loss caused by dormant-defect noise")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def render_gain_by_k(results: list[tuple], ks: list[int], path: Path) -> None:
    """Per-metric boxplots of performance for each drop count."""
    variants = [f"TrS-{k}" for k in ks]
    fig, axes = plt.subplots(2, 3, figsize=(13, 7))
    for ax, metric in zip(axes.flat, METRIC_NAMES):
        groups = {
            str(k): [
                value
                for _p, _c, v, m, value in results
                if v == f"TrS-{k}" and m == metric
            ]
            for k in ks
        }
        _grouped_boxplot(ax, groups, METRIC_LABELS[metric])
        ax.set_xlabel("removed releases")
    fig.suptitle("Performance after dropping recent non-defective rows")
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def write_rq1_report(output, out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_results_csv(output.results, out_dir / "results.csv")
    write_losses_csv(output.losses, out_dir / "relative_loss.csv")
    write_stats_csv(output.stats, out_dir / "stats.csv")
    write_spearman_csv(output.spearman, out_dir / "spearman.csv")
    figures = out_dir / "figures"
    figures.mkdir(exist_ok=True)
    render_variant_comparison(
        output.results, ["TrNS", "TrS"], figures / "performance_by_view.png"
    )
    render_loss_distribution(output.losses, figures / "relative_loss.png")


def write_rq2_report(output, ks: list[int], out_dir: Path) -> None:
    out_dir.mkdir(parents=True, exist_ok=True)
    write_results_csv(output.results, out_dir / "results.csv")
    write_gains_csv(output.gains, out_dir / "gains.csv")
    write_stats_csv(output.stats, out_dir / "stats.csv")
    write_permutation_csv(output.permutation, out_dir / "permutation.csv")
    write_spearman_csv(output.spearman, out_dir / "spearman.csv")
    figures = out_dir / "figures"
    figures.mkdir(exist_ok=True)
    render_gain_by_k(output.results, ks, figures / "performance_by_k.png")

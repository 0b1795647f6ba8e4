"""Figure rendering for the CLI report paths.

Each function writes one PNG next to the delimited output it illustrates.
The metrics module stays plot-free; everything here consumes its tables.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

_DPI = 150


def _finish(fig, path):
    fig.tight_layout()
    fig.savefig(Path(path), dpi=_DPI)
    plt.close(fig)


def plot_binned_quality(rows, path) -> None:
    """Cumulative judgment quality against the time threshold."""
    thresholds = [r.threshold for r in rows]
    fig, ax = plt.subplots(figsize=(6, 4))
    binary = rows and rows[0].precision is not None
    if binary:
        ax.plot(thresholds, [r.precision for r in rows], "o-", label="precision")
        ax.plot(thresholds, [r.recall for r in rows], "s-", label="recall")
    ax.plot(thresholds, [r.accuracy for r in rows], "^--", label="accuracy")
    ax.set_xscale("log")
    ax.set_xlabel("time threshold (s)")
    ax.set_ylabel("quality of judgments with time <= threshold")
    ax.set_ylim(0, 1.05)
    ax.legend()
    ax.set_title("Judgment quality by completion time")
    _finish(fig, path)


def plot_task_correlation(rows, path) -> None:
    """Per-task time/correctness correlation coefficients."""
    defined = [r for r in rows if r.defined]
    fig, ax = plt.subplots(figsize=(7, 4))
    if defined:
        xs = np.arange(len(defined))
        colors = ["tab:red" if r.p_value < 0.05 else "tab:gray" for r in defined]
        ax.bar(xs, [r.pearson_r for r in defined], color=colors)
        ax.set_xticks(xs)
        ax.set_xticklabels([r.task_id for r in defined], rotation=90, fontsize=6)
    ax.axhline(0.0, color="black", linewidth=0.8)
    ax.set_ylabel("Pearson r (time vs correctness)")
    ax.set_title("Quality-time correlation per task (red: p < 0.05)")
    _finish(fig, path)


def plot_method_comparison(reports, path) -> None:
    """Bar chart of each method's headline metric."""
    names = [r.method_name for r in reports]
    binary = any(r.auc is not None for r in reports)
    values = [r.auc if binary and r.auc is not None else r.average_recall
              for r in reports]
    metric = "AUC" if binary else "average recall"
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.bar(names, values, color="tab:blue")
    ax.set_ylabel(metric)
    ax.set_ylim(0, 1.05)
    ax.set_title(f"Method comparison ({metric})")
    ax.tick_params(axis="x", rotation=45)
    _finish(fig, path)


def plot_subsample_curves(rows_by_method, path) -> None:
    """Headline metric against the judgment subsample fraction."""
    fig, ax = plt.subplots(figsize=(6, 4))
    metric = "metric"
    for name, rows in rows_by_method.items():
        fr = [r.fraction for r in rows]
        mean = [r.mean for r in rows]
        sd = [r.sd for r in rows]
        metric = rows[0].metric_name if rows else metric
        ax.errorbar(fr, mean, yerr=sd, marker="o", capsize=3, label=name)
    ax.set_xlabel("fraction of judgments")
    ax.set_ylabel(metric)
    ax.legend()
    ax.set_title("Accuracy over judgment subsamples")
    _finish(fig, path)


def plot_durations(durations, observed_max, observed_mean, path) -> None:
    """Inferred window bounds against observed times, per task."""
    order = np.argsort(observed_max)
    xs = np.arange(len(order))
    upper = np.array([durations[i].interval_seconds[1] for i in order])
    half_width = np.array([
        (durations[i].interval_seconds[1] - durations[i].interval_seconds[0]) / 2.0
        for i in order
    ])
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
    ax1.plot(xs, observed_max[order], "*", markersize=3, label="observed max time")
    ax1.plot(xs, upper, "+", markersize=3, label="inferred upper bound")
    ax1.set_yscale("log")
    ax1.set_xlabel("tasks (sorted by observed max)")
    ax1.set_ylabel("seconds")
    ax1.legend()
    ax1.set_title("Maximum time spent per task")
    ax2.plot(xs, observed_mean[order], "*", markersize=3, label="observed mean time")
    ax2.plot(xs, half_width, "+", markersize=3, label="inferred avg duration")
    ax2.set_yscale("log")
    ax2.set_xlabel("tasks (sorted by observed max)")
    ax2.set_ylabel("seconds")
    ax2.legend()
    ax2.set_title("Average duration per task")
    _finish(fig, path)

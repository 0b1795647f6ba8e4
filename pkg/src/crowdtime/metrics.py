"""Evaluation metrics and quality-versus-time analyses.

All functions are pure; tables come back as lists of dataclass rows that the
CLI serializes to CSV (and optionally renders as figures).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping

import numpy as np
from scipy.stats import pearsonr, rankdata

from .data import Dataset
from .errors import (
    EmptyInput,
    FractionTooSmall,
    MissingGold,
    SingleClassGold,
)
from .results import PosteriorSummary

_SUBSAMPLE_RETRIES = 100


@dataclass(frozen=True)
class EvaluationReport:
    """Headline metrics of one aggregation method against gold labels."""

    method_name: str
    auc: float | None
    average_recall: float
    accuracy: float
    per_class_recall: tuple[float, ...]
    n_tasks_scored: int


def roc_auc(scores: Mapping[str, float], gold: Mapping[str, int]) -> float:
    """Tie-aware ROC area: P(pos outscores neg) + half the tie probability.

    Computed from midranks, so constant scores give exactly 0.5.
    """
    tasks = list(scores)
    if not tasks:
        raise EmptyInput("no scores to rank")
    missing = [t for t in tasks if t not in gold]
    if missing:
        raise MissingGold(f"no gold label for task {missing[0]!r}")
    y = np.array([gold[t] for t in tasks], dtype=np.int64)
    if set(np.unique(y)) - {0, 1}:
        raise ValueError("gold labels must be 0/1 for ROC analysis")
    n_pos = int(np.sum(y == 1))
    n_neg = y.size - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassGold("gold contains a single class")
    s = np.array([scores[t] for t in tasks], dtype=float)
    ranks = rankdata(s, method="average")
    pos_rank_sum = float(ranks[y == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def average_recall(predictions: Mapping[str, int], gold: Mapping[str, int],
                   class_count: int) -> float:
    """Recall averaged over the classes that actually occur in the gold set."""
    if not predictions:
        raise EmptyInput("no predictions")
    missing = [t for t in predictions if t not in gold]
    if missing:
        raise MissingGold(f"no gold label for task {missing[0]!r}")
    correct = np.zeros(class_count)
    totals = np.zeros(class_count)
    for task, pred in predictions.items():
        g = gold[task]
        totals[g] += 1
        if pred == g:
            correct[g] += 1
    present = totals > 0
    return float(np.mean(correct[present] / totals[present]))


def per_class_recall(predictions: Mapping[str, int], gold: Mapping[str, int],
                     class_count: int) -> tuple[float, ...]:
    """Recall per class; NaN for classes absent from the gold set."""
    correct = np.zeros(class_count)
    totals = np.zeros(class_count)
    for task, pred in predictions.items():
        g = gold[task]
        totals[g] += 1
        if pred == g:
            correct[g] += 1
    out = np.full(class_count, np.nan)
    present = totals > 0
    out[present] = correct[present] / totals[present]
    return tuple(float(x) for x in out)


def evaluate_summary(summary: PosteriorSummary, d: Dataset,
                     positive_class: int = 1) -> EvaluationReport:
    """Score a posterior summary against the dataset's gold labels."""
    if not d.gold:
        raise MissingGold("evaluation requires gold labels")
    predictions = {t: l for t, l in summary.hard_labels().items() if t in d.gold}
    if not predictions:
        raise EmptyInput("no task with both a prediction and a gold label")
    n_correct = sum(1 for t, l in predictions.items() if l == d.gold[t])
    recalls = per_class_recall(predictions, d.gold, d.n_classes)
    auc = None
    if d.n_classes == 2:
        gold_binary = {t: int(d.gold[t] == positive_class) for t in predictions}
        if len(set(gold_binary.values())) == 2:
            scores = {t: s for t, s in summary.scores(positive_class).items()
                      if t in predictions}
            auc = roc_auc(scores, gold_binary)
    return EvaluationReport(
        method_name=summary.method_name,
        auc=auc,
        average_recall=average_recall(predictions, d.gold, d.n_classes),
        accuracy=n_correct / len(predictions),
        per_class_recall=recalls,
        n_tasks_scored=len(predictions),
    )


@dataclass(frozen=True)
class BinnedQualityRow:
    """Judgment quality within the cumulative subset of times <= threshold."""

    threshold: float
    n_judgments: int
    n_correct: int
    accuracy: float | None
    tp: int | None = None
    fp: int | None = None
    fn: int | None = None
    precision: float | None = None
    recall: float | None = None


def time_binned_quality(d: Dataset, bin_edges) -> list[BinnedQualityRow]:
    """Fig-style cumulative quality table: one row per time threshold.

    Precision and recall (positive class = 1) are computed within each
    cumulative subset and are only emitted for binary datasets; accuracy is
    emitted for any class count.
    """
    if not d.gold:
        raise MissingGold("time-binned quality requires gold labels")
    edges = [float(e) for e in bin_edges]
    if sorted(edges) != edges:
        raise ValueError("bin edges must be sorted ascending")
    gold = d.gold_array()[d.task_idx]
    scored = gold >= 0
    times = d.times[scored]
    labels = d.labels[scored]
    gold = gold[scored]
    binary = d.n_classes == 2

    rows = []
    for edge in edges:
        sel = times <= edge
        n = int(sel.sum())
        correct = int(np.sum(labels[sel] == gold[sel]))
        row = dict(threshold=edge, n_judgments=n, n_correct=correct,
                   accuracy=(correct / n) if n else None)
        if binary:
            tp = int(np.sum((labels[sel] == 1) & (gold[sel] == 1)))
            fp = int(np.sum((labels[sel] == 1) & (gold[sel] == 0)))
            fn = int(np.sum((labels[sel] == 0) & (gold[sel] == 1)))
            row.update(
                tp=tp, fp=fp, fn=fn,
                precision=tp / (tp + fp) if tp + fp else None,
                recall=tp / (tp + fn) if tp + fn else None,
            )
        rows.append(BinnedQualityRow(**row))
    return rows


@dataclass(frozen=True)
class TaskCorrelationRow:
    """Pearson correlation between completion time and judgment correctness."""

    task_id: str
    n: int
    pearson_r: float | None
    p_value: float | None
    defined: bool


def per_task_quality_time(d: Dataset, min_judgments: int = 10) -> list[TaskCorrelationRow]:
    """Per-task time/correctness correlation with a t-test two-sided p-value.

    Tasks where either variable has zero variance report an undefined
    correlation (flagged rather than NaN-propagated).
    """
    if not d.gold:
        raise MissingGold("per-task correlation requires gold labels")
    gold = d.gold_array()[d.task_idx]
    rows = []
    for i, task_id in enumerate(d.task_ids):
        sel = (d.task_idx == i) & (gold >= 0)
        n = int(sel.sum())
        if n < max(min_judgments, 2):
            continue
        times = d.times[sel]
        correct = (d.labels[sel] == gold[sel]).astype(float)
        if np.ptp(times) == 0 or np.ptp(correct) == 0:
            rows.append(TaskCorrelationRow(task_id, n, None, None, False))
            continue
        r, p = pearsonr(times, correct)
        rows.append(TaskCorrelationRow(task_id, n, float(r), float(p), True))
    return rows


@dataclass(frozen=True)
class SubsampleRow:
    fraction: float
    repeats: int
    metric_name: str
    mean: float
    sd: float


def _headline_metric(summary: PosteriorSummary, d: Dataset,
                     positive_class: int = 1) -> tuple[str, float]:
    report = evaluate_summary(summary, d, positive_class)
    if d.n_classes == 2 and report.auc is not None:
        return "auc", report.auc
    return "average_recall", report.average_recall


def _draw_subset(d: Dataset, fraction: float, rng) -> Dataset:
    n_keep = int(round(fraction * d.n_judgments))
    if n_keep < d.n_tasks:
        raise FractionTooSmall(
            f"fraction {fraction} keeps {n_keep} judgments for {d.n_tasks} tasks"
        )
    for _ in range(_SUBSAMPLE_RETRIES):
        picked = rng.generator.choice(d.n_judgments, size=n_keep, replace=False)
        picked.sort()
        covered = np.bincount(d.task_idx[picked], minlength=d.n_tasks)
        if np.all(covered > 0):
            return d.subset(picked)
    raise FractionTooSmall(
        f"fraction {fraction} kept losing all judgments of some task "
        f"after {_SUBSAMPLE_RETRIES} retries"
    )


def subsample_curve(d: Dataset, fractions, method: Callable[[Dataset], PosteriorSummary],
                    seed: int, repeats: int = 5,
                    positive_class: int = 1) -> list[SubsampleRow]:
    """Headline metric of an aggregator over increasingly large judgment subsets.

    Each (fraction, repeat) cell gets its own derived seed; fraction 1.0 uses
    the full dataset, so it reproduces the full-data metric exactly.
    """
    from .rng import RandomSource

    if not d.gold:
        raise MissingGold("subsample analysis requires gold labels")
    fractions = [float(f) for f in fractions]
    if sorted(fractions) != fractions or not fractions:
        raise ValueError("fractions must be a non-empty ascending list")
    if any(not 0 < f <= 1 for f in fractions):
        raise ValueError("fractions must lie in (0, 1]")
    if repeats < 1:
        raise ValueError("repeats must be positive")
    sources = RandomSource(seed).spawn(len(fractions) * repeats)
    rows = []
    for fi, fraction in enumerate(fractions):
        values = []
        metric_name = ""
        for rep in range(repeats):
            rng = sources[fi * repeats + rep]
            subset = d if fraction == 1.0 else _draw_subset(d, fraction, rng)
            summary = method(subset)
            metric_name, value = _headline_metric(summary, subset, positive_class)
            values.append(value)
        arr = np.asarray(values)
        sd = float(arr.std(ddof=1)) if repeats > 1 else 0.0
        rows.append(SubsampleRow(fraction, repeats, metric_name,
                                 float(arr.mean()), sd))
    return rows

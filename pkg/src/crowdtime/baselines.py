"""Non-learning aggregation baselines: majority vote, vote distribution, uniform."""

from __future__ import annotations

import numpy as np

from .data import Dataset
from .errors import TaskWithoutJudgments


def vote_counts(d: Dataset) -> np.ndarray:
    """Per-task label counts, shape (n_tasks, n_classes)."""
    counts = np.zeros((d.n_tasks, d.n_classes), dtype=np.int64)
    np.add.at(counts, (d.task_idx, d.labels), 1)
    return counts


def _require_votes(counts: np.ndarray, d: Dataset) -> None:
    empty = np.flatnonzero(counts.sum(axis=1) == 0)
    if empty.size:
        raise TaskWithoutJudgments(f"task {d.task_ids[empty[0]]!r} has no judgments")


def majority_vote_labels(d: Dataset) -> np.ndarray:
    """Winning label per dense task index; ties go to the lowest label."""
    counts = vote_counts(d)
    _require_votes(counts, d)
    return np.argmax(counts, axis=1)


def majority_vote(d: Dataset) -> dict[str, np.ndarray]:
    """Point mass on the most-voted label (ties toward the lowest index)."""
    winners = majority_vote_labels(d)
    eye = np.eye(d.n_classes)
    return {t: eye[winners[i]] for i, t in enumerate(d.task_ids)}


def vote_distribution(d: Dataset) -> dict[str, np.ndarray]:
    """Empirical label frequencies among each task's judgments."""
    counts = vote_counts(d)
    _require_votes(counts, d)
    probs = counts / counts.sum(axis=1, keepdims=True)
    return {t: probs[i] for i, t in enumerate(d.task_ids)}


def random_baseline(d: Dataset) -> dict[str, np.ndarray]:
    """Uniform distribution over the label classes for every task."""
    uniform = np.full(d.n_classes, 1.0 / d.n_classes)
    return {t: uniform.copy() for t in d.task_ids}

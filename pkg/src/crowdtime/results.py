"""Result containers shared by every aggregator."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .data import Dataset


@dataclass(frozen=True)
class TaskDuration:
    """Posterior statistics of one task's completion-time window.

    Means and standard deviations are in transformed-time units;
    ``interval_seconds`` maps the bounds back to seconds.  ``half_width``
    is the average-duration statistic ``(upper_mean - lower_mean) / 2``
    and ``midpoint`` the window center, both in transformed units.
    """

    task_id: str
    lower_mean: float
    lower_sd: float
    upper_mean: float
    upper_sd: float
    interval_seconds: tuple[float, float]
    half_width: float
    midpoint: float


@dataclass
class PosteriorSummary:
    """Everything an aggregator learned, keyed by the input dataset's ids.

    ``label_probs`` has one row per task in dense-index order.  Worker-level
    and judgment-level fields are ``None`` for models that do not produce
    them.  ``validity`` is aligned with the dataset's judgment order.
    """

    method_name: str
    task_ids: tuple[str, ...]
    label_probs: np.ndarray
    worker_ids: tuple[str, ...] | None = None
    confusion: np.ndarray | None = None
    propensity: np.ndarray | None = None
    validity: np.ndarray | None = None
    duration_stats: np.ndarray | None = None
    durations: list[TaskDuration] | None = None
    community_probs: np.ndarray | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        probs = np.asarray(self.label_probs, dtype=float)
        if probs.ndim != 2 or probs.shape[0] != len(self.task_ids):
            raise ValueError("label_probs must have one row per task")
        if np.any(probs < -1e-9) or np.any(np.abs(probs.sum(axis=1) - 1.0) > 1e-6):
            raise ValueError("label_probs rows must be distributions")
        self.label_probs = probs

    @property
    def n_classes(self) -> int:
        return self.label_probs.shape[1]

    def label_map(self) -> dict[str, np.ndarray]:
        return {t: self.label_probs[i] for i, t in enumerate(self.task_ids)}

    def hard_labels(self) -> dict[str, int]:
        """Argmax labels with ties broken toward the lowest index."""
        winners = np.argmax(self.label_probs, axis=1)
        return {t: int(winners[i]) for i, t in enumerate(self.task_ids)}

    def scores(self, positive_class: int = 1) -> dict[str, float]:
        """Per-task probability of the positive class (binary ranking score)."""
        col = self.label_probs[:, positive_class]
        return {t: float(col[i]) for i, t in enumerate(self.task_ids)}

    @classmethod
    def from_label_map(cls, method_name: str, dataset: Dataset,
                       label_map: dict[str, np.ndarray], **kwargs) -> "PosteriorSummary":
        probs = np.vstack([label_map[t] for t in dataset.task_ids])
        return cls(method_name=method_name, task_ids=dataset.task_ids,
                   label_probs=probs, **kwargs)

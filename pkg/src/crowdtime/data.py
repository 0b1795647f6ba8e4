"""Judgment data model, CSV ingestion and validation, and the time transform.

A :class:`Dataset` is immutable after construction and safe to share
read-only across concurrent fits.  Labels are dense integers in ``[0, C)``
internally; string labels in files are mapped through :class:`LabelSpace`.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from datetime import datetime
from pathlib import Path

import numpy as np

from .errors import (
    DuplicateJudgment,
    EmptyInput,
    LabelOutOfRange,
    MalformedRow,
    NonPositiveTime,
)

JUDGMENT_FIELDS = ("task_id", "worker_id", "label", "time_seconds")
TIMESTAMP_FIELDS = ("accept_ts", "submit_ts")
GOLD_FIELDS = ("task_id", "gold_label")


@dataclass(frozen=True)
class LabelSpace:
    """The C label classes; labels are dense integers in [0, C)."""

    class_count: int
    class_names: tuple[str, ...] | None = None

    def __post_init__(self):
        if self.class_count < 2:
            raise ValueError("label space needs at least two classes")
        if self.class_names is not None:
            names = tuple(str(n) for n in self.class_names)
            if len(names) != self.class_count:
                raise ValueError("class_names length must equal class_count")
            if len(set(names)) != len(names):
                raise ValueError("class_names must be distinct")
            object.__setattr__(self, "class_names", names)

    def names(self) -> tuple[str, ...]:
        if self.class_names is not None:
            return self.class_names
        return tuple(str(c) for c in range(self.class_count))

    def parse_label(self, text: str) -> int:
        """Map a file label (dense integer or class name) to its index."""
        text = text.strip()
        try:
            value = int(text)
        except ValueError:
            if self.class_names is not None and text in self.class_names:
                return self.class_names.index(text)
            raise LabelOutOfRange(f"unknown label {text!r}")
        if not 0 <= value < self.class_count:
            raise LabelOutOfRange(
                f"label {value} outside [0, {self.class_count})"
            )
        return value


@dataclass(frozen=True)
class Judgment:
    """One worker's label for one task, with the completion time.

    ``time`` is in seconds on ingestion; after ``transform_times(d, "log")``
    it holds the natural log of the seconds.
    """

    task_id: str
    worker_id: str
    label: int
    time: float


class Dataset:
    """An immutable judgment set with dense task and worker indices."""

    def __init__(self, label_space: LabelSpace, judgments, gold=None,
                 time_transform: str = "none"):
        if time_transform not in ("none", "log"):
            raise ValueError(f"unknown time transform {time_transform!r}")
        self.label_space = label_space
        self.judgments = tuple(judgments)
        self.time_transform = time_transform
        if not self.judgments:
            raise EmptyInput("a dataset needs at least one judgment")

        task_index: dict[str, int] = {}
        worker_index: dict[str, int] = {}
        seen: set[tuple[str, str]] = set()
        C = label_space.class_count
        for j in self.judgments:
            if not 0 <= j.label < C:
                raise LabelOutOfRange(
                    f"label {j.label} outside [0, {C}) for task {j.task_id!r}"
                )
            if time_transform == "none" and not j.time > 0:
                raise NonPositiveTime(
                    f"non-positive time {j.time} for task {j.task_id!r}, "
                    f"worker {j.worker_id!r}"
                )
            if not math.isfinite(j.time):
                raise NonPositiveTime(f"non-finite time for task {j.task_id!r}")
            key = (j.task_id, j.worker_id)
            if key in seen:
                raise DuplicateJudgment(j.task_id, j.worker_id)
            seen.add(key)
            task_index.setdefault(j.task_id, len(task_index))
            worker_index.setdefault(j.worker_id, len(worker_index))

        self.task_index = task_index
        self.worker_index = worker_index
        self.task_ids = tuple(task_index)
        self.worker_ids = tuple(worker_index)

        self.task_idx = np.fromiter(
            (task_index[j.task_id] for j in self.judgments), dtype=np.int64
        )
        self.worker_idx = np.fromiter(
            (worker_index[j.worker_id] for j in self.judgments), dtype=np.int64
        )
        self.labels = np.fromiter((j.label for j in self.judgments), dtype=np.int64)
        self.times = np.fromiter((j.time for j in self.judgments), dtype=float)
        for arr in (self.task_idx, self.worker_idx, self.labels, self.times):
            arr.setflags(write=False)

        if gold:
            for task_id, label in gold.items():
                if not 0 <= label < C:
                    raise LabelOutOfRange(
                        f"gold label {label} outside [0, {C}) for task {task_id!r}"
                    )
            # gold rows for tasks that never received a judgment are dropped
            self.gold = {t: int(g) for t, g in gold.items() if t in task_index}
        else:
            self.gold = None

    @property
    def n_tasks(self) -> int:
        return len(self.task_ids)

    @property
    def n_workers(self) -> int:
        return len(self.worker_ids)

    @property
    def n_judgments(self) -> int:
        return len(self.judgments)

    @property
    def n_classes(self) -> int:
        return self.label_space.class_count

    def gold_array(self) -> np.ndarray:
        """Gold labels per dense task index, -1 where absent."""
        out = np.full(self.n_tasks, -1, dtype=np.int64)
        if self.gold:
            for task_id, label in self.gold.items():
                out[self.task_index[task_id]] = label
        return out

    def subset(self, judgment_indices) -> "Dataset":
        """Dataset restricted to the given judgment positions (order kept)."""
        picked = [self.judgments[i] for i in judgment_indices]
        return Dataset(self.label_space, picked, gold=self.gold,
                       time_transform=self.time_transform)


@dataclass(frozen=True)
class DatasetStats:
    n_judgments: int
    n_tasks: int
    n_workers: int
    n_classes: int
    judgments_per_task: float
    judgments_per_worker: float
    judgment_accuracy: float | None


def dataset_stats(d: Dataset) -> DatasetStats:
    """Headline counts plus raw judgment accuracy when gold is available."""
    accuracy = None
    if d.gold:
        gold = d.gold_array()[d.task_idx]
        scored = gold >= 0
        if scored.any():
            accuracy = float(np.mean(d.labels[scored] == gold[scored]))
    return DatasetStats(
        n_judgments=d.n_judgments,
        n_tasks=d.n_tasks,
        n_workers=d.n_workers,
        n_classes=d.n_classes,
        judgments_per_task=d.n_judgments / d.n_tasks,
        judgments_per_worker=d.n_judgments / d.n_workers,
        judgment_accuracy=accuracy,
    )


def transform_times(d: Dataset, mode: str) -> Dataset:
    """Apply the time transform; ``log`` takes the natural logarithm.

    The transform is recorded on the returned dataset so duration outputs can
    be mapped back to seconds.
    """
    if mode not in ("none", "log"):
        raise ValueError(f"unknown time transform {mode!r}")
    if mode == "none":
        return d
    if d.time_transform != "none":
        raise ValueError("dataset times are already transformed")
    transformed = [
        Judgment(j.task_id, j.worker_id, j.label, math.log(j.time))
        for j in d.judgments
    ]
    return Dataset(d.label_space, transformed, gold=d.gold, time_transform="log")


def untransform_seconds(value: float, transform: str) -> float:
    """Map a transformed time value back to seconds."""
    if transform == "log":
        return math.exp(value)
    return value


def _parse_iso(ts: str, line_num: int) -> datetime:
    try:
        return datetime.fromisoformat(ts.strip().replace("Z", "+00:00"))
    except ValueError:
        raise MalformedRow(line_num, f"bad ISO-8601 timestamp {ts!r}")


def _row_time(row: dict, line_num: int) -> float:
    raw = (row.get("time_seconds") or "").strip()
    if raw:
        try:
            return float(raw)
        except ValueError:
            raise MalformedRow(line_num, f"bad time_seconds {raw!r}")
    accept = row.get("accept_ts")
    submit = row.get("submit_ts")
    if accept and submit:
        delta = _parse_iso(submit, line_num) - _parse_iso(accept, line_num)
        return delta.total_seconds()
    raise MalformedRow(line_num, "missing time_seconds (or accept_ts/submit_ts)")


def load_judgments_csv(path, label_space: LabelSpace, gold_path=None) -> Dataset:
    """Load and validate a judgment CSV (UTF-8, one judgment per row).

    Header: ``task_id,worker_id,label,time_seconds``; the optional columns
    ``accept_ts,submit_ts`` (ISO-8601) are used when ``time_seconds`` is
    absent.  Duplicate (task, worker) rows and non-positive times are errors.
    """
    path = Path(path)
    judgments = []
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in ("task_id", "worker_id", "label"):
            if col not in header:
                raise MalformedRow(1, f"missing column {col!r}")
        if "time_seconds" not in header and not all(
            c in header for c in TIMESTAMP_FIELDS
        ):
            raise MalformedRow(1, "need time_seconds or accept_ts/submit_ts columns")
        for row in reader:
            line_num = reader.line_num
            task_id = (row.get("task_id") or "").strip()
            worker_id = (row.get("worker_id") or "").strip()
            label_text = (row.get("label") or "").strip()
            if not task_id or not worker_id or not label_text:
                raise MalformedRow(line_num, "empty task_id, worker_id or label")
            label = label_space.parse_label(label_text)
            time = _row_time(row, line_num)
            if not time > 0:
                raise NonPositiveTime(
                    f"line {line_num}: non-positive time {time} for task "
                    f"{task_id!r}, worker {worker_id!r}"
                )
            judgments.append(Judgment(task_id, worker_id, label, time))
    gold = load_gold_csv(gold_path, label_space) if gold_path else None
    return Dataset(label_space, judgments, gold=gold)


def load_gold_csv(path, label_space: LabelSpace) -> dict[str, int]:
    """Load a gold CSV with header ``task_id,gold_label``."""
    path = Path(path)
    gold: dict[str, int] = {}
    with path.open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        for col in GOLD_FIELDS:
            if col not in header:
                raise MalformedRow(1, f"missing column {col!r}")
        for row in reader:
            line_num = reader.line_num
            task_id = (row.get("task_id") or "").strip()
            label_text = (row.get("gold_label") or "").strip()
            if not task_id or not label_text:
                raise MalformedRow(line_num, "empty task_id or gold_label")
            if task_id in gold:
                raise MalformedRow(line_num, f"duplicate gold row for {task_id!r}")
            gold[task_id] = label_space.parse_label(label_text)
    return gold


def save_judgments_csv(d: Dataset, path) -> None:
    """Write the judgment CSV; times are always stored in seconds."""
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(JUDGMENT_FIELDS)
        for j in d.judgments:
            seconds = untransform_seconds(j.time, d.time_transform)
            writer.writerow([j.task_id, j.worker_id, j.label, repr(seconds)])


def save_gold_csv(gold: dict[str, int], path) -> None:
    path = Path(path)
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(GOLD_FIELDS)
        for task_id, label in gold.items():
            writer.writerow([task_id, label])


@dataclass(frozen=True)
class Hyperparameters:
    """Prior parameters shared by the Bayesian aggregators.

    ``p0``/``s0`` are Dirichlet pseudo-counts for the class proportions and
    the spam label distribution.  ``pi0_diag``/``pi0_offdiag`` build each
    confusion-matrix prior row: the diagonal entry gets ``pi0_diag`` and
    ``pi0_offdiag`` is spread uniformly over the other entries, so the prior
    mean says workers beat random guessing.  Threshold prior means live in
    the same units as the (possibly transformed) completion times.
    """

    p0: tuple[float, ...]
    s0: tuple[float, ...]
    alpha0: float
    beta0: float
    pi0_diag: float = 0.7
    pi0_offdiag: float = 0.3
    sigma0_mean: float = math.log(10.0)
    gamma0_precision: float = 0.1
    lambda0_mean: float = math.log(50.0)
    delta0_precision: float = 0.1
    time_transform: str = "log"

    def __post_init__(self):
        object.__setattr__(self, "p0", tuple(float(x) for x in self.p0))
        object.__setattr__(self, "s0", tuple(float(x) for x in self.s0))
        if len(self.p0) != len(self.s0) or len(self.p0) < 2:
            raise ValueError("p0 and s0 must both have one entry per class")
        positives = (
            list(self.p0) + list(self.s0)
            + [self.alpha0, self.beta0, self.pi0_diag, self.pi0_offdiag,
               self.gamma0_precision, self.delta0_precision]
        )
        if any(not x > 0 for x in positives):
            raise ValueError("pseudo-counts and precisions must be positive")
        if not self.sigma0_mean < self.lambda0_mean:
            raise ValueError("sigma0_mean must be below lambda0_mean")
        if self.time_transform not in ("none", "log"):
            raise ValueError(f"unknown time transform {self.time_transform!r}")

    @property
    def class_count(self) -> int:
        return len(self.p0)

    def confusion_prior_rows(self) -> np.ndarray:
        """Per-class Dirichlet pseudo-count rows of the confusion prior."""
        C = self.class_count
        rows = np.full((C, C), self.pi0_offdiag / (C - 1))
        np.fill_diagonal(rows, self.pi0_diag)
        return rows

    @classmethod
    def defaults(cls, class_count: int, task_count: int,
                 time_transform: str = "log", **overrides) -> "Hyperparameters":
        """Default priors: uniform unit counts for ``p``/``s``, a 0.7-diagonal
        confusion prior, a propensity prior worth 70% of the task count, and
        a 10-to-50-second completion window (log-space when transformed)."""
        base = dict(
            p0=(1.0,) * class_count,
            s0=(1.0,) * class_count,
            alpha0=0.7 * task_count,
            beta0=0.3 * task_count,
            time_transform=time_transform,
        )
        if time_transform == "none":
            base.update(sigma0_mean=10.0, lambda0_mean=50.0)
        base.update(overrides)
        return cls(**base)


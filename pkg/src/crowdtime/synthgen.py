"""Forward sampler of the generative process, for verification datasets.

Reliable workers label through a confusion matrix with a configured diagonal
and complete tasks inside a planted log-time window; spammers label uniformly
and finish well outside the window, either too fast or too slow.  Spammers
are treated as high-throughput (they attempt a configurable fraction of all
tasks, every task by default), mirroring how bots flood real judgment pools.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .data import Dataset, Judgment, LabelSpace, save_gold_csv, save_judgments_csv
from .errors import ConfigInvalid
from .rng import RandomSource, sample_categorical_rows

# spam times land outside the window by this fraction range of log(outlier_scale)
SPAM_OFFSET_RANGE = (0.25, 1.0)


@dataclass(frozen=True)
class SynthConfig:
    n_tasks: int
    n_workers: int
    n_classes: int = 2
    spammer_fraction: float = 0.0
    reliable_accuracy: float = 0.85
    planted_window: tuple[float, float] = (math.log(10.0), math.log(50.0))
    outlier_scale: float = 50.0
    judgments_per_task: int = 5
    spammer_task_rate: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.n_tasks < 1 or self.n_workers < 1:
            raise ConfigInvalid("need at least one task and one worker")
        if self.n_classes < 2:
            raise ConfigInvalid("need at least two classes")
        if not 0 <= self.spammer_fraction < 1:
            raise ConfigInvalid("spammer_fraction must lie in [0, 1)")
        if not 1.0 / self.n_classes < self.reliable_accuracy <= 1.0:
            raise ConfigInvalid("reliable_accuracy must beat random guessing")
        low, high = self.planted_window
        if not low < high:
            raise ConfigInvalid("planted window lower bound must be below upper")
        if not self.outlier_scale > 1:
            raise ConfigInvalid("outlier_scale must exceed 1")
        if not 0 <= self.spammer_task_rate <= 1:
            raise ConfigInvalid("spammer_task_rate must lie in [0, 1]")
        if not 1 <= self.judgments_per_task <= self.n_workers:
            raise ConfigInvalid("judgments_per_task must lie in [1, n_workers]")
        n_spam = self.n_spammers
        n_reliable = self.n_workers - n_spam
        if n_spam and self.spammer_task_rate > 0:
            if self.judgments_per_task <= n_spam:
                raise ConfigInvalid(
                    "judgments_per_task must exceed the spammer count so every "
                    "task keeps at least one reliable judgment"
                )
        if self.judgments_per_task - (n_spam if self.spammer_task_rate == 1 else 0) \
                > n_reliable:
            raise ConfigInvalid("not enough reliable workers to fill the panels")

    @property
    def n_spammers(self) -> int:
        return int(self.spammer_fraction * self.n_workers)


@dataclass
class GroundTruth:
    """Planted latent state: labels, roles, matrices and the time window."""

    true_labels: dict[str, int]
    spammers: list[str]
    worker_matrices: np.ndarray
    window_log: tuple[float, float]
    window_seconds: tuple[float, float]
    config: SynthConfig

    def is_spammer(self) -> dict[str, bool]:
        spam = set(self.spammers)
        return {w: w in spam for w in self.worker_ids}

    @property
    def worker_ids(self) -> list[str]:
        return [f"w{k:03d}" for k in range(self.config.n_workers)]

    def to_json(self) -> str:
        payload = {
            "config": asdict(self.config),
            "true_labels": self.true_labels,
            "spammers": self.spammers,
            "worker_matrices": {
                w: self.worker_matrices[k].tolist()
                for k, w in enumerate(self.worker_ids)
            },
            "window_log": list(self.window_log),
            "window_seconds": list(self.window_seconds),
        }
        return json.dumps(payload, indent=2, sort_keys=True)

    def save(self, path) -> None:
        Path(path).write_text(self.to_json(), encoding="utf-8")


def generate(config: SynthConfig) -> tuple[Dataset, GroundTruth]:
    """Sample a dataset plus the ground truth needed to score recovery.

    True labels are uniform; valid completion times are uniform inside the
    planted log-time window; spam times fall outside it on both sides by a
    log-distance of 25%-100% of ``log(outlier_scale)``.
    """
    rng = RandomSource(config.seed)
    gen = rng.generator
    N, K, C = config.n_tasks, config.n_workers, config.n_classes
    task_ids = [f"t{i:04d}" for i in range(N)]
    worker_ids = [f"w{k:03d}" for k in range(K)]

    n_spam = config.n_spammers
    spam_workers = gen.choice(K, size=n_spam, replace=False) if n_spam else np.array([], int)
    is_spam = np.zeros(K, dtype=bool)
    is_spam[spam_workers] = True
    reliable_pool = np.flatnonzero(~is_spam)

    matrices = np.full((K, C, C), (1.0 - config.reliable_accuracy) / (C - 1))
    for k in range(K):
        if is_spam[k]:
            matrices[k] = np.full((C, C), 1.0 / C)
        else:
            np.fill_diagonal(matrices[k], config.reliable_accuracy)

    true_labels = gen.integers(C, size=N)
    low, high = config.planted_window
    max_offset = math.log(config.outlier_scale)

    judgments: list[Judgment] = []
    for i in range(N):
        present_spam = spam_workers[
            gen.random(n_spam) < config.spammer_task_rate
        ] if n_spam else np.array([], int)
        n_reliable_slots = config.judgments_per_task - present_spam.size
        panel_reliable = gen.choice(reliable_pool, size=n_reliable_slots, replace=False)
        panel = np.concatenate([panel_reliable, present_spam])

        rows = matrices[panel, true_labels[i], :]
        labels = sample_categorical_rows(rows, rng)

        spam_mask = is_spam[panel]
        log_times = np.empty(panel.size)
        n_valid = int((~spam_mask).sum())
        log_times[~spam_mask] = gen.uniform(low, high, size=n_valid)
        if spam_mask.any():
            n_out = int(spam_mask.sum())
            offsets = max_offset * gen.uniform(*SPAM_OFFSET_RANGE, size=n_out)
            fast = gen.random(n_out) < 0.5
            log_times[spam_mask] = np.where(fast, low - offsets, high + offsets)
        # construction invariant: valid strictly inside, spam strictly outside
        assert np.all((log_times[~spam_mask] > low) & (log_times[~spam_mask] < high))
        assert np.all((log_times[spam_mask] < low) | (log_times[spam_mask] > high))

        for j, k in enumerate(panel):
            judgments.append(Judgment(
                task_ids[i], worker_ids[k], int(labels[j]), math.exp(log_times[j])
            ))

    gold = {task_ids[i]: int(true_labels[i]) for i in range(N)}
    dataset = Dataset(LabelSpace(C), judgments, gold=gold)
    truth = GroundTruth(
        true_labels=gold,
        spammers=[worker_ids[k] for k in sorted(spam_workers.tolist())],
        worker_matrices=matrices,
        window_log=(low, high),
        window_seconds=(math.exp(low), math.exp(high)),
        config=config,
    )
    return dataset, truth


def write_files(dataset: Dataset, truth: GroundTruth, out_dir) -> dict[str, Path]:
    """Write the judgment CSV, gold CSV and ground-truth JSON sidecar."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    paths = {
        "judgments": out / "judgments.csv",
        "gold": out / "gold.csv",
        "truth": out / "truth.json",
    }
    save_judgments_csv(dataset, paths["judgments"])
    save_gold_csv(dataset.gold, paths["gold"])
    truth.save(paths["truth"])
    return paths

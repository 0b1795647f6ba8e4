from __future__ import annotations

import numpy as np
import pytest

from crowdtime import Dataset, Hyperparameters, Judgment, LabelSpace


def make_dataset(rows, classes=2, gold=None, names=None):
    """Build a dataset from (task, worker, label, time) tuples."""
    judgments = [Judgment(t, w, l, float(s)) for t, w, l, s in rows]
    return Dataset(LabelSpace(classes, names), judgments, gold=gold)


def assert_moments(samples, mean, var, label=""):
    """Check empirical mean/variance against analytic values within 3 MC ses."""
    samples = np.asarray(samples, dtype=float)
    n = samples.size
    m = samples.mean()
    se_mean = samples.std(ddof=1) / np.sqrt(n)
    assert abs(m - mean) <= 3 * se_mean + 1e-12, (
        f"{label} mean {m} vs {mean} (3se={3 * se_mean})"
    )
    v = samples.var(ddof=1)
    centered = samples - m
    m4 = np.mean(centered**4)
    se_var = np.sqrt(max(m4 - v**2, 0.0) / n)
    assert abs(v - var) <= 3 * se_var + 1e-12, (
        f"{label} var {v} vs {var} (3se={3 * se_var})"
    )


@pytest.fixture
def small_binary_dataset():
    rows = [
        ("t1", "w1", 1, 12.0),
        ("t1", "w2", 1, 30.0),
        ("t1", "w3", 0, 45.0),
        ("t2", "w1", 0, 15.0),
        ("t2", "w2", 0, 22.0),
        ("t2", "w3", 0, 18.0),
    ]
    return make_dataset(rows, gold={"t1": 1, "t2": 0})


def default_hp(d, **overrides):
    return Hyperparameters.defaults(d.n_classes, d.n_tasks, **overrides)

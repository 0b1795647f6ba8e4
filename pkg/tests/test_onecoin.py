from __future__ import annotations

import numpy as np
import pytest

from crowdtime import onecoin_em
from crowdtime.errors import NotBinary

from conftest import make_dataset


def planted_instance(seed, accuracies, n_tasks=200):
    rng = np.random.default_rng(seed)
    truth = rng.integers(2, size=n_tasks)
    rows = []
    for k, acc in enumerate(accuracies):
        for i in range(n_tasks):
            label = truth[i] if rng.random() < acc else 1 - truth[i]
            rows.append((f"t{i}", f"w{k:02d}", int(label), 1.0))
    return make_dataset(rows), truth


def test_not_binary_rejected():
    d = make_dataset([("t1", "w1", 2, 1.0)], classes=3)
    with pytest.raises(NotBinary):
        onecoin_em(d)


def test_single_worker_posteriors_follow_labels():
    d = make_dataset([("t1", "w1", 1, 1.0), ("t2", "w1", 0, 1.0)])
    fit = onecoin_em(d)
    assert fit.task_posterior["t1"][1] >= 0.5
    assert fit.task_posterior["t2"][0] >= 0.5


def test_planted_accuracies_recovered():
    truth_acc = [0.9] * 8 + [0.5] * 2
    for seed in (1, 2, 3):
        d, _ = planted_instance(seed, truth_acc)
        fit = onecoin_em(d)
        assert np.all(np.abs(fit.worker_accuracy - np.array(truth_acc)) <= 0.07)


def test_unanimous_consensus_degenerate():
    rng = np.random.default_rng(1)
    labels = rng.integers(2, size=20)
    rows = [(f"t{i}", f"w{k}", int(labels[i]), 1.0)
            for i in range(20) for k in range(10)]
    d = make_dataset(rows)
    fit = onecoin_em(d)
    assert np.all(fit.worker_accuracy >= 0.98)
    for i in range(20):
        assert fit.task_posterior[f"t{i}"][labels[i]] > 0.999


def test_log_likelihood_monotone():
    d, _ = planted_instance(2, [0.8] * 6, n_tasks=80)
    fit = onecoin_em(d)
    trace = np.array(fit.log_likelihood)
    assert np.all(np.diff(trace) >= -1e-9)


def test_label_flip_symmetry():
    d, _ = planted_instance(3, [0.85, 0.7, 0.6, 0.9], n_tasks=60)
    flipped = make_dataset(
        [(j.task_id, j.worker_id, 1 - j.label, j.time) for j in d.judgments]
    )
    a = onecoin_em(d)
    b = onecoin_em(flipped)
    assert np.allclose(a.worker_accuracy, b.worker_accuracy, atol=1e-12)
    for t in d.task_ids:
        assert np.allclose(a.task_posterior[t], b.task_posterior[t][::-1],
                           atol=1e-12)


def test_convergence_flag_and_iteration_cap():
    d, _ = planted_instance(4, [0.8] * 5, n_tasks=50)
    capped = onecoin_em(d, max_iters=1)
    assert not capped.converged and capped.n_iters == 1
    free = onecoin_em(d, max_iters=500, tol=1e-10)
    assert free.converged


def test_accuracies_clamped():
    # two workers who always agree on every task drive accuracy to the ceiling
    rows = [(f"t{i}", "w1", 1, 1.0) for i in range(30)]
    rows += [(f"t{i}", "w2", 1, 1.0) for i in range(30)]
    d = make_dataset(rows)
    fit = onecoin_em(d)
    assert np.all(fit.worker_accuracy <= 0.99)
    assert np.all(fit.worker_accuracy >= 0.01)

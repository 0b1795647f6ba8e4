from __future__ import annotations

import numpy as np
import pytest

from crowdtime import (
    Dataset,
    Judgment,
    RandomSource,
    SynthConfig,
    bcc_gibbs,
    cbcc_gibbs,
    generate,
)
from crowdtime.bcc import class_counts, confusion_counts
from crowdtime.errors import InvalidIterationCounts

from conftest import default_hp, make_dataset


def test_iteration_count_validation(small_binary_dataset):
    h = default_hp(small_binary_dataset)
    with pytest.raises(InvalidIterationCounts):
        bcc_gibbs(small_binary_dataset, h, iters=10, burnin=10)
    with pytest.raises(InvalidIterationCounts):
        bcc_gibbs(small_binary_dataset, h, iters=10, burnin=-1)


def test_single_confident_source():
    d = make_dataset([("t1", "w1", 1, 5.0)])
    h = default_hp(d, pi0_diag=0.99, pi0_offdiag=0.01)
    s = bcc_gibbs(d, h, iters=2000, burnin=200, rng=RandomSource(0))
    assert s.label_probs[0, 1] > 0.95


def test_forward_sampled_recovery():
    cfg = SynthConfig(n_tasks=200, n_workers=20, n_classes=2,
                      spammer_fraction=0.0, reliable_accuracy=0.8,
                      judgments_per_task=7, seed=5)
    d, truth = generate(cfg)
    s = bcc_gibbs(d, default_hp(d), iters=1500, burnin=300, rng=RandomSource(1))
    gold = np.array([truth.true_labels[t] for t in d.task_ids])
    accuracy = np.mean(np.argmax(s.label_probs, axis=1) == gold)
    assert accuracy >= 0.92


def test_adversarial_inverter_detected():
    rng = np.random.default_rng(2)
    truth = rng.integers(2, size=120)
    rows = []
    for i in range(120):
        for k in range(8):
            label = truth[i] if rng.random() < 0.9 else 1 - truth[i]
            rows.append((f"t{i}", f"w{k}", int(label), 1.0))
        rows.append((f"t{i}", "inverter", int(1 - truth[i]), 1.0))
    d = make_dataset(rows)
    s = bcc_gibbs(d, default_hp(d), iters=1200, burnin=300, rng=RandomSource(3))
    k = s.worker_ids.index("inverter")
    matrix = s.confusion[k]
    assert matrix[0, 1] > matrix[0, 0]
    assert matrix[1, 0] > matrix[1, 1]


def test_conjugate_counts_match_brute_force():
    rng = np.random.default_rng(4)
    rows = [(f"t{i}", f"w{w}", int(rng.integers(3)), 1.0)
            for i in range(12) for w in range(5)]
    d = make_dataset(rows, classes=3)
    t = rng.integers(3, size=d.n_tasks)
    valid = rng.random(d.n_judgments) < 0.6

    expected_cls = [0, 0, 0]
    for value in t:
        expected_cls[value] += 1
    assert class_counts(t, 3).tolist() == expected_cls

    expected = np.zeros((d.n_workers, 3, 3), dtype=int)
    for idx, j in enumerate(d.judgments):
        expected[d.worker_index[j.worker_id], t[d.task_index[j.task_id]], j.label] += 1
    assert np.array_equal(confusion_counts(d, t), expected)

    expected_valid = np.zeros_like(expected)
    for idx, j in enumerate(d.judgments):
        if valid[idx]:
            expected_valid[d.worker_index[j.worker_id],
                           t[d.task_index[j.task_id]], j.label] += 1
    assert np.array_equal(confusion_counts(d, t, valid=valid), expected_valid)


def test_worker_id_renaming_is_exact():
    cfg = SynthConfig(n_tasks=40, n_workers=8, reliable_accuracy=0.8,
                      judgments_per_task=5, seed=6)
    d, _ = generate(cfg)
    renaming = {w: f"renamed-{w}" for w in d.worker_ids}
    renamed = Dataset(
        d.label_space,
        [Judgment(j.task_id, renaming[j.worker_id], j.label, j.time)
         for j in d.judgments],
        gold=d.gold,
    )
    h = default_hp(d)
    a = bcc_gibbs(d, h, iters=300, burnin=50, rng=RandomSource(7))
    b = bcc_gibbs(renamed, h, iters=300, burnin=50, rng=RandomSource(7))
    assert np.array_equal(a.label_probs, b.label_probs)
    assert np.array_equal(a.confusion, b.confusion)
    assert tuple(renaming[w] for w in a.worker_ids) == b.worker_ids


def test_worker_order_permutation_statistical():
    cfg = SynthConfig(n_tasks=60, n_workers=10, reliable_accuracy=0.85,
                      judgments_per_task=6, seed=8)
    d, _ = generate(cfg)
    order = np.random.default_rng(0).permutation(d.n_judgments)
    permuted = Dataset(d.label_space, [d.judgments[i] for i in order], gold=d.gold)
    h = default_hp(d)
    a = bcc_gibbs(d, h, iters=2500, burnin=500, rng=RandomSource(9))
    b = bcc_gibbs(permuted, h, iters=2500, burnin=500, rng=RandomSource(10))
    probs_b = np.vstack([b.label_probs[b.task_ids.index(t)] for t in a.task_ids])
    tv = 0.5 * np.abs(a.label_probs - probs_b).sum(axis=1)
    assert tv.max() <= 0.06


def test_emitted_distributions_valid():
    cfg = SynthConfig(n_tasks=30, n_workers=6, reliable_accuracy=0.8,
                      judgments_per_task=4, seed=11)
    d, _ = generate(cfg)
    s = bcc_gibbs(d, default_hp(d), iters=400, burnin=100, rng=RandomSource(12))
    assert np.all(s.label_probs >= 0)
    assert np.allclose(s.label_probs.sum(axis=1), 1.0, atol=1e-9)
    assert np.allclose(s.confusion.sum(axis=2), 1.0, atol=1e-9)


# --- community layer ------------------------------------------------------------

def two_population_dataset(seed=5, n_tasks=150):
    rng = np.random.default_rng(seed)
    accs = np.array([0.9] * 10 + [0.55] * 10)
    truth = rng.integers(2, size=n_tasks)
    rows = []
    for i in range(n_tasks):
        for k in range(20):
            label = truth[i] if rng.random() < accs[k] else 1 - truth[i]
            rows.append((f"t{i}", f"w{k:02d}", int(label), 1.0))
    return make_dataset(rows), np.array([0] * 10 + [1] * 10)


def test_cbcc_single_worker_single_task_matches_bcc():
    d = make_dataset([("t1", "w1", 1, 5.0)])
    h = default_hp(d, pi0_diag=0.99, pi0_offdiag=0.01)
    a = bcc_gibbs(d, h, iters=2000, burnin=200, rng=RandomSource(13))
    b = cbcc_gibbs(d, h, num_communities=1, community_concentration=1e-3,
                   iters=2000, burnin=200, rng=RandomSource(14))
    assert abs(a.label_probs[0, 1] - b.label_probs[0, 1]) <= 0.05


def test_cbcc_reduces_to_bcc():
    cfg = SynthConfig(n_tasks=120, n_workers=15, reliable_accuracy=0.8,
                      judgments_per_task=7, seed=15)
    d, _ = generate(cfg)
    h = default_hp(d)
    a = bcc_gibbs(d, h, iters=3000, burnin=500, rng=RandomSource(16))
    b = cbcc_gibbs(d, h, num_communities=1, community_concentration=1e-3,
                   iters=3000, burnin=500, rng=RandomSource(17))
    tv = 0.5 * np.abs(a.label_probs - b.label_probs).sum(axis=1)
    assert tv.max() <= 0.05


def test_cbcc_separates_planted_communities():
    d, truth_groups = two_population_dataset()
    s = cbcc_gibbs(d, default_hp(d), num_communities=2,
                   community_concentration=10.0, iters=1500, burnin=300,
                   rng=RandomSource(18))
    assign = np.argmax(s.community_probs, axis=1)
    purity = max(np.mean(assign == truth_groups),
                 np.mean(assign == 1 - truth_groups))
    assert purity >= 0.9

"""Confusion-matrix label aggregation fitted by Gibbs sampling.

``bcc_gibbs`` runs the plain model: latent true labels, a class-proportion
vector and one confusion matrix per worker, all with conjugate Dirichlet
conditionals.  ``cbcc_gibbs`` adds a community layer: each worker belongs to
a latent group whose confusion matrix centers the worker's own matrix prior,
which transfers reliability evidence between workers of the same group.
"""

from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from .baselines import majority_vote_labels
from .data import Dataset, Hyperparameters
from .errors import InvalidIterationCounts
from .results import PosteriorSummary
from .rng import (
    RandomSource,
    sample_categorical_logrows,
    sample_dirichlet,
    sample_dirichlet_rows,
)

_LOG_FLOOR = 1e-300


@dataclass
class BccState:
    """One Gibbs assignment: task labels, class proportions, worker matrices,
    plus the community fields when the community layer is active."""

    labels: np.ndarray
    class_probs: np.ndarray
    confusion: np.ndarray
    community: np.ndarray | None = None
    community_matrix: np.ndarray | None = None


def check_iteration_counts(iters: int, burnin: int) -> None:
    if not (isinstance(iters, int) and isinstance(burnin, int)):
        raise InvalidIterationCounts("iters and burnin must be integers")
    if burnin < 0 or iters <= burnin:
        raise InvalidIterationCounts(
            f"need iters > burnin >= 0, got iters={iters} burnin={burnin}"
        )


def class_counts(labels: np.ndarray, class_count: int) -> np.ndarray:
    return np.bincount(labels, minlength=class_count)


def confusion_counts(d: Dataset, t: np.ndarray, valid=None) -> np.ndarray:
    """Count judgments per (worker, assigned true class, produced label)."""
    counts = np.zeros((d.n_workers, d.n_classes, d.n_classes), dtype=np.int64)
    if valid is None:
        np.add.at(counts, (d.worker_idx, t[d.task_idx], d.labels), 1)
    else:
        np.add.at(
            counts,
            (d.worker_idx[valid], t[d.task_idx[valid]], d.labels[valid]),
            1,
        )
    return counts


def _sample_labels(d: Dataset, confusion, class_probs, rng,
                   valid=None) -> np.ndarray:
    """Draw every task label from its conditional in one vectorized pass."""
    log_rows = np.log(np.clip(confusion[d.worker_idx, :, d.labels], _LOG_FLOOR, None))
    if valid is not None:
        log_rows = np.where(valid[:, None], log_rows, 0.0)
    loglik = np.tile(np.log(np.clip(class_probs, _LOG_FLOOR, None)), (d.n_tasks, 1))
    np.add.at(loglik, d.task_idx, log_rows)
    return sample_categorical_logrows(loglik, rng)


def _dirichlet_log_pdf(x_log: np.ndarray, alpha: np.ndarray) -> np.ndarray:
    """Row-wise Dirichlet log density given precomputed log(x)."""
    return ((alpha - 1.0) * x_log).sum(axis=-1) + gammaln(alpha.sum(axis=-1)) \
        - gammaln(alpha).sum(axis=-1)


def bcc_gibbs(d: Dataset, h: Hyperparameters, iters: int = 2000,
              burnin: int = 500, rng: RandomSource | None = None,
              chains: int = 1) -> PosteriorSummary:
    """Systematic-scan Gibbs over (labels | rest), (class probs | labels),
    (confusion rows | labels, judgments).

    Task posteriors are empirical frequencies of the sampled labels after
    burn-in; worker matrices are averaged Dirichlet posterior means.
    """
    check_iteration_counts(iters, burnin)
    rng = rng or RandomSource(0)
    start = time.perf_counter()
    N, K, C = d.n_tasks, d.n_workers, d.n_classes
    prior_rows = h.confusion_prior_rows()
    p0 = np.asarray(h.p0)

    label_freq = np.zeros((N, C))
    confusion_mean = np.zeros((K, C, C))
    retained_total = 0

    for chain_rng in rng.spawn(chains):
        t = majority_vote_labels(d)
        p = p0 / p0.sum()
        pi = np.tile(prior_rows / prior_rows.sum(axis=1, keepdims=True), (K, 1, 1))
        for sweep in range(iters):
            t = _sample_labels(d, pi, p, chain_rng)
            p = sample_dirichlet(p0 + class_counts(t, C), chain_rng)
            counts = confusion_counts(d, t)
            posterior_rows = prior_rows[None, :, :] + counts
            pi = sample_dirichlet_rows(
                posterior_rows.reshape(K * C, C), chain_rng
            ).reshape(K, C, C)
            if sweep >= burnin:
                label_freq[np.arange(N), t] += 1.0
                confusion_mean += posterior_rows / posterior_rows.sum(
                    axis=2, keepdims=True
                )
                retained_total += 1

    return PosteriorSummary(
        method_name="bcc",
        task_ids=d.task_ids,
        label_probs=label_freq / retained_total,
        worker_ids=d.worker_ids,
        confusion=confusion_mean / retained_total,
        meta={
            "model": "bcc",
            "seed": rng.seed,
            "iterations": iters,
            "burnin": burnin,
            "chains": chains,
            "fit_seconds": time.perf_counter() - start,
        },
    )


def cbcc_gibbs(d: Dataset, h: Hyperparameters, num_communities: int = 2,
               community_concentration: float = 10.0, iters: int = 2000,
               burnin: int = 500, rng: RandomSource | None = None,
               chains: int = 1) -> PosteriorSummary:
    """Community-augmented Gibbs fit.

    Each worker row gets the Dirichlet prior ``base_row + conc * community_row``,
    so the community pulls the worker toward its matrix with strength
    ``community_concentration`` while the base prior keeps rows identifiable;
    at ``conc -> 0`` the model reduces exactly to plain ``bcc_gibbs``.
    Community assignments have a uniform prior.  Community matrix rows are
    non-conjugate and are refreshed with an independence Metropolis step
    whose proposal pools the member rows.
    """
    check_iteration_counts(iters, burnin)
    if num_communities < 1:
        raise ValueError("need at least one community")
    if not community_concentration > 0:
        raise ValueError("community concentration must be positive")
    rng = rng or RandomSource(0)
    start = time.perf_counter()
    N, K, C = d.n_tasks, d.n_workers, d.n_classes
    M = num_communities
    conc = float(community_concentration)
    prior_rows = h.confusion_prior_rows()
    prior_mean_rows = prior_rows / prior_rows.sum(axis=1, keepdims=True)
    p0 = np.asarray(h.p0)

    label_freq = np.zeros((N, C))
    confusion_mean = np.zeros((K, C, C))
    community_freq = np.zeros((K, M))
    retained_total = 0

    for chain_rng in rng.spawn(chains):
        t = majority_vote_labels(d)
        p = p0 / p0.sum()
        community = chain_rng.generator.integers(M, size=K)
        omega = np.tile(prior_mean_rows, (M, 1, 1))
        pi = omega[community].copy()
        for sweep in range(iters):
            t = _sample_labels(d, pi, p, chain_rng)
            p = sample_dirichlet(p0 + class_counts(t, C), chain_rng)

            counts = confusion_counts(d, t)
            worker_prior = prior_rows[None, :, :] + conc * omega[community]
            posterior_rows = worker_prior + counts
            pi = sample_dirichlet_rows(
                posterior_rows.reshape(K * C, C), chain_rng
            ).reshape(K, C, C)

            # community assignments: Dirichlet density of each worker's rows
            # under each community's prior
            log_pi = np.log(pi)
            if M == 1:
                community = np.zeros(K, dtype=np.int64)
            else:
                log_member = _dirichlet_log_pdf(
                    log_pi[:, None, :, :],
                    prior_rows[None, None, :, :] + conc * omega[None, :, :, :],
                ).sum(axis=2)
                community = sample_categorical_logrows(log_member, chain_rng)

            omega = _refresh_community_rows(
                omega, pi, community, prior_rows, conc, chain_rng
            )

            if sweep >= burnin:
                label_freq[np.arange(N), t] += 1.0
                confusion_mean += posterior_rows / posterior_rows.sum(
                    axis=2, keepdims=True
                )
                community_freq[np.arange(K), community] += 1.0
                retained_total += 1

    return PosteriorSummary(
        method_name="cbcc",
        task_ids=d.task_ids,
        label_probs=label_freq / retained_total,
        worker_ids=d.worker_ids,
        confusion=confusion_mean / retained_total,
        community_probs=community_freq / retained_total,
        meta={
            "model": "cbcc",
            "seed": rng.seed,
            "iterations": iters,
            "burnin": burnin,
            "chains": chains,
            "num_communities": M,
            "community_concentration": conc,
            "fit_seconds": time.perf_counter() - start,
        },
    )


def _refresh_community_rows(omega, pi, community, prior_rows, conc,
                            rng: RandomSource) -> np.ndarray:
    """Independence-Metropolis update of every community matrix row."""
    M, C = omega.shape[0], omega.shape[1]
    new_omega = omega.copy()
    log_pi = np.log(pi)
    for m in range(M):
        members = np.flatnonzero(community == m)
        for c in range(C):
            if members.size == 0:
                new_omega[m, c] = sample_dirichlet(prior_rows[c], rng)
                continue
            member_logs = log_pi[members, c, :]
            log_sum = member_logs.sum(axis=0)
            proposal_alpha = prior_rows[c] + conc * pi[members, c, :].sum(axis=0)
            candidate = sample_dirichlet(proposal_alpha, rng)
            current = new_omega[m, c]

            def log_target(x):
                # Dir(x | base) times the member rows' Dirichlet likelihoods
                # under parameter base + conc * x (constants dropped)
                return (
                    ((prior_rows[c] - 1.0) * np.log(x)).sum()
                    + (conc * x * log_sum).sum()
                    - members.size * gammaln(prior_rows[c] + conc * x).sum()
                )

            def log_proposal(x):
                return float(_dirichlet_log_pdf(np.log(x), proposal_alpha))

            log_ratio = (
                log_target(candidate) - log_target(current)
                - log_proposal(candidate) + log_proposal(current)
            )
            if np.log(rng.generator.random()) < log_ratio:
                new_omega[m, c] = candidate
    return new_omega

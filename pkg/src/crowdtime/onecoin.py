"""One-coin worker reliability model fitted with EM (binary datasets only).

Each worker is summarized by a single probability of answering correctly;
the E-step computes task posteriors under the current coins and class prior,
the M-step re-estimates both from the posteriors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import logsumexp

from .data import Dataset
from .errors import NotBinary

INIT_ACCURACY = 0.7
ACCURACY_FLOOR = 0.01
ACCURACY_CEIL = 0.99


@dataclass
class OneCoinModel:
    worker_accuracy: np.ndarray
    class_prior: np.ndarray
    task_posterior: dict[str, np.ndarray]
    log_likelihood: list[float]
    converged: bool
    n_iters: int


def _log_posteriors(d: Dataset, accuracy: np.ndarray, prior: np.ndarray):
    """Unnormalized task log posteriors (N, 2) and the observed log-likelihood."""
    log_acc = np.log(accuracy[d.worker_idx])
    log_err = np.log1p(-accuracy[d.worker_idx])
    logp = np.tile(np.log(prior), (d.n_tasks, 1))
    for c in (0, 1):
        term = np.where(d.labels == c, log_acc, log_err)
        np.add.at(logp[:, c], d.task_idx, term)
    norms = logsumexp(logp, axis=1)
    return logp - norms[:, None], float(norms.sum())


def onecoin_em(d: Dataset, max_iters: int = 200, tol: float = 1e-6) -> OneCoinModel:
    """Fit the one-coin model by EM.

    Coins start at 0.7 and are clamped to [0.01, 0.99] to avoid point-mass
    degeneracy on tiny data; iteration stops when the largest absolute
    parameter change drops below ``tol``.  Non-convergence within
    ``max_iters`` is reported through the ``converged`` flag, not an error.
    """
    if d.n_classes != 2:
        raise NotBinary(f"one-coin model needs 2 classes, dataset has {d.n_classes}")
    accuracy = np.full(d.n_workers, INIT_ACCURACY)
    prior = np.full(2, 0.5)
    n_per_worker = np.bincount(d.worker_idx, minlength=d.n_workers).astype(float)

    trace: list[float] = []
    converged = False
    iters_done = 0
    for iteration in range(max_iters):
        log_post, loglik = _log_posteriors(d, accuracy, prior)
        if trace:
            assert loglik >= trace[-1] - 1e-9, "EM log-likelihood decreased"
        trace.append(loglik)
        post = np.exp(log_post)

        match_prob = post[d.task_idx, d.labels]
        new_accuracy = np.bincount(d.worker_idx, weights=match_prob,
                                   minlength=d.n_workers) / n_per_worker
        new_accuracy = np.clip(new_accuracy, ACCURACY_FLOOR, ACCURACY_CEIL)
        new_prior = post.mean(axis=0)

        delta = max(np.max(np.abs(new_accuracy - accuracy)),
                    np.max(np.abs(new_prior - prior)))
        accuracy, prior = new_accuracy, new_prior
        iters_done = iteration + 1
        if delta < tol:
            converged = True
            break

    log_post, loglik = _log_posteriors(d, accuracy, prior)
    assert loglik >= trace[-1] - 1e-9, "EM log-likelihood decreased"
    trace.append(loglik)
    final_post = np.exp(log_post)

    posterior = {t: final_post[i] for i, t in enumerate(d.task_ids)}
    return OneCoinModel(
        worker_accuracy=accuracy,
        class_prior=prior,
        task_posterior=posterior,
        log_likelihood=trace,
        converged=converged,
        n_iters=iters_done,
    )

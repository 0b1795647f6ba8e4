"""Propensity- and time-aware confusion-matrix aggregation, fitted by Gibbs.

Each judgment is either a genuine labelling attempt or spam.  Genuine
attempts follow the worker's confusion matrix and must land inside the
task's latent completion window (lower threshold, upper threshold); spam
attempts come from a shared label distribution and carry no time constraint.
A per-worker propensity gives the prior odds that an attempt is genuine.

``bccpropensity_gibbs`` is the ablation with the window clamped wide open,
so only the label mixture distinguishes genuine attempts from spam.
"""

from __future__ import annotations

import time
import warnings
from dataclasses import dataclass

import numpy as np

from .baselines import majority_vote_labels
from .bcc import check_iteration_counts, class_counts, confusion_counts
from .data import Dataset, Hyperparameters
from .errors import MissingDurationState
from .results import PosteriorSummary, TaskDuration
from .rng import (
    RandomSource,
    sample_beta,
    sample_categorical_logrows,
    sample_dirichlet,
    sample_dirichlet_rows,
    sample_truncated_gaussian_array,
)

_LOG_FLOOR = 1e-300
INIT_THRESHOLD_MARGIN = 1e-3


@dataclass
class BccTimeState:
    """One Gibbs assignment of every latent variable."""

    labels: np.ndarray        # (N,) current true-label assignment
    class_probs: np.ndarray   # (C,)
    spam_probs: np.ndarray    # (C,) shared label distribution of spam attempts
    confusion: np.ndarray     # (K, C, C)
    propensity: np.ndarray    # (K,) in (0, 1)
    valid: np.ndarray         # (J,) bool, aligned with the dataset's judgments
    lower: np.ndarray         # (N,) window lower thresholds (transformed units)
    upper: np.ndarray         # (N,) window upper thresholds


def _initial_state(d: Dataset, h: Hyperparameters,
                   clamp_thresholds: bool) -> BccTimeState:
    """Start at a positive-probability state: every judgment valid and the
    thresholds stretched just beyond the observed times."""
    N, K, C = d.n_tasks, d.n_workers, d.n_classes
    prior_rows = h.confusion_prior_rows()
    p0 = np.asarray(h.p0)
    s0 = np.asarray(h.s0)
    if clamp_thresholds:
        lower = np.full(N, -np.inf)
        upper = np.full(N, np.inf)
    else:
        min_time = np.full(N, np.inf)
        max_time = np.full(N, -np.inf)
        np.minimum.at(min_time, d.task_idx, d.times)
        np.maximum.at(max_time, d.task_idx, d.times)
        lower = np.minimum(h.sigma0_mean, min_time - INIT_THRESHOLD_MARGIN)
        upper = np.maximum(h.lambda0_mean, max_time + INIT_THRESHOLD_MARGIN)
    return BccTimeState(
        labels=majority_vote_labels(d),
        class_probs=p0 / p0.sum(),
        spam_probs=s0 / s0.sum(),
        confusion=np.tile(prior_rows / prior_rows.sum(axis=1, keepdims=True),
                          (K, 1, 1)),
        propensity=np.full(K, h.alpha0 / (h.alpha0 + h.beta0)),
        valid=np.ones(d.n_judgments, dtype=bool),
        lower=lower,
        upper=upper,
    )


def validity_counts(d: Dataset, valid: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Per-worker (valid, invalid) judgment counts."""
    n_valid = np.bincount(d.worker_idx, weights=valid.astype(float),
                          minlength=d.n_workers)
    n_total = np.bincount(d.worker_idx, minlength=d.n_workers)
    return n_valid, n_total - n_valid


def invalid_label_counts(d: Dataset, valid: np.ndarray) -> np.ndarray:
    return np.bincount(d.labels[~valid], minlength=d.n_classes)


def bcctime_gibbs(d: Dataset, h: Hyperparameters, iters: int = 2000,
                  burnin: int = 500, rng: RandomSource | None = None,
                  chains: int = 1, init_state: BccTimeState | None = None,
                  clamp_thresholds: bool = False) -> PosteriorSummary:
    """Systematic-scan Gibbs over validity flags, propensities, labels, class
    and spam proportions, confusion rows and the two window thresholds.

    Completion times must already be in the units declared by
    ``h.time_transform``.  Outputs: task label posteriors (sample
    frequencies), worker confusion posterior means, propensity posterior
    means, per-judgment validity probabilities and per-task window statistics
    (unless the window is clamped).
    """
    check_iteration_counts(iters, burnin)
    if d.time_transform != h.time_transform:
        warnings.warn(
            f"dataset times are {d.time_transform!r} but the priors declare "
            f"{h.time_transform!r}; threshold priors may be on the wrong scale",
            stacklevel=2,
        )
    rng = rng or RandomSource(0)
    start = time.perf_counter()
    N, K, C = d.n_tasks, d.n_workers, d.n_classes
    J = d.n_judgments
    ti, wi, lab, tau = d.task_idx, d.worker_idx, d.labels, d.times
    prior_rows = h.confusion_prior_rows()
    p0 = np.asarray(h.p0)
    s0 = np.asarray(h.s0)

    label_freq = np.zeros((N, C))
    confusion_mean = np.zeros((K, C, C))
    propensity_mean = np.zeros(K)
    validity_freq = np.zeros(J)
    lower_sum = np.zeros(N)
    lower_sq = np.zeros(N)
    upper_sum = np.zeros(N)
    upper_sq = np.zeros(N)
    violations = 0
    retained_total = 0

    for chain_rng in rng.spawn(chains):
        state = _initial_state(d, h, clamp_thresholds) if init_state is None \
            else _copy_state(init_state)
        t = state.labels.copy()
        p = state.class_probs.copy()
        s = state.spam_probs.copy()
        pi = state.confusion.copy()
        psi = state.propensity.copy()
        valid = state.valid.copy()
        lower = state.lower.copy()
        upper = state.upper.copy()

        for sweep in range(iters):
            # (a) validity flags: genuine odds need the time inside the window
            inside = (lower[ti] < tau) & (tau < upper[ti])
            w_valid = psi[wi] * pi[wi, t[ti], lab] * inside
            w_spam = (1.0 - psi[wi]) * s[lab]
            p_valid = w_valid / (w_valid + w_spam)
            valid = chain_rng.generator.random(J) < p_valid

            # (b) propensities
            n_valid, n_invalid = validity_counts(d, valid)
            psi = sample_beta(h.alpha0 + n_valid, h.beta0 + n_invalid, chain_rng)

            # (c) task labels from the valid judgments only
            log_rows = np.log(np.clip(pi[wi, :, lab], _LOG_FLOOR, None))
            log_rows = np.where(valid[:, None], log_rows, 0.0)
            loglik = np.tile(np.log(np.clip(p, _LOG_FLOOR, None)), (N, 1))
            np.add.at(loglik, ti, log_rows)
            t = sample_categorical_logrows(loglik, chain_rng)

            # (d) class proportions, (e) spam label distribution
            p = sample_dirichlet(p0 + class_counts(t, C), chain_rng)
            s = sample_dirichlet(s0 + invalid_label_counts(d, valid), chain_rng)

            # (f) confusion rows from valid judgments
            counts = confusion_counts(d, t, valid=valid)
            posterior_rows = prior_rows[None, :, :] + counts
            pi = sample_dirichlet_rows(
                posterior_rows.reshape(K * C, C), chain_rng
            ).reshape(K, C, C)

            # (g)/(h) window thresholds, truncated to keep valid times inside
            if not clamp_thresholds:
                min_valid = np.full(N, np.inf)
                max_valid = np.full(N, -np.inf)
                if valid.any():
                    np.minimum.at(min_valid, ti[valid], tau[valid])
                    np.maximum.at(max_valid, ti[valid], tau[valid])
                lower = sample_truncated_gaussian_array(
                    h.sigma0_mean, h.gamma0_precision,
                    np.full(N, -np.inf), min_valid, chain_rng,
                )
                upper = sample_truncated_gaussian_array(
                    h.lambda0_mean, h.delta0_precision,
                    max_valid, np.full(N, np.inf), chain_rng,
                )
                # the indicators are strict; step one ulp off the bound
                bounded = np.isfinite(min_valid)
                lower[bounded] = np.minimum(
                    lower[bounded], np.nextafter(min_valid[bounded], -np.inf)
                )
                bounded = np.isfinite(max_valid)
                upper[bounded] = np.maximum(
                    upper[bounded], np.nextafter(max_valid[bounded], np.inf)
                )

            if sweep >= burnin:
                label_freq[np.arange(N), t] += 1.0
                confusion_mean += posterior_rows / posterior_rows.sum(
                    axis=2, keepdims=True
                )
                propensity_mean += (h.alpha0 + n_valid) / (
                    h.alpha0 + h.beta0 + n_valid + n_invalid
                )
                validity_freq += valid
                lower_sum += lower
                lower_sq += lower * lower
                upper_sum += upper
                upper_sq += upper * upper
                inside_now = (lower[ti] < tau) & (tau < upper[ti])
                violations += int(np.count_nonzero(valid & ~inside_now))
                retained_total += 1

    duration_stats = None
    if not clamp_thresholds:
        lower_mean = lower_sum / retained_total
        upper_mean = upper_sum / retained_total
        lower_sd = np.sqrt(np.maximum(lower_sq / retained_total - lower_mean**2, 0.0))
        upper_sd = np.sqrt(np.maximum(upper_sq / retained_total - upper_mean**2, 0.0))
        duration_stats = np.column_stack([lower_mean, lower_sd, upper_mean, upper_sd])

    name = "bccprop" if clamp_thresholds else "bcctime"
    summary = PosteriorSummary(
        method_name=name,
        task_ids=d.task_ids,
        label_probs=label_freq / retained_total,
        worker_ids=d.worker_ids,
        confusion=confusion_mean / retained_total,
        propensity=propensity_mean / retained_total,
        validity=validity_freq / retained_total,
        duration_stats=duration_stats,
        meta={
            "model": name,
            "seed": rng.seed,
            "iterations": iters,
            "burnin": burnin,
            "chains": chains,
            "time_transform": h.time_transform,
            "indicator_violations": violations,
            "fit_seconds": time.perf_counter() - start,
        },
    )
    if duration_stats is not None:
        summary.durations = extract_durations(summary, h.time_transform)
    return summary


def bccpropensity_gibbs(d: Dataset, h: Hyperparameters, iters: int = 2000,
                        burnin: int = 500, rng: RandomSource | None = None,
                        chains: int = 1) -> PosteriorSummary:
    """Ablation with the completion window clamped wide open, so every
    observed time satisfies the window indicator and only label noise drives
    spam detection.  Produces no duration output."""
    return bcctime_gibbs(d, h, iters=iters, burnin=burnin, rng=rng,
                         chains=chains, clamp_thresholds=True)


def _copy_state(state: BccTimeState) -> BccTimeState:
    return BccTimeState(
        labels=state.labels.copy(),
        class_probs=state.class_probs.copy(),
        spam_probs=state.spam_probs.copy(),
        confusion=state.confusion.copy(),
        propensity=state.propensity.copy(),
        valid=state.valid.copy(),
        lower=state.lower.copy(),
        upper=state.upper.copy(),
    )


def extract_durations(summary: PosteriorSummary, transform: str) -> list[TaskDuration]:
    """Map posterior window statistics to per-task duration records.

    When the log transform was active the interval bounds are exponentiated
    back to seconds.  Emits both the half-width statistic
    ``(upper_mean - lower_mean) / 2`` and the window midpoint.
    """
    if summary.duration_stats is None:
        raise MissingDurationState(
            f"summary from {summary.method_name!r} carries no window statistics"
        )
    if transform not in ("none", "log"):
        raise ValueError(f"unknown time transform {transform!r}")
    out = []
    for i, task_id in enumerate(summary.task_ids):
        lower_mean, lower_sd, upper_mean, upper_sd = summary.duration_stats[i]
        if transform == "log":
            interval = (float(np.exp(lower_mean)), float(np.exp(upper_mean)))
        else:
            interval = (float(lower_mean), float(upper_mean))
        out.append(TaskDuration(
            task_id=task_id,
            lower_mean=float(lower_mean),
            lower_sd=float(lower_sd),
            upper_mean=float(upper_mean),
            upper_sd=float(upper_sd),
            interval_seconds=interval,
            half_width=float((upper_mean - lower_mean) / 2.0),
            midpoint=float((upper_mean + lower_mean) / 2.0),
        ))
    return out

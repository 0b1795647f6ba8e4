"""Seeded sampling primitives for the Gibbs samplers.

Every random draw in the package flows through a :class:`RandomSource`, so a
whole fit is reproducible from one integer seed.  The truncated-Gaussian
sampler switches from inverse-CDF sampling to an exponential-proposal
rejection step once the usable interval sits more than ``_TAIL_Z`` standard
deviations into the tail, which keeps it stable for the deep-tail conditionals
that arise when a single outlying completion time pins a threshold.
"""

from __future__ import annotations

import numpy as np
from scipy.special import erfc, ndtri

from .errors import (
    AllZeroWeights,
    EmptyInterval,
    IntervalMassUnderflow,
    NonPositiveCount,
)

_TINY = np.finfo(float).tiny
_ONE_BELOW_1 = np.nextafter(1.0, 0.0)
_TAIL_Z = 4.0
_MIN_INTERVAL_MASS = 1e-12
_MAX_REJECTION_ROUNDS = 500


class RandomSource:
    """A PCG64 stream with a fixed 64-bit seed.

    Single-owner: concurrent fits should each hold their own source, usually
    obtained with :meth:`spawn` from a master seed.
    """

    def __init__(self, seed: int = 0):
        self.seed = int(seed)
        self.generator = np.random.default_rng(self.seed)

    def spawn(self, n: int) -> list["RandomSource"]:
        """Derive ``n`` independently seeded children (consumes parent draws)."""
        seeds = self.generator.integers(0, 2**63 - 1, size=n)
        return [RandomSource(int(s)) for s in seeds]

    def __repr__(self):
        return f"RandomSource(seed={self.seed})"


def _norm_sf(z):
    return 0.5 * erfc(np.asarray(z, dtype=float) / np.sqrt(2.0))


def _norm_cdf(z):
    return 0.5 * erfc(-np.asarray(z, dtype=float) / np.sqrt(2.0))


def sample_categorical(weights, rng: RandomSource) -> int:
    """Draw an index with probability proportional to ``weights``."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 1 or w.size == 0:
        raise ValueError("weights must be a non-empty 1-D array")
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and non-negative")
    cum = np.cumsum(w)
    total = cum[-1]
    if total <= 0:
        raise AllZeroWeights("categorical weights sum to zero")
    u = rng.generator.random() * total
    idx = int(np.searchsorted(cum, u, side="right"))
    return min(idx, w.size - 1)


def sample_categorical_rows(weights, rng: RandomSource) -> np.ndarray:
    """Row-wise categorical draws from a 2-D weight matrix."""
    w = np.asarray(weights, dtype=float)
    if w.ndim != 2:
        raise ValueError("weights must be 2-D")
    if np.any(~np.isfinite(w)) or np.any(w < 0):
        raise ValueError("weights must be finite and non-negative")
    cum = np.cumsum(w, axis=1)
    totals = cum[:, -1]
    if np.any(totals <= 0):
        raise AllZeroWeights("a weight row sums to zero")
    u = rng.generator.random(w.shape[0]) * totals
    idx = (cum <= u[:, None]).sum(axis=1)
    return np.minimum(idx, w.shape[1] - 1)


def sample_categorical_logrows(log_weights, rng: RandomSource) -> np.ndarray:
    """Row-wise categorical draws from unnormalized log weights (Gumbel-max)."""
    lw = np.asarray(log_weights, dtype=float)
    if lw.ndim != 2:
        raise ValueError("log weights must be 2-D")
    if np.any(np.isnan(lw)) or np.any(lw == np.inf):
        raise ValueError("log weights must be < +inf and not NaN")
    if np.any(np.all(lw == -np.inf, axis=1)):
        raise AllZeroWeights("a log-weight row is entirely -inf")
    g = rng.generator.gumbel(size=lw.shape)
    return np.argmax(lw + g, axis=1)


def sample_dirichlet(counts, rng: RandomSource) -> np.ndarray:
    """Dirichlet draw via normalized Gamma variates."""
    c = np.asarray(counts, dtype=float)
    if c.ndim != 1 or c.size < 2:
        raise ValueError("counts must be 1-D with at least two entries")
    if np.any(~np.isfinite(c)) or np.any(c <= 0):
        raise NonPositiveCount("Dirichlet counts must be strictly positive")
    g = np.clip(rng.generator.gamma(c), _TINY, None)
    return np.clip(g / g.sum(), _TINY, _ONE_BELOW_1)


def sample_dirichlet_rows(counts, rng: RandomSource) -> np.ndarray:
    """Independent Dirichlet draws, one per row of a 2-D count matrix."""
    c = np.asarray(counts, dtype=float)
    if c.ndim != 2:
        raise ValueError("counts must be 2-D")
    if np.any(~np.isfinite(c)) or np.any(c <= 0):
        raise NonPositiveCount("Dirichlet counts must be strictly positive")
    g = np.clip(rng.generator.gamma(c), _TINY, None)
    return np.clip(g / g.sum(axis=1, keepdims=True), _TINY, _ONE_BELOW_1)


def sample_beta(a, b, rng: RandomSource):
    """Beta draw(s); array arguments broadcast elementwise."""
    a_arr = np.asarray(a, dtype=float)
    b_arr = np.asarray(b, dtype=float)
    if np.any(a_arr <= 0) or np.any(b_arr <= 0):
        raise NonPositiveCount("Beta counts must be strictly positive")
    x = np.clip(rng.generator.beta(a_arr, b_arr), _TINY, _ONE_BELOW_1)
    if np.isscalar(a) and np.isscalar(b):
        return float(x)
    return x


def _lower_tail_std(a, rng: RandomSource) -> np.ndarray:
    """Standard-normal draws conditioned on z >= a (a finite, 1-D)."""
    out = np.empty(a.shape)
    easy = a <= _TAIL_Z
    if np.any(easy):
        ae = a[easy]
        tail = _norm_sf(ae)
        u = rng.generator.random(ae.size)
        z = -ndtri(tail * (1.0 - u))
        out[easy] = np.maximum(z, ae)
    hard = ~easy
    if np.any(hard):
        ah = a[hard]
        res = np.empty(ah.shape)
        pending = np.ones(ah.shape, dtype=bool)
        alpha = 0.5 * (ah + np.sqrt(ah * ah + 4.0))
        for _ in range(_MAX_REJECTION_ROUNDS):
            if not pending.any():
                break
            n_pending = int(pending.sum())
            u1 = rng.generator.random(n_pending)
            u2 = rng.generator.random(n_pending)
            x = ah[pending] - np.log1p(-u1) / alpha[pending]
            accept = u2 <= np.exp(-0.5 * (x - alpha[pending]) ** 2)
            idx = np.flatnonzero(pending)[accept]
            res[idx] = x[accept]
            pending[idx] = False
        if pending.any():
            raise IntervalMassUnderflow("tail rejection sampler failed to accept")
        out[hard] = res
    return out


def _interval_std(a, b, rng: RandomSource) -> np.ndarray:
    """Standard-normal draws conditioned on a <= z <= b (both finite, 1-D)."""
    out = np.empty(a.shape)
    # mass of the interval, computed on the stable side
    hi_side = a >= 0
    lo_side = b <= 0
    straddle = ~(hi_side | lo_side)
    mass = np.empty(a.shape)
    mass[hi_side] = _norm_sf(a[hi_side]) - _norm_sf(b[hi_side])
    mass[lo_side] = _norm_cdf(b[lo_side]) - _norm_cdf(a[lo_side])
    mass[straddle] = _norm_cdf(b[straddle]) - _norm_cdf(a[straddle])
    ok = mass >= _MIN_INTERVAL_MASS

    idx_ok = np.flatnonzero(ok)
    if idx_ok.size:
        u = rng.generator.random(idx_ok.size)
        z = np.empty(idx_ok.size)
        sub_hi = hi_side[idx_ok]
        sub_lo = lo_side[idx_ok]
        sub_mid = straddle[idx_ok]
        if sub_hi.any():
            i = idx_ok[sub_hi]
            p = _norm_sf(a[i]) + u[sub_hi] * (_norm_sf(b[i]) - _norm_sf(a[i]))
            z[sub_hi] = -ndtri(p)
        if sub_lo.any():
            i = idx_ok[sub_lo]
            p = _norm_cdf(a[i]) + u[sub_lo] * (_norm_cdf(b[i]) - _norm_cdf(a[i]))
            z[sub_lo] = ndtri(p)
        if sub_mid.any():
            i = idx_ok[sub_mid]
            p = _norm_cdf(a[i]) + u[sub_mid] * mass[i]
            z[sub_mid] = ndtri(p)
        out[idx_ok] = np.clip(z, a[idx_ok], b[idx_ok])

    idx_tiny = np.flatnonzero(~ok)
    if idx_tiny.size:
        # interval mass underflows: rejection from the nearer bound, bounded tries
        at = a[idx_tiny].copy()
        bt = b[idx_tiny].copy()
        flip = bt <= 0
        at[flip], bt[flip] = -b[idx_tiny][flip], -a[idx_tiny][flip]
        res = np.empty(at.shape)
        pending = np.ones(at.shape, dtype=bool)
        alpha = 0.5 * (at + np.sqrt(at * at + 4.0))
        for _ in range(_MAX_REJECTION_ROUNDS):
            if not pending.any():
                break
            n_pending = int(pending.sum())
            u1 = rng.generator.random(n_pending)
            u2 = rng.generator.random(n_pending)
            x = at[pending] - np.log1p(-u1) / alpha[pending]
            accept = (x <= bt[pending]) & (
                u2 <= np.exp(-0.5 * (x - alpha[pending]) ** 2)
            )
            idx = np.flatnonzero(pending)[accept]
            res[idx] = x[accept]
            pending[idx] = False
        if pending.any():
            raise IntervalMassUnderflow(
                "truncation interval mass underflowed and rejection failed"
            )
        res[flip] = -res[flip]
        out[idx_tiny] = np.clip(res, a[idx_tiny], b[idx_tiny])
    return out


def sample_truncated_gaussian_array(mean, precision, lower, upper, rng: RandomSource):
    """Vectorized Gaussian draws restricted to [lower, upper] (bounds may be inf).

    ``mean``/``precision`` are scalars or arrays broadcastable against the
    bounds; ``precision`` is the inverse variance.
    """
    mean = np.asarray(mean, dtype=float)
    precision = np.asarray(precision, dtype=float)
    if np.any(precision <= 0):
        raise ValueError("precision must be strictly positive")
    lower = np.asarray(lower, dtype=float)
    upper = np.asarray(upper, dtype=float)
    shape = np.broadcast_shapes(mean.shape, precision.shape, lower.shape, upper.shape)
    mean, precision, lower, upper = (
        np.broadcast_to(x, shape) for x in (mean, precision, lower, upper)
    )
    if np.any(lower >= upper):
        raise EmptyInterval("lower bound must be strictly below upper bound")
    sd = 1.0 / np.sqrt(precision)
    a = (lower - mean) / sd
    b = (upper - mean) / sd

    flat_a = a.ravel()
    flat_b = b.ravel()
    z = np.empty(flat_a.shape)

    free = np.isneginf(flat_a) & np.isposinf(flat_b)
    lo_only = np.isfinite(flat_a) & np.isposinf(flat_b)
    hi_only = np.isneginf(flat_a) & np.isfinite(flat_b)
    both = np.isfinite(flat_a) & np.isfinite(flat_b)

    if free.any():
        z[free] = rng.generator.standard_normal(int(free.sum()))
    if lo_only.any():
        z[lo_only] = _lower_tail_std(flat_a[lo_only], rng)
    if hi_only.any():
        z[hi_only] = -_lower_tail_std(-flat_b[hi_only], rng)
    if both.any():
        z[both] = _interval_std(flat_a[both], flat_b[both], rng)

    z = z.reshape(shape)
    out = mean + sd * z
    out = np.clip(out, lower, upper)
    if np.any(out < lower) or np.any(out > upper):
        raise IntervalMassUnderflow("truncated draw violated its bounds")
    return out


def sample_truncated_gaussian(mean, precision, lower, upper, rng: RandomSource) -> float:
    """Single Gaussian draw restricted to [lower, upper]."""
    out = sample_truncated_gaussian_array(
        float(mean), float(precision), np.array([lower], float), np.array([upper], float), rng
    )
    return float(out[0])

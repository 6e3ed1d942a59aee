"""Classical baseline intervals for the mean of a [0,1]-valued rating variable.

Three methods on a multistar histogram: Hoeffding, empirical Bernstein, and
the two-point (Bernoulli) KL bound. All are two-sided at total level delta;
one-sided deviation inequalities are applied at delta/2 per side, which the
Hoeffding and Bernoulli-KL forms absorb into their log(2/delta) factor while
empirical Bernstein picks up log(4/delta).
"""

from __future__ import annotations

import enum
import math

import numpy as np

from .core import Confidence, Histogram, Interval, LinearFunctional, kl_binary, normalize

__all__ = [
    "BoundMethod",
    "invert_kl_binary",
    "invert_kl_binary_batch",
    "hoeffding_interval",
    "empirical_bernstein_interval",
    "bernoulli_kl_interval",
]

_BISECT_TOL = 1e-10
_BISECT_MAX_ITER = 60


class BoundMethod(enum.Enum):
    HOEFFDING = "hoeffding"
    EMPIRICAL_BERNSTEIN = "empirical-bernstein"
    BERNOULLI_KL = "bernoulli-kl"


def invert_kl_binary(phat: float, z: float, side: str) -> float:
    """Largest (side="upper") or smallest (side="lower") q with kl_binary(phat, q) <= z.

    Monotone bisection on [phat, 1] or [0, phat] to absolute tolerance 1e-10.
    z=0 returns phat; infinite z returns the corresponding endpoint.
    """
    if z < 0:
        raise ValueError("z must be nonnegative")
    if side not in ("upper", "lower"):
        raise ValueError("side must be 'upper' or 'lower'")
    if z == 0.0:
        return phat
    if math.isinf(z):
        return 1.0 if side == "upper" else 0.0
    if side == "upper":
        lo, hi = phat, 1.0
        if kl_binary(phat, hi) <= z:
            return 1.0
        for _ in range(_BISECT_MAX_ITER):
            mid = 0.5 * (lo + hi)
            if kl_binary(phat, mid) <= z:
                lo = mid
            else:
                hi = mid
            if hi - lo <= _BISECT_TOL:
                break
        return lo
    lo, hi = 0.0, phat
    if kl_binary(phat, lo) <= z:
        return 0.0
    for _ in range(_BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        if kl_binary(phat, mid) <= z:
            hi = mid
        else:
            lo = mid
        if hi - lo <= _BISECT_TOL:
            break
    return hi


def _kl_binary_vec(p: np.ndarray, q: np.ndarray) -> np.ndarray:
    out = np.zeros_like(q)
    with np.errstate(divide="ignore", invalid="ignore"):
        hi = p > 0
        out[hi] += p[hi] * np.log(p[hi] / q[hi])
        lo = p < 1
        out[lo] += (1 - p[lo]) * np.log((1 - p[lo]) / (1 - q[lo]))
    out[np.isnan(out)] = np.inf
    return out


def invert_kl_binary_batch(phat: np.ndarray, z: np.ndarray, side: str) -> np.ndarray:
    """Vectorized invert_kl_binary over arrays of (phat, z) pairs."""
    phat = np.asarray(phat, dtype=float)
    z = np.broadcast_to(np.asarray(z, dtype=float), phat.shape).copy()
    if side == "upper":
        lo = phat.copy()
        hi = np.ones_like(phat)
    else:
        lo = np.zeros_like(phat)
        hi = phat.copy()
    for _ in range(_BISECT_MAX_ITER):
        mid = 0.5 * (lo + hi)
        ok = _kl_binary_vec(phat, mid) <= z
        if side == "upper":
            lo = np.where(ok, mid, lo)
            hi = np.where(ok, hi, mid)
        else:
            hi = np.where(ok, mid, hi)
            lo = np.where(ok, lo, mid)
        if np.max(hi - lo) <= _BISECT_TOL:
            break
    out = lo if side == "upper" else hi
    return np.where(z == 0.0, phat, out)


def _mean_of(h: Histogram, f: LinearFunctional) -> float:
    p = normalize(h)
    if p.k != f.k:
        raise ValueError("length mismatch between histogram and weights")
    return float(np.dot(p.probs, f.weights))


def hoeffding_interval(h: Histogram, f: LinearFunctional, c: Confidence) -> Interval:
    """mean +- sqrt(log(2/delta)/(2n)), clipped to [0,1]."""
    if h.n < 1:
        raise ValueError("no samples")
    m = _mean_of(h, f)
    half = math.sqrt(math.log(2.0 / c.delta) / (2.0 * h.n))
    return Interval.clipped(m - half, m + half)


def empirical_bernstein_interval(h: Histogram, f: LinearFunctional, c: Confidence) -> Interval:
    """Variance-adaptive interval; needs n >= 2 for the sample variance.

    Half-width sqrt(2*Var_n*log(4/delta)/n) + 7*log(4/delta)/(3(n-1)) with the
    unbiased sample variance Var_n = n/(n-1) * (sum phat_j w_j^2 - mean^2).
    """
    if h.n < 2:
        raise ValueError("needs >= 2 samples")
    p = normalize(h)
    if p.k != f.k:
        raise ValueError("length mismatch between histogram and weights")
    w = f.weights
    m = float(np.dot(p.probs, w))
    var_n = h.n / (h.n - 1.0) * max(float(np.dot(p.probs, w**2)) - m * m, 0.0)
    log_term = math.log(4.0 / c.delta)
    half = math.sqrt(2.0 * var_n * log_term / h.n) + 7.0 * log_term / (3.0 * (h.n - 1))
    return Interval.clipped(m - half, m + half)


def bernoulli_kl_interval(h: Histogram, f: LinearFunctional, c: Confidence) -> Interval:
    """Invert the two-point KL deviation bound around the empirical mean."""
    if h.n < 1:
        raise ValueError("no samples")
    m = _mean_of(h, f)
    z = math.log(2.0 / c.delta) / h.n
    return Interval(invert_kl_binary(m, z, "lower"), invert_kl_binary(m, z, "upper"))

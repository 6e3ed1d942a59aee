"""CDF confidence bands and quantile intervals for discrete rating data.

Support points are the rescaled values {0, 1/(k-1), ..., 1}. Bands bound the
CDF at every support point simultaneously; the quantile interval is read off
the band, and the width metric aggregates the band's slack around the target
level tau.

Two band families: the uniform DKWM band, and per-point two-point-KL bands
combined with a union bound. The union bound's budget can be split equally
(naive) or concentrated near the empirical tau-quantile (data-driven, with
weights 1/(|i - tau_idx| + 1)^2 normalized to spend the whole budget on the
k-1 nontrivial CDF points; the top point's CDF is identically 1).
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

from .core import Confidence, Histogram
from .scalar_bounds import invert_kl_binary

__all__ = [
    "BandMethod",
    "CdfBand",
    "QuantileQuery",
    "dkwm_band",
    "kl_band",
    "naive_allocation",
    "data_driven_allocation",
    "band_for",
    "quantile_interval",
    "band_width_at",
]


class BandMethod(enum.Enum):
    DKWM = "dkwm"
    KL_NAIVE = "kl-naive"
    KL_DATA_DRIVEN = "kl-dd"


@dataclass(frozen=True)
class CdfBand:
    """Pointwise CDF bounds L_i <= F(x_i) <= U_i at the k support points."""

    lower: np.ndarray
    upper: np.ndarray
    method: BandMethod

    def __init__(self, lower, upper, method: BandMethod) -> None:
        lower = np.asarray(lower, dtype=float)
        upper = np.asarray(upper, dtype=float)
        if lower.shape != upper.shape or lower.ndim != 1 or lower.shape[0] < 2:
            raise ValueError("band needs matching L/U vectors of length >= 2")
        if np.any(lower > upper + 1e-12):
            raise ValueError("band requires L <= U")
        if np.any(np.diff(lower) < -1e-12) or np.any(np.diff(upper) < -1e-12):
            raise ValueError("band envelopes must be nondecreasing")
        if abs(lower[-1] - 1.0) > 1e-12 or abs(upper[-1] - 1.0) > 1e-12:
            raise ValueError("band must pin the top support point to 1")
        lower.setflags(write=False)
        upper.setflags(write=False)
        object.__setattr__(self, "lower", lower)
        object.__setattr__(self, "upper", upper)
        object.__setattr__(self, "method", method)

    @property
    def k(self) -> int:
        return int(self.lower.shape[0])

    @property
    def support(self) -> np.ndarray:
        return np.arange(self.k) / (self.k - 1)


@dataclass(frozen=True)
class QuantileQuery:
    tau: float

    def __post_init__(self) -> None:
        if not (0.0 < self.tau < 1.0):
            raise ValueError("tau must lie strictly between 0 and 1")

    def support(self, k: int) -> np.ndarray:
        return np.arange(k) / (k - 1)


def _ecdf(h: Histogram) -> np.ndarray:
    if h.n < 1:
        raise ValueError("no samples")
    return np.cumsum(np.asarray(h.counts, dtype=float)) / h.n


def _finalize(lower: np.ndarray, upper: np.ndarray, method: BandMethod) -> CdfBand:
    # isotonize: a CDF is nondecreasing, so lower bounds propagate left-to-right
    # and upper bounds right-to-left; both directions preserve coverage
    lower = np.maximum.accumulate(np.clip(lower, 0.0, 1.0))
    upper = np.minimum.accumulate(np.clip(upper, 0.0, 1.0)[::-1])[::-1]
    lower[-1] = 1.0
    upper[-1] = 1.0
    upper = np.maximum(upper, lower)
    return CdfBand(lower, upper, method)


def dkwm_band(h: Histogram, c: Confidence) -> CdfBand:
    """Uniform band F_hat +- sqrt(log(2/delta)/(2n)), pinned to 1 at the top."""
    F = _ecdf(h)
    z = math.sqrt(math.log(2.0 / c.delta) / (2.0 * h.n))
    return _finalize(F - z, F + z, BandMethod.DKWM)


def naive_allocation(k: int, c: Confidence) -> np.ndarray:
    """Equal split of the budget over the k-1 nontrivial CDF points."""
    return np.full(k - 1, c.delta / (k - 1))


def data_driven_allocation(h: Histogram, tau: float, c: Confidence) -> np.ndarray:
    """Unequal budget concentrating confidence near the empirical tau-quantile.

    tau_idx is the index attaining the empirical quantile (smallest i with
    F_hat(i) >= tau); point i gets delta/(c * c_i) with c_i = (|i-tau_idx|+1)^2
    and c the normalizer, so the allocation sums to delta exactly.
    """
    if not (0.0 < tau < 1.0):
        raise ValueError("tau must lie strictly between 0 and 1")
    F = _ecdf(h)
    tau_idx = int(np.argmax(F >= tau - 1e-12))  # 0-based
    k = h.k
    i = np.arange(k - 1)
    c_i = (np.abs(i - tau_idx) + 1.0) ** 2
    norm = float(np.sum(1.0 / c_i))
    return c.delta / (norm * c_i)


def kl_band(h: Histogram, c: Confidence, allocation: np.ndarray,
            method: BandMethod = BandMethod.KL_NAIVE) -> CdfBand:
    """Per-point two-point-KL bounds on the CDF, union-bounded by `allocation`.

    allocation has length k-1 (the top CDF point is identically 1) with
    positive entries summing to at most delta.
    """
    allocation = np.asarray(allocation, dtype=float)
    if allocation.shape != (h.k - 1,):
        raise ValueError("allocation must have length k-1")
    if np.any(allocation <= 0.0):
        raise ValueError("allocation entries must be positive")
    if float(allocation.sum()) > c.delta + 1e-12:
        raise ValueError("allocation exceeds the confidence budget")
    F = _ecdf(h)
    z = np.log(2.0 / allocation) / h.n
    lower = np.empty(h.k)
    upper = np.empty(h.k)
    for i in range(h.k - 1):
        lower[i] = invert_kl_binary(float(F[i]), float(z[i]), "lower")
        upper[i] = invert_kl_binary(float(F[i]), float(z[i]), "upper")
    lower[-1] = 1.0
    upper[-1] = 1.0
    return _finalize(lower, upper, method)


def band_for(h: Histogram, c: Confidence, method: BandMethod | str,
             tau: float | None = None) -> CdfBand:
    """Build a band by method tag; the data-driven method needs tau."""
    if isinstance(method, str):
        method = BandMethod(method)
    if method == BandMethod.DKWM:
        return dkwm_band(h, c)
    if method == BandMethod.KL_NAIVE:
        return kl_band(h, c, naive_allocation(h.k, c), BandMethod.KL_NAIVE)
    if tau is None:
        raise ValueError("data-driven band needs the target quantile tau")
    return kl_band(h, c, data_driven_allocation(h, tau, c), BandMethod.KL_DATA_DRIVEN)


def quantile_interval(band: CdfBand, q: QuantileQuery) -> tuple[float, float]:
    """Extreme tau-quantile values among CDFs inside the band.

    lo is the smallest support value whose upper bound reaches tau; hi the
    smallest whose lower bound does (the top point's L=1 guarantees hi exists).
    """
    xs = band.support
    tau = q.tau
    lo = float(xs[np.argmax(band.upper >= tau - 1e-12)])
    hi = float(xs[np.argmax(band.lower >= tau - 1e-12)])
    return lo, hi


def band_width_at(band: CdfBand, tau: float) -> float:
    """Aggregate band slack around level tau:
    sum_i |min(U_i - tau, tau - L_i)| over points whose band straddles tau."""
    L, U = band.lower, band.upper
    straddle = (L <= tau) & (tau <= U)
    if not np.any(straddle):
        return 0.0
    slack = np.minimum(U[straddle] - tau, tau - L[straddle])
    return float(np.sum(np.abs(slack)))

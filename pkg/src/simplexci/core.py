"""Foundational types and information divergences on the probability simplex.

Conventions used throughout the package:

* the simplex is closed (boundary points are legal; extreme values of linear
  functionals are attained there),
* all divergences use the natural logarithm (thresholds are in nats),
* 0*log(0) = 0, and p>0 against q=0 gives +infinity,
* the internal functional scale is always [0,1]; the 1..k star scale is an
  affine display view applied at output only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "Histogram",
    "EmpiricalDistribution",
    "LinearFunctional",
    "Interval",
    "Confidence",
    "normalize",
    "kl",
    "kl_binary",
    "mean",
    "variance",
    "stars_from_unit",
]

_SUM_TOL = 1e-12


def _readonly(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class Histogram:
    """Observed rating counts; ``counts[j]`` is the number of ratings in category j."""

    counts: tuple[int, ...]
    n: int = field(init=False)

    def __init__(self, counts) -> None:
        counts = tuple(int(c) for c in counts)
        if len(counts) < 2:
            raise ValueError("histogram needs at least 2 categories")
        if any(c < 0 for c in counts):
            raise ValueError("counts must be nonnegative")
        object.__setattr__(self, "counts", counts)
        object.__setattr__(self, "n", sum(counts))

    @property
    def k(self) -> int:
        return len(self.counts)


@dataclass(frozen=True)
class EmpiricalDistribution:
    """A point of the closed simplex with the sample size it came from.

    ``n=0`` is allowed only for the "true distribution" role (e.g. an
    experiment's data-generating distribution).
    """

    probs: np.ndarray
    n: int = 0

    def __init__(self, probs, n: int = 0) -> None:
        probs = np.asarray(probs, dtype=float)
        if probs.ndim != 1 or probs.shape[0] < 2:
            raise ValueError("probs must be a vector of length >= 2")
        if np.any(probs < -_SUM_TOL):
            raise ValueError("probs must be nonnegative")
        if abs(float(probs.sum()) - 1.0) > 1e-9:
            raise ValueError(f"probs must sum to 1, got {probs.sum()!r}")
        n = int(n)
        if n < 0:
            raise ValueError("n must be nonnegative")
        probs = np.clip(probs, 0.0, None)
        object.__setattr__(self, "probs", _readonly(probs))
        object.__setattr__(self, "n", n)

    @property
    def k(self) -> int:
        return int(self.probs.shape[0])


@dataclass(frozen=True)
class LinearFunctional:
    """Weight vector for a linear functional, normalized to w[0]=0, w[-1]=1.

    Weights must be nondecreasing (the monotone structure is what pins the
    functional extremes of the level-set region to two-point distributions).
    """

    weights: np.ndarray

    def __init__(self, weights) -> None:
        weights = np.asarray(weights, dtype=float)
        if weights.ndim != 1 or weights.shape[0] < 2:
            raise ValueError("weights must be a vector of length >= 2")
        if weights[0] != 0.0 or weights[-1] != 1.0:
            raise ValueError("weights must satisfy w[0]=0 and w[-1]=1 exactly")
        if np.any(np.diff(weights) < 0):
            raise ValueError("weights must be nondecreasing")
        object.__setattr__(self, "weights", _readonly(weights))

    @property
    def k(self) -> int:
        return int(self.weights.shape[0])

    @classmethod
    def canonical(cls, k: int) -> "LinearFunctional":
        """Equally spaced star weights (i-1)/(k-1), i = 1..k."""
        if k < 2:
            raise ValueError("k must be >= 2")
        return cls(np.arange(k, dtype=float) / (k - 1))

    def is_canonical(self) -> bool:
        k = self.k
        return bool(np.array_equal(self.weights, np.arange(k, dtype=float) / (k - 1)))


@dataclass(frozen=True)
class Interval:
    """Closed subinterval of [0,1]."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (0.0 <= self.lo <= self.hi <= 1.0):
            raise ValueError(f"invalid interval [{self.lo}, {self.hi}]")

    @classmethod
    def clipped(cls, lo: float, hi: float) -> "Interval":
        """Clip endpoints into [0,1] (intervals are restricted to the unit range)."""
        lo = min(max(float(lo), 0.0), 1.0)
        hi = min(max(float(hi), 0.0), 1.0)
        if hi < lo:
            lo = hi = 0.5 * (lo + hi)
        return cls(lo, hi)

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, x: float, slack: float = 1e-12) -> bool:
        return self.lo - slack <= x <= self.hi + slack


@dataclass(frozen=True)
class Confidence:
    """Confidence level 1 - delta."""

    delta: float

    def __post_init__(self) -> None:
        if not (0.0 < self.delta < 1.0):
            raise ValueError("delta must lie strictly between 0 and 1")


def normalize(h: Histogram) -> EmpiricalDistribution:
    """Empirical distribution counts/n of a histogram with n >= 1 samples."""
    if h.n < 1:
        raise ValueError("no samples")
    return EmpiricalDistribution(np.asarray(h.counts, dtype=float) / h.n, n=h.n)


def kl_array(p: np.ndarray, q: np.ndarray) -> float:
    """KL(p, q) = sum p_j log(p_j / q_j) for raw simplex vectors (nats)."""
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise ValueError("length mismatch")
    mask = p > 0.0
    if np.any(q[mask] <= 0.0):
        return math.inf
    return float(np.sum(p[mask] * np.log(p[mask] / q[mask])))


def kl(p: EmpiricalDistribution, q: EmpiricalDistribution) -> float:
    """KL divergence between two distributions on the same alphabet."""
    if p.k != q.k:
        raise ValueError("length mismatch")
    return kl_array(p.probs, q.probs)


def kl_binary(p: float, q: float) -> float:
    """Two-point KL divergence between Bernoulli(p) and Bernoulli(q)."""
    if not (0.0 <= p <= 1.0 and 0.0 <= q <= 1.0):
        raise ValueError("kl_binary arguments must lie in [0,1]")
    out = 0.0
    if p > 0.0:
        if q <= 0.0:
            return math.inf
        out += p * math.log(p / q)
    if p < 1.0:
        if q >= 1.0:
            return math.inf
        out += (1.0 - p) * math.log((1.0 - p) / (1.0 - q))
    return out


def mean(p: EmpiricalDistribution, f: LinearFunctional) -> float:
    """Functional value sum_j w_j p_j, a number in [0,1]."""
    if p.k != f.k:
        raise ValueError("length mismatch")
    return float(np.dot(p.probs, f.weights))


def variance(p: EmpiricalDistribution, f: LinearFunctional) -> float:
    """Population variance of the scalar variable taking value w_j with probability p_j."""
    if p.k != f.k:
        raise ValueError("length mismatch")
    m = float(np.dot(p.probs, f.weights))
    v = float(np.dot(p.probs, f.weights**2)) - m * m
    return max(v, 0.0)


def stars_from_unit(x: float, k: int) -> float:
    """Affine display rescaling from the internal [0,1] scale to 1..k stars."""
    return 1.0 + (k - 1) * x

"""Confidence regions on the probability simplex and their membership tests.

Three region families around an empirical distribution phat with n samples:

* Sanov ball       {Q : KL(phat, Q) <= z}   (note the argument order: the
  empirical distribution is the FIRST argument),
* confidence polytope  {Q : kl_binary(phat_j, q_j) <= z for all j},
* Csiszar level-set region  {Q : min KL(P', Q) over {P' : F(P') = F(phat)} <= z},
  whose functional extremes coincide with the Bernoulli-KL interval on the
  induced scalar variable.

Intersections of the level-set region with either base region split the
confidence budget delta/2 + delta/2 by a union bound.
"""

from __future__ import annotations

import enum
import json
import math
from dataclasses import dataclass

import numpy as np

from . import _kernels as _k
from .core import Confidence, EmpiricalDistribution, Interval, LinearFunctional, kl_binary
from .scalar_bounds import invert_kl_binary

__all__ = [
    "RegionKind",
    "RegionSpec",
    "sanov_threshold",
    "polytope_threshold",
    "csiszar_threshold",
    "member",
    "csiszar_level_interval_direct",
]

_MEMBER_SLACK = 1e-12


class RegionKind(enum.Enum):
    SANOV_BALL = "sanov"
    POLYTOPE = "polytope"
    CSISZAR_LEVEL_SET = "csiszar"
    CSISZAR_PLUS_SANOV = "csiszar-sanov"
    CSISZAR_PLUS_POLYTOPE = "csiszar-polytope"


def sanov_threshold(n: int, k: int, delta: Confidence | float, use_both_terms: bool = False) -> float:
    """Radius of the Sanov ball at confidence 1-delta.

    The default uses only the dimension-based term (k-1)*log(2(k-1)/delta)/n,
    the right choice for small alphabets. With use_both_terms=True the
    combinatorial first term is also evaluated (in the log domain, so large n
    cannot overflow) and the smaller of the two inversions is returned.
    """
    d = delta.delta if isinstance(delta, Confidence) else float(delta)
    if n < 1:
        raise ValueError("n must be >= 1")
    if k < 2:
        raise ValueError("k must be >= 2")
    if not (0.0 < d < 1.0):
        raise ValueError("delta must lie in (0,1)")
    z_b = (k - 1) * math.log(2.0 * (k - 1) / d) / n
    if not use_both_terms:
        return z_b
    # log C(n,k) with C = (6e/pi^{3/2}) * (1 + sum_{i=1}^{k-2} (e^3 n / (2 pi i))^{i/2})
    log_lead = math.log(6.0) + 1.0 - 1.5 * math.log(math.pi)
    terms = [0.0]  # the leading "1"
    for i in range(1, k - 1):
        terms.append(0.5 * i * (3.0 + math.log(n) - math.log(2.0 * math.pi * i)))
    mx = max(terms)
    log_sum = mx + math.log(sum(math.exp(t - mx) for t in terms))
    z_a = (log_lead + log_sum - math.log(d)) / n
    return min(z_a, z_b)


def polytope_threshold(n: int, k: int, delta: Confidence | float) -> float:
    """Per-coordinate radius log(2k/delta)/n of the confidence polytope."""
    d = delta.delta if isinstance(delta, Confidence) else float(delta)
    if n < 1:
        raise ValueError("n must be >= 1")
    if k < 2:
        raise ValueError("k must be >= 2")
    if not (0.0 < d < 1.0):
        raise ValueError("delta must lie in (0,1)")
    return math.log(2.0 * k / d) / n


def csiszar_threshold(n: int, delta: Confidence | float) -> float:
    """Radius log(2/delta)/n of the level-set region."""
    d = delta.delta if isinstance(delta, Confidence) else float(delta)
    if n < 1:
        raise ValueError("n must be >= 1")
    return math.log(2.0 / d) / n


@dataclass(frozen=True)
class RegionSpec:
    """A confidence region descriptor: kind, center, and derived thresholds.

    For the intersection kinds both sub-regions receive delta/2; ``z`` is the
    base-region threshold and ``z_prime`` the level-set threshold. For plain
    kinds only ``z`` is set. ``functional`` is required for the Csiszar kinds.
    """

    kind: RegionKind
    center: EmpiricalDistribution
    n: int
    delta: Confidence
    functional: LinearFunctional | None = None
    z: float = 0.0
    z_prime: float | None = None
    use_both_sanov_terms: bool = False

    @classmethod
    def build(
        cls,
        kind: RegionKind,
        center: EmpiricalDistribution,
        delta: Confidence,
        functional: LinearFunctional | None = None,
        n: int | None = None,
        use_both_sanov_terms: bool = False,
        split: float = 0.5,
    ) -> "RegionSpec":
        """Construct a region with thresholds derived from (kind, n, k, delta).

        ``split`` is the fraction of delta given to the base region in the
        intersection kinds (the level-set region gets the rest).
        """
        n = center.n if n is None else int(n)
        if n < 1:
            raise ValueError("region needs a sample size n >= 1")
        k = center.k
        if kind in (RegionKind.CSISZAR_LEVEL_SET, RegionKind.CSISZAR_PLUS_SANOV,
                    RegionKind.CSISZAR_PLUS_POLYTOPE):
            if functional is None:
                raise ValueError(f"region kind {kind.value} requires a functional")
            if functional.k != k:
                raise ValueError("functional length mismatch")
        if not (0.0 < split < 1.0):
            raise ValueError("split must lie in (0,1)")
        d = delta.delta
        if kind == RegionKind.SANOV_BALL:
            z, zp = sanov_threshold(n, k, d, use_both_sanov_terms), None
        elif kind == RegionKind.POLYTOPE:
            z, zp = polytope_threshold(n, k, d), None
        elif kind == RegionKind.CSISZAR_LEVEL_SET:
            z, zp = csiszar_threshold(n, d), None
        elif kind == RegionKind.CSISZAR_PLUS_SANOV:
            z = sanov_threshold(n, k, d * split, use_both_sanov_terms)
            zp = csiszar_threshold(n, d * (1.0 - split))
        elif kind == RegionKind.CSISZAR_PLUS_POLYTOPE:
            z = polytope_threshold(n, k, d * split)
            zp = csiszar_threshold(n, d * (1.0 - split))
        else:  # pragma: no cover
            raise ValueError(f"unknown region kind {kind}")
        return cls(kind=kind, center=center, n=n, delta=delta, functional=functional,
                   z=z, z_prime=zp, use_both_sanov_terms=use_both_sanov_terms)

    @property
    def k(self) -> int:
        return self.center.k

    def polytope_box(self, z: float | None = None) -> tuple[np.ndarray, np.ndarray]:
        """Per-coordinate [a_j, b_j] bounds of the polytope at radius z."""
        z = self.z if z is None else z
        p = self.center.probs
        a = np.array([invert_kl_binary(float(pj), z, "lower") for pj in p])
        b = np.array([invert_kl_binary(float(pj), z, "upper") for pj in p])
        return a, b

    def to_json(self) -> str:
        obj = {
            "kind": self.kind.value,
            "center": [float(x) for x in self.center.probs],
            "n": self.n,
            "delta": self.delta.delta,
            "weights": None if self.functional is None
            else [float(x) for x in self.functional.weights],
            "thresholds": {"z": self.z, "z_prime": self.z_prime},
            "use_both_sanov_terms": self.use_both_sanov_terms,
        }
        return json.dumps(obj, sort_keys=True)

    @classmethod
    def from_json(cls, text: str) -> "RegionSpec":
        obj = json.loads(text)
        fn = obj.get("weights")
        return cls(
            kind=RegionKind(obj["kind"]),
            center=EmpiricalDistribution(obj["center"], n=obj["n"]),
            n=obj["n"],
            delta=Confidence(obj["delta"]),
            functional=None if fn is None else LinearFunctional(fn),
            z=obj["thresholds"]["z"],
            z_prime=obj["thresholds"]["z_prime"],
            use_both_sanov_terms=obj.get("use_both_sanov_terms", False),
        )


def _sanov_member(center: np.ndarray, q: np.ndarray, z: float) -> bool:
    return _k.kl_vec(center, q) <= z + _MEMBER_SLACK


def _polytope_member(center: np.ndarray, q: np.ndarray, z: float) -> bool:
    return all(kl_binary(float(pj), float(qj)) <= z + _MEMBER_SLACK
               for pj, qj in zip(center, q))


def csiszar_distance(q: np.ndarray, f: LinearFunctional, level: float) -> float:
    """min KL(P', q) over the level set {P' : F(P') = level} (the region's
    defining quantity), computed by convex duality via exponential tilting."""
    val, _ = _k.rate_value(np.asarray(q, dtype=float), f.weights, float(level), 0.0)
    return float(val)


def member(region: RegionSpec, q: EmpiricalDistribution) -> bool:
    """Membership of q in the region (closed simplex, non-strict thresholds)."""
    if q.k != region.k:
        raise ValueError("length mismatch")
    c = region.center.probs
    qv = q.probs
    kind = region.kind
    if kind == RegionKind.SANOV_BALL:
        return _sanov_member(c, qv, region.z)
    if kind == RegionKind.POLYTOPE:
        return _polytope_member(c, qv, region.z)
    if region.functional is None:
        raise ValueError(f"region kind {kind.value} requires a functional")
    f = region.functional
    level = float(np.dot(c, f.weights))
    if kind == RegionKind.CSISZAR_LEVEL_SET:
        return csiszar_distance(qv, f, level) <= region.z + _MEMBER_SLACK
    if kind == RegionKind.CSISZAR_PLUS_SANOV:
        return (_sanov_member(c, qv, region.z)
                and csiszar_distance(qv, f, level) <= region.z_prime + _MEMBER_SLACK)
    if kind == RegionKind.CSISZAR_PLUS_POLYTOPE:
        return (_polytope_member(c, qv, region.z)
                and csiszar_distance(qv, f, level) <= region.z_prime + _MEMBER_SLACK)
    raise ValueError(f"unknown region kind {kind}")  # pragma: no cover


def csiszar_level_interval_direct(
    phat: EmpiricalDistribution, f: LinearFunctional, c: Confidence
) -> Interval:
    """Functional extremes of the level-set region at radius log(2/delta)/n.

    The monotone-weight structure pins both extremes to two-point
    distributions, so this is the Bernoulli-KL interval on the induced scalar.
    """
    if phat.n < 1:
        raise ValueError("needs a sample size n >= 1")
    if phat.k != f.k:
        raise ValueError("length mismatch")
    m = float(np.dot(phat.probs, f.weights))
    z = csiszar_threshold(phat.n, c)
    return Interval(invert_kl_binary(m, z, "lower"), invert_kl_binary(m, z, "upper"))

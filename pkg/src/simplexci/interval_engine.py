"""Optimization core: functional extremes over confidence regions.

The plain regions (Sanov ball, polytope) admit direct solutions: a greedy
fill for the box polytope and a one-dimensional dual root-find for the KL
ball. The intersections with the level-set region are bi-level problems,
reduced to a binary search on the functional value u where each probe solves
the convex feasibility program

    minimize KL(P', Q)   s.t.  F(P') = F(phat),  F(Q) = u,  Q in base region

via an interior-point method on Q after the inner P'-minimization is folded
into the rate function (see :mod:`simplexci._kernels`). The brute-force grid
oracle used for verification lives here too.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

from . import _kernels as _k
from .core import Confidence, EmpiricalDistribution, Interval, LinearFunctional
from .simplex_regions import (
    RegionKind,
    RegionSpec,
    csiszar_threshold,
    polytope_threshold,
    sanov_threshold,
)

__all__ = [
    "FeasibilityProblem",
    "SolverReport",
    "SolverError",
    "optimize_linear_over_region",
    "feasibility_value",
    "csiszar_intersection_interval",
    "grid_oracle",
    "asymptotic_exponent_check",
]

FUNCTIONAL_TOL = 1e-6  # absolute tolerance on functional values
_FEAS_SLACK = 1e-9


class SolverError(RuntimeError):
    """Optimization failure; carries the offending SolverReport when available."""

    def __init__(self, message: str, report: "SolverReport | None" = None) -> None:
        super().__init__(message)
        self.report = report


@dataclass(frozen=True)
class FeasibilityProblem:
    """One probe of the bi-level binary search at target functional value u.

    ``base_kind`` is SANOV_BALL or POLYTOPE with radius ``z``;
    ``csiszar_radius`` is the level-set radius z' the probe is compared to.
    """

    phat: EmpiricalDistribution
    f: LinearFunctional
    u: float
    base_kind: RegionKind
    z: float
    csiszar_radius: float
    warm_start: np.ndarray | None = None

    def __post_init__(self) -> None:
        if not (0.0 <= self.u <= 1.0):
            raise ValueError("u must lie in [0,1]")
        if self.base_kind not in (RegionKind.SANOV_BALL, RegionKind.POLYTOPE):
            raise ValueError("base region must be the Sanov ball or the polytope")
        if self.z < 0 or self.csiszar_radius < 0:
            raise ValueError("radii must be nonnegative")


@dataclass(frozen=True)
class SolverReport:
    objective_value: float
    q_opt: EmpiricalDistribution | None
    p_opt: EmpiricalDistribution | None
    iterations: int
    converged: bool
    kkt_residual: float


def _tilted_argmin(q: np.ndarray, w: np.ndarray, level: float) -> np.ndarray:
    """The inner minimizer P' of KL(P', q) over {F(P') = level}."""
    val, t = _k.rate_value(q, w, level, 0.0)
    if not np.isfinite(val):
        return q.copy()
    if t <= -_k._T_CAP + 1.0 or t >= _k._T_CAP - 1.0:
        target_w = w[-1] if t > 0 else w[0]
        cls = np.abs(w - target_w) <= 1e-13
        p = np.where(cls, q, 0.0)
        s = p.sum()
        return p / s if s > 0 else q.copy()
    out = np.empty_like(q)
    _k.tilt_to_mean(q, w, level, out)
    return out


def optimize_linear_over_region(
    region: RegionSpec, f: LinearFunctional, sense: str
) -> float:
    """Extreme value of the functional over a Sanov ball or polytope region.

    Exact up to the 1e-6 functional tolerance (the ball uses a golden-section
    over the off-support mass; the box is a closed-form greedy).
    """
    if sense not in ("min", "max"):
        raise ValueError("sense must be 'min' or 'max'")
    if f.k != region.k:
        raise ValueError("length mismatch")
    w = f.weights
    p = region.center.probs
    if region.kind == RegionKind.SANOV_BALL:
        if sense == "max":
            val = float(_k.sanov_linmax(p, w, region.z))
        else:
            val = 1.0 - float(_k.sanov_linmax(p, 1.0 - w, region.z))
    elif region.kind == RegionKind.POLYTOPE:
        a, b = region.polytope_box()
        if sense == "max":
            val = float(_k.box_linmax(a, b, w))
        else:
            val = -float(_k.box_linmax(a, b, -w))
    else:
        raise ValueError(f"direct optimization not defined for {region.kind.value}")
    return min(max(val, 0.0), 1.0)


def feasibility_value(problem: FeasibilityProblem) -> SolverReport:
    """Global minimum of KL(P', Q) for the probe; +inf when the Q-set is empty."""
    phat = problem.phat.probs
    w = problem.f.weights
    level = float(np.dot(phat, w))
    warm = problem.warm_start
    use_warm = warm is not None
    q0 = warm if use_warm else np.zeros_like(phat)
    if problem.base_kind == RegionKind.SANOV_BALL:
        status, obj, q, t, iters, res = _k.probe_sanov(
            phat, w, level, problem.u, problem.z, np.asarray(q0, dtype=float), use_warm
        )
    else:
        from .scalar_bounds import invert_kl_binary

        a = np.array([invert_kl_binary(float(pj), problem.z, "lower") for pj in phat])
        b = np.array([invert_kl_binary(float(pj), problem.z, "upper") for pj in phat])
        status, obj, q, t, iters, res = _k.probe_box(
            a, b, w, level, problem.u, np.asarray(q0, dtype=float), use_warm
        )
    if status == _k.INFEASIBLE:
        return SolverReport(math.inf, None, None, int(iters), True, 0.0)
    q = np.clip(q, 0.0, None)
    q = q / q.sum()
    q_opt = EmpiricalDistribution(q)
    p_opt = EmpiricalDistribution(_tilted_argmin(q, w, level))
    converged = status in (_k.OK, _k.BOUNDARY)
    return SolverReport(float(obj), q_opt, p_opt, int(iters), converged, float(res))


def csiszar_intersection_interval(
    phat: EmpiricalDistribution,
    f: LinearFunctional,
    c: Confidence,
    base: RegionKind | str,
    split: float = 0.5,
    use_both_sanov_terms: bool = False,
    trace: list | None = None,
) -> Interval:
    """Functional extremes over (level-set region) ∩ (base region).

    The two regions receive delta*split and delta*(1-split) of the budget
    (equal halves by default). Each endpoint is found by bisection on the
    functional value u, deciding feasibility with the probe solver; the search
    is capped at the base region's own extremes, whose achievability makes the
    bracket valid. Bisection tolerance 1e-6 on u, at most 40 iterations.
    """
    if isinstance(base, str):
        base = RegionKind(base)
    if base == RegionKind.CSISZAR_PLUS_SANOV:
        base = RegionKind.SANOV_BALL
    elif base == RegionKind.CSISZAR_PLUS_POLYTOPE:
        base = RegionKind.POLYTOPE
    if base not in (RegionKind.SANOV_BALL, RegionKind.POLYTOPE):
        raise ValueError("base must be the Sanov ball or the polytope")
    if phat.n < 1:
        raise ValueError("needs a sample size n >= 1")
    if not (0.0 < split < 1.0):
        raise ValueError("split must lie in (0,1)")
    n, k = phat.n, phat.k
    d = c.delta
    if base == RegionKind.SANOV_BALL:
        z = sanov_threshold(n, k, d * split, use_both_sanov_terms)
        base_region = RegionSpec.build(
            RegionKind.SANOV_BALL, phat, Confidence(d * split), n=n,
            use_both_sanov_terms=use_both_sanov_terms)
    else:
        z = polytope_threshold(n, k, d * split)
        base_region = RegionSpec.build(RegionKind.POLYTOPE, phat, Confidence(d * split), n=n)
    z_prime = csiszar_threshold(n, d * (1.0 - split))

    level = float(np.dot(phat.probs, f.weights))
    base_lo = optimize_linear_over_region(base_region, f, "min")
    base_hi = optimize_linear_over_region(base_region, f, "max")

    pv = phat.probs
    w = f.weights
    if base == RegionKind.POLYTOPE:
        box_a, box_b = base_region.polytope_box()
    warm: dict[str, np.ndarray | None] = {"q": None}

    def feasible(u: float) -> bool:
        q0 = warm["q"]
        use_warm = q0 is not None
        if not use_warm:
            q0 = np.zeros_like(pv)
        if base == RegionKind.SANOV_BALL:
            status, obj, q, _t, _it, _res = _k.probe_sanov(pv, w, level, u, z, q0, use_warm)
        else:
            status, obj, q, _t, _it, _res = _k.probe_box(box_a, box_b, w, level, u, q0, use_warm)
        if status != _k.INFEASIBLE:
            warm["q"] = q
        if trace is not None:
            trace.append({"u": u, "objective": float(obj),
                          "converged": status in (_k.OK, _k.BOUNDARY)})
        if math.isnan(obj):
            raise SolverError(f"probe failed at u={u}")
        return obj <= z_prime + _FEAS_SLACK

    def search(lo: float, hi: float) -> float:
        # invariant: lo feasible, hi infeasible (after the endpoint checks);
        # lo == level is feasible by construction (Q = phat has value 0)
        if abs(hi - lo) <= FUNCTIONAL_TOL:
            return lo
        if feasible(hi):
            return hi
        if lo != level and not feasible(lo):
            raise SolverError("no sign change in bisection bracket")
        for _ in range(40):
            if abs(hi - lo) <= FUNCTIONAL_TOL:
                break
            mid = 0.5 * (lo + hi)
            if feasible(mid):
                lo = mid
            else:
                hi = mid
        return lo

    upper = search(level, base_hi)
    warm["q"] = None
    lower = search(level, base_lo)
    return Interval.clipped(lower, upper)


# ---------------------------------------------------------------------------
# brute-force grid oracle
# ---------------------------------------------------------------------------


_MAX_LATTICE_ROWS = 25_000_000


def simplex_lattice(k: int, step: float) -> np.ndarray:
    """Lattice over the closed simplex with spacing ~step (rows sum to 1)."""
    m = max(int(round(1.0 / step)), 1)
    rows = math.comb(m + k - 1, k - 1)
    if rows > _MAX_LATTICE_ROWS:
        raise ValueError(
            f"lattice of {rows} points is too large; use a coarser step for k={k}")
    return _int_lattice(k, m) / m


@lru_cache(maxsize=8)
def _int_lattice(k: int, m: int) -> np.ndarray:
    if k == 1:
        out = np.array([[m]], dtype=np.float64)
    else:
        blocks = []
        for first in range(m + 1):
            rest = _int_lattice(k - 1, m - first)
            blk = np.empty((rest.shape[0], k))
            blk[:, 0] = first
            blk[:, 1:] = rest
            blocks.append(blk)
        out = np.vstack(blocks)
    out.setflags(write=False)
    return out


def _kl_rows(center: np.ndarray, grid: np.ndarray) -> np.ndarray:
    """KL(center, grid_row) for every row, +inf where unsupported."""
    out = np.zeros(grid.shape[0])
    for j, cj in enumerate(center):
        if cj <= 0.0:
            continue
        col = grid[:, j]
        with np.errstate(divide="ignore"):
            out = out + cj * (np.log(cj) - np.log(col))
    return out


def _polytope_mask(center: np.ndarray, grid: np.ndarray, z: float) -> np.ndarray:
    from .scalar_bounds import _kl_binary_vec

    ok = np.ones(grid.shape[0], dtype=bool)
    for j, cj in enumerate(center):
        col = grid[:, j]
        vals = _kl_binary_vec(np.full_like(col, cj), col)
        ok &= vals <= z + 1e-12
    return ok


def _level_lattice(k: int, w: np.ndarray, level: float, step: float) -> np.ndarray:
    """Lattice over the level set {P' : w.P' = level} (exact for k=3)."""
    if k == 3:
        w2 = float(w[1])
        hi = 1.0
        if w2 > 0:
            hi = min(hi, level / w2)
        if w2 < 1:
            hi = min(hi, (1.0 - level) / (1.0 - w2))
        hi = max(hi, 0.0)
        m = max(int(math.ceil(hi / step)), 1)
        p2 = np.linspace(0.0, hi, m + 1)
        p3 = level - w2 * p2
        p1 = 1.0 - p2 - p3
        pts = np.stack([p1, p2, p3], axis=1)
        pts = np.clip(pts, 0.0, 1.0)
        return pts / pts.sum(axis=1, keepdims=True)
    coarse = max(step, 5e-3 if k <= 4 else 2e-2)
    grid = simplex_lattice(k, coarse)
    fv = grid @ w
    sel = np.abs(fv - level) <= coarse
    if not np.any(sel):
        sel = np.abs(fv - level) <= 2 * coarse
    return grid[sel]


def _csiszar_scan_extreme(
    grid: np.ndarray,
    fvals: np.ndarray,
    candidates: np.ndarray,
    levels: np.ndarray,
    z_prime: float,
    sense: str,
) -> float | None:
    """Extreme functional value among candidate rows inside the level-set
    region, checked against an enumerated level-set lattice in batches."""
    order = np.argsort(fvals[candidates])
    idx = candidates[order if sense == "min" else order[::-1]]
    logs = np.log(np.maximum(grid, 1e-300))
    ent = np.sum(np.where(levels > 0, levels * np.log(np.maximum(levels, 1e-300)), 0.0),
                 axis=1)
    batch = 256
    for start in range(0, idx.shape[0], batch):
        rows = idx[start:start + batch]
        # KL(P'_l, q_r) = sum_l P'l log P'l - P'l . log q_r
        cross = levels @ logs[rows].T
        d = ent[:, None] - cross
        member = np.min(d, axis=0) <= z_prime + 1e-12
        if np.any(member):
            vals = fvals[rows[member]]
            return float(vals.min() if sense == "min" else vals.max())
    return None


def grid_oracle(region: RegionSpec, f: LinearFunctional, step: float) -> Interval:
    """Exhaustive lattice search for the functional extremes over a region.

    Verification-only path: memberships are evaluated directly from the
    region definitions (level-set membership via an enumerated inner lattice
    rather than the production tilting solver). Restricted to k <= 5 and
    step >= 1e-4 to bound cost.
    """
    k = region.k
    if k > 5:
        raise ValueError("grid oracle limited to k <= 5")
    if step < 1e-4:
        raise ValueError("grid oracle limited to step >= 1e-4")
    if f.k != k:
        raise ValueError("length mismatch")
    w = f.weights
    grid = simplex_lattice(k, step)
    fvals = grid @ w
    center = region.center.probs
    kind = region.kind

    if kind == RegionKind.SANOV_BALL:
        mask = _kl_rows(center, grid) <= region.z + 1e-12
        vals = fvals[mask]
        return Interval.clipped(float(vals.min()), float(vals.max()))
    if kind == RegionKind.POLYTOPE:
        mask = _polytope_mask(center, grid, region.z)
        vals = fvals[mask]
        return Interval.clipped(float(vals.min()), float(vals.max()))

    if region.functional is None:
        raise ValueError("level-set region oracle requires a functional")
    level = float(np.dot(center, w))
    levels = _level_lattice(k, w, level, step)
    if kind == RegionKind.CSISZAR_LEVEL_SET:
        z_prime = region.z
        cand = np.arange(grid.shape[0])
    elif kind == RegionKind.CSISZAR_PLUS_SANOV:
        z_prime = region.z_prime
        cand = np.nonzero(_kl_rows(center, grid) <= region.z + 1e-12)[0]
    elif kind == RegionKind.CSISZAR_PLUS_POLYTOPE:
        z_prime = region.z_prime
        cand = np.nonzero(_polytope_mask(center, grid, region.z))[0]
    else:  # pragma: no cover
        raise ValueError(f"unknown region kind {kind}")
    hi = _csiszar_scan_extreme(grid, fvals, cand, levels, z_prime, "max")
    lo = _csiszar_scan_extreme(grid, fvals, cand, levels, z_prime, "min")
    if hi is None or lo is None:
        # the lattice missed the region entirely; fall back to the center
        return Interval.clipped(level, level)
    return Interval.clipped(lo, hi)


def asymptotic_exponent_check(
    p: EmpiricalDistribution, f: LinearFunctional, eps: float
) -> float:
    """Ratio of the exact constrained-KL exponent to its small-eps quadratic.

    r(eps) = [min{KL(Q, p) : F(Q) >= F(p) + eps}] / [eps^2 / (2 Var_p(F))];
    the numerator is the convex dual (tilting) solution of the I-projection
    onto the half-space. r(eps) -> 1 as eps -> 0.
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    if p.k != f.k:
        raise ValueError("length mismatch")
    w = f.weights
    pv = p.probs
    m = float(np.dot(pv, w))
    var = float(np.dot(pv, w**2)) - m * m
    if var <= 1e-15:
        raise ValueError("degenerate distribution: zero variance")
    target = m + eps
    if target > 1.0 + 1e-12:
        raise ValueError("empty constraint set: F(p) + eps exceeds 1")
    val, _ = _k.rate_value(pv, w, min(target, 1.0), 0.0)
    if not np.isfinite(val):
        raise ValueError("constraint set unreachable from the support of p")
    return float(val) / (eps * eps / (2.0 * var))

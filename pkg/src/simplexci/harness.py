"""Reproducible experiment harness: sample sizes needed per interval width.

An experiment streams i.i.d. ratings from a chosen true distribution and
measures, for each method tag and target width, the number of samples at
which the method's interval (or CDF-band width around a quantile) first
reaches the target. Sample sizes are averaged over repetitions and normalized
to the per-width best method.

Seeding uses a splittable scheme: every probe derives its own SeedSequence
from (experiment seed, width index, repetition, probed n), so cells are
order-independent, can run in parallel (capped by SIMPLEXCI_THREADS), and all
methods see identical samples at the same probed n, which lets pointwise
interval containments carry over to the measured sample sizes.
"""

from __future__ import annotations

import json
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import (
    Confidence,
    Histogram,
    Interval,
    LinearFunctional,
    normalize,
)
from .interval_engine import (
    FeasibilityProblem,
    csiszar_intersection_interval,
    feasibility_value,
    optimize_linear_over_region,
)
from .quantile_bands import band_for, band_width_at
from .scalar_bounds import (
    bernoulli_kl_interval,
    empirical_bernstein_interval,
    hoeffding_interval,
)
from .simplex_regions import (
    RegionKind,
    RegionSpec,
    csiszar_level_interval_direct,
    csiszar_threshold,
    polytope_threshold,
    sanov_threshold,
)

__all__ = [
    "MEAN_METHODS",
    "BAND_METHODS",
    "EXPERIMENT_DISTRIBUTIONS",
    "face_midpoint",
    "mean_interval",
    "method_contains_mean",
    "ExperimentConfig",
    "ExperimentResult",
    "required_sample_size",
    "run_experiment",
    "write_results_csv",
    "write_results_json",
    "write_bars_svg",
]

MEAN_METHODS = (
    "hoeffding",
    "empirical-bernstein",
    "bernoulli-kl",
    "sanov",
    "polytope",
    "csiszar",
    "csiszar-sanov",
    "csiszar-polytope",
)
BAND_METHODS = ("dkwm", "kl-naive", "kl-dd")

DEFAULT_WIDTHS = (1 / 4, 1 / 8, 1 / 16, 1 / 32, 1 / 64, 1 / 128)
DEFAULT_MEAN_METHODS = (
    "hoeffding",
    "empirical-bernstein",
    "bernoulli-kl",
    "csiszar-sanov",
    "csiszar-polytope",
)

N_CAP = 10**7

# the k=5 distributions the experiments exercise: simplex midpoint, face
# midpoints, a sharply concentrated one, and a real contest histogram
EXPERIMENT_DISTRIBUTIONS: dict[str, tuple[float, ...]] = {
    "uniform": (0.2, 0.2, 0.2, 0.2, 0.2),
    "face-345": (0.0, 0.0, 1 / 3, 1 / 3, 1 / 3),
    "spike-3": (0.0, 0.05, 0.9, 0.05, 0.0),
    "bernoulli-ends": (0.5, 0.0, 0.0, 0.0, 0.5),
    "contest": (365 / 1061, 308 / 1061, 294 / 1061, 67 / 1061, 27 / 1061),
}


def face_midpoint(k: int, support: tuple[int, ...]) -> tuple[float, ...]:
    """Midpoint of the simplex face spanned by the given category indices."""
    if not support or any(not 0 <= j < k for j in support):
        raise ValueError("support must be a nonempty subset of range(k)")
    p = [0.0] * k
    for j in support:
        p[j] = 1.0 / len(support)
    return tuple(p)


def mean_interval(
    h: Histogram,
    f: LinearFunctional,
    c: Confidence,
    method: str,
    split: float = 0.5,
) -> Interval:
    """Confidence interval for the functional mean by method tag."""
    if method == "hoeffding":
        return hoeffding_interval(h, f, c)
    if method == "empirical-bernstein":
        return empirical_bernstein_interval(h, f, c)
    if method == "bernoulli-kl":
        return bernoulli_kl_interval(h, f, c)
    if method == "csiszar":
        return csiszar_level_interval_direct(normalize(h), f, c)
    if method in ("sanov", "polytope"):
        kind = RegionKind.SANOV_BALL if method == "sanov" else RegionKind.POLYTOPE
        region = RegionSpec.build(kind, normalize(h), c)
        return Interval.clipped(
            optimize_linear_over_region(region, f, "min"),
            optimize_linear_over_region(region, f, "max"),
        )
    if method in ("csiszar-sanov", "csiszar-polytope"):
        base = RegionKind.SANOV_BALL if method.endswith("sanov") else RegionKind.POLYTOPE
        return csiszar_intersection_interval(normalize(h), f, c, base, split=split)
    raise ValueError(f"unknown method {method!r}")


def method_contains_mean(
    h: Histogram, f: LinearFunctional, c: Confidence, method: str, m: float,
    split: float = 0.5,
) -> bool:
    """Whether the method's interval contains the value m.

    For the intersection methods this is decided with a single feasibility
    probe at u=m (the regions are convex, so m lies between the functional
    extremes iff the level slice meets the intersected region); the other
    methods just build the interval.
    """
    if method in ("csiszar-sanov", "csiszar-polytope"):
        phat = normalize(h)
        n, k = phat.n, phat.k
        d = c.delta
        if method == "csiszar-sanov":
            kind = RegionKind.SANOV_BALL
            z = sanov_threshold(n, k, d * split)
        else:
            kind = RegionKind.POLYTOPE
            z = polytope_threshold(n, k, d * split)
        z_prime = csiszar_threshold(n, d * (1.0 - split))
        base = RegionSpec.build(kind, phat, Confidence(d * split), n=n)
        lo = optimize_linear_over_region(base, f, "min")
        hi = optimize_linear_over_region(base, f, "max")
        if not (lo - 1e-9 <= m <= hi + 1e-9):
            return False
        report = feasibility_value(
            FeasibilityProblem(phat, f, min(max(m, 0.0), 1.0), kind, z, z_prime)
        )
        return report.objective_value <= z_prime + 1e-9
    return mean_interval(h, f, c, method, split=split).contains(m)


@dataclass(frozen=True)
class ExperimentConfig:
    """Describes one sample-size-versus-width experiment."""

    true_dist: tuple[float, ...]
    delta: float = 0.05
    weights: tuple[float, ...] | None = None
    widths: tuple[float, ...] = DEFAULT_WIDTHS
    methods: tuple[str, ...] = DEFAULT_MEAN_METHODS
    repetitions: int = 20
    seed: int = 20240501
    mode: str = "mean"
    tau: float | None = None

    def __post_init__(self) -> None:
        p = np.asarray(self.true_dist, dtype=float)
        if p.ndim != 1 or p.shape[0] < 2 or np.any(p < 0) or abs(p.sum() - 1) > 1e-9:
            raise ValueError("true_dist must be a probability vector")
        if not (0 < self.delta < 1):
            raise ValueError("delta must lie in (0,1)")
        widths = tuple(self.widths)
        if any(b >= a for a, b in zip(widths, widths[1:])):
            raise ValueError("widths must be strictly decreasing")
        if any(not (0 < wdt <= 1) for wdt in widths):
            raise ValueError("widths must lie in (0,1]")
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")
        if self.mode not in ("mean", "quantile"):
            raise ValueError("mode must be 'mean' or 'quantile'")
        valid = MEAN_METHODS if self.mode == "mean" else BAND_METHODS
        for m in self.methods:
            if m not in valid:
                raise ValueError(f"method {m!r} not valid for mode {self.mode!r}")
        if self.mode == "quantile" and self.tau is None:
            raise ValueError("quantile mode needs tau")

    @property
    def k(self) -> int:
        return len(self.true_dist)

    def functional(self) -> LinearFunctional:
        if self.weights is None:
            return LinearFunctional.canonical(self.k)
        return LinearFunctional(self.weights)

    def to_dict(self) -> dict:
        return {
            "true_dist": list(self.true_dist),
            "delta": self.delta,
            "weights": None if self.weights is None else list(self.weights),
            "widths": list(self.widths),
            "methods": list(self.methods),
            "repetitions": self.repetitions,
            "seed": self.seed,
            "mode": self.mode,
            "tau": self.tau,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "ExperimentConfig":
        kwargs = {"true_dist": tuple(obj["true_dist"])}
        for key in ("delta", "repetitions", "seed", "mode", "tau"):
            if key in obj and obj[key] is not None:
                kwargs[key] = obj[key]
        for key in ("weights", "widths", "methods"):
            if key in obj and obj[key] is not None:
                kwargs[key] = tuple(obj[key])
        return cls(**kwargs)


@dataclass(frozen=True)
class ExperimentResult:
    config: ExperimentConfig
    rows: tuple[dict, ...]  # one per (method, width): n_avg, n_normalized, n_values

    def row(self, method: str, width: float) -> dict:
        for r in self.rows:
            if r["method"] == method and r["width"] == width:
                return r
        raise KeyError((method, width))


def _sample_histogram(rng: np.random.Generator, p: np.ndarray, n: int) -> Histogram:
    return Histogram(rng.multinomial(n, p))


def _width_of(h: Histogram, cfg_method: str, f: LinearFunctional, c: Confidence,
              tau: float | None) -> float:
    if cfg_method in BAND_METHODS and tau is not None:
        band = band_for(h, c, cfg_method, tau)
        return band_width_at(band, tau)
    return mean_interval(h, f, c, cfg_method).width


def required_sample_size(
    true_dist,
    method: str,
    width: float,
    delta: float,
    seed,
    weights=None,
    tau: float | None = None,
) -> int:
    """Samples needed (one repetition) for the method to reach the width.

    Doubles n from 2 until the freshly-sampled interval reaches the target
    width, then bisects to the smallest such n, drawing a fresh n-sample at
    every probe. The probe at a given n is seeded by (seed, n), so methods
    sharing a seed see identical samples and pointwise interval containments
    lift to the returned sample sizes. Raises when the 1e7 cap is hit.
    """
    if not (0.0 < width <= 1.0):
        raise ValueError("width must lie in (0,1]")
    p = np.asarray(true_dist, dtype=float)
    f = LinearFunctional.canonical(p.shape[0]) if weights is None else LinearFunctional(weights)
    c = Confidence(delta)
    base_entropy = list(seed) if isinstance(seed, (list, tuple)) else [int(seed)]

    def width_at(n: int) -> float:
        rng = np.random.default_rng(np.random.SeedSequence(base_entropy + [n]))
        return _width_of(_sample_histogram(rng, p, n), method, f, c, tau)

    n = 2
    if width_at(n) <= width:
        return n
    while True:
        n *= 2
        if n > N_CAP:
            raise RuntimeError("width unreachable within the sample cap")
        if width_at(n) <= width:
            break
    lo, hi = n // 2, n
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if width_at(mid) <= width:
            hi = mid
        else:
            lo = mid
    return hi


def _cell_seed(seed: int, wi: int, rep: int) -> list[int]:
    # method-independent: all methods replay identical samples per (width,
    # rep, n), so pointwise interval containments carry over to sample sizes
    return [int(seed), 1013 + wi, rep]


def _cell_task(args) -> tuple[int, int, int, int]:
    cfg_dict, mi, wi, rep = args
    cfg = ExperimentConfig.from_dict(cfg_dict)
    method = cfg.methods[mi]
    width = cfg.widths[wi]
    n = required_sample_size(
        cfg.true_dist, method, width, cfg.delta,
        _cell_seed(cfg.seed, wi, rep),
        weights=cfg.weights, tau=cfg.tau,
    )
    return mi, wi, rep, n


def _worker_count() -> int:
    cap = os.environ.get("SIMPLEXCI_THREADS")
    avail = os.cpu_count() or 1
    if cap is None:
        return avail
    try:
        return max(1, min(avail, int(cap)))
    except ValueError:
        return avail


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Average required sample sizes over repetitions, normalized per width.

    Deterministic given the config seed; cells may execute in parallel
    (process pool) without changing the result.
    """
    tasks = [
        (cfg.to_dict(), mi, wi, rep)
        for mi in range(len(cfg.methods))
        for wi in range(len(cfg.widths))
        for rep in range(cfg.repetitions)
    ]
    workers = _worker_count()
    results: dict[tuple[int, int, int], int] = {}
    if workers > 1 and len(tasks) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for mi, wi, rep, n in pool.map(_cell_task, tasks, chunksize=4):
                results[(mi, wi, rep)] = n
    else:
        for t in tasks:
            mi, wi, rep, n = _cell_task(t)
            results[(mi, wi, rep)] = n

    rows = []
    for wi, width in enumerate(cfg.widths):
        avgs = {}
        for mi, method in enumerate(cfg.methods):
            ns = [results[(mi, wi, rep)] for rep in range(cfg.repetitions)]
            avgs[method] = sum(ns) / len(ns)
        best = min(avgs.values())
        for mi, method in enumerate(cfg.methods):
            ns = [results[(mi, wi, rep)] for rep in range(cfg.repetitions)]
            rows.append({
                "method": method,
                "width": width,
                "n_avg": avgs[method],
                "n_normalized": avgs[method] / best,
                "n_values": ns,
            })
    return ExperimentResult(config=cfg, rows=tuple(rows))


def write_results_csv(result: ExperimentResult, path: str) -> None:
    lines = ["method,width,n_avg,n_normalized"]
    for r in result.rows:
        lines.append(
            f"{r['method']},{r['width']!r},{r['n_avg']!r},{r['n_normalized']:.6f}"
        )
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def write_results_json(result: ExperimentResult, path: str) -> None:
    obj = {
        "config": result.config.to_dict(),
        "rows": [dict(r) for r in result.rows],
        "metadata": {
            "two_sided_conversion": (
                "one-sided deviation bounds applied at delta/2 per side; "
                "empirical Bernstein therefore uses log(4/delta) per side"
            ),
            "intersection_split": "delta/2 to the base region, delta/2 to the level-set region",
        },
    }
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")


_METHOD_COLORS = {
    "hoeffding": "#7f7f7f",
    "empirical-bernstein": "#1f77b4",
    "bernoulli-kl": "#d62728",
    "sanov": "#2ca02c",
    "polytope": "#17becf",
    "csiszar": "#8c564b",
    "csiszar-sanov": "#ff7f0e",
    "csiszar-polytope": "#9467bd",
    "dkwm": "#2ca02c",
    "kl-naive": "#d62728",
    "kl-dd": "#9467bd",
}


def write_bars_svg(result: ExperimentResult, path: str) -> None:
    """Grouped bar chart of normalized sample sizes (one group per width).

    Deterministic text emission; no plotting dependency.
    """
    cfg = result.config
    methods = list(cfg.methods)
    widths = list(cfg.widths)
    ymax = max(max(r["n_normalized"] for r in result.rows) * 1.15, 1.5)
    H = 420
    W = 60 + (18 * len(methods) + 26) * len(widths) + 60
    x0, y0, y1 = 50, 40, 360
    scale = (y1 - y0) / ymax

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" '
        f'viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="11">',
        f'<rect x="0" y="0" width="{W}" height="{H}" fill="white"/>',
        f'<line x1="{x0}" y1="{y1}" x2="{W - 10}" y2="{y1}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
    ]
    # y ticks at 1..ceil(ymax)
    tick = 0.5
    v = 0.0
    while v <= ymax + 1e-9:
        y = y1 - v * scale
        parts.append(f'<line x1="{x0 - 4}" y1="{y:.1f}" x2="{x0}" y2="{y:.1f}" stroke="black"/>')
        parts.append(f'<text x="{x0 - 8}" y="{y + 4:.1f}" text-anchor="end">{v:g}</text>')
        v += tick
    # reference line at 1
    yref = y1 - 1.0 * scale
    parts.append(
        f'<line x1="{x0}" y1="{yref:.1f}" x2="{W - 10}" y2="{yref:.1f}" '
        f'stroke="#bbbbbb" stroke-dasharray="4 3"/>'
    )
    x = x0 + 14
    for width in widths:
        for method in methods:
            r = result.row(method, width)
            h = r["n_normalized"] * scale
            color = _METHOD_COLORS.get(method, "#444444")
            parts.append(
                f'<rect x="{x}" y="{y1 - h:.1f}" width="15" height="{h:.1f}" '
                f'fill="{color}"><title>{method} @ width {width!r}: '
                f'{r["n_normalized"]:.3f}</title></rect>'
            )
            x += 18
        label = f"1/{round(1 / width)}" if 1 / width == round(1 / width) else f"{width:g}"
        group_w = 18 * len(methods)
        parts.append(
            f'<text x="{x - group_w / 2 - 14 + 7}" y="{y1 + 16}" text-anchor="middle">{label}</text>'
        )
        x += 26
    parts.append(
        f'<text x="{(x0 + W) / 2:.0f}" y="{y1 + 34}" text-anchor="middle">'
        "interval width (samples normalized to per-width best)</text>"
    )
    # legend
    lx = x0 + 10
    for method in methods:
        color = _METHOD_COLORS.get(method, "#444444")
        parts.append(f'<rect x="{lx}" y="12" width="10" height="10" fill="{color}"/>')
        parts.append(f'<text x="{lx + 14}" y="21">{method}</text>')
        lx += 14 + 8 * len(method) + 16
    parts.append("</svg>")
    with open(path, "w") as fh:
        fh.write("\n".join(parts) + "\n")

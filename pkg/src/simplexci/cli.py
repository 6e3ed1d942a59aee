"""Command-line interface.

Subcommands: interval, compare, quantile, experiment, oracle-check.
Histograms are JSON files {"counts": [...]}. Results go to stdout as JSON;
errors are machine-readable JSON on stderr with exit code 1 (usage) or 2
(numerical failure).
"""

from __future__ import annotations

import argparse
import json
import os
import sys

import numpy as np

from .core import Confidence, Histogram, LinearFunctional, normalize, stars_from_unit
from .harness import (
    BAND_METHODS,
    MEAN_METHODS,
    ExperimentConfig,
    mean_interval,
    run_experiment,
    write_bars_svg,
    write_results_csv,
    write_results_json,
)
from .interval_engine import (
    csiszar_intersection_interval,
    grid_oracle,
    optimize_linear_over_region,
)
from .quantile_bands import QuantileQuery, band_for, quantile_interval
from .simplex_regions import RegionKind, RegionSpec


class UsageError(ValueError):
    pass


def _load_histogram(path: str) -> Histogram:
    try:
        with open(path) as fh:
            obj = json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise UsageError(f"cannot read histogram {path!r}: {exc}") from exc
    if not isinstance(obj, dict) or "counts" not in obj:
        raise UsageError(f"histogram {path!r} must be a JSON object with a 'counts' array")
    try:
        return Histogram(obj["counts"])
    except (TypeError, ValueError) as exc:
        raise UsageError(f"bad counts in {path!r}: {exc}") from exc


def _functional(args, k: int) -> LinearFunctional:
    if getattr(args, "weights", None):
        try:
            w = [float(x) for x in args.weights.split(",")]
            return LinearFunctional(w)
        except ValueError as exc:
            raise UsageError(f"bad weights: {exc}") from exc
    return LinearFunctional.canonical(k)


def _confidence(delta: float) -> Confidence:
    try:
        return Confidence(delta)
    except ValueError as exc:
        raise UsageError(str(exc)) from exc


def _interval_payload(h: Histogram, f: LinearFunctional, iv, method: str, delta: float) -> dict:
    canonical = f.is_canonical()
    return {
        "lo": iv.lo,
        "hi": iv.hi,
        "stars_lo": stars_from_unit(iv.lo, h.k) if canonical else None,
        "stars_hi": stars_from_unit(iv.hi, h.k) if canonical else None,
        "method": method,
        "delta": delta,
    }


def _cmd_interval(args) -> int:
    h = _load_histogram(args.histogram)
    f = _functional(args, h.k)
    if f.k != h.k:
        raise UsageError("weights length does not match histogram")
    c = _confidence(args.delta)
    if args.method not in MEAN_METHODS:
        raise UsageError(f"method must be one of {', '.join(MEAN_METHODS)}")

    trace: list | None = [] if args.dump_solver_trace else None
    if args.method in ("csiszar-sanov", "csiszar-polytope") and trace is not None:
        base = RegionKind.SANOV_BALL if args.method.endswith("sanov") else RegionKind.POLYTOPE
        iv = csiszar_intersection_interval(normalize(h), f, c, base, trace=trace)
    else:
        iv = mean_interval(h, f, c, args.method)
    if trace:
        for entry in trace:
            print(json.dumps(entry), file=sys.stderr)
    if args.dump_region:
        kind_map = {
            "sanov": RegionKind.SANOV_BALL,
            "polytope": RegionKind.POLYTOPE,
            "csiszar": RegionKind.CSISZAR_LEVEL_SET,
            "csiszar-sanov": RegionKind.CSISZAR_PLUS_SANOV,
            "csiszar-polytope": RegionKind.CSISZAR_PLUS_POLYTOPE,
        }
        if args.method in kind_map:
            spec = RegionSpec.build(kind_map[args.method], normalize(h), c, functional=f)
            print(spec.to_json(), file=sys.stderr)
    print(json.dumps(_interval_payload(h, f, iv, args.method, args.delta)))
    return 0


def _cmd_compare(args) -> int:
    if len(args.histogram) != 2:
        raise UsageError("compare needs exactly two --histogram files")
    hs = [_load_histogram(p) for p in args.histogram]
    if hs[0].k != hs[1].k:
        raise UsageError("histograms must share the same number of categories")
    f = _functional(args, hs[0].k)
    c = _confidence(args.delta)
    if args.method not in MEAN_METHODS:
        raise UsageError(f"method must be one of {', '.join(MEAN_METHODS)}")
    ivs = [mean_interval(h, f, c, args.method) for h in hs]
    disjoint = ivs[0].hi < ivs[1].lo or ivs[1].hi < ivs[0].lo
    payload = {
        "significant": bool(disjoint),
        "intervals": [_interval_payload(h, f, iv, args.method, args.delta)
                      for h, iv in zip(hs, ivs)],
    }
    print(json.dumps(payload))
    return 0


def _cmd_quantile(args) -> int:
    h = _load_histogram(args.histogram)
    c = _confidence(args.delta)
    if args.band not in BAND_METHODS:
        raise UsageError(f"band must be one of {', '.join(BAND_METHODS)}")
    if not (0.0 < args.tau < 1.0):
        raise UsageError("tau must lie strictly between 0 and 1")
    band = band_for(h, c, args.band, tau=args.tau)
    lo, hi = quantile_interval(band, QuantileQuery(args.tau))
    if args.band_csv:
        xs = band.support
        lines = ["support,L,U"]
        for x, l, u in zip(xs, band.lower, band.upper):
            lines.append(f"{x!r},{l!r},{u!r}")
        with open(args.band_csv, "w") as fh:
            fh.write("\n".join(lines) + "\n")
    print(json.dumps({"lo": lo, "hi": hi, "tau": args.tau,
                      "band": args.band, "delta": args.delta}))
    return 0


def _cmd_experiment(args) -> int:
    try:
        with open(args.config) as fh:
            cfg = ExperimentConfig.from_dict(json.load(fh))
    except (OSError, json.JSONDecodeError, TypeError, ValueError, KeyError) as exc:
        raise UsageError(f"bad experiment config: {exc}") from exc
    os.makedirs(args.out_dir, exist_ok=True)
    result = run_experiment(cfg)
    write_results_csv(result, os.path.join(args.out_dir, "results.csv"))
    write_results_json(result, os.path.join(args.out_dir, "results.json"))
    write_bars_svg(result, os.path.join(args.out_dir, "bars.svg"))
    print(json.dumps({"out_dir": args.out_dir,
                      "rows": len(result.rows),
                      "files": ["results.csv", "results.json", "bars.svg"]}))
    return 0


def _cmd_oracle_check(args) -> int:
    rng = np.random.default_rng(args.seed)
    f = LinearFunctional.canonical(args.k)
    c = _confidence(args.delta)
    worst = 0.0
    failures = []
    for trial in range(args.trials):
        n = int(rng.choice([30, 100, 300]))
        counts = rng.multinomial(n, rng.dirichlet(np.ones(args.k)))
        h = Histogram(counts)
        phat = normalize(h)
        for kind in (RegionKind.SANOV_BALL, RegionKind.POLYTOPE,
                     RegionKind.CSISZAR_PLUS_SANOV, RegionKind.CSISZAR_PLUS_POLYTOPE):
            region = RegionSpec.build(kind, phat, c, functional=f)
            if kind in (RegionKind.SANOV_BALL, RegionKind.POLYTOPE):
                lo = optimize_linear_over_region(region, f, "min")
                hi = optimize_linear_over_region(region, f, "max")
            else:
                base = (RegionKind.SANOV_BALL if kind == RegionKind.CSISZAR_PLUS_SANOV
                        else RegionKind.POLYTOPE)
                iv = csiszar_intersection_interval(phat, f, c, base)
                lo, hi = iv.lo, iv.hi
            g = grid_oracle(region, f, args.step)
            diff = max(abs(lo - g.lo), abs(hi - g.hi))
            worst = max(worst, diff)
            if diff > args.tolerance:
                failures.append({"trial": trial, "kind": kind.value,
                                 "counts": [int(x) for x in counts],
                                 "solver": [lo, hi], "grid": [g.lo, g.hi],
                                 "diff": diff})
    payload = {
        "trials": args.trials,
        "kinds": 4,
        "worst_diff": worst,
        "tolerance": args.tolerance,
        "failures": failures,
        "pass": not failures,
    }
    print(json.dumps(payload))
    return 0 if not failures else 2


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="simplexci",
                                 description="Confidence intervals for multistar rating data")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("interval", help="confidence interval for the mean rating")
    p.add_argument("--histogram", required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--method", required=True)
    p.add_argument("--weights", default=None,
                   help="comma-separated weights (default: equally spaced)")
    p.add_argument("--dump-region", action="store_true")
    p.add_argument("--dump-solver-trace", action="store_true")
    p.set_defaults(func=_cmd_interval)

    p = sub.add_parser("compare", help="compare the mean ratings of two histograms")
    p.add_argument("--histogram", action="append", required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--method", required=True)
    p.add_argument("--weights", default=None)
    p.set_defaults(func=_cmd_compare)

    p = sub.add_parser("quantile", help="quantile confidence interval from a CDF band")
    p.add_argument("--histogram", required=True)
    p.add_argument("--tau", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--band", required=True, choices=list(BAND_METHODS))
    p.add_argument("--band-csv", default=None, help="also write the band as CSV")
    p.set_defaults(func=_cmd_quantile)

    p = sub.add_parser("experiment", help="run a sample-size-versus-width experiment")
    p.add_argument("--config", required=True)
    p.add_argument("--out-dir", required=True)
    p.set_defaults(func=_cmd_experiment)

    p = sub.add_parser("oracle-check", help="verify solver endpoints against the grid oracle")
    p.add_argument("--k", type=int, default=3)
    p.add_argument("--trials", type=int, default=50)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--delta", type=float, default=0.05)
    p.add_argument("--step", type=float, default=5e-4)
    p.add_argument("--tolerance", type=float, default=2e-3)
    p.set_defaults(func=_cmd_oracle_check)

    return ap


def main(argv=None) -> int:
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args)
    except UsageError as exc:
        print(json.dumps({"error": str(exc), "kind": "usage"}), file=sys.stderr)
        return 1
    except (ValueError, RuntimeError, ArithmeticError) as exc:
        print(json.dumps({"error": str(exc), "kind": "numerical"}), file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

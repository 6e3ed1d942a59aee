import json
import math

import numpy as np
import pytest

from simplexci.core import Confidence, Histogram, mean, normalize
from simplexci.harness import (
    EXPERIMENT_DISTRIBUTIONS,
    ExperimentConfig,
    face_midpoint,
    mean_interval,
    method_contains_mean,
    required_sample_size,
    run_experiment,
    write_bars_svg,
    write_results_csv,
    write_results_json,
)

from conftest import canonical, random_histogram


class TestMeanInterval:
    def test_all_methods_contain_empirical_mean(self, rng):
        c = Confidence(0.05)
        for _ in range(10):
            k = int(rng.integers(2, 6))
            h = random_histogram(rng, k, int(rng.integers(3, 300)))
            f = canonical(k)
            m = mean(normalize(h), f)
            for method in ("hoeffding", "empirical-bernstein", "bernoulli-kl",
                           "sanov", "polytope", "csiszar",
                           "csiszar-sanov", "csiszar-polytope"):
                iv = mean_interval(h, f, c, method)
                assert iv.contains(m, slack=2e-6), method

    def test_unknown_method_rejected(self):
        with pytest.raises(ValueError):
            mean_interval(Histogram([1, 1]), canonical(2), Confidence(0.1), "magic")


class TestContainsMean:
    def test_probe_agrees_with_interval(self, rng):
        # single-probe containment matches endpoint bisection away from the
        # interval boundary
        c = Confidence(0.05)
        for _ in range(15):
            k = int(rng.integers(3, 6))
            h = random_histogram(rng, k, int(rng.integers(10, 200)))
            f = canonical(k)
            m = float(rng.uniform(0, 1))
            for method in ("csiszar-sanov", "csiszar-polytope"):
                iv = mean_interval(h, f, c, method)
                if abs(m - iv.lo) < 1e-5 or abs(m - iv.hi) < 1e-5:
                    continue
                assert method_contains_mean(h, f, c, method, m) == iv.contains(m)

    def test_plain_methods_defer_to_interval(self):
        h = Histogram([10, 20, 30, 20, 10])
        f = canonical(5)
        c = Confidence(0.05)
        iv = mean_interval(h, f, c, "bernoulli-kl")
        assert method_contains_mean(h, f, c, "bernoulli-kl", iv.lo + 1e-6)
        assert not method_contains_mean(h, f, c, "bernoulli-kl", iv.hi + 1e-3)


class TestRequiredSampleSize:
    def test_width_one_floors_at_two(self):
        for method in ("hoeffding", "empirical-bernstein", "bernoulli-kl"):
            n = required_sample_size((0.2,) * 5, method, 1.0, 0.05, seed=1)
            assert n == 2

    def test_hoeffding_closed_form(self):
        # interval width is data-independent when no clipping occurs: the
        # minimal n solves 2*sqrt(log(2/delta)/(2n)) <= width
        delta, width = 0.05, 0.125
        expected = math.ceil(2 * math.log(2 / delta) / width**2)
        assert expected == 473
        got = required_sample_size((0.2,) * 5, "hoeffding", width, delta, seed=7)
        assert got == expected

    def test_monotone_in_width(self):
        ns = [required_sample_size(EXPERIMENT_DISTRIBUTIONS["contest"],
                                   "bernoulli-kl", w, 0.05, seed=3)
              for w in (0.5, 0.25, 0.125, 0.0625)]
        assert all(a < b for a, b in zip(ns, ns[1:]))

    def test_deterministic_given_seed(self):
        a = required_sample_size((0.2,) * 5, "bernoulli-kl", 0.1, 0.05, seed=11)
        b = required_sample_size((0.2,) * 5, "bernoulli-kl", 0.1, 0.05, seed=11)
        assert a == b

    def test_quantile_mode(self):
        n = required_sample_size((0.2,) * 5, "dkwm", 0.1, 0.05, seed=5, tau=0.9)
        assert n >= 2
        n2 = required_sample_size((0.2,) * 5, "dkwm", 0.05, 0.05, seed=5, tau=0.9)
        assert n2 >= n

    def test_width_validation(self):
        with pytest.raises(ValueError):
            required_sample_size((0.5, 0.5), "hoeffding", 0.0, 0.05, seed=1)


class TestExperimentConfig:
    def test_distribution_set_matches_reported_experiments(self):
        assert set(EXPERIMENT_DISTRIBUTIONS) == {
            "uniform", "face-345", "spike-3", "bernoulli-ends", "contest"}
        np.testing.assert_allclose(EXPERIMENT_DISTRIBUTIONS["spike-3"],
                                   (0, 0.05, 0.9, 0.05, 0))
        np.testing.assert_allclose(EXPERIMENT_DISTRIBUTIONS["bernoulli-ends"],
                                   (0.5, 0, 0, 0, 0.5))
        np.testing.assert_allclose(EXPERIMENT_DISTRIBUTIONS["face-345"],
                                   face_midpoint(5, (2, 3, 4)))
        np.testing.assert_allclose(
            EXPERIMENT_DISTRIBUTIONS["contest"],
            np.array([365, 308, 294, 67, 27]) / 1061)

    def test_round_trip(self):
        cfg = ExperimentConfig(true_dist=(0.5, 0.5), widths=(0.5, 0.25),
                               methods=("hoeffding",), repetitions=2, seed=9)
        back = ExperimentConfig.from_dict(cfg.to_dict())
        assert back == cfg

    def test_validation(self):
        with pytest.raises(ValueError):
            ExperimentConfig(true_dist=(0.6, 0.6))
        with pytest.raises(ValueError):
            ExperimentConfig(true_dist=(0.5, 0.5), widths=(0.25, 0.5))
        with pytest.raises(ValueError):
            ExperimentConfig(true_dist=(0.5, 0.5), methods=("dkwm",))
        with pytest.raises(ValueError):
            ExperimentConfig(true_dist=(0.5, 0.5), mode="quantile")


class TestRunExperiment:
    def _small_cfg(self, seed=42):
        return ExperimentConfig(
            true_dist=(0.3, 0.3, 0.4),
            widths=(0.5, 0.25),
            methods=("hoeffding", "bernoulli-kl"),
            repetitions=3,
            seed=seed,
        )

    def test_normalization_floor(self):
        res = run_experiment(self._small_cfg())
        for width in (0.5, 0.25):
            norms = [res.row(m, width)["n_normalized"] for m in ("hoeffding", "bernoulli-kl")]
            assert min(norms) == pytest.approx(1.0, abs=1e-12)
            assert all(v >= 1.0 - 1e-12 for v in norms)

    def test_single_cell_normalizes_to_one(self):
        cfg = ExperimentConfig(true_dist=(0.5, 0.5), widths=(0.5,),
                               methods=("hoeffding",), repetitions=1, seed=3)
        res = run_experiment(cfg)
        assert res.rows[0]["n_normalized"] == 1.0

    def test_deterministic_outputs(self, tmp_path):
        out = []
        for run in (1, 2):
            res = run_experiment(self._small_cfg())
            path = tmp_path / f"r{run}.csv"
            write_results_csv(res, str(path))
            out.append(path.read_bytes())
        assert out[0] == out[1]

    def test_kl_never_needs_more_than_hoeffding(self):
        res = run_experiment(self._small_cfg())
        for width in (0.5, 0.25):
            assert (res.row("bernoulli-kl", width)["n_avg"]
                    <= res.row("hoeffding", width)["n_avg"] + 1e-9)

    def test_output_files(self, tmp_path):
        res = run_experiment(self._small_cfg())
        csv_path = tmp_path / "results.csv"
        json_path = tmp_path / "results.json"
        svg_path = tmp_path / "bars.svg"
        write_results_csv(res, str(csv_path))
        write_results_json(res, str(json_path))
        write_bars_svg(res, str(svg_path))
        lines = csv_path.read_text().strip().split("\n")
        assert lines[0] == "method,width,n_avg,n_normalized"
        assert len(lines) == 1 + 4  # 2 methods x 2 widths
        payload = json.loads(json_path.read_text())
        assert payload["config"]["seed"] == 42
        assert "delta/2" in payload["metadata"]["intersection_split"]
        svg = svg_path.read_text()
        assert svg.startswith("<svg") and svg.rstrip().endswith("</svg>")
        assert svg.count("<rect") >= 4

    def test_quantile_mode_experiment(self):
        cfg = ExperimentConfig(
            true_dist=(0.2,) * 5,
            widths=(0.3, 0.15),
            methods=("dkwm", "kl-dd"),
            repetitions=2,
            seed=5,
            mode="quantile",
            tau=0.9,
        )
        res = run_experiment(cfg)
        assert len(res.rows) == 4
        for r in res.rows:
            assert r["n_avg"] >= 2

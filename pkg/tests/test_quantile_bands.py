import math

import numpy as np
import pytest

from simplexci.core import Confidence, Histogram
from simplexci.quantile_bands import (
    BandMethod,
    CdfBand,
    QuantileQuery,
    band_for,
    band_width_at,
    data_driven_allocation,
    dkwm_band,
    kl_band,
    naive_allocation,
    quantile_interval,
)
from simplexci.scalar_bounds import invert_kl_binary

UNIFORM5 = Histogram([40, 40, 40, 40, 40])  # n = 200


class TestDkwmBand:
    def test_radius_closed_form(self):
        band = dkwm_band(UNIFORM5, Confidence(0.05))
        z = math.sqrt(math.log(40) / 400)
        assert z == pytest.approx(0.09604, abs=1e-5)
        F = np.array([0.2, 0.4, 0.6, 0.8, 1.0])
        np.testing.assert_allclose(band.lower[:-1], np.clip(F - z, 0, 1)[:-1], atol=1e-12)
        np.testing.assert_allclose(band.upper[:-1], np.clip(F + z, 0, 1)[:-1], atol=1e-12)
        assert band.lower[-1] == 1.0 and band.upper[-1] == 1.0

    def test_width_vanishes_with_n(self):
        widths = []
        for n in (100, 10_000, 1_000_000):
            h = Histogram([n // 5] * 5)
            band = dkwm_band(h, Confidence(0.05))
            widths.append(float(np.max(band.upper - band.lower)))
        assert widths[0] > widths[1] > widths[2]
        assert widths[2] < 3e-3

    def test_contains_empirical_cdf(self, rng):
        for _ in range(50):
            k = int(rng.integers(2, 8))
            counts = rng.integers(0, 50, size=k)
            if counts.sum() == 0:
                counts[0] = 1
            h = Histogram(counts)
            band = dkwm_band(h, Confidence(0.1))
            F = np.cumsum(np.asarray(h.counts)) / h.n
            assert np.all(band.lower <= F + 1e-12)
            assert np.all(band.upper >= F - 1e-12)


class TestKlBand:
    def test_naive_allocation_equal_split(self):
        alloc = naive_allocation(5, Confidence(0.05))
        np.testing.assert_allclose(alloc, [0.0125] * 4, atol=1e-15)

    def test_saturated_cdf_point(self):
        # no mass above category 2: the empirical CDF is 1 there, so the
        # upper bound pins at 1 and the lower bound is the KL inversion at 1
        h = Histogram([30, 70, 0, 0])
        c = Confidence(0.05)
        band = kl_band(h, c, naive_allocation(4, c))
        z = math.log(2 / (0.05 / 3)) / 100
        assert band.upper[1] == 1.0
        assert band.lower[1] == pytest.approx(math.exp(-z), abs=1e-9)

    def test_allocation_budget_enforced(self):
        c = Confidence(0.05)
        with pytest.raises(ValueError, match="budget"):
            kl_band(UNIFORM5, c, np.full(4, 0.02))
        with pytest.raises(ValueError):
            kl_band(UNIFORM5, c, np.full(3, 0.01))  # wrong length

    def test_naive_vs_dkwm_shape(self):
        # tighter in the CDF tails, wider near CDF level 1/2
        c = Confidence(0.05)
        dkwm = dkwm_band(UNIFORM5, c)
        klb = kl_band(UNIFORM5, c, naive_allocation(5, c))
        w_dkwm = dkwm.upper - dkwm.lower
        w_kl = klb.upper - klb.lower
        assert w_kl[0] < w_dkwm[0]  # F = 0.2
        assert w_kl[3] < w_dkwm[3]  # F = 0.8
        mid = (1, 2)  # F = 0.4, 0.6: nearest to 1/2
        assert any(w_kl[i] > w_dkwm[i] for i in mid)

    def test_band_contains_empirical_cdf(self, rng):
        c = Confidence(0.1)
        for _ in range(50):
            k = int(rng.integers(3, 8))
            counts = rng.integers(0, 60, size=k)
            if counts.sum() == 0:
                counts[0] = 1
            h = Histogram(counts)
            band = kl_band(h, c, naive_allocation(k, c))
            F = np.cumsum(np.asarray(h.counts)) / h.n
            assert np.all(band.lower <= F + 1e-12)
            assert np.all(band.upper >= F - 1e-12)

    def test_envelopes_monotone_after_isotonization(self, rng):
        for _ in range(50):
            k = int(rng.integers(3, 9))
            counts = rng.integers(0, 30, size=k)
            if counts.sum() == 0:
                counts[-1] = 1
            h = Histogram(counts)
            tau = float(rng.uniform(0.1, 0.9))
            c = Confidence(0.05)
            band = kl_band(h, c, data_driven_allocation(h, tau, c),
                           BandMethod.KL_DATA_DRIVEN)
            assert np.all(np.diff(band.lower) >= -1e-12)
            assert np.all(np.diff(band.upper) >= -1e-12)


class TestDataDrivenAllocation:
    def test_weights_at_first_index(self):
        # histogram whose tau-quantile is the first support point
        h = Histogram([150, 20, 20, 5, 5])
        c = Confidence(0.05)
        alloc = data_driven_allocation(h, 0.5, c)
        norm = 1 + 1 / 4 + 1 / 9 + 1 / 16
        assert norm == pytest.approx(1.423611, abs=1e-6)
        assert alloc[0] == pytest.approx(0.05 / norm, abs=1e-12)
        np.testing.assert_allclose(
            alloc, 0.05 / (norm * np.array([1.0, 4.0, 9.0, 16.0])), atol=1e-15
        )

    def test_sums_to_delta(self, rng):
        for _ in range(100):
            k = int(rng.integers(2, 10))
            counts = rng.integers(0, 50, size=k)
            if counts.sum() == 0:
                counts[0] = 1
            h = Histogram(counts)
            delta = float(rng.uniform(0.01, 0.3))
            tau = float(rng.uniform(0.05, 0.95))
            alloc = data_driven_allocation(h, tau, Confidence(delta))
            assert alloc.sum() == pytest.approx(delta, abs=1e-12)
            assert np.all(alloc > 0)

    def test_degenerate_point_mass(self):
        h = Histogram([0, 0, 40, 0, 0])
        alloc = data_driven_allocation(h, 0.9, Confidence(0.05))
        assert alloc.shape == (4,)
        assert alloc.sum() == pytest.approx(0.05, abs=1e-12)
        assert np.argmax(alloc) == 2  # concentrated at the empirical quantile


class TestQuantileInterval:
    def test_zero_width_band(self):
        F = np.array([0.2, 0.4, 0.6, 0.8, 1.0])
        band = CdfBand(F, F, BandMethod.DKWM)
        lo, hi = quantile_interval(band, QuantileQuery(0.5))
        assert lo == hi == 0.5  # first support point with F >= 0.5 is index 3

    def test_vacuous_band(self):
        lower = np.array([0.0, 0.0, 0.0, 0.0, 1.0])
        upper = np.ones(5)
        band = CdfBand(lower, upper, BandMethod.DKWM)
        lo, hi = quantile_interval(band, QuantileQuery(0.5))
        assert lo == 0.0
        assert hi == 1.0

    def test_against_random_cdfs_in_band(self, rng):
        # every CDF inside the band has its quantile inside the interval,
        # and the envelope CDFs attain the endpoints
        band = dkwm_band(UNIFORM5, Confidence(0.05))
        tau = 0.9
        lo, hi = quantile_interval(band, QuantileQuery(tau))
        xs = band.support
        for _ in range(2000):
            u = rng.uniform(band.lower, band.upper)
            F = np.maximum.accumulate(u)
            F = np.minimum(F, band.upper)
            F[-1] = 1.0
            q = xs[np.argmax(F >= tau - 1e-12)]
            assert lo - 1e-12 <= q <= hi + 1e-12
        q_hi_env = xs[np.argmax(band.upper >= tau - 1e-12)]
        q_lo_env = xs[np.argmax(band.lower >= tau - 1e-12)]
        assert q_hi_env == lo and q_lo_env == hi

    def test_contains_empirical_quantile(self, rng):
        for _ in range(60):
            k = int(rng.integers(2, 8))
            counts = rng.integers(0, 40, size=k)
            if counts.sum() == 0:
                counts[0] = 1
            h = Histogram(counts)
            tau = float(rng.uniform(0.1, 0.9))
            c = Confidence(0.05)
            F = np.cumsum(np.asarray(h.counts)) / h.n
            xs = np.arange(k) / (k - 1)
            emp_q = xs[np.argmax(F >= tau - 1e-12)]
            for method in BandMethod:
                band = band_for(h, c, method, tau=tau)
                lo, hi = quantile_interval(band, QuantileQuery(tau))
                assert lo - 1e-12 <= emp_q <= hi + 1e-12


class TestBandWidth:
    def test_zero_when_tau_above_band(self):
        lower = np.array([0.0, 0.05, 0.1, 1.0])
        upper = np.array([0.2, 0.3, 0.4, 1.0])
        band = CdfBand(lower, upper, BandMethod.DKWM)
        assert band_width_at(band, 0.7) == 0.0

    def test_symmetric_single_straddle(self):
        lower = np.array([0.4, 1.0])
        upper = np.array([0.6, 1.0])
        band = CdfBand(lower, upper, BandMethod.DKWM)
        assert band_width_at(band, 0.5) == pytest.approx(0.1, abs=1e-15)

    def test_matches_independent_reimplementation(self, rng):
        def reference(band, tau):
            total = 0.0
            for L, U in zip(band.lower, band.upper):
                if L <= tau <= U:
                    total += abs(min(U - tau, tau - L))
            return total

        c = Confidence(0.05)
        band = dkwm_band(UNIFORM5, c)
        assert band_width_at(band, 0.5) == pytest.approx(reference(band, 0.5), abs=1e-12)
        for _ in range(50):
            k = int(rng.integers(2, 8))
            counts = rng.integers(0, 40, size=k)
            if counts.sum() == 0:
                counts[0] = 1
            h = Histogram(counts)
            tau = float(rng.uniform(0.05, 0.95))
            for method in BandMethod:
                band = band_for(h, c, method, tau=tau)
                assert band_width_at(band, tau) == pytest.approx(
                    reference(band, tau), abs=1e-12
                )


class TestBandCoverage:
    def test_simultaneous_coverage_uniform_k5(self):
        # all three methods cover the true CDF at every point simultaneously
        delta, n, trials = 0.05, 200, 2000
        rng = np.random.default_rng(13)
        p = np.full(5, 0.2)
        true_cdf = np.cumsum(p)
        c = Confidence(delta)
        hits = {m: 0 for m in BandMethod}
        for _ in range(trials):
            h = Histogram(rng.multinomial(n, p))
            for m in BandMethod:
                band = band_for(h, c, m, tau=0.9)
                ok = np.all((band.lower <= true_cdf + 1e-12)
                            & (true_cdf <= band.upper + 1e-12))
                hits[m] += bool(ok)
        floor = (1 - delta) - 3 * math.sqrt(delta * (1 - delta) / trials)
        for m, count in hits.items():
            assert count / trials >= floor, (m, count / trials)

    @pytest.mark.parametrize("k", [5, 10])
    @pytest.mark.parametrize("tau", [0.7, 0.9])
    def test_data_driven_narrower_than_naive_on_average(self, k, tau):
        rng = np.random.default_rng(17)
        p = np.full(k, 1 / k)
        c = Confidence(0.05)
        n = 200
        dd_widths, naive_widths = [], []
        for _ in range(20):
            h = Histogram(rng.multinomial(n, p))
            dd_widths.append(band_width_at(band_for(h, c, BandMethod.KL_DATA_DRIVEN, tau=tau), tau))
            naive_widths.append(band_width_at(band_for(h, c, BandMethod.KL_NAIVE, tau=tau), tau))
        assert np.mean(dd_widths) <= np.mean(naive_widths) + 1e-12

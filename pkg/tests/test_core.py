import math
from fractions import Fraction

import numpy as np
import pytest

from simplexci.core import (
    Confidence,
    EmpiricalDistribution,
    Histogram,
    Interval,
    LinearFunctional,
    kl,
    kl_binary,
    mean,
    normalize,
    stars_from_unit,
    variance,
)

from conftest import canonical, dist, random_simplex

CONTEST_COUNTS = (365, 308, 294, 67, 27)


class TestHistogram:
    def test_counts_and_total(self):
        h = Histogram(CONTEST_COUNTS)
        assert h.n == 1061
        assert h.k == 5

    def test_rejects_negative_counts(self):
        with pytest.raises(ValueError):
            Histogram([3, -1, 2])

    def test_rejects_single_category(self):
        with pytest.raises(ValueError):
            Histogram([5])


class TestNormalize:
    def test_contest_histogram(self):
        # the real 5-star histogram; frequencies match its published rounding
        p = normalize(Histogram(CONTEST_COUNTS))
        assert p.n == 1061
        np.testing.assert_allclose(
            p.probs, np.asarray(CONTEST_COUNTS, dtype=float) / 1061, atol=0
        )
        np.testing.assert_allclose(
            p.probs, [0.344, 0.290, 0.277, 0.063, 0.025], atol=5e-4
        )

    def test_point_mass(self):
        p = normalize(Histogram([5, 0, 0]))
        np.testing.assert_array_equal(p.probs, [1.0, 0.0, 0.0])
        assert p.n == 5

    def test_uniform(self):
        p = normalize(Histogram([1, 1, 1, 1]))
        np.testing.assert_array_equal(p.probs, [0.25] * 4)

    def test_empty_histogram_rejected(self):
        with pytest.raises(ValueError, match="no samples"):
            normalize(Histogram([0, 0, 0]))


class TestKl:
    def test_point_mass_closed_form(self):
        assert kl(dist([1, 0]), dist([0.5, 0.5])) == pytest.approx(math.log(2), abs=1e-12)

    def test_identity(self):
        assert kl(dist([0.3, 0.7]), dist([0.3, 0.7])) == 0.0

    def test_closed_form_evaluation(self):
        # 0.5*log 2 + 0.5*log(2/3), cross-checked by a high-precision sum
        expected = 0.5 * math.log(2) + 0.5 * math.log(2 / 3)
        got = kl(dist([0.5, 0.5]), dist([0.25, 0.75]))
        assert got == pytest.approx(expected, abs=1e-15)
        assert got == pytest.approx(0.143841, abs=5e-7)

    def test_infinite_when_support_escapes(self):
        assert kl(dist([0.5, 0.5]), dist([1.0, 0.0])) == math.inf

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            kl(dist([0.5, 0.5]), dist([0.2, 0.3, 0.5]))

    def test_nonnegative_and_zero_iff_equal(self, rng):
        for _ in range(200):
            k = int(rng.integers(2, 11))
            p = random_simplex(rng, k)
            q = random_simplex(rng, k)
            v = kl(dist(p), dist(q))
            assert v >= 0.0
            assert kl(dist(p), dist(p)) == pytest.approx(0.0, abs=1e-14)
            if v < 1e-12:
                np.testing.assert_allclose(p, q, atol=1e-5)


class TestKlBinary:
    def test_point_mass_closed_form(self):
        for q in (0.2, 0.5, 0.9):
            assert kl_binary(1.0, q) == pytest.approx(-math.log(q), abs=1e-14)

    def test_identity(self):
        assert kl_binary(0.5, 0.5) == 0.0

    def test_bisection_oracle_value(self):
        # solve kl_binary(0.5, q) = 0.03 on [0.5, 1] by bisection, then verify
        lo, hi = 0.5, 1.0
        for _ in range(80):
            mid = 0.5 * (lo + hi)
            if kl_binary(0.5, mid) <= 0.03:
                lo = mid
            else:
                hi = mid
        assert lo == pytest.approx(0.6207, abs=5e-5)
        assert kl_binary(0.5, 0.6207) == pytest.approx(0.03, abs=5e-5)

    def test_matches_two_letter_kl(self, rng):
        for _ in range(1000):
            p, q = rng.uniform(0, 1, size=2)
            a = kl_binary(p, q)
            b = kl(dist([p, 1 - p]), dist([q, 1 - q]))
            if math.isinf(a):
                assert math.isinf(b)
            else:
                assert a == pytest.approx(b, abs=1e-12)

    def test_range_validation(self):
        with pytest.raises(ValueError):
            kl_binary(1.2, 0.5)


class TestMeanVariance:
    def test_contest_mean_exact_rational(self):
        # exact rational oracle: sum(w_j * counts_j) / n with w on quarters
        w = [Fraction(i, 4) for i in range(5)]
        total = sum(wj * cj for wj, cj in zip(w, CONTEST_COUNTS))
        expected = total / 1061
        assert expected == Fraction(1205, 4244)
        got = mean(normalize(Histogram(CONTEST_COUNTS)), canonical(5))
        assert got == pytest.approx(float(expected), abs=1e-15)
        stars = stars_from_unit(got, 5)
        assert stars == pytest.approx(float(Fraction(2266, 1061)), abs=1e-12)
        assert stars == pytest.approx(2.13572, abs=5e-6)

    def test_point_mass_top_category(self):
        assert mean(dist([0, 0, 0, 1]), canonical(4)) == 1.0

    def test_uniform_two_categories(self):
        assert mean(dist([0.5, 0.5]), canonical(2)) == 0.5

    def test_weighted_counts_identity(self, rng):
        # normalize-then-mean equals the exact rational weighted count average
        for _ in range(50):
            k = int(rng.integers(2, 7))
            counts = [int(c) for c in rng.integers(0, 40, size=k)]
            if sum(counts) == 0:
                counts[0] = 1
            h = Histogram(counts)
            w = [Fraction(i, k - 1) for i in range(k)]
            expected = sum(wj * cj for wj, cj in zip(w, counts)) / h.n
            got = mean(normalize(h), canonical(k))
            assert got == pytest.approx(float(expected), abs=1e-12)

    def test_variance_bernoulli_half(self):
        assert variance(dist([0.5, 0, 0, 0, 0.5]), canonical(5)) == pytest.approx(0.25)

    def test_variance_point_mass(self):
        assert variance(dist([0, 1, 0]), canonical(3)) == pytest.approx(0.0, abs=1e-15)

    def test_variance_uniform_k3(self):
        expected = (0 + 0.25 + 1) / 3 - 0.25
        got = variance(dist([1 / 3] * 3), canonical(3))
        assert got == pytest.approx(expected, abs=1e-15)
        assert got == pytest.approx(1 / 6, abs=1e-12)

    def test_variance_bounded_by_mean_term(self, rng):
        for _ in range(200):
            k = int(rng.integers(2, 8))
            p = dist(random_simplex(rng, k))
            f = canonical(k)
            m = mean(p, f)
            assert variance(p, f) <= m * (1 - m) + 1e-12


class TestTypes:
    def test_distribution_must_sum_to_one(self):
        with pytest.raises(ValueError):
            EmpiricalDistribution([0.5, 0.6])

    def test_functional_normalization_required(self):
        with pytest.raises(ValueError):
            LinearFunctional([0.0, 0.5, 0.9])
        with pytest.raises(ValueError):
            LinearFunctional([0.1, 0.5, 1.0])

    def test_functional_monotone_required(self):
        with pytest.raises(ValueError):
            LinearFunctional([0.0, 0.7, 0.3, 1.0])

    def test_interval_bounds(self):
        with pytest.raises(ValueError):
            Interval(0.7, 0.3)
        iv = Interval.clipped(-0.2, 1.7)
        assert (iv.lo, iv.hi) == (0.0, 1.0)

    def test_confidence_open_interval(self):
        with pytest.raises(ValueError):
            Confidence(0.0)
        with pytest.raises(ValueError):
            Confidence(1.0)
        with pytest.raises(ValueError):
            Confidence(2.0 * math.exp(0.0))  # delta = 2 is not a confidence level
        assert Confidence(0.05).delta == 0.05

import numpy as np
import pytest

from simplexci.core import EmpiricalDistribution, Histogram, LinearFunctional


@pytest.fixture
def rng():
    return np.random.default_rng(20240517)


def random_simplex(rng, k, concentration=1.0):
    return rng.dirichlet(np.full(k, concentration))


def random_histogram(rng, k, n):
    p = random_simplex(rng, k)
    counts = rng.multinomial(n, p)
    while counts.sum() == 0:
        counts = rng.multinomial(n, p)
    return Histogram(counts)


def dist(probs, n=0):
    return EmpiricalDistribution(np.asarray(probs, dtype=float), n=n)


def canonical(k):
    return LinearFunctional.canonical(k)

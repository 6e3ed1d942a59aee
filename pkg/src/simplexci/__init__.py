"""Confidence intervals for means and quantiles of multi-star rating data.

Builds confidence regions on the probability simplex (Sanov KL-balls,
per-category KL polytopes, and level-set regions tailored to a linear
functional), optimizes linear functionals over them, and compares the
resulting intervals against classical Hoeffding / empirical Bernstein /
two-point-KL baselines. Includes CDF bands for quantile intervals and a
reproducible experiment harness.
"""

from .core import (
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
from .harness import (
    EXPERIMENT_DISTRIBUTIONS,
    ExperimentConfig,
    ExperimentResult,
    mean_interval,
    method_contains_mean,
    required_sample_size,
    run_experiment,
)
from .interval_engine import (
    FeasibilityProblem,
    SolverError,
    SolverReport,
    asymptotic_exponent_check,
    csiszar_intersection_interval,
    feasibility_value,
    grid_oracle,
    optimize_linear_over_region,
)
from .quantile_bands import (
    BandMethod,
    CdfBand,
    QuantileQuery,
    band_for,
    band_width_at,
    data_driven_allocation,
    dkwm_band,
    kl_band,
    quantile_interval,
)
from .scalar_bounds import (
    BoundMethod,
    bernoulli_kl_interval,
    empirical_bernstein_interval,
    hoeffding_interval,
    invert_kl_binary,
)
from .simplex_regions import (
    RegionKind,
    RegionSpec,
    csiszar_level_interval_direct,
    member,
    polytope_threshold,
    sanov_threshold,
)

__version__ = "0.1.0"

import math

import numpy as np
import pytest

from utils.errors import InputError
from utils.stats import (
    bootstrap_ci,
    empirical_cdf,
    ks_critical_value,
    ks_distance,
    laplace_cdf,
    median_stderr,
    quartiles,
)


def test_empirical_cdf_steps():
    F = empirical_cdf([3.0, 1.0, 2.0, 2.0])
    assert F(0.5) == 0.0
    assert F(2.0) == 0.75
    assert F(10) == 1.0
    assert F.size == 4


def test_ks_against_itself_is_zero():
    sample = np.random.default_rng(0).normal(size=500)
    assert ks_distance(sample, sample) == 0.0


def test_ks_uniform_below_critical_value():
    n = 2000
    sample = np.random.default_rng(7).uniform(size=n)
    assert ks_critical_value(n) == pytest.approx(1.358 / math.sqrt(n), rel=1e-3)
    assert ks_distance(sample, "uniform") <= ks_critical_value(n, alpha=0.01)


def test_ks_callable_reference():
    sample = np.random.default_rng(3).laplace(size=3000)
    assert ks_distance(sample, laplace_cdf) <= ks_critical_value(3000, alpha=0.01)
    assert ks_distance(sample + 1.0, laplace_cdf) > 0.2


def test_bootstrap_contains_mean():
    sample = np.random.default_rng(11).exponential(size=200)
    ci = bootstrap_ci(sample, seed=5)
    assert ci.low <= sample.mean() <= ci.high
    assert ci.estimate == pytest.approx(sample.mean())
    assert bootstrap_ci(sample, seed=5) == ci


def test_bootstrap_constant_sample():
    ci = bootstrap_ci([2.0] * 10)
    assert (ci.low, ci.high) == (2.0, 2.0)


def test_summaries():
    q = quartiles([1, 2, 3, 4, 5])
    assert q == {"q1": 2.0, "median": 3.0, "q3": 4.0}
    assert median_stderr([1.0]) == 0.0
    assert median_stderr([1.0, 3.0]) == pytest.approx(1.2533 * math.sqrt(2) / math.sqrt(2))
    assert laplace_cdf(0.0) == pytest.approx(0.5)


@pytest.mark.parametrize("call", [
    lambda: empirical_cdf([]),
    lambda: ks_distance([], "uniform"),
    lambda: bootstrap_ci([]),
    lambda: ks_critical_value(0),
])
def test_empty_input(call):
    with pytest.raises(InputError):
        call()

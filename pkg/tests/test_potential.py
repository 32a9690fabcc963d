import math

import numpy as np
import pytest

from utils.errors import InputError, ParameterError
from utils.lattice import TorusGeometry, all_coords, site_index
from utils.potential import (
    field_from_values,
    level_set,
    puncture,
    sample_field,
    separation,
    shifted,
    site_uniforms,
    top_values,
    window,
)
from utils.scales import macrobox_level


def _binomial_within(count, n, p, sigmas=3.0):
    return abs(count / n - p) <= sigmas * math.sqrt(p * (1 - p) / n)


def test_same_seed_bitwise_identical():
    g = TorusGeometry(2, 21)
    a = sample_field(g, 2.0, 99)
    b = sample_field(g, 2.0, 99)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, sample_field(g, 2.0, 100).values)


def test_window_shares_values_with_larger_box():
    big = sample_field(TorusGeometry(2, 41), 3.0, 5)
    small = window(big, 11)
    resampled = sample_field(TorusGeometry(2, 11), 3.0, 5)
    assert np.array_equal(small.values, resampled.values)


def test_window_larger_than_box_rejected(weibull_field_1d):
    with pytest.raises(InputError):
        window(weibull_field_1d, 41)


def test_uniforms_unit_interval():
    coords = all_coords(TorusGeometry(1, 1001))
    u = site_uniforms(coords, 3)
    assert np.all(u > 0) and np.all(u <= 1)


def test_uniforms_keyed_by_coordinates_only():
    coords = all_coords(TorusGeometry(3, 9))
    full = site_uniforms(coords, 17)
    picked = np.array([[4, -4, 0], [0, 0, 0], [-1, 2, 3]])
    rows = [int(np.flatnonzero((coords == p).all(axis=1))[0]) for p in picked]
    assert np.array_equal(site_uniforms(picked, 17), full[rows])
    assert np.array_equal(site_uniforms(picked[::-1], 17), full[rows][::-1])
    assert not np.array_equal(site_uniforms(picked, 18), full[rows])
    near = np.array([[1, -1, 0], [0, 0, 1]])
    near_rows = [int(np.flatnonzero((coords == p).all(axis=1))[0]) for p in near]
    assert np.array_equal(site_uniforms(near, 17), full[near_rows])


@pytest.mark.slow
@pytest.mark.parametrize("x", [0.5, 1.0, 1.5])
def test_marginal_tail(x):
    field = sample_field(TorusGeometry(1, 1_000_001), 2.0, 2024)
    n = field.values.size
    assert _binomial_within(int(np.count_nonzero(field.values > x)), n, math.exp(-x ** 2))


@pytest.mark.slow
def test_exponential_mean_at_gamma_one():
    field = sample_field(TorusGeometry(1, 1_000_001), 1.0, 11)
    n = field.values.size
    assert abs(field.values.mean() - 1.0) <= 3.0 / math.sqrt(n)


def test_sampling_rejects_bad_parameters(line7):
    with pytest.raises(ParameterError):
        sample_field(line7, 0.0, 1)
    with pytest.raises(ParameterError):
        sample_field(line7, 2.0, -1)


def test_level_set_extremes(weibull_field_1d):
    f = weibull_field_1d
    assert len(level_set(f, -1)) == f.geometry.size
    assert len(level_set(f, f.values.max())) == 0
    top = np.sort(f.values)
    just_below = top[-1] - 0.5 * (top[-1] - top[-2])
    assert level_set(f, just_below).sites == [f.argmax()]


def test_level_set_size_ratio_matches_power():
    g = TorusGeometry(2, 101)
    ratios = []
    for seed in range(160):
        f = sample_field(g, 2.0, seed)
        ratios.append(len(level_set(f, macrobox_level(g.size, 0.25, 2.0))) / g.size ** 0.25)
    assert np.mean(ratios) == pytest.approx(1.0, abs=0.1)


def test_puncture_bookkeeping(weibull_field_1d):
    f = weibull_field_1d
    pi = level_set(f, np.sort(f.values)[-4])
    assert len(pi) == 3
    keep = pi.sites[0]
    out = puncture(f, pi, keep=keep)
    assert out.value_at(keep) == f.value_at(keep)
    removed = sum(f.value_at(z) for z in pi.sites if z != keep)
    assert out.values.sum() == pytest.approx(f.values.sum() - removed)
    assert puncture(f, level_set(f, 1e9)) is f


def test_separation():
    g = TorusGeometry(1, 21)
    values = np.zeros(g.size)
    values[site_index((2,), g)] = 5
    values[site_index((5,), g)] = 5
    f = field_from_values(g, values, 2.0)
    assert separation(level_set(f, 1), g) == 3
    values[site_index((5,), g)] = 0
    assert math.isinf(separation(level_set(f.with_values(values), 1), g))


def test_top_values_ordered(weibull_field_2d):
    top = top_values(weibull_field_2d, 5)
    assert [v for _, v in top] == sorted((v for _, v in top), reverse=True)
    assert top[0][0] == weibull_field_2d.argmax()


def test_shifted_moves_values(weibull_field_1d):
    moved = shifted(weibull_field_1d, (3,))
    assert moved.value_at((3,)) == weibull_field_1d.value_at((0,))


def test_field_rejects_negative_values(line7):
    with pytest.raises(InputError):
        field_from_values(line7, -np.ones(line7.size), 2.0)

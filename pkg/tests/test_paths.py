import math

import numpy as np
import pytest

from api.paths import (
    enumerate_paths,
    greens_path_partial_sum,
    lambda_fixed_point,
    truncation_gap,
)
from api.hamiltonian import full_hamiltonian
from api.spectra import greens_function, local_principal_eigenvalue
from utils.errors import ParameterError, RegimeError
from utils.lattice import TorusGeometry, distances_from, site_index
from utils.potential import field_from_values, sample_field

THREE_SITE = 5 + 3 * math.sqrt(3)


def _spike(side=21, height=10.0):
    g = TorusGeometry(1, side)
    values = np.zeros(g.size)
    values[g.half] = height
    return field_from_values(g, values, 2.0)


def test_path_counts(square5):
    assert len(enumerate_paths((0, 0), 1, 2, square5)) == 4
    assert len(enumerate_paths((1, 1), 3, 3, square5)) == 0
    g = TorusGeometry(1, 21)
    family = enumerate_paths((0,), 2, 4, g)
    assert sorted(family.paths) == [
        ((0,), (-1,), (-2,), (-1,), (0,)),
        ((0,), (1,), (2,), (1,), (0,)),
    ]


def test_path_counts_translation_invariant():
    g = TorusGeometry(2, 15)
    assert len(enumerate_paths((0, 0), 2, 6, g)) == len(enumerate_paths((7, -3), 2, 6, g))


def test_paths_avoid_base_and_stay_in_ball():
    g = TorusGeometry(2, 15)
    for path in enumerate_paths((2, 2), 2, 6, g).paths:
        assert path[0] == path[-1] == (2, 2)
        assert (2, 2) not in path[1:-1]
        assert all(distances_from((2, 2), g)[site_index(y, g)] <= 2 for y in path)


def test_path_length_too_short(line7):
    with pytest.raises(ParameterError):
        enumerate_paths((0,), 1, 1, line7)


def test_three_site_iterates():
    trace = []
    lam = lambda_fixed_point(_spike(), (0,), 1, 5.0, trace=trace)
    assert lam == pytest.approx(THREE_SITE, abs=1e-10)
    assert trace[0] == 10.0
    assert trace[1] == pytest.approx(10.2)
    assert trace[2] == pytest.approx(10.0 + 2 / 10.2)
    truncated = lambda_fixed_point(_spike(), (0,), 1, 5.0, max_len=2)
    assert truncated == pytest.approx(THREE_SITE, abs=1e-10)


def test_radius_zero_no_iterations():
    trace = []
    assert lambda_fixed_point(_spike(), (0,), 0, 5.0, trace=trace) == 10.0
    assert trace == [10.0]


def test_regime_error_without_margin(weibull_field_1d):
    z = weibull_field_1d.argmax()
    with pytest.raises(RegimeError):
        lambda_fixed_point(weibull_field_1d, z, 2, 0.0, margin=100.0)


def test_untruncated_matches_eigensolver_and_truncation_bound():
    rng = np.random.default_rng(8)
    g = TorusGeometry(1, 15)
    L, j = 1.5, 1
    worst = 0.0
    for _ in range(50):
        values = rng.uniform(0, L, g.size)
        values[g.half] = L + 2 + rng.exponential()
        field = field_from_values(g, values, 2.0)
        gap = truncation_gap(field, (0,), 2, L, j)
        assert gap["untruncated"] == pytest.approx(gap["eigensolver"], abs=1e-10)
        excess = values[g.half] - L
        worst = max(worst, gap["gap"] * excess ** (2 * j + 1))
    assert worst <= 8.0


def test_partial_sum_degenerate_term(weibull_field_1d):
    lam = float(weibull_field_1d.values.max()) + 3
    value = greens_path_partial_sum(weibull_field_1d, lam, (2,), (2,), 0)
    assert value == pytest.approx(1 / (lam - weibull_field_1d.value_at((2,))))


def test_partial_sum_converges_geometrically():
    g = TorusGeometry(1, 7)
    for seed in range(10):
        field = sample_field(g, 2.0, seed)
        lam = float(field.values.max()) + 2 * g.d + 1
        exact = greens_function(full_hamiltonian(field), lam, (2,))[site_index((-1,), g)]
        errors = [abs(greens_path_partial_sum(field, lam, (-1,), (2,), m) - exact) for m in (5, 10, 20, 40)]
        assert all(b < a for a, b in zip(errors, errors[1:]))
        assert abs(greens_path_partial_sum(field, lam, (-1,), (2,), 120) - exact) <= 1e-10


def test_shortest_path_lower_bound(weibull_field_2d):
    g = weibull_field_2d.geometry
    lam = float(weibull_field_2d.values.max()) + 2 * g.d + 0.5
    G = greens_function(full_hamiltonian(weibull_field_2d), lam, (0, 0))
    dist = distances_from((0, 0), g)
    assert np.all(G >= lam ** -(dist + 1.0))


def test_partial_sum_requires_convergence_radius(weibull_field_1d):
    with pytest.raises(RegimeError):
        greens_path_partial_sum(weibull_field_1d, float(weibull_field_1d.values.max()), (0,), (0,), 3)


def test_local_eigenvalue_agrees_with_fixed_point_on_spike():
    field = _spike(height=6.0)
    assert lambda_fixed_point(field, (0,), 3, 2.0) == pytest.approx(
        local_principal_eigenvalue(field, (0,), 3, 2.0), abs=1e-10)

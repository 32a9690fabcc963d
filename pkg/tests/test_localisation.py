import math

import numpy as np
import pytest

from api.localisation import (
    EventFlags,
    ageing_time,
    event_flags,
    in_profile_window,
    localisation_report,
    mass_concentration,
    penalised_spectrum,
    psi,
    psi_values,
    psi_star,
    solution_ageing_time,
    top_two,
)
from api.hamiltonian import full_hamiltonian
from api.solver import solve_spectral
from api.spectra import SpectralData, local_principal_eigenvalue, top_k_eigenpairs
from utils.errors import DegenerateSpectrumError, ParameterError
from utils.lattice import TorusGeometry, site_index
from utils.potential import field_from_values, sample_field
from utils.scales import compute_scales

T_BASE = math.exp(math.e)


def test_psi_hand_check():
    g = TorusGeometry(1, 11)
    values = np.full(g.size, 0.5)
    values[site_index((2,), g)] = 3.0
    field = field_from_values(g, values, 2.0)
    scales = compute_scales(T_BASE, 1, 2.0, side=11)
    assert psi((2,), 0, 0.0, T_BASE, field, scales) == pytest.approx(3 - 2 / (2 * T_BASE), abs=1e-12)
    assert psi((2,), 0, 0.0, T_BASE, field, scales) == pytest.approx(2.934012, abs=1e-6)


def test_psi_at_origin_ignores_c(weibull_field_1d):
    scales = compute_scales(100.0, 1, 2.0, side=31)
    local = local_principal_eigenvalue(weibull_field_1d, (0,), 1, scales.L_t)
    for c in (0.0, 1.0, 5.0):
        assert psi((0,), 1, c, 100.0, weibull_field_1d, scales) == pytest.approx(local)


def test_radius_zero_matches_psi_star(weibull_field_2d):
    t = 50.0
    scales = compute_scales(t, 2, 2.0, side=11)
    assert np.allclose(psi_values(0, 0.0, t, weibull_field_2d, scales), psi_star(weibull_field_2d, t))


def test_top_two_matches_exhaustive_scan():
    g = TorusGeometry(1, 41)
    t = 60.0
    scales = compute_scales(t, 1, 2.0, side=41)
    for seed in range(100):
        field = sample_field(g, 2.0, seed)
        pruned = top_two(1, 0.5, t, field, scales)
        full = top_two(1, 0.5, t, field, scales, prune=False)
        assert (pruned.Z1, pruned.Z2) == (full.Z1, full.Z2)
        values = psi_values(1, 0.5, t, field, scales)
        order = np.argsort(-values, kind="stable")
        assert (pruned.index1, pruned.index2) == (int(order[0]), int(order[1]))
        assert pruned.gap > 0


def test_argmax_invariant_under_constant_shift(weibull_field_1d):
    t = 60.0
    scales = compute_scales(t, 1, 2.0, side=31)
    L = float(weibull_field_1d.values.max()) + 10
    base = top_two(1, 0.0, t, weibull_field_1d, scales, L=L)
    lifted = top_two(1, 0.0, t, weibull_field_1d.with_values(weibull_field_1d.values + 2.5), scales, L=L + 2.5)
    assert (base.Z1, base.Z2) == (lifted.Z1, lifted.Z2)
    assert lifted.psi1 - base.psi1 == pytest.approx(2.5, abs=1e-10)


def _spectral_data(values, vectors):
    values = np.asarray(values, dtype=float)
    vectors = np.asarray(vectors, dtype=float)
    idx = np.argmax(np.abs(vectors), axis=0)
    return SpectralData(values, vectors, np.zeros(values.size), idx, [(int(i) - 1,) for i in idx])


def test_penalised_spectrum_vanishing_component():
    g = TorusGeometry(1, 3)
    vectors = np.array([[0.5, 0.7, 0.1], [0.5, 0.0, 0.9], [0.7, -0.7, 0.4]])
    ps = penalised_spectrum(_spectral_data([3.0, 2.0, 1.0], vectors), 1.0, g)
    assert ps.values[1] == -np.inf
    assert ps.i1 == 0 and ps.i2 == 2


def test_penalised_spectrum_needs_two_finite():
    g = TorusGeometry(1, 3)
    vectors = np.array([[0.0, 0.7], [1.0, 0.0], [0.0, 0.7]])
    with pytest.raises(DegenerateSpectrumError):
        penalised_spectrum(_spectral_data([2.0, 1.0], vectors), 1.0, g)


def test_penalised_spectrum_maximum(weibull_field_1d):
    g = weibull_field_1d.geometry
    sd = top_k_eigenpairs(full_hamiltonian(weibull_field_1d), g.size)
    ps = penalised_spectrum(sd, 10.0, g)
    assert np.all(ps.values[ps.i1] >= ps.values)
    assert ps.values[ps.i2] <= ps.values[ps.i1]


def test_frozen_functional_is_censored(peaked_field_1d):
    t = 20.0
    scales = compute_scales(t, 1, 2.0, side=21)
    result = ageing_time(0, t, 4 * t, peaked_field_1d, scales)
    assert result.censored
    assert result.value == 4 * t


def test_ageing_time_positive():
    t = 20.0
    scales = compute_scales(t, 1, 2.0, side=61)
    for seed in range(10):
        field = sample_field(TorusGeometry(1, 61), 2.0, seed)
        result = ageing_time(0, t, 4 * t, field, scales)
        assert result.value > 0
        assert result.censored or result.value < 4 * t


def test_ageing_time_bad_horizon(peaked_field_1d):
    with pytest.raises(ParameterError):
        ageing_time(0, 20.0, 0.0, peaked_field_1d, compute_scales(20.0, 1, 2.0, side=21))


def test_solution_ageing_zero_field_censored():
    g = TorusGeometry(1, 7)
    field = field_from_values(g, np.zeros(g.size), 2.0)
    scales = compute_scales(50.0, 1, 2.0, side=7)
    result = solution_ageing_time(0.1, 50.0, 200.0, field, scales)
    assert result.censored


def test_solution_ageing_eps_range(weibull_field_1d):
    scales = compute_scales(50.0, 1, 2.0, side=31)
    with pytest.raises(ParameterError):
        solution_ageing_time(0.5, 50.0, 200.0, weibull_field_1d, scales)


def test_conjunction():
    assert EventFlags(True, True, True, True, True, True).E
    for i in range(6):
        flags = [True] * 6
        flags[i] = False
        assert not EventFlags(*flags).E


def test_profile_window_gamma_two():
    g = TorusGeometry(1, 21)
    scales = compute_scales(1e3, 1, 2.0, side=21)
    values = np.full(g.size, 0.5)
    values[site_index((3,), g)] = scales.a_t
    field = field_from_values(g, values, 2.0)
    assert in_profile_window((3,), 1, field, scales)

    too_high = values.copy()
    too_high[site_index((4,), g)] = scales.a_t ** scales.eta + 0.1
    assert not in_profile_window((3,), 1, field.with_values(too_high), scales)

    off_centre = values.copy()
    off_centre[site_index((3,), g)] = scales.a_t * (1 + 2 * scales.f_t)
    assert not in_profile_window((3,), 1, field.with_values(off_centre), scales)


def test_profile_window_inner_ring_gamma_five():
    g = TorusGeometry(1, 21)
    scales = compute_scales(1e3, 1, 5.0, side=21)
    assert scales.rho == 2 and scales.j == 2
    values = np.full(g.size, 0.1)
    values[site_index((0,), g)] = scales.a_t
    for y in (-1, 1):
        values[site_index((y,), g)] = 1.8
    for y in (-2, 2):
        values[site_index((y,), g)] = 1.0
    field = field_from_values(g, values, 5.0)
    assert in_profile_window((0,), 2, field, scales)
    assert not in_profile_window((0,), 0, field, scales)


def test_event_flags_consistent_with_top_two(weibull_field_1d):
    t = 100.0
    scales = compute_scales(t, 1, 2.0, side=31)
    flags = event_flags(t, 0.5, weibull_field_1d, scales)
    top = top_two(scales.j, 0.0, t, weibull_field_1d, scales)
    assert flags.I == (top.psi1 > scales.a_t * (1 - scales.f_t))
    assert flags.G_0 == (top.gap > scales.d_t * scales.e_t)
    assert set(flags.to_dict()) == {"S_j", "S_rho", "G_0", "G_c", "H", "I", "E"}


def test_mass_concentration_and_report(weibull_field_1d):
    t = 100.0
    scales = compute_scales(t, 1, 2.0, side=31)
    snapshot = solve_spectral(weibull_field_1d, t, k=31)
    g = weibull_field_1d.geometry
    assert mass_concentration(snapshot, np.arange(g.size)) == pytest.approx(1.0)
    report = localisation_report(weibull_field_1d, t, scales, 1, 0.0, snapshot)
    assert 0 < report.mass_at_Z1 <= 1 + 1e-12
    assert report.gap == pytest.approx(report.psi1 - report.psi2)
    assert report.n_used == 1

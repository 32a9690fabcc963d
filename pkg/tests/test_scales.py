import math

import pytest

from utils.errors import ParameterError
from utils.scales import (
    T_MIN,
    compute_scales,
    delta_t,
    j_of,
    macrobox_level,
    q_exponent,
    rho_of,
    scales_table,
)


def test_base_point_values():
    s = compute_scales(math.exp(math.e), 1, 2.0)
    assert s.loglog_t == pytest.approx(1.0)
    assert s.a_t == pytest.approx(math.sqrt(math.e), rel=1e-12)
    assert s.d_t == pytest.approx(0.5 * math.exp(-0.5), rel=1e-12)
    assert s.r_t == pytest.approx(math.exp(math.e - 0.5), rel=1e-12)
    assert s.a_t == pytest.approx(1.648721, abs=1e-6)
    assert s.d_t == pytest.approx(0.303265, abs=1e-6)
    assert s.r_t == pytest.approx(9.19098, abs=1e-5)


@pytest.mark.parametrize("gamma,rho", [(2, 0), (3, 1), (7, 3), (0.5, 0)])
def test_rho(gamma, rho):
    assert rho_of(gamma) == rho


@pytest.mark.parametrize("gamma,j", [(2, 1), (4, 2), (5, 2), (1, 0)])
def test_j(gamma, j):
    assert j_of(gamma) == j
    assert 2 * j + 1 > gamma - 1


def test_q_exponent():
    assert [q_exponent(x, 5.0) for x in (0, 1, 2)] == [1.0, 0.5, 0.0]
    assert q_exponent(0, 1.0) == 1.0
    assert q_exponent(1, 1.0) == 0.0
    assert q_exponent(1, 0.5) == 0.0
    with pytest.raises(ParameterError):
        q_exponent(1, 0.0)


def test_macrobox_level():
    assert macrobox_level(math.e ** 2, 0.5, 3.0) == pytest.approx(1.0)
    assert macrobox_level(100, 1.0, 2.0) == 0.0
    assert macrobox_level(49, 0.25, 2.0) == pytest.approx(1.70846, abs=1e-5)
    with pytest.raises(ParameterError):
        macrobox_level(1, 0.25, 2.0)


def test_monotone_in_t():
    table = scales_table([20, 100, 1e3, 1e5, 1e8], 1, 2.0)
    for earlier, later in zip(table, table[1:]):
        assert later.a_t > earlier.a_t
        assert later.r_t > earlier.r_t
        assert later.R_t > earlier.R_t
        assert later.d_t < earlier.d_t


def test_auxiliary_ordering():
    for t in (1e2, 1e4, 1e8, 1e12):
        s = compute_scales(t, 1, 2.0)
        assert 0 < s.kappa_t < s.f_t < s.h_t < s.e_t / s.g_t < 1
        assert s.g_t > 1


def test_side_override_recorded():
    s = compute_scales(1e8, 1, 2.0, side=201)
    assert s.side == 201 and s.side_overridden
    assert s.V_size == 201
    assert s.side_formula > 201
    assert s.with_t(2e8).side == 201


def test_rejects_out_of_range():
    with pytest.raises(ParameterError):
        compute_scales(T_MIN * 0.99, 1, 2.0)
    with pytest.raises(ParameterError):
        compute_scales(100, 1, -1.0)
    with pytest.raises(ParameterError):
        compute_scales(100, 1, 2.0, theta=0.6)
    with pytest.raises(ParameterError):
        compute_scales(100, 1, 2.0, side=200)
    with pytest.raises(ParameterError):
        compute_scales(100, 1, 2.0, overrides={"bogus": 1})


def test_overrides_applied():
    s = compute_scales(100, 1, 2.0, overrides={"f_t": 0.3, "eps": 0.12})
    assert s.f_t == 0.3
    assert s.eps == 0.12
    with pytest.raises(ParameterError):
        compute_scales(100, 1, 2.0, overrides={"eps": 0.05})


def test_delta_t_infinite_separation():
    s = compute_scales(1e3, 1, 2.0, side=101)
    assert delta_t(s, math.inf) == 0.0
    assert delta_t(s, 10) > 0


def test_to_json_contains_fields():
    payload = compute_scales(1e3, 2, 3.0, side=21).to_dict()
    for key in ("a_t", "d_t", "r_t", "L_t", "rho", "j", "eta", "side_overridden"):
        assert key in payload

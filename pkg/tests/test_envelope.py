import math

import numpy as np
import pytest

from api.envelope import DecayEnvelope
from utils.errors import RegimeError
from utils.scales import compute_scales


@pytest.fixture
def envelope():
    return DecayEnvelope.for_separation(compute_scales(1e3, 1, 2.0, side=201), math.inf)


def test_isolated_peak_has_no_correction(envelope):
    assert envelope.delta_t == 0.0
    assert envelope.two_d == 2


def test_rate_functions(envelope):
    L = envelope.L
    assert envelope.A(L + 2 * math.e) == pytest.approx(1.0)
    assert envelope.A(L + 2) == pytest.approx(0.0, abs=1e-12)
    assert envelope.b(L + 4) == pytest.approx(8.0)
    assert envelope.B(L + 4, 2.0, 0.25) == pytest.approx(8.0 / ((L + 4) ** 2 * 0.25))
    with pytest.raises(RegimeError):
        envelope.A(L)
    with pytest.raises(RegimeError):
        envelope.b(L + 1)


def test_eigenvector_bound_decays(envelope):
    bound = envelope.eigenvector_bound(envelope.L + 10, np.arange(6))
    assert bound[0] == pytest.approx(envelope.prefactor)
    assert np.all(np.diff(bound) < 0)
    assert envelope.prefactor > 4


def test_log_bounds_bracket_the_leading_term(envelope):
    distances = np.array([0, 1, 5, 20])
    upper = envelope.decay_log_upper(distances)
    lower = envelope.decay_log_lower(distances)
    assert np.all(lower <= upper)
    assert upper[0] == lower[0] == 0
    lead = envelope.origin_log_lower_form(5)
    assert lower[2] < lead < upper[2]
    assert envelope.origin_log_upper(5, 0.0) == pytest.approx(lead)
    assert envelope.origin_log_upper(5, 0.3) == pytest.approx(lead + 1.5)

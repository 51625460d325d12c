import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracfm.wavecore import (ElasticMedium, SingularityError, ValidationError, check_monotonicity,
                             kupradze, kupradze_far_field, navier_residual, plane_wave_tensor_batch,
                             wave_numbers)

finite = st.floats(-2.0, 2.0, allow_nan=False)


def test_wave_numbers_formula(exterior):
    wn = wave_numbers(4.0, exterior)
    assert wn.k_s == pytest.approx(4.0)
    assert wn.k_p == pytest.approx(4.0 / np.sqrt(3.5))
    assert wn.alpha_s == pytest.approx(1 / (4 * np.pi))


def test_wave_numbers_rejects_bad_frequency(exterior):
    with pytest.raises(ValidationError):
        wave_numbers(0.0, exterior)


def test_monotonicity():
    a = ElasticMedium(1.5, 1.0, 1.0)
    assert check_monotonicity(a, ElasticMedium(0.4, 0.2, 0.5))
    assert not check_monotonicity(a, ElasticMedium(2.0, 0.5, 1.0))


def test_kupradze_symmetric(wn4):
    G = kupradze(np.array([0.3, -0.2, 0.9]), np.array([-0.1, 0.4, 0.0]), wn4)
    np.testing.assert_allclose(G, G.T, atol=1e-14)


def test_kupradze_singular(wn4):
    with pytest.raises(SingularityError):
        kupradze(np.zeros(3), np.zeros(3), wn4)


@settings(max_examples=25, deadline=None)
@given(st.tuples(finite, finite, finite), st.floats(0.5, 6.0))
def test_navier_residual_small(offset, omega):
    off = np.array(offset)
    if np.linalg.norm(off) < 0.3:
        off = off + np.array([0.5, 0.0, 0.0])
    wn = wave_numbers(omega, ElasticMedium(1.5, 1.0, 1.0))
    assert navier_residual(off, np.zeros(3), wn) < 1e-6


@settings(max_examples=25, deadline=None)
@given(st.tuples(finite, finite, finite), st.tuples(finite, finite, finite))
def test_far_field_matches_plane_wave(x, d):
    d = np.array(d)
    if np.linalg.norm(d) < 1e-3:
        return
    d = d / np.linalg.norm(d)
    wn = wave_numbers(4.0, ElasticMedium(1.5, 1.0, 1.0))
    G = kupradze_far_field(d, np.array(x), wn)
    W = plane_wave_tensor_batch(np.array(x), -d, wn)
    np.testing.assert_allclose(G, W, atol=1e-12)

import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fracfm.background import Homogeneous
from fracfm.geometry import direction_grid, parametric_surface
from fracfm.inversion import (FarFieldMatrix, apply_noise, differential_matrix, eigensystem, f_sharp,
                              indicator_map, morozov_batch, noise_for_target, picard_default,
                              picard_norm, scattering_matrix, sqrt_psd, threshold, tikhonov_morozov,
                              trial_far_fields, unitarity_defect)
from fracfm.pipeline import random_psd
from fracfm.wavecore import ValidationError


@pytest.fixture
def grid():
    return direction_grid(4, 6)


def _F(grid, rng, role="F"):
    n = 3 * grid.N
    return FarFieldMatrix(grid, 4.0, rng.normal(size=(n, n)) + 1j * rng.normal(size=(n, n)), role)


def test_far_field_matrix_shape_checked(grid):
    with pytest.raises(ValidationError):
        FarFieldMatrix(grid, 4.0, np.zeros((5, 5)), "F")
    with pytest.raises(ValidationError):
        FarFieldMatrix(grid, 4.0, np.zeros((72, 72)), "bogus")


def test_homogeneous_scattering_matrix_is_identity(exterior, wn4, grid):
    S = scattering_matrix(Homogeneous(exterior).far_matrix(grid, wn4), wn4)
    assert unitarity_defect(S) == 0.0
    np.testing.assert_array_equal(S.data, np.eye(3 * grid.N))


@settings(max_examples=20, deadline=None)
@given(st.floats(1e-4, 0.5), st.integers(0, 2 ** 32))
def test_noise_level_linear_in_epsilon(eps, seed):
    g = direction_grid(3, 4)
    F = _F(g, np.random.default_rng(0))
    _, d1 = apply_noise(F, 1.0, seed)
    _, d = apply_noise(F, eps, seed)
    assert d == pytest.approx(eps * d1, rel=1e-12)


def test_noise_for_target_hits_target(grid, rng):
    Fd, delta, eps = noise_for_target(_F(grid, rng), 0.05, 7)
    assert delta == pytest.approx(0.05, rel=1e-12)
    assert eps > 0


def test_zero_background_stays_noiseless(exterior, wn4, grid):
    F_b = Homogeneous(exterior).far_matrix(grid, wn4)
    Fd, delta, eps = noise_for_target(F_b, 0.05, 3)
    assert delta == 0.0 and eps == 0.0 and Fd.norm() == 0.0


def test_noise_reproducible(grid, rng):
    F = _F(grid, rng)
    a, _ = apply_noise(F, 0.1, 42)
    b, _ = apply_noise(F, 0.1, 42)
    assert a.data.tobytes() == b.data.tobytes()


def test_differential_matrix_checks_grid(grid, rng):
    with pytest.raises(ValidationError):
        differential_matrix(_F(grid, rng), _F(direction_grid(4, 8), rng, "F_b"))


def test_f_sharp_psd_and_hermitian(grid, rng, exterior, wn4):
    S = scattering_matrix(Homogeneous(exterior).far_matrix(grid, wn4), wn4)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        Fs, eig = f_sharp(differential_matrix(_F(grid, rng), _F(grid, rng, "F_b")), S)
    np.testing.assert_allclose(Fs.data, Fs.data.conj().T, atol=1e-12)
    assert eig.values.min() >= 0
    assert np.all(np.diff(eig.values) <= 0)


def test_sqrt_psd_squares_back(rng):
    A = random_psd(rng, 30)
    R = sqrt_psd(A)
    np.testing.assert_allclose(R @ R, A, atol=1e-12 * np.linalg.norm(A))


def test_morozov_identity_closed_form(rng):
    b = rng.normal(size=9) + 1j * rng.normal(size=9)
    for delta in (0.01, 0.1, 0.3):
        r = tikhonov_morozov(np.eye(9), b, delta)
        assert r.alpha == pytest.approx(delta / (1 - delta), rel=1e-12)
        assert r.residual == pytest.approx(delta * np.linalg.norm(b), rel=1e-10)


def test_morozov_batch_matches_single(rng):
    A = random_psd(rng, 20)
    B = rng.normal(size=(20, 5)) + 1j * rng.normal(size=(20, 5))
    eig = eigensystem(A)
    gn, alpha, _ = morozov_batch(eig, B, 0.05)
    for m in range(5):
        r = tikhonov_morozov(A, B[:, m], 0.05)
        assert alpha[m] == pytest.approx(r.alpha, rel=1e-9)
        assert gn[m] == pytest.approx(np.linalg.norm(r.g), rel=1e-9)


def test_morozov_range_deficient_flag():
    A = np.diag([1.0, 0.0])
    r = tikhonov_morozov(A, np.array([0.0, 1.0]), 0.1)
    assert r.range_deficient


def test_picard_default_and_bounds(rng):
    eig = eigensystem(np.diag([1.0, 0.5, 0.01, 1e-4]))
    assert picard_default(eig, 0.05) == 2
    with pytest.raises(ValidationError):
        picard_norm(eig, np.ones(4), 0)


def test_trial_far_fields_shape(exterior, wn4, grid):
    s = parametric_surface("plane", {"center": [0, 0, 0], "normal": [0, 0, 1], "half_width": 1.0}, (3, 3))
    Phi = trial_far_fields(s.points, s.normals, Homogeneous(exterior), grid, wn4)
    assert Phi.shape == (3 * grid.N, 9)
    with pytest.raises(ValidationError):
        trial_far_fields(s.points, 2 * s.normals, Homogeneous(exterior), grid, wn4)


def test_indicator_and_threshold(exterior, wn4, grid, rng):
    bg = Homogeneous(exterior)
    S = scattering_matrix(bg.far_matrix(grid, wn4), wn4)
    n = 3 * grid.N
    A = random_psd(rng, n)
    eig = eigensystem(A)
    s = parametric_surface("sphere", {"center": [0, 0, 0], "radius": 1.0}, 10)
    for method in ("tikhonov", "picard"):
        im = threshold(indicator_map(eig, s, bg, wn4, S, method, 0.05, N_P=10), 0.5)
        assert im.values.shape == (10,)
        assert im.mask.sum() >= 1
        assert np.all(im.truncated[~im.mask] == 0)
    with pytest.raises(ValidationError):
        threshold(im, 1.5)

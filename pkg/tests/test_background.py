
import numpy as np
import pytest

from fracfm.background import (Homogeneous, PenetrableInclusion, far_field_reciprocity,
                               mixed_reciprocity_residual)
from fracfm.geometry import closed_surface_mesh, direction_grid, surface_patch
from fracfm.inversion import scattering_matrix, unitarity_defect
from fracfm.wavecore import ElasticMedium, ValidationError, plane_wave_tensor_batch

INNER = ElasticMedium(0.4, 0.2, 0.5)


@pytest.fixture(scope="module")
def small_sphere(exterior):
    mesh = closed_surface_mesh("sphere", {"center": [0, 0, 0], "radius": 0.5}, 120)
    return PenetrableInclusion.single(mesh, INNER, exterior)


def test_homogeneous_response_is_plane_wave(exterior, wn4, rng):
    bg = Homogeneous(exterior)
    x = rng.normal(size=(4, 3))
    d = rng.normal(size=(3, 3))
    d /= np.linalg.norm(d, axis=1, keepdims=True)
    W = bg.response(x, d, wn4)
    np.testing.assert_allclose(W[2, 1], plane_wave_tensor_batch(x[2], d[1], wn4))


def test_homogeneous_far_matrix_zero(exterior, wn4):
    F = Homogeneous(exterior).far_matrix(direction_grid(4, 6), wn4)
    assert F.norm() == 0.0


def test_zero_contrast_inclusion_is_transparent(exterior, wn4):
    mesh = closed_surface_mesh("sphere", {"center": [0, 0, 0], "radius": 0.5}, 100)
    bg = PenetrableInclusion.single(mesh, exterior, exterior)
    F = bg.far_matrix(direction_grid(4, 6), wn4)
    assert F.norm() < 1e-10


def test_inclusion_reciprocity_and_unitarity(small_sphere, wn4):
    g = direction_grid(6, 8)
    F_b = small_sphere.far_matrix(g, wn4)
    assert F_b.norm() > 0
    assert far_field_reciprocity(F_b.data, g) < 5e-2
    assert unitarity_defect(scattering_matrix(F_b, wn4)) < 5e-2


def test_mixed_reciprocity_small_mesh(small_sphere, wn4):
    r = mixed_reciprocity_residual(small_sphere, np.array([1.0, 0.3, -0.2]),
                                   np.array([0.0, 0.6, 0.8]), wn4)
    assert r < 5e-2


def test_interface_crack_changes_far_field(small_sphere, exterior, wn4):
    g = direction_grid(4, 6)
    cap = surface_patch(small_sphere.mesh, lambda c: c[:, 2] > 0.25)
    F_b = small_sphere.far_matrix(g, wn4).data
    F = small_sphere.crack_far_matrix(cap, g, wn4)
    assert np.linalg.norm(F - F_b) > 1e-3 * np.linalg.norm(F_b)


def test_monotonicity_enforced(exterior):
    mesh = closed_surface_mesh("sphere", {"center": [0, 0, 0], "radius": 0.5}, 60)
    with pytest.raises(ValidationError):
        PenetrableInclusion.single(mesh, ElasticMedium(2.0, 0.5, 1.0), exterior)

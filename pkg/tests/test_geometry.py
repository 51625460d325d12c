import numpy as np
import pytest

from fracfm.geometry import (closed_surface_mesh, direction_grid, local_frame, parametric_surface,
                             penny_crack, surface_patch)
from fracfm.wavecore import ValidationError


def test_grid_weights_sum_to_sphere_area():
    g = direction_grid(20, 10)
    assert g.N == 200
    assert g.weights.sum() == pytest.approx(4 * np.pi, rel=1e-13)


def test_grid_triads_orthonormal():
    g = direction_grid(6, 8)
    T = g.triads
    np.testing.assert_allclose(np.einsum("nij,nkj->nik", T, T), np.broadcast_to(np.eye(3), T.shape),
                               atol=1e-14)


def test_antipode_is_minus_direction():
    g = direction_grid(8, 12)
    np.testing.assert_allclose(g.directions[g.antipode()], -g.directions, atol=1e-14)


def test_grid_rejects_small():
    with pytest.raises(ValidationError):
        direction_grid(1, 4)


def test_local_frame_orthonormal(rng):
    n, t1, t2 = local_frame(rng.normal(size=(10, 3)))
    for a, b in ((n, t1), (n, t2), (t1, t2)):
        np.testing.assert_allclose(np.sum(a * b, axis=1), 0, atol=1e-14)
    np.testing.assert_allclose(np.cross(t1, t2), n, atol=1e-14)


@pytest.mark.parametrize("kind,params,count", [
    ("sphere", {"center": [0, 0, 0], "radius": 2.0}, 50),
    ("ellipsoid", {"center": [0, 0, 0], "semi_axes": [3.0, 2.0, 4.0]}, 60),
    ("cube", {"center": [0, 3, 3], "side": 1.8}, 150),
    ("plane", {"center": [0, 0, 0], "normal": [0, 0, 1], "half_width": 2.0}, (30, 30)),
])
def test_sampling_surfaces(kind, params, count):
    s = parametric_surface(kind, params, count)
    n = count if np.isscalar(count) else count[0] * count[1]
    assert s.M == n
    np.testing.assert_allclose(np.linalg.norm(s.normals, axis=1), 1.0, atol=1e-14)


def test_penny_crack_is_flat_disc():
    cr = penny_crack(refinement=2)
    np.testing.assert_allclose(cr.nodes[:, 2], 0.0, atol=1e-15)
    assert np.linalg.norm(cr.nodes[:, :2], axis=1).max() == pytest.approx(1.0)
    assert cr.area == pytest.approx(np.pi, rel=0.05)


def test_surface_patch_rejects_whole_surface():
    mesh = closed_surface_mesh("sphere", {"center": [0, 0, 0], "radius": 0.5}, 100)
    with pytest.raises(ValidationError):
        surface_patch(mesh, lambda c: np.ones(len(c), bool))
    cap = surface_patch(mesh, lambda c: c[:, 2] > 0.25)
    assert 0 < cap.n_nodes < mesh.n_nodes

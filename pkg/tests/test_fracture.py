import warnings

import numpy as np
import pytest

from fracfm.background import Homogeneous, far_field_reciprocity
from fracfm.fracture import (Scene, assemble_crack_system, crack_far_matrix, factorization_residual,
                             measured_far_matrix, sneddon_opening, static_opening_error)
from fracfm.geometry import direction_grid, penny_crack


@pytest.fixture(scope="module")
def coarse(exterior, wn4):
    cr = penny_crack(refinement=1)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        S = assemble_crack_system(cr, Homogeneous(exterior), wn4)
    return cr, S


def test_sneddon_profile_peak(exterior):
    nu = 1.5 / (2 * 2.5)
    assert sneddon_opening(np.array([0.0]), 1.0, 1.0, exterior)[0] == pytest.approx(4 * (1 - nu) / np.pi)


def test_static_opening_coarse():
    assert static_opening_error(1) < 0.1


def test_crack_far_matrix_reciprocal(coarse):
    _, S = coarse
    g = direction_grid(4, 6)
    FD = crack_far_matrix(S, g)
    assert far_field_reciprocity(FD, g) < 1e-10


def test_measured_equals_crack_part_in_homogeneous(coarse, exterior, wn4):
    cr, S = coarse
    g = direction_grid(4, 6)
    F = measured_far_matrix(Scene(Homogeneous(exterior), cr), g, wn4, system=S)
    np.testing.assert_allclose(F.data, crack_far_matrix(S, g))


def test_factorization_residual_coarse(coarse, exterior, wn4):
    cr, S = coarse
    res = factorization_residual(Scene(Homogeneous(exterior), cr), direction_grid(4, 6), wn4, system=S)
    assert res < 0.1


def test_stiffer_crack_scatters_less(exterior, wn4):
    g = direction_grid(4, 6)
    norms = []
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", RuntimeWarning)
        for k in (1.0, 100.0):
            cr = penny_crack(refinement=1, stiffness=k * np.eye(3))
            norms.append(np.linalg.norm(crack_far_matrix(assemble_crack_system(cr, Homogeneous(exterior), wn4), g)))
    assert norms[1] < 0.1 * norms[0]

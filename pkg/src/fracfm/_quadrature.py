"""Quadrature rules on triangles, including rules for weakly singular integrands.

All rules are returned in barycentric form: ``bary`` has shape ``(q, 3)`` and
``weights`` sums to one, so that ``area * sum(w * f(bary @ vertices))``
approximates the integral over a flat triangle.
"""
from __future__ import annotations

from functools import lru_cache

import numpy as np


@lru_cache(maxsize=None)
def gauss01(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Gauss-Legendre nodes and weights on [0, 1]."""
    x, w = np.polynomial.legendre.leggauss(n)
    return (x + 1.0) / 2.0, w / 2.0


@lru_cache(maxsize=None)
def triangle_rule(n: int) -> tuple[np.ndarray, np.ndarray]:
    """Collapsed (conical) Gauss rule with ``n*n`` points.

    Exact for polynomials of total degree ``2n - 2``.
    """
    s, ws = gauss01(n)
    t, wt = gauss01(n)
    S, T = np.meshgrid(s, t, indexing="ij")
    W = np.outer(ws, wt) * (1.0 - S) * 2.0
    l2 = S.ravel()
    l3 = (T * (1.0 - S)).ravel()
    bary = np.stack([1.0 - l2 - l3, l2, l3], axis=1)
    w = W.ravel()
    return bary, w / w.sum()


@lru_cache(maxsize=None)
def vertex_duffy_rule(vertex: int, n_s: int, n_t: int) -> tuple[np.ndarray, np.ndarray]:
    """Duffy rule for integrands with a ``1/r`` singularity at one vertex.

    The weights already contain the radial Jacobian, so a ``1/r`` singularity
    at the chosen vertex is integrated as a smooth function.
    """
    s, ws = gauss01(n_s)
    t, wt = gauss01(n_t)
    j, k = [i for i in range(3) if i != vertex]
    S, T = np.meshgrid(s, t, indexing="ij")
    bary = np.zeros((S.size, 3))
    bary[:, vertex] = 1.0 - S.ravel()
    bary[:, j] = (S * (1.0 - T)).ravel()
    bary[:, k] = (S * T).ravel()
    w = (np.outer(ws, wt) * S * 2.0).ravel()
    return bary, w


def subdivided_rule(n: int, levels: int) -> tuple[np.ndarray, np.ndarray]:
    """Triangle rule applied on ``4**levels`` congruent sub-triangles."""
    return _subdivided_rule(n, levels)


@lru_cache(maxsize=None)
def _subdivided_rule(n: int, levels: int) -> tuple[np.ndarray, np.ndarray]:
    bary, w = triangle_rule(n)
    tris = [np.eye(3)]
    for _ in range(levels):
        new = []
        for T in tris:
            a, b, c = T
            ab, bc, ca = (a + b) / 2, (b + c) / 2, (c + a) / 2
            new += [np.array([a, ab, ca]), np.array([ab, b, bc]),
                    np.array([ca, bc, c]), np.array([bc, ca, ab])]
        tris = new
    pts = np.concatenate([bary @ T for T in tris])
    ww = np.concatenate([w for _ in tris]) / len(tris)
    return pts, ww


def polar_rule_2d(x: np.ndarray, tri: np.ndarray, n_s: int = 5, n_t: int = 6):
    """Rule for ``int_T f(y) dy`` with ``f ~ 1/|x - y|`` and ``x`` coplanar.

    The triangle is split into three signed sub-triangles with apex ``x``;
    each is mapped by a Duffy transform from the apex, and the edge parameter
    uses a sinh substitution clustered at the foot of the perpendicular from
    ``x``, which removes the near-singularity when ``x`` approaches an edge.

    Parameters
    ----------
    x : (..., P, 2) array
        Singular points in the plane of the triangle.
    tri : (..., 3, 2) array
        Triangle vertices (leading axes broadcast against ``x``).

    Returns
    -------
    pts : (..., P, Q, 2) array
    w : (..., P, Q) array
        Absolute weights (already multiplied by area elements); a smooth
        function times ``1/|x-y|`` is integrated accurately.
    """
    x = np.asarray(x, dtype=float)
    tri = np.asarray(tri, dtype=float)
    if x.ndim == 1:
        x = x[None]
    s, ws = gauss01(n_s)
    u01, wu = gauss01(n_t)
    d1 = tri[..., 1, :] - tri[..., 0, :]
    d2 = tri[..., 2, :] - tri[..., 0, :]
    orient = np.sign(d1[..., 0] * d2[..., 1] - d1[..., 1] * d2[..., 0])[..., None]   # (...,1)
    pts_all, w_all = [], []
    for e in range(3):
        a = tri[..., e, :][..., None, :]              # (...,1,2)
        b = tri[..., (e + 1) % 3, :][..., None, :]
        L = np.linalg.norm(b - a, axis=-1)            # (...,1)
        ed = (b - a) / L[..., None]
        rel = a - x                                   # (...,P,2)
        h = rel[..., 0] * ed[..., 1] - rel[..., 1] * ed[..., 0]
        t0 = -np.sum(rel * ed, axis=-1) / L
        degenerate = np.abs(h) <= 1e-13 * L
        h = np.where(degenerate, 0.0, h)
        eps = np.where(degenerate, 1.0, np.abs(h) / L)
        u_lo = np.arcsinh((0.0 - t0) / eps)
        u_hi = np.arcsinh((1.0 - t0) / eps)
        U = u_lo[..., None] + (u_hi - u_lo)[..., None] * u01            # (...,P,nt)
        t = t0[..., None] + eps[..., None] * np.sinh(U)
        dt = eps[..., None] * np.cosh(U) * (u_hi - u_lo)[..., None] * wu
        ypt = a[..., None, :] + t[..., None] * (b - a)[..., None, :]      # (...,P,nt,2)
        xx = x[..., None, None, :]
        pts = xx + s[:, None, None] * (ypt[..., None, :, :] - xx)        # (...,P,ns,nt,2)
        w = (s * ws)[:, None] * ((h * L * orient)[..., None, None]) * dt[..., None, :]
        shp = pts.shape[:-3]
        pts_all.append(pts.reshape(shp + (-1, 2)))
        w_all.append(w.reshape(shp + (-1,)))
    return np.concatenate(pts_all, axis=-2), np.concatenate(w_all, axis=-1)


def barycentric_2d(pts: np.ndarray, tri: np.ndarray) -> np.ndarray:
    """Barycentric coordinates of 2-D points with respect to ``tri``."""
    tri = np.asarray(tri, dtype=float)
    if tri.ndim == 2:
        T = np.array([tri[1] - tri[0], tri[2] - tri[0]]).T
        lam23 = np.linalg.solve(T, (pts - tri[0]).reshape(-1, 2).T).T.reshape(pts.shape)
    else:
        # batched: tri (K,3,2), pts (K,...,2)
        e1 = tri[:, 1] - tri[:, 0]
        e2 = tri[:, 2] - tri[:, 0]
        det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
        shape = (tri.shape[0],) + (1,) * (pts.ndim - 2)
        rel = pts - tri[:, 0].reshape(shape + (2,))
        l2 = (rel[..., 0] * e2[:, 1].reshape(shape) - rel[..., 1] * e2[:, 0].reshape(shape)) / det.reshape(shape)
        l3 = (e1[:, 0].reshape(shape) * rel[..., 1] - e1[:, 1].reshape(shape) * rel[..., 0]) / det.reshape(shape)
        lam23 = np.stack([l2, l3], axis=-1)
    return np.concatenate([1.0 - lam23.sum(-1, keepdims=True), lam23], axis=-1)

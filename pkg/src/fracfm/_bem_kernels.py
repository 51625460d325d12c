"""Compiled inner loops of the boundary element assembly.

The radial functions of the Kupradze tensor are evaluated exactly as in
:class:`fracfm.wavecore.RadialKernel` (closed form for ``k_s r >= switch``,
power series below) and contracted with quadrature weights and shape
functions on the fly.
"""
from __future__ import annotations

import numpy as np
from numba import njit

from .wavecore import RadialKernel

FOUR_PI = 4.0 * np.pi


def kernel_params(kern: RadialKernel):
    """Pack the scalars and series coefficients used by the compiled loops."""
    m = kern.medium
    scal = np.array([m.lam, m.mu, m.rho, kern.omega, kern.k_s, kern.k_p, kern.switch,
                     kern.a_static, kern.c_static])
    return scal, np.ascontiguousarray(kern._a), np.ascontiguousarray(kern._c)


@njit(cache=True)
def _phi(k, r):
    g = np.exp(1j * k * r) / FOUR_PI
    ir = 1.0 / r
    p1 = g * (1j * k * ir - ir * ir)
    p2 = g * (-k * k * ir - 2j * k * ir * ir + 2 * ir ** 3)
    p3 = g * (-1j * k ** 3 * ir + 3 * k * k * ir * ir + 6j * k * ir ** 3 - 6 * ir ** 4)
    return g * ir, p1, p2, p3


@njit(cache=True)
def _horner(c, r):
    p = 0j
    dp = 0j
    for j in range(c.shape[0] - 1, -1, -1):
        dp = dp * r + p
        p = p * r + c[j]
    return p / r, dp / r - p / (r * r)


@njit(cache=True)
def _radial(r, scal, ca, cc):
    mu = scal[1]
    rho = scal[2]
    om = scal[3]
    ks = scal[4]
    kp = scal[5]
    if ks * r < scal[6]:
        A, dA = _horner(ca, r)
        C, dC = _horner(cc, r)
        return A, dA, C, dC
    s0, s1, s2, s3 = _phi(ks, r)
    q0, q1, q2, q3 = _phi(kp, r)
    row2 = rho * om * om
    B1 = (s1 - q1) / row2
    B2 = (s2 - q2) / row2
    B3 = (s3 - q3) / row2
    A = s0 / mu + B1 / r
    dA = s1 / mu + B2 / r - B1 / (r * r)
    C = B2 - B1 / r
    dC = B3 - B2 / r + B1 / (r * r)
    return A, dA, C, dC


@njit(cache=True)
def _gh(rv, n, A, dA, C, dC, lam, mu, G, H):
    r = np.sqrt(rv[0] ** 2 + rv[1] ** 2 + rv[2] ** 2)
    rh0 = rv[0] / r
    rh1 = rv[1] / r
    rh2 = rv[2] / r
    rh = (rh0, rh1, rh2)
    nr = n[0] * rh0 + n[1] * rh1 + n[2] * rh2
    Cr = C / r
    cd = nr * mu * (dA + Cr)
    crr = nr * mu * (2 * dC - 4 * Cr)
    cnr = lam * (dA + dC + 2 * Cr) + 2 * mu * Cr
    crn = mu * (dA + Cr)
    for i in range(3):
        for k in range(3):
            rr = rh[i] * rh[k]
            g = C * rr
            h = crr * rr + cnr * n[i] * rh[k] + crn * rh[i] * n[k]
            if i == k:
                g += A
                h += cd
            G[i, k] = g
            H[i, k] = h


@njit(cache=True)
def accumulate(xs, ix, cols, y, ny, W, bary, reg, scal, ca, cc, needV, needD, V, D, Jst):
    """Add ``int G N_a`` and ``int H^T N_a`` (and ``int H_st^T``) for a batch of pairs.

    ``V[x, node, i, j] += int G_ij N``, ``D[x, node, k, i] += int H_ik N`` and
    ``Jst[x, k, i] += int Hst_ik`` for regularized rows.  Pairs must be sorted
    by ``ix``; each run of equal ``ix`` writes only its own rows.
    """
    K, Q = W.shape
    starts = np.flatnonzero(np.diff(ix)) + 1
    bounds = np.empty(len(starts) + 2, dtype=np.int64)
    bounds[0] = 0
    bounds[1:-1] = starts
    bounds[-1] = K
    for s in range(len(bounds) - 1):
        _accumulate_range(bounds[s], bounds[s + 1], xs, ix, cols, y, ny, W, bary, reg,
                          scal, ca, cc, needV, needD, V, D, Jst)


@njit(cache=True)
def _accumulate_range(p0, p1, xs, ix, cols, y, ny, W, bary, reg, scal, ca, cc,
                      needV, needD, V, D, Jst):
    lam = scal[0]
    mu = scal[1]
    ast = scal[7]
    cst = scal[8]
    G = np.zeros((3, 3), dtype=np.complex128)
    H = np.zeros((3, 3), dtype=np.complex128)
    Gs = np.zeros((3, 3), dtype=np.complex128)
    Hs = np.zeros((3, 3), dtype=np.complex128)
    rv = np.zeros(3)
    Q = W.shape[1]
    for p in range(p0, p1):
        x = ix[p]
        for q in range(Q):
            for d in range(3):
                rv[d] = y[p, q, d] - xs[x, d]
            r = np.sqrt(rv[0] ** 2 + rv[1] ** 2 + rv[2] ** 2)
            A, dA, C, dC = _radial(r, scal, ca, cc)
            _gh(rv, ny[p, q], A, dA, C, dC, lam, mu, G, H)
            w = W[p, q]
            for a in range(3):
                wb = w * bary[q, a]
                node = cols[p, a]
                if needV:
                    for i in range(3):
                        for j in range(3):
                            V[x, node, i, j] += wb * G[i, j]
                if needD:
                    for i in range(3):
                        for k in range(3):
                            D[x, node, k, i] += wb * H[i, k]
            if reg[p] and needD:
                _gh(rv, ny[p, q], ast / r + 0j, -ast / (r * r) + 0j, cst / r + 0j,
                    -cst / (r * r) + 0j, lam, mu, Gs, Hs)
                for i in range(3):
                    for k in range(3):
                        Jst[x, k, i] += w * Hs[i, k]

"""Forward scattering by a linear-slip crack.

The crack opening ``[u] = u^+ - u^-`` (``+`` is the side the crack normal
points to) is represented by continuous piecewise-linear functions that
vanish on the crack front.  It solves

    T [u] - K [u] = -t_inc      on the crack,

where ``T`` is the traction of the double-layer potential and ``t_inc`` the
background traction.  For flat cracks in a homogeneous background the
hypersingular form of ``T`` is regularized by integration by parts so that
only ``1/r`` kernels are integrated; normal and tangential openings then
decouple.  With ``Phi_k = exp(i k r) / (4 pi r)`` and ``E`` the in-plane
Laplacian of ``(Phi_s - Phi_p) / (rho omega^2)`` the Galerkin forms read

    B_nn(psi, phi) = int int  rho w^2 Phi_p psi phi
                              + (4 mu^2 E - 4 mu (Phi_p - Phi_s)) grad psi . grad phi
    B_tt(psi, phi) = int int  rho w^2 Phi_s psi_a phi_a - mu Phi_s grad psi_a . grad phi_a
                              + (-3 mu Phi_s + 4 mu^2 Phi_p / (lam + 2 mu) - 4 mu^2 E)
                                div psi  div phi

Interface cracks on a penetrable inclusion are handled by the boundary
element solver of :mod:`fracfm.background`.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp

from ._quadrature import barycentric_2d, polar_rule_2d, triangle_rule
from .geometry import CrackGeometry, DirectionGrid
from .inversion import FarFieldMatrix
from .wavecore import (ElasticMedium, RadialKernel, ValidationError, WaveNumbers,
                       plane_wave_traction_batch)

__all__ = [
    "CrackQuadrature",
    "CrackSystem",
    "OpeningDisplacement",
    "Scene",
    "assemble_crack_system",
    "crack_solve",
    "crack_far_field",
    "crack_far_matrix",
    "measured_far_matrix",
    "herglotz_traction_matrix",
    "factorization_residual",
    "sneddon_opening",
    "shear_opening",
    "static_opening_error",
]


@dataclass(frozen=True)
class CrackQuadrature:
    """Quadrature knobs of the Galerkin assembly.

    Element pairs closer than ``near`` element sizes (or sharing a vertex)
    use an outer ``n_outer**2`` rule combined with the polar rule for the
    inner integral; pairs closer than ``mid`` sizes use ``n_mid**2`` points
    per element, the rest ``n_far**2``.
    """

    n_outer: int = 4
    n_s: int = 5
    n_t: int = 6
    near: float = 1.5
    mid: float = 4.0
    n_mid: int = 4
    n_far: int = 2
    n_load: int = 5
    chunk: int = 2_000_000


@dataclass
class OpeningDisplacement:
    """Crack opening for one or several incidences.

    ``values`` has shape ``(n_nodes, 3)`` (or ``(n_nodes, 3, ncols)``) in
    global Cartesian components; edge nodes are zero.
    """

    crack: CrackGeometry
    values: np.ndarray
    incidence: Optional[tuple] = None

    def local(self) -> np.ndarray:
        """Components in the local ``(nu, tau1, tau2)`` frame."""
        R = self.crack.frames()
        return np.einsum("nab,nb...->na...", R, self.values)


@dataclass
class Scene:
    """A background plus an optional crack."""

    background: object
    crack: Optional[CrackGeometry] = None


@dataclass
class CrackSystem:
    """Discrete linear-slip system ``(T_h - K_h) c = -f``.

    Unknowns are the local opening components at the interior nodes, ordered
    ``3 * k + c`` with ``c`` indexing ``(nu, tau1, tau2)``.
    """

    crack: CrackGeometry
    background: object
    wn: WaveNumbers
    T: np.ndarray
    K: np.ndarray
    mass: np.ndarray
    nodes: np.ndarray
    quad: CrackQuadrature = field(default_factory=CrackQuadrature)
    _lu: Optional[tuple] = field(default=None, repr=False)

    @property
    def matrix(self) -> np.ndarray:
        return self.T - self.K

    @property
    def ndof(self) -> int:
        return self.T.shape[0]

    def factor(self):
        if self._lu is None:
            A = self.matrix
            self._lu = sla.lu_factor(A)
            rc = _rcond(A, self._lu)
            if rc < 1e-13:
                raise ValidationError(f"crack system is singular (reciprocal condition {rc:.2e})")
        return self._lu

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Solve ``(T_h - K_h) c = rhs``."""
        return sla.lu_solve(self.factor(), rhs)

    def to_nodes(self, c: np.ndarray) -> np.ndarray:
        """Local dof vector(s) to global Cartesian nodal values ``(n, 3, ...)``."""
        n = self.crack.n_nodes
        loc = np.zeros((n, 3) + c.shape[1:], dtype=complex)
        loc[self.nodes] = c.reshape((-1, 3) + c.shape[1:])
        R = self.crack.frames()
        return np.einsum("nab,na...->nb...", R, loc)

    def load(self, directions: np.ndarray, bases: np.ndarray) -> np.ndarray:
        """``f[dof, 3 j + m] = int N t_inc`` for incidence ``(d_j, bases[j][:, m])``."""
        return _load_matrix(self.crack, self.background, self.wn, directions, bases,
                            self.quad.n_load)[self._dof_index()]

    def _dof_index(self) -> np.ndarray:
        return (3 * self.nodes[:, None] + np.arange(3)).ravel()


def _rcond(A, lu) -> float:
    try:
        from scipy.linalg.lapack import get_lapack_funcs
        gecon, = get_lapack_funcs(("gecon",), (lu[0],))
        anorm = np.abs(A).sum(axis=0).max()
        rc, info = gecon(lu[0], anorm, norm="1")
        return float(rc)
    except Exception:  # pragma: no cover - LAPACK always available with scipy
        return 1.0


# --------------------------------------------------------------------------
# exterior medium helpers
# --------------------------------------------------------------------------

def _exterior(background) -> ElasticMedium:
    return background.exterior


def _is_homogeneous(background) -> bool:
    return getattr(background, "kind", None) == "homogeneous"


# --------------------------------------------------------------------------
# planar Galerkin assembly
# --------------------------------------------------------------------------

def _planar_data(crack: CrackGeometry):
    if crack.plane is None:
        raise ValidationError("the homogeneous-background crack solver needs a flat crack")
    uv = np.asarray(crack.plane["uv"], dtype=float)
    tris = crack.triangles
    P = uv[tris]
    e1 = P[:, 1] - P[:, 0]
    e2 = P[:, 2] - P[:, 0]
    det = e1[:, 0] * e2[:, 1] - e1[:, 1] * e2[:, 0]
    if np.any(det <= 0):
        bad = int(np.flatnonzero(det <= 0)[0])
        raise ValidationError(f"degenerate or mis-oriented crack element {bad}")
    area = 0.5 * det
    J = np.stack([e1, e2], axis=2)              # columns e1, e2
    Jinv = np.linalg.inv(J)                     # rows grad l2, grad l3
    grads = np.concatenate([-Jinv.sum(axis=1, keepdims=True), Jinv], axis=1)   # (m,3,2)
    h = np.max(np.linalg.norm(P - np.roll(P, 1, axis=1), axis=2), axis=1)
    return uv, P, area, grads, h


def _classify_pairs(crack: CrackGeometry, P, h, q: CrackQuadrature):
    m = len(P)
    cen = P.mean(axis=1)
    inc = sp.csr_matrix((np.ones(3 * m), (crack.triangles.ravel(), np.repeat(np.arange(m), 3))),
                        shape=(crack.n_nodes, m))
    share = (inc.T @ inc).toarray() > 0
    D = np.linalg.norm(cen[:, None] - cen[None], axis=2)
    H = np.maximum(h[:, None], h[None])
    upper = np.triu(np.ones((m, m), dtype=bool))
    near = upper & (share | (D < q.near * H))
    mid = upper & ~near & (D < q.mid * H)
    far = upper & ~near & ~mid
    return [np.argwhere(x) for x in (near, mid, far)]


def _kernels(kern: RadialKernel, r: np.ndarray, static: bool):
    """Kernel values ``(F_nn_grad, F_tt_lap, F_tt_div, F_nn_mass, F_tt_mass)``."""
    med = kern.medium
    lam, mu = med.lam, med.mu
    if static:
        ps = pp = 1.0 / (4 * np.pi * r)
        E = kern.e_static / r
        row2 = 0.0
    else:
        ps = np.exp(1j * kern.k_s * r) / (4 * np.pi * r)
        pp = np.exp(1j * kern.k_p * r) / (4 * np.pi * r)
        E = kern.laplacian_b(r)
        row2 = med.rho * kern.omega ** 2
    f_ng = 4 * mu ** 2 * E - 4 * mu * (pp - ps)
    f_tl = -mu * ps
    f_td = -3 * mu * ps + 4 * mu ** 2 * pp / (lam + 2 * mu) - 4 * mu ** 2 * E
    return np.stack(np.broadcast_arrays(f_ng, f_tl, f_td, row2 * pp, row2 * ps)).astype(complex)


def _pair_blocks(kern, static, P, area, pairs, tier, q: CrackQuadrature):
    """Integrals ``I0[k, f]`` and ``Iij[k, f, i, j]`` for a list of pairs."""
    a, b = pairs[:, 0], pairs[:, 1]
    K = len(pairs)
    if tier == "near":
        bo, wo = triangle_rule(q.n_outer)
        x = np.einsum("qi,kid->kqd", bo, P[a])
        wx = wo[None] * area[a, None]
        ypts, wy = polar_rule_2d(x, P[b], q.n_s, q.n_t)
        by = barycentric_2d(ypts, P[b])
        r = np.linalg.norm(x[:, :, None, :] - ypts, axis=-1)
        bx = np.broadcast_to(bo[None], (K,) + bo.shape)
    else:
        n = q.n_mid if tier == "mid" else q.n_far
        br, wr = triangle_rule(n)
        x = np.einsum("qi,kid->kqd", br, P[a])
        y = np.einsum("qi,kid->kqd", br, P[b])
        wx = wr[None] * area[a, None]
        wy = np.broadcast_to((wr[None] * area[b, None])[:, None, :], (K, len(wr), len(wr)))
        r = np.linalg.norm(x[:, :, None, :] - y[:, None, :, :], axis=-1)
        by = np.broadcast_to(br[None, None], (K, len(wr), len(wr), 3))
        bx = np.broadcast_to(br[None], (K,) + br.shape)
    F = _kernels(kern, r, static)                                   # (5,K,P,Q)
    Fw = F * (wx[:, :, None] * wy)[None]
    I0 = Fw[:3].sum(axis=(2, 3)).T                                   # (K,3)
    tmp = np.einsum("fkpq,kpqj->fkpj", Fw[3:], by, optimize=True)
    Iij = np.einsum("fkpj,kpi->kfij", tmp, bx, optimize=True)          # (K,2,3,3)
    return I0, Iij


def _assemble_planar(crack: CrackGeometry, medium: ElasticMedium, omega: float,
                     static: bool, q: CrackQuadrature) -> np.ndarray:
    uv, P, area, grads, h = _planar_data(crack)
    kern = RadialKernel(medium, omega)
    tiers = _classify_pairs(crack, P, h, q)
    n = crack.n_nodes
    rows, cols, vals = [], [], []
    for tier, pairs in zip(("near", "mid", "far"), tiers):
        if len(pairs) == 0:
            continue
        if tier == "near":
            per = q.n_outer ** 2 * 3 * q.n_s * q.n_t
        else:
            nn = q.n_mid if tier == "mid" else q.n_far
            per = nn ** 4
        step = max(1, q.chunk // per)
        for s0 in range(0, len(pairs), step):
            pr = pairs[s0:s0 + step]
            I0, Iij = _pair_blocks(kern, static, P, area, pr, tier, q)
            a, b = pr[:, 0], pr[:, 1]
            ga, gb = grads[a], grads[b]
            G = np.einsum("kia,kja->kij", ga, gb)
            M = np.zeros((len(pr), 3, 3, 3, 3), dtype=complex)     # [k, i, c, j, c']
            M[:, :, 0, :, 0] = Iij[:, 0] + I0[:, 0, None, None] * G
            tt = Iij[:, 1] + I0[:, 1, None, None] * G
            for al in range(2):
                for be in range(2):
                    blk = I0[:, 2, None, None] * ga[:, :, al, None] * gb[:, None, :, be]
                    if al == be:
                        blk = blk + tt
                    M[:, :, 1 + al, :, 1 + be] = blk
            wgt = np.where(a == b, 0.5, 1.0)[:, None, None, None, None]
            M = M * wgt
            ra = 3 * crack.triangles[a][:, :, None] + np.arange(3)     # (k,i,c)
            rb = 3 * crack.triangles[b][:, :, None] + np.arange(3)
            R = np.broadcast_to(ra[:, :, :, None, None], M.shape)
            C = np.broadcast_to(rb[:, None, None, :, :], M.shape)
            rows += [R.ravel(), C.ravel()]
            cols += [C.ravel(), R.ravel()]
            vals += [M.ravel(), M.ravel()]
    rows = np.concatenate(rows)
    cols = np.concatenate(cols)
    vals = np.concatenate(vals)
    N3 = 3 * n
    lin = rows * N3 + cols
    re = np.bincount(lin, weights=vals.real, minlength=N3 * N3)
    im = np.bincount(lin, weights=vals.imag, minlength=N3 * N3)
    return (re + 1j * im).reshape(N3, N3)


def _triple_mass(crack: CrackGeometry) -> tuple[np.ndarray, np.ndarray]:
    """Scalar P1 mass matrix and the stiffness Galerkin matrix ``int N_p N_q K``."""
    n = crack.n_nodes
    tris = crack.triangles
    area = crack.areas()
    M = np.zeros((n, n))
    Kh = np.zeros((3 * n, 3 * n), dtype=complex)
    Kloc = crack.stiffness
    I3 = np.arange(3)
    # int l_i l_j = A (1 + delta_ij) / 12 ; int l_i l_j l_k = 2 A a! b! c! / (a+b+c+2)!
    mloc = (np.ones((3, 3)) + np.eye(3)) / 12.0
    trip = np.zeros((3, 3, 3))
    for i in I3:
        for j in I3:
            for k in I3:
                cnt = np.bincount([i, j, k], minlength=3)
                trip[i, j, k] = 2.0 * np.prod([_fact(c) for c in cnt]) / _fact(5)
    for e, t in enumerate(tris):
        M[np.ix_(t, t)] += area[e] * mloc
        Ke = np.einsum("ijk,kab->iajb", trip, Kloc[t]) * area[e]     # (i,c,j,c')
        idx = (3 * t[:, None] + I3).ravel()
        Kh[np.ix_(idx, idx)] += Ke.reshape(9, 9)
    return M, Kh


def _fact(c: int) -> int:
    return math.factorial(int(c))


# --------------------------------------------------------------------------
# loads and far fields
# --------------------------------------------------------------------------

def _surface_quadrature(crack: CrackGeometry, n: int):
    bary, w = triangle_rule(n)
    v = crack.nodes[crack.triangles]
    y = np.einsum("qi,mid->mqd", bary, v)
    W = w[None] * crack.areas()[:, None]
    nrm = np.einsum("qi,mid->mqd", bary, crack.normals[crack.triangles])
    nrm /= np.linalg.norm(nrm, axis=-1, keepdims=True)
    return y, W, bary, nrm


def _load_matrix(crack, background, wn, directions, bases, n_load, chunk=16) -> np.ndarray:
    """``f[3 p + c, 3 j + m] = int N_p (R t(y; d_j, bases_j e_m))_c`` over the crack."""
    y, W, bary, nrm = _surface_quadrature(crack, n_load)
    m, Q = W.shape
    R = crack.frames()
    Rq = np.einsum("qi,miab->mqab", bary, R[crack.triangles])          # interpolated frames
    n = crack.n_nodes
    D = len(directions)
    out = np.zeros((3 * n, 3 * D), dtype=complex)
    for s0 in range(0, D, chunk):
        dd = directions[s0:s0 + chunk]
        T = background_traction_at(background, y.reshape(-1, 3), nrm.reshape(-1, 3), dd, wn)
        T = T.reshape(m, Q, len(dd), 3, 3)
        T = np.einsum("mqdij,djk->mqdik", T, bases[s0:s0 + chunk])
        loc = np.einsum("mqab,mqdbk->mqdak", Rq, T)                        # local components
        contrib = np.einsum("mq,qi,mqdak->midak", W, bary, loc)            # (m,3,d,3,3)
        rowsn = crack.triangles
        for i in range(3):
            for c in range(3):
                np.add.at(out, (3 * rowsn[:, i] + c, slice(3 * s0, 3 * (s0 + len(dd)))),
                          contrib[:, i, :, c, :].reshape(m, -1))
    return out


def background_traction_at(background, y, nu, directions, wn) -> np.ndarray:
    """Traction of ``W_b(y, d)`` with normal ``nu``: shape ``(P, D, 3, 3)``."""
    if _is_homogeneous(background):
        med = background.exterior
        return plane_wave_traction_batch(y[:, None, :], directions[None], nu[:, None, :], wn,
                                         med.lam, med.mu)
    return background.traction(y, nu, directions, wn)


# --------------------------------------------------------------------------
# public operations
# --------------------------------------------------------------------------

def assemble_crack_system(crack: CrackGeometry, background, wn: WaveNumbers, *,
                          static: bool = False,
                          quad: Optional[CrackQuadrature] = None) -> CrackSystem:
    """Assemble the linear-slip Galerkin system of a crack.

    Parameters
    ----------
    crack : CrackGeometry
    background : background model
        A homogeneous background with a flat crack uses the regularized planar
        Galerkin scheme; penetrable inclusions delegate to their own solver.
    wn : WaveNumbers
    static : bool
        Use the Kelvin (static) kernel instead of the dynamic one.
    """
    quad = quad or CrackQuadrature()
    if not _is_homogeneous(background):
        return background.crack_system(crack, wn)
    med = _exterior(background)
    lam_s = 2 * np.pi / wn.k_s
    h = _planar_data(crack)[4]
    if h.max() > lam_s / 6 * 1.0001:
        warnings.warn(f"crack mesh under-resolved: element size {h.max():.3f} exceeds "
                      f"shear wavelength / 6 = {lam_s / 6:.3f}", RuntimeWarning, stacklevel=2)
    Tfull = _assemble_planar(crack, med, wn.omega, static, quad)
    M, Kfull = _triple_mass(crack)
    nodes = crack.interior
    idx = (3 * nodes[:, None] + np.arange(3)).ravel()
    T = Tfull[np.ix_(idx, idx)]
    K = Kfull[np.ix_(idx, idx)]
    return CrackSystem(crack, background, wn, T, K, M[np.ix_(nodes, nodes)], nodes, quad)


def crack_solve(system: CrackSystem, incidence) -> OpeningDisplacement:
    """Opening for the incident plane wave ``(d, q)``."""
    d, qv = incidence
    d = np.asarray(d, dtype=float)
    qv = np.asarray(qv, dtype=complex)
    basis = np.eye(3)[None]
    f = system.load(d[None], basis)                 # (ndof, 3)
    rhs = -(f @ qv)
    c = system.solve(rhs)
    res = np.linalg.norm(system.matrix @ c - rhs) / max(np.linalg.norm(rhs), 1e-300)
    if res > 1e-10 and np.linalg.norm(rhs) > 0:
        raise ValidationError(f"crack solve residual {res:.2e} above 1e-10")
    return OpeningDisplacement(system.crack, system.to_nodes(c), (d, qv))


def _far_field_operator(system: CrackSystem, grid: DirectionGrid) -> np.ndarray:
    """``L[dof, 3 i + m]`` with ``phi_inf = L^T c`` in the triad basis at ``xi_i``."""
    return system.load(-grid.directions, grid.polarization_basis)


def crack_far_field(opening: OpeningDisplacement, grid: DirectionGrid, background, wn: WaveNumbers,
                    n_load: int = 5) -> np.ndarray:
    """Far field ``int traction(W_b(y, -xi) e_k) . [u] dS`` in the triad basis (3N vector)."""
    crack = opening.crack
    L = _load_matrix(crack, background, wn, -grid.directions, grid.polarization_basis, n_load)
    R = crack.frames()
    loc = np.einsum("nab,nb...->na...", R, opening.values).reshape((3 * crack.n_nodes,) + opening.values.shape[2:])
    return L.T @ loc


def crack_far_matrix(system: CrackSystem, grid: DirectionGrid) -> np.ndarray:
    """Raw crack contribution ``W^inf - W_b^inf`` in 3x3 block layout."""
    f = system.load(grid.directions, grid.polarization_basis)
    L = _far_field_operator(system, grid)
    return -(L.T @ system.solve(f))


def measured_far_matrix(scene: Scene, grid: DirectionGrid, wn: WaveNumbers,
                        system: Optional[CrackSystem] = None, F_b: Optional[FarFieldMatrix] = None,
                        quad: Optional[CrackQuadrature] = None) -> FarFieldMatrix:
    """Measured far-field matrix ``F = F_b + crack contribution``."""
    bg = scene.background
    if F_b is None:
        if _is_homogeneous(bg):
            F_b = FarFieldMatrix(grid, wn.omega, np.zeros((3 * grid.N, 3 * grid.N), complex), "F_b")
        else:
            F_b = bg.far_matrix(grid, wn)
    if scene.crack is None:
        return FarFieldMatrix(grid, wn.omega, F_b.data.copy(), "F")
    if _is_homogeneous(bg):
        system = system or assemble_crack_system(scene.crack, bg, wn, quad=quad)
        FD = crack_far_matrix(system, grid)
        return FarFieldMatrix(grid, wn.omega, F_b.data + FD, "F")
    return FarFieldMatrix(grid, wn.omega, bg.crack_far_matrix(scene.crack, grid, wn, F_b=F_b), "F")


def herglotz_traction_matrix(crack: CrackGeometry, background, grid: DirectionGrid,
                             wn: WaveNumbers, nodes: Optional[np.ndarray] = None) -> np.ndarray:
    """Discrete Herglotz traction operator ``H_h``.

    Row ``3 k + c`` is the local traction component ``c`` at crack node
    ``nodes[k]``; column ``3 j + m`` is grid direction ``j`` with polarization
    ``-triad_j[m]``, scaled by the grid weight ``w_j``.
    """
    nodes = crack.interior if nodes is None else nodes
    y = crack.nodes[nodes]
    nu = crack.normals[nodes]
    T = background_traction_at(background, y, nu, grid.directions, wn)     # (P,D,3,3)
    T = np.einsum("pdij,djk->pdik", T, grid.polarization_basis)
    R = crack.frames()[nodes]
    loc = np.einsum("pab,pdbk->padk", R, T)
    H = loc.reshape(3 * len(nodes), 3 * grid.N)
    return H * np.repeat(grid.weights, 3)[None]


def _lumped_mass(crack: CrackGeometry, nodes: np.ndarray) -> np.ndarray:
    a = crack.areas()
    m = np.zeros(crack.n_nodes)
    np.add.at(m, crack.triangles, a[:, None] / 3.0)
    return m[nodes]


def factorization_residual(scene: Scene, grid: DirectionGrid, wn: WaveNumbers,
                           system: Optional[CrackSystem] = None,
                           quad: Optional[CrackQuadrature] = None,
                           return_parts: bool = False):
    """Relative Frobenius residual of ``F_D W = S_b H^* T H``.

    ``W`` is the diagonal of grid weights (so that ``F_D W`` is the matrix of
    the far-field operator).  Route one is the measured far-field matrix.
    Route two uses tractions sampled at the crack nodes, a lumped-mass
    adjoint and the discrete ``T`` obtained from crack solves.
    """
    if scene.crack is None:
        return 0.0
    if not _is_homogeneous(scene.background):
        raise ValidationError("factorization_residual is implemented for the homogeneous background")
    crack = scene.crack
    system = system or assemble_crack_system(crack, scene.background, wn, quad=quad)
    FD = crack_far_matrix(system, grid)
    w3 = np.repeat(grid.weights, 3)
    lhs = FD * w3[None]
    H = herglotz_traction_matrix(crack, scene.background, grid, wn, system.nodes)
    # consistent load of a P1-interpolated traction: (M kron I3) tau
    Mc = np.kron(system.mass, np.eye(3))
    Tmat = -system.solve(Mc)                          # traction -> opening (local dofs)
    ml = np.repeat(_lumped_mass(crack, system.nodes), 3)
    # adjoint in the weighted L2 inner products of the sphere and the crack
    Hstar = (H / w3[None]).conj().T * ml[None]
    rhs = Hstar @ (Tmat @ H)
    res = float(np.linalg.norm(lhs - rhs) / np.linalg.norm(lhs))
    if return_parts:
        return res, lhs, rhs
    return res


# --------------------------------------------------------------------------
# closed-form static openings (oracles)
# --------------------------------------------------------------------------

def sneddon_opening(rho: np.ndarray, radius: float, pressure: float, medium: ElasticMedium) -> np.ndarray:
    """Normal opening of a penny crack under uniform normal traction.

    ``[u_n] = 4 (1 - nu) p / (pi mu) sqrt(a^2 - rho^2)`` with Poisson ratio ``nu``.
    """
    nu = medium.lam / (2 * (medium.lam + medium.mu))
    return 4 * (1 - nu) * pressure / (np.pi * medium.mu) * np.sqrt(np.clip(radius ** 2 - rho ** 2, 0, None))


def shear_opening(rho: np.ndarray, radius: float, shear: float, medium: ElasticMedium) -> np.ndarray:
    """Sliding of a penny crack under uniform shear traction.

    ``[u_t] = 8 (1 - nu) s / (pi mu (2 - nu)) sqrt(a^2 - rho^2)``.
    """
    nu = medium.lam / (2 * (medium.lam + medium.mu))
    return 8 * (1 - nu) * shear / (np.pi * medium.mu * (2 - nu)) * np.sqrt(np.clip(radius ** 2 - rho ** 2, 0, None))


def static_opening_error(refinement: int = 3, medium: Optional[ElasticMedium] = None,
                         component: int = 0, radius: float = 1.0) -> float:
    """Relative L2 error of the computed penny-crack opening against the static solution.

    A traction-free penny crack in a homogeneous medium is loaded by a
    uniform unit traction (``component`` 0 normal, 1 shear) at the
    quasi-static frequency ``omega = 1e-3 c_s``.  The error is measured in
    the P1 mass-matrix norm.
    """
    from .background import Homogeneous
    from .geometry import penny_crack
    from .wavecore import wave_numbers

    m = medium or ElasticMedium(1.5, 1.0, 1.0)
    cr = penny_crack(radius=radius, refinement=refinement, stiffness=np.zeros((3, 3)))
    wn = wave_numbers(1e-3 * m.c_s, m)
    system = assemble_crack_system(cr, Homogeneous(m), wn)
    Mf, _ = _triple_mass(cr)
    f = np.zeros((len(system.nodes), 3))
    f[:, component] = Mf.sum(axis=1)[system.nodes]
    c = system.solve(-f.ravel()).reshape(-1, 3)
    u = np.zeros(cr.n_nodes)
    u[system.nodes] = c[:, component].real
    rho = np.linalg.norm(cr.plane["uv"], axis=1)
    exact = (sneddon_opening if component == 0 else shear_opening)(rho, radius, 1.0, m)
    e = u - exact
    return float(np.sqrt(e @ Mf @ e / (exact @ Mf @ exact)))

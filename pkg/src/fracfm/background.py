"""Background response of a (possibly heterogeneous) intact composite.

Three background models are provided:

* :class:`Homogeneous` -- no scatterer, ``W_b = W^i``;
* :class:`PenetrableInclusion` -- one or several closed interfaces separating
  homogeneous media, solved with a collocation boundary element method;
* :class:`Tabulated` -- precomputed samples with exact-node lookup.

Boundary element formulation
----------------------------
Every interface ``S`` carries its outward unit normal ``n``, the displacement
``u`` (outside trace) and the traction ``t`` (normal ``n``), both continuous
and piecewise linear on an exact-geometry mesh.  A domain ``D`` of medium
``m`` is bounded by interfaces with ``sign = +1`` if ``D`` lies inside and
``-1`` if it lies outside.  Inside ``D`` the field is represented as

    u(x) = src_D(x) + sum_S sign_S (V_S t - D_S u),

with ``V`` and ``D`` the single- and double-layer potentials of medium ``m``
(``src`` is the incident wave for the exterior domain, or a point source).
Collocating at a node ``x`` of ``S`` and using the rigid-body identities
``int H_st = -I`` (inside limit) and ``0`` (outside limit) for the Kelvin
kernel yields, with the regularized double layer
``K u(x) = int (H - H_st) u + int H_st (u - u(x))``,

    [sign_S = -1] u(x) - sum_S' sign_S' (V_S' t - K_S' u) = src_D(x),

which holds at smooth points and at edges and corners alike.  Interface
cracks add the opening ``j = u_out - u_in`` at the crack nodes with the
linear-slip law ``t = K j``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
import scipy.linalg as sla

from ._bem_kernels import accumulate, kernel_params
from ._quadrature import subdivided_rule, triangle_rule, vertex_duffy_rule
from .geometry import CrackGeometry, DirectionGrid, SurfaceMesh
from .inversion import FarFieldMatrix
from .wavecore import (ElasticMedium, RadialKernel, ValidationError, WaveNumbers,
                       check_monotonicity, plane_wave_tensor_batch, plane_wave_traction_batch,
                       traction_batch)

__all__ = [
    "BEMOptions",
    "Homogeneous",
    "Interface",
    "PenetrableInclusion",
    "Tabulated",
    "TransmissionSolution",
    "TransmissionSolver",
    "BackgroundFarField",
    "transmission_solve",
    "background_response",
    "background_traction",
    "background_far_matrix",
    "mixed_reciprocity_residual",
    "far_field_reciprocity",
]


@dataclass(frozen=True)
class BEMOptions:
    """Quadrature and conditioning knobs of the transmission solver."""

    n_duffy: int = 6
    n_sub: int = 3
    near_levels: int = 2
    near: float = 1.5
    mid: float = 4.0
    n_far: int = 3
    n_far_field: int = 4
    chunk: int = 300_000
    rcond_min: float = 1e-13
    shift: float = 0.005


# --------------------------------------------------------------------------
# background models
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class Homogeneous:
    """Homogeneous background: ``W_b`` is the incident plane-wave tensor."""

    exterior: ElasticMedium
    kind: str = "homogeneous"

    def response(self, x, directions, wn: WaveNumbers) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, float))
        d = np.atleast_2d(np.asarray(directions, float))
        return plane_wave_tensor_batch(x[:, None], d[None], wn)

    def traction(self, y, nu, directions, wn: WaveNumbers) -> np.ndarray:
        y = np.atleast_2d(np.asarray(y, float))
        nu = np.atleast_2d(np.asarray(nu, float))
        d = np.atleast_2d(np.asarray(directions, float))
        m = self.exterior
        return plane_wave_traction_batch(y[:, None], d[None], nu[:, None], wn, m.lam, m.mu)

    def far_matrix(self, grid: DirectionGrid, wn: WaveNumbers) -> FarFieldMatrix:
        return FarFieldMatrix(grid, wn.omega, np.zeros((3 * grid.N, 3 * grid.N), complex), "F_b")


@dataclass(frozen=True)
class Interface:
    """Closed surface separating medium ``inside`` from medium ``outside``.

    Media are referenced by their index in the owning model's ``media``.
    """

    mesh: SurfaceMesh
    inside: int
    outside: int


@dataclass(eq=False)
class PenetrableInclusion:
    """Piecewise homogeneous background with closed interfaces.

    ``media[0]`` is the exterior medium.  The common single-inclusion case is
    built with :meth:`single`.
    """

    media: tuple
    interfaces: tuple
    options: BEMOptions = field(default_factory=BEMOptions)
    kind: str = "inclusion"
    _solvers: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        self.media = tuple(self.media)
        self.interfaces = tuple(self.interfaces)
        for itf in self.interfaces:
            a, b = self.media[itf.inside], self.media[itf.outside]
            if not check_monotonicity(a, b):
                raise ValidationError("interface media violate the monotonicity condition")

    @classmethod
    def single(cls, mesh: SurfaceMesh, interior: ElasticMedium, exterior: ElasticMedium,
               options: Optional[BEMOptions] = None) -> "PenetrableInclusion":
        return cls((exterior, interior), (Interface(mesh, 1, 0),), options or BEMOptions())

    @property
    def exterior(self) -> ElasticMedium:
        return self.media[0]

    @property
    def interior(self) -> ElasticMedium:
        return self.media[1]

    @property
    def mesh(self) -> SurfaceMesh:
        return self.interfaces[0].mesh

    # -- solver access ----------------------------------------------------
    def solver(self, wn: WaveNumbers, crack: Optional[CrackGeometry] = None) -> "TransmissionSolver":
        if crack is None:
            key = (wn.omega,)
        elif isinstance(crack, CrackGeometry):
            key = (wn.omega, id(crack))
        else:
            key = (wn.omega,) + tuple(id(c) for c in crack)
        hit = self._solvers.get(key)
        if hit is None or hit[0] is not crack:
            # the stored crack object guards against reuse of ids
            hit = (crack, TransmissionSolver(self, wn, crack))
            self._solvers[key] = hit
        return hit[1]

    def response(self, x, directions, wn: WaveNumbers) -> np.ndarray:
        return self.solver(wn).plane_wave_response(x, directions)

    def traction(self, y, nu, directions, wn: WaveNumbers) -> np.ndarray:
        return self.solver(wn).plane_wave_traction(y, nu, directions)

    def far_matrix(self, grid: DirectionGrid, wn: WaveNumbers) -> FarFieldMatrix:
        return FarFieldMatrix(grid, wn.omega, self.solver(wn).far_matrix(grid), "F_b")

    def crack_system(self, crack: CrackGeometry, wn: WaveNumbers) -> "TransmissionSolver":
        return self.solver(wn, crack)

    def crack_far_matrix(self, crack: CrackGeometry, grid: DirectionGrid, wn: WaveNumbers,
                         F_b: Optional[FarFieldMatrix] = None) -> np.ndarray:
        """Measured far-field matrix (background plus crack) of a damaged composite."""
        return self.solver(wn, crack).far_matrix(grid)

    def domain_of(self, x: np.ndarray) -> np.ndarray:
        """Medium index of each point (points on an interface are ambiguous)."""
        x = np.atleast_2d(x)
        dom = np.zeros(len(x), dtype=int)
        best = np.full(len(x), np.inf)
        for itf in self.interfaces:
            inside, vol = _inside(itf.mesh, x)
            upd = inside & (vol < best)
            dom[upd] = itf.inside
            best[upd] = vol
        return dom


def _inside(mesh: SurfaceMesh, x: np.ndarray):
    c = mesh.center
    if mesh.kind == "sphere":
        a = np.full(3, float(mesh.params["radius"]))
    elif mesh.kind == "ellipsoid":
        a = np.asarray(mesh.params["semi_axes"], float)
    else:
        s = float(mesh.params["side"])
        return np.all(np.abs(x - c) < s / 2, axis=1), s ** 3
    return np.sum(((x - c) / a) ** 2, axis=1) < 1.0, float(np.prod(a))


@dataclass
class Tabulated:
    """Precomputed background data with exact-node lookup only.

    Attributes
    ----------
    exterior : ElasticMedium
    omega : float
    grid : DirectionGrid
    far : FarFieldMatrix
        Background far-field matrix ``F_b``.
    points, normals : (P, 3) arrays
        Sample points (and the normals used for the stored tractions).
    responses : (P, N, 3, 3) array
        ``W_b(x_p, d_j)`` (Cartesian columns).
    tractions : (P, N, 3, 3) array
        Tractions of ``W_b(., d_j)`` at ``x_p`` with normal ``normals[p]``.
    """

    exterior: ElasticMedium
    omega: float
    grid: DirectionGrid
    far: FarFieldMatrix
    points: np.ndarray
    normals: np.ndarray
    responses: np.ndarray
    tractions: np.ndarray
    kind: str = "tabulated"

    @classmethod
    def from_model(cls, model, grid: DirectionGrid, wn: WaveNumbers, points, normals) -> "Tabulated":
        points = np.atleast_2d(np.asarray(points, float))
        normals = np.atleast_2d(np.asarray(normals, float))
        dirs = np.concatenate([grid.directions, -grid.directions])
        return cls(model.exterior, wn.omega, grid, model.far_matrix(grid, wn), points, normals,
                   model.response(points, dirs, wn), model.traction(points, normals, dirs, wn))

    def _check(self, wn: WaveNumbers):
        if abs(wn.omega - self.omega) > 1e-12 * self.omega:
            raise ValidationError("tabulated background used at a different frequency")

    def _lookup(self, x, directions):
        x = np.atleast_2d(np.asarray(x, float))
        d = np.atleast_2d(np.asarray(directions, float))
        dirs = np.concatenate([self.grid.directions, -self.grid.directions])
        ip = []
        for p in x:
            k = np.flatnonzero(np.all(np.abs(self.points - p) <= 1e-12, axis=1))
            if len(k) == 0:
                raise ValidationError("tabulated background queried off its sample set")
            ip.append(k[0])
        idir = []
        for q in d:
            k = np.flatnonzero(np.all(np.abs(dirs - q) <= 1e-12, axis=1))
            if len(k) == 0:
                raise ValidationError("tabulated background queried off its direction set")
            idir.append(k[0] % (2 * self.grid.N))
        return np.array(ip), np.array(idir)

    def response(self, x, directions, wn: WaveNumbers) -> np.ndarray:
        self._check(wn)
        ip, idir = self._lookup(x, directions)
        return self.responses[np.ix_(ip, idir)]

    def traction(self, y, nu, directions, wn: WaveNumbers) -> np.ndarray:
        self._check(wn)
        ip, idir = self._lookup(y, directions)
        nu = np.atleast_2d(np.asarray(nu, float))
        sgn = np.sign(np.sum(nu * self.normals[ip], axis=1))
        if np.any(np.abs(np.abs(np.sum(nu * self.normals[ip], axis=1)) - 1) > 1e-10):
            raise ValidationError("tabulated tractions are stored for fixed normals only")
        return self.tractions[np.ix_(ip, idir)] * sgn[:, None, None, None]

    def far_matrix(self, grid: DirectionGrid, wn: WaveNumbers) -> FarFieldMatrix:
        self._check(wn)
        if not grid.same_as(self.grid):
            raise ValidationError("tabulated background computed for a different grid")
        return self.far


# --------------------------------------------------------------------------
# layer potentials
# --------------------------------------------------------------------------

def _map_rule(mesh: SurfaceMesh, elems: np.ndarray, bary: np.ndarray, w: np.ndarray):
    """Mapped points, normals and absolute weights for (elements x rule)."""
    K, Q = len(elems), len(w)
    e = np.broadcast_to(elems[:, None], (K, Q))
    b = np.broadcast_to(bary[None], (K, Q, 3))
    y, ny, jac = mesh.map_points(e, b)
    W = w[None] * mesh.flat_areas()[elems][:, None] * jac
    return y, ny, W


def _cached_rule(mesh: SurfaceMesh, key, bary, w):
    """Mapped rule on every element of ``mesh``, cached on the mesh object."""
    cache = mesh.__dict__.setdefault("_rule_cache", {})
    if key not in cache:
        y, ny, W = _map_rule(mesh, np.arange(len(mesh.triangles)), bary, w)
        cache[key] = (np.ascontiguousarray(y), np.ascontiguousarray(ny), np.ascontiguousarray(W))
    return cache[key]


def layer_matrices(kern: RadialKernel, mesh: SurfaceMesh, xs: np.ndarray,
                   node_of_x: Optional[np.ndarray] = None, opts: BEMOptions = BEMOptions(),
                   need: str = "VD"):
    """Single- and double-layer collocation matrices of a mesh.

    Returns ``V`` and ``D`` of shape ``(3 nx, 3 n)`` with
    ``(V t)(x) = int G(x, y) t(y)`` and ``(D u)(x)_k = int u_i H_ik``.  If
    ``node_of_x[i] >= 0`` the point ``xs[i]`` is that node of ``mesh`` and the
    double layer is regularized with the Kelvin kernel (see module notes).
    """
    xs = np.ascontiguousarray(np.atleast_2d(xs), dtype=float)
    nx, n = len(xs), mesh.n_nodes
    tris = mesh.triangles
    if node_of_x is None:
        node_of_x = -np.ones(nx, dtype=int)
    reg = node_of_x >= 0
    h = mesh.element_size()
    cen = mesh.nodes[tris].mean(axis=1)
    dist = np.linalg.norm(xs[:, None] - cen[None], axis=2) / h[None]
    touch_v = (node_of_x[:, None, None] == tris[None]) & reg[:, None, None]     # (nx,m,3)
    touching = touch_v.any(axis=2)
    V = np.zeros((nx, n, 3, 3), complex)
    D = np.zeros((nx, n, 3, 3), complex)
    Jst = np.zeros((nx, 3, 3), complex)

    groups = []
    far = ~touching & (dist >= opts.mid)
    mid = ~touching & (dist < opts.mid) & (dist >= opts.near)
    near = ~touching & (dist < opts.near)
    groups.append((("far", opts.n_far), np.argwhere(far), triangle_rule(opts.n_far)))
    groups.append((("sub", opts.n_sub, 1), np.argwhere(mid), subdivided_rule(opts.n_sub, 1)))
    groups.append((("sub", opts.n_sub, opts.near_levels), np.argwhere(near),
                   subdivided_rule(opts.n_sub, opts.near_levels)))
    for a in range(3):
        pr = np.argwhere(touching & touch_v[:, :, a])
        groups.append((("duffy", a, opts.n_duffy), pr, vertex_duffy_rule(a, opts.n_duffy, opts.n_duffy)))

    scal, ca, cc = kernel_params(kern)
    needV, needD = "V" in need, "D" in need
    for key, pairs, (bary, w) in groups:
        if len(pairs) == 0:
            continue
        y_all, ny_all, W_all = _cached_rule(mesh, key, bary, w)
        step = max(1, opts.chunk // len(w))
        for s0 in range(0, len(pairs), step):
            pr = pairs[s0:s0 + step]
            ix, e = np.ascontiguousarray(pr[:, 0]), pr[:, 1]
            accumulate(xs, ix, np.ascontiguousarray(tris[e]), y_all[e], ny_all[e], W_all[e],
                       np.ascontiguousarray(bary), reg[ix], scal, ca, cc, needV, needD, V, D, Jst)
    if np.any(reg):
        ii = np.flatnonzero(reg)
        D[ii, node_of_x[ii]] -= Jst[ii]
    return (V.transpose(0, 2, 1, 3).reshape(3 * nx, 3 * n),
            D.transpose(0, 2, 1, 3).reshape(3 * nx, 3 * n))


def far_field_matrices(mesh: SurfaceMesh, wn_medium: WaveNumbers, medium: ElasticMedium,
                       grid_dirs: np.ndarray, bases: np.ndarray, n_rule: int = 4):
    """Far-field single/double layer matrices ``(3 Nobs, 3 n)`` in the given bases.

    Uses ``G^inf(xi, y) = W^i(y, -xi)`` and its traction.
    """
    bary, w = triangle_rule(n_rule)
    m = len(mesh.triangles)
    y, ny, W = _map_rule(mesh, np.arange(m), bary, w)
    y = y.reshape(-1, 3)
    ny = ny.reshape(-1, 3)
    Wf = W.reshape(-1)
    Nq = np.repeat(mesh.triangles, len(w), axis=0)          # (mQ,3) node ids
    Bq = np.tile(bary, (m, 1))                               # (mQ,3)
    n = mesh.n_nodes
    P = sp_interp(Nq, Bq, Wf, n)                             # (n, mQ) weighted interpolation
    No = len(grid_dirs)
    FV = np.zeros((No, 3, n, 3), complex)
    FD = np.zeros((No, 3, n, 3), complex)
    chunk = max(1, 2_000_000 // max(1, len(y)))
    for s0 in range(0, No, chunk):
        d = -grid_dirs[s0:s0 + chunk]
        Gi = plane_wave_tensor_batch(y[None], d[:, None], wn_medium)                 # (o,q,3,3) [i,k]
        Ti = plane_wave_traction_batch(y[None], d[:, None], ny[None], wn_medium, medium.lam, medium.mu)
        Bs = bases[s0:s0 + chunk]
        # row m of the observation basis: component along Bs[:, :, m]
        no, nq = Gi.shape[:2]
        for Ker, out in ((Gi, FV), (Ti, FD)):
            # row m of the observation basis: (V t)_k = G_ki t_i, (D u)_k = u_i T_ik
            Kr = np.matmul(np.swapaxes(Bs, 1, 2)[:, None], np.swapaxes(Ker, 2, 3))   # (o,q,m,i)
            Kr = np.moveaxis(Kr, 1, 0).reshape(nq, -1)                                # (q, o m i)
            out[s0:s0 + chunk] = (P @ Kr).reshape(n, no, 3, 3).transpose(1, 2, 0, 3)
    return FV.reshape(3 * No, 3 * n), FD.reshape(3 * No, 3 * n)


def sp_interp(Nq, Bq, Wf, n):
    """Dense ``(n, Q)`` matrix ``P[node, q] = W_q N_node(y_q)``."""
    P = np.zeros((n, len(Wf)))
    q = np.arange(len(Wf))
    for a in range(3):
        np.add.at(P, (Nq[:, a], q), Bq[:, a] * Wf)
    return P


# --------------------------------------------------------------------------
# transmission solver
# --------------------------------------------------------------------------

@dataclass
class TransmissionSolution:
    """Cauchy data on all interfaces for a set of right-hand sides.

    ``u`` and ``t`` have shape ``(n_total, 3, ncols)`` (outside trace and
    traction with the outward normal); ``jump`` has shape
    ``(n_crack, 3, ncols)``.
    """

    solver: "TransmissionSolver"
    u: np.ndarray
    t: np.ndarray
    jump: np.ndarray
    residual: float
    u_inc: Optional[np.ndarray] = None
    t_inc: Optional[np.ndarray] = None


class TransmissionSolver:
    """Collocation solver for a piecewise homogeneous background.

    Parameters
    ----------
    model : PenetrableInclusion
    wn : WaveNumbers
        Exterior wave numbers (``omega`` is shared by all media).
    crack : CrackGeometry or sequence of CrackGeometry, optional
        Interface cracks (created by :func:`fracfm.geometry.surface_patch` on
        the interface meshes); several cracks may share or use different
        interfaces but must not share nodes.
    """

    def __init__(self, model: PenetrableInclusion, wn: WaveNumbers, crack: Optional[CrackGeometry] = None):
        self.model = model
        self.opts = model.options
        self.crack = crack
        if crack is None:
            self.cracks = []
        elif isinstance(crack, CrackGeometry):
            self.cracks = [crack]
        else:
            self.cracks = list(crack)
        self.omega = wn.omega
        self.wn = wn
        self._assemble(wn.omega)
        self.provenance = {"omega_requested": wn.omega, "omega_used": self.omega, "shifted": False}
        rc = self._factor()
        if rc < self.opts.rcond_min:
            # irregular frequency: perturb omega and retry once
            new = wn.omega * (1 + self.opts.shift)
            warnings.warn(f"transmission system ill-conditioned (rcond {rc:.1e}); "
                          f"shifting omega to {new:.6g}", RuntimeWarning, stacklevel=2)
            self._assemble(new)
            self.provenance.update(omega_used=new, shifted=True)
            rc = self._factor()
            if rc < self.opts.rcond_min:
                raise ValidationError(f"transmission system singular (rcond {rc:.1e}); "
                                      "try perturbing the frequency")
        self.provenance["rcond"] = rc
        self._cache = {}

    # -- wave numbers per medium -----------------------------------------
    def _wn(self, medium: ElasticMedium) -> WaveNumbers:
        from .wavecore import wave_numbers
        return wave_numbers(self.omega, medium)

    def _assemble(self, omega: float):
        self.omega = omega
        model = self.model
        itfs = model.interfaces
        self.offsets = np.cumsum([0] + [i.mesh.n_nodes for i in itfs])
        ntot = self.offsets[-1]
        self.ntot = ntot
        # crack jump unknowns
        self.crack_nodes = np.zeros(0, dtype=int)      # global node ids carrying a jump
        self.crack_K = np.zeros((0, 3, 3))             # global stiffness at those nodes
        if self.cracks:
            self._attach_cracks()
        nj = len(self.crack_nodes)
        nunk = 6 * ntot + 3 * nj
        A = np.zeros((nunk, nunk), complex)
        self.kernels = [RadialKernel(mm, omega) for mm in model.media]
        self._layers = {}
        self.row_blocks = []           # (domain, interface index, row offset)
        row = 0
        jpos = {g: k for k, g in enumerate(self.crack_nodes)}
        for s, itf in enumerate(itfs):
            for dom, sgn in ((itf.inside, +1), (itf.outside, -1)):
                mesh = itf.mesh
                rows = slice(row, row + 3 * mesh.n_nodes)
                for s2, itf2 in enumerate(itfs):
                    if dom == itf2.inside:
                        sg2 = +1
                    elif dom == itf2.outside:
                        sg2 = -1
                    else:
                        continue
                    V, Dm = self._layer(dom, s, s2)
                    c0 = 3 * self.offsets[s2]
                    c1 = 3 * self.offsets[s2 + 1]
                    A[rows, 3 * ntot + c0:3 * ntot + c1] += -sg2 * V
                    A[rows, c0:c1] += sg2 * Dm
                    if sg2 == +1 and nj:
                        # inside trace u - j on crack nodes of this interface
                        for g, k in jpos.items():
                            if self.offsets[s2] <= g < self.offsets[s2 + 1]:
                                loc = g - self.offsets[s2]
                                A[rows, 6 * ntot + 3 * k:6 * ntot + 3 * k + 3] -= sg2 * Dm[:, 3 * loc:3 * loc + 3]
                if sgn == -1:
                    c0 = 3 * self.offsets[s]
                    A[rows, c0:c0 + 3 * mesh.n_nodes] += np.eye(3 * mesh.n_nodes)
                else:
                    pass
                self.row_blocks.append((dom, s, row))
                row += 3 * mesh.n_nodes
        self._incident_operators()
        self._layers = {}
        # linear-slip rows: t - K j = 0
        if nj:
            for k, g in enumerate(self.crack_nodes):
                r = row + 3 * k
                A[r:r + 3, 3 * ntot + 3 * g:3 * ntot + 3 * g + 3] = np.eye(3)
                A[r:r + 3, 6 * ntot + 3 * k:6 * ntot + 3 * k + 3] = -self.crack_K[k]
            row += 3 * nj
        assert row == nunk
        self.A = A

    def _layer(self, medium: int, s: int, s2: int):
        """Collocation matrices of interface ``s2`` at the nodes of ``s`` (cached)."""
        key = (medium, s, s2)
        if key not in self._layers:
            mesh = self.model.interfaces[s].mesh
            node_of_x = np.arange(mesh.n_nodes) if s2 == s else None
            self._layers[key] = layer_matrices(self.kernels[medium], self.model.interfaces[s2].mesh,
                                               mesh.nodes, node_of_x, self.opts)
        return self._layers[key]

    def _incident_operators(self):
        """Operators mapping exterior Cauchy data to the scattered-variable right-hand side.

        For a field ``u^i`` solving the exterior equations everywhere the
        collocated representation of the exterior medium reproduces the
        exterior source term in every domain, so with ``u = u~ + u^i`` the
        right-hand side of a domain ``D`` is
        ``sum_S' sign'((V_D - V_0) t^i - (K_D - K_0) u^i)``.  It vanishes for the
        exterior domain and for media equal to the exterior one.
        """
        ntot = self.ntot
        media = self.model.media
        self.inc_ops = []
        for dom, s, row in self.row_blocks:
            if dom == 0 or media[dom] == media[0]:
                continue
            n = self.model.interfaces[s].mesh.n_nodes
            M = np.zeros((3 * n, 6 * ntot), complex)
            for s2, itf2 in enumerate(self.model.interfaces):
                if dom == itf2.inside:
                    sg2 = +1
                elif dom == itf2.outside:
                    sg2 = -1
                else:
                    continue
                Vd, Kd = self._layer(dom, s, s2)
                V0, K0 = self._layer(0, s, s2)
                c0, c1 = 3 * self.offsets[s2], 3 * self.offsets[s2 + 1]
                M[:, c0:c1] -= sg2 * (Kd - K0)
                M[:, 3 * ntot + c0:3 * ntot + c1] += sg2 * (Vd - V0)
            self.inc_ops.append((row, M))

    def _attach_cracks(self):
        nodes, Ks = [], []
        for crack in self.cracks:
            host = crack.host
            if host is None:
                raise ValidationError("interface cracks must be built on an interface mesh (surface_patch)")
            ids = np.asarray(host["node_ids"])
            for s, itf in enumerate(self.model.interfaces):
                mesh = itf.mesh
                if ids.max() < mesh.n_nodes and np.allclose(mesh.nodes[ids], crack.nodes, atol=1e-12):
                    inner = crack.interior
                    nodes.append(self.offsets[s] + ids[inner])
                    Ks.append(crack.stiffness_global()[inner])
                    break
            else:
                raise ValidationError("crack host mesh does not match any interface")
        self.crack_nodes = np.concatenate(nodes)
        self.crack_K = np.concatenate(Ks)
        if len(np.unique(self.crack_nodes)) != len(self.crack_nodes):
            raise ValidationError("interface cracks overlap")

    def _factor(self) -> float:
        self.lu = sla.lu_factor(self.A)
        anorm = np.abs(self.A).sum(axis=0).max()
        gecon, = sla.get_lapack_funcs(("gecon",), (self.lu[0],))
        rc, _ = gecon(self.lu[0], anorm, norm="1")
        return float(rc)

    # -- right-hand sides ---------------------------------------------------
    def _rhs(self, src_fn) -> np.ndarray:
        """Stack ``src_fn(domain, points) -> (P, 3, ncols)`` over the row blocks."""
        blocks = []
        ncols = None
        for dom, s, _ in self.row_blocks:
            xs = self.model.interfaces[s].mesh.nodes
            v = src_fn(dom, xs)
            ncols = v.shape[-1]
            blocks.append(v.reshape(-1, ncols))
        nj = len(self.crack_nodes)
        if nj:
            blocks.append(np.zeros((3 * nj, ncols), complex))
        return np.concatenate(blocks, axis=0)

    def solve_rhs(self, b: np.ndarray) -> TransmissionSolution:
        x = sla.lu_solve(self.lu, b)
        res = float(np.linalg.norm(self.A @ x - b) / max(np.linalg.norm(b), 1e-300))
        ntot, nj = self.ntot, len(self.crack_nodes)
        nc = b.shape[1]
        u = x[:3 * ntot].reshape(ntot, 3, nc)
        t = x[3 * ntot:6 * ntot].reshape(ntot, 3, nc)
        j = x[6 * ntot:].reshape(nj, 3, nc)
        return TransmissionSolution(self, u, t, j, res)

    def solve_plane_waves(self, directions: np.ndarray, bases: Optional[np.ndarray] = None
                          ) -> TransmissionSolution:
        """Solve for incidences ``(d_j, bases[j][:, m])`` (columns ``3 j + m``)."""
        directions = np.atleast_2d(directions)
        if bases is None:
            bases = np.broadcast_to(np.eye(3), (len(directions), 3, 3))
        key = ("pw", directions.tobytes(), np.ascontiguousarray(bases).tobytes())
        if key in self._cache:
            return self._cache[key]
        wn0 = self._wn(self.model.exterior)
        ext = self.model.exterior
        nodes = np.concatenate([i.mesh.nodes for i in self.model.interfaces])
        normals = np.concatenate([i.mesh.node_normals for i in self.model.interfaces])
        nc = 3 * len(directions)
        W = plane_wave_tensor_batch(nodes[:, None], directions[None], wn0)       # (P,D,3,3)
        ui = np.einsum("pdik,dkm->pidm", W, bases).reshape(len(nodes), 3, nc)
        T = plane_wave_traction_batch(nodes[:, None], directions[None], normals[:, None],
                                      wn0, ext.lam, ext.mu)
        ti = np.einsum("pdik,dkm->pidm", T, bases).reshape(len(nodes), 3, nc)
        b = np.zeros((self.A.shape[0], nc), complex)
        cauchy = np.concatenate([ui.reshape(-1, nc), ti.reshape(-1, nc)], axis=0)
        for row, M in self.inc_ops:
            b[row:row + M.shape[0]] = M @ cauchy
        nj = len(self.crack_nodes)
        if nj:
            r0 = 6 * self.ntot
            b[r0:] = -ti[self.crack_nodes].reshape(-1, nc)
        sol = self.solve_rhs(b)
        sol.u = sol.u + ui
        sol.t = sol.t + ti
        sol.u_inc, sol.t_inc = ui, ti
        if len(self._cache) > 8:
            self._cache.clear()
        self._cache[key] = sol
        return sol

    def solve_point_source(self, x0: np.ndarray) -> TransmissionSolution:
        """Solve for a point source at ``x0`` with polarizations ``e_1, e_2, e_3``."""
        x0 = np.asarray(x0, float)
        dom0 = int(self.model.domain_of(x0[None])[0])

        def src(dom, xs):
            if dom != dom0:
                return np.zeros((len(xs), 3, 3), complex)
            return self.kernels[dom].tensor(xs - x0)

        sol = self.solve_rhs(self._rhs(src))
        sol.source = (x0, dom0)
        return sol

    # -- post-processing ----------------------------------------------------
    def _domain_traces(self, sol: TransmissionSolution, s: int, inside: bool,
                       scattered: bool = False):
        """Displacement and traction traces of interface ``s`` seen from one side.

        ``scattered`` removes the incident plane-wave part (if any).
        """
        a, b = self.offsets[s], self.offsets[s + 1]
        u = sol.u[a:b].copy()
        t = sol.t[a:b]
        if scattered and sol.u_inc is not None:
            u = u - sol.u_inc[a:b]
            t = t - sol.t_inc[a:b]
        if inside and len(self.crack_nodes):
            for k, g in enumerate(self.crack_nodes):
                if a <= g < b:
                    u[g - a] -= sol.jump[k]
        return u, t

    def field(self, sol: TransmissionSolution, x: np.ndarray, src_fn=None) -> np.ndarray:
        """Total field at points off the interfaces: ``(P, 3, ncols)``.

        For plane-wave solutions the layer potentials act on the scattered
        traces and ``src_fn`` supplies the incident field in every domain;
        interior media add the exterior/interior operator difference applied
        to the incident traces.  Otherwise ``src_fn`` supplies the source
        field of its own domain.
        """
        x = np.atleast_2d(np.asarray(x, float))
        dom = self.model.domain_of(x)
        nc = sol.u.shape[-1]
        split = sol.u_inc is not None
        out = np.zeros((len(x), 3, nc), complex)
        for dd in np.unique(dom):
            sel = np.flatnonzero(dom == dd)
            xs = x[sel]
            acc = np.zeros((len(sel) * 3, nc), complex)
            for s, itf in enumerate(self.model.interfaces):
                if dd == itf.inside:
                    sg = +1
                elif dd == itf.outside:
                    sg = -1
                else:
                    continue
                V, Dm = layer_matrices(self.kernels[dd], itf.mesh, xs, None, self.opts)
                u, t = self._domain_traces(sol, s, inside=(sg == +1), scattered=split)
                acc += sg * (V @ t.reshape(-1, nc) - Dm @ u.reshape(-1, nc))
                if split and dd != 0 and self.model.media[dd] != self.model.media[0]:
                    V0, D0 = layer_matrices(self.kernels[0], itf.mesh, xs, None, self.opts)
                    a, b = self.offsets[s], self.offsets[s + 1]
                    acc += sg * ((V - V0) @ sol.t_inc[a:b].reshape(-1, nc)
                                 - (Dm - D0) @ sol.u_inc[a:b].reshape(-1, nc))
            out[sel] = acc.reshape(len(sel), 3, nc)
            if src_fn is not None:
                out[sel] += src_fn(int(dd), xs)
        return out

    def plane_wave_response(self, x, directions) -> np.ndarray:
        """``W_b(x_p, d_j)`` with shape ``(P, D, 3, 3)``."""
        directions = np.atleast_2d(np.asarray(directions, float))
        x = np.atleast_2d(np.asarray(x, float))
        sol = self.solve_plane_waves(directions)
        wn0 = self._wn(self.model.exterior)

        def src(dom, xs):
            W = plane_wave_tensor_batch(xs[:, None], directions[None], wn0)
            return W.transpose(0, 2, 1, 3).reshape(len(xs), 3, -1)

        u = self.field(sol, x, src)
        return u.reshape(len(x), 3, len(directions), 3).transpose(0, 2, 1, 3)

    def plane_wave_traction(self, y, nu, directions) -> np.ndarray:
        """Traction of ``W_b(., d_j)`` at points ``y`` with normals ``nu``.

        Points on an interface use the interpolated traction unknown (which
        is continuous across welded interfaces); other points use the
        gradient of the representation formula by central differences.
        """
        y = np.atleast_2d(np.asarray(y, float))
        nu = np.atleast_2d(np.asarray(nu, float))
        directions = np.atleast_2d(np.asarray(directions, float))
        sol = self.solve_plane_waves(directions)
        out = np.zeros((len(y), len(directions), 3, 3), complex)
        done = np.zeros(len(y), dtype=bool)
        for s, itf in enumerate(self.model.interfaces):
            mesh = itf.mesh
            tri, bary = mesh.locate(y)
            yy, ny, _ = mesh.map_points(tri, bary)
            on = (np.linalg.norm(yy - y, axis=1) < 1e-8 * max(1.0, np.abs(mesh.nodes).max())) & ~done
            if not np.any(on):
                continue
            a = self.offsets[s]
            tn = sol.t[a:a + mesh.n_nodes]                                 # (n,3,3D)
            tv = np.einsum("pa,pakc->pkc", bary[on], tn[mesh.triangles[tri[on]]])
            sgn = np.sign(np.sum(nu[on] * ny[on], axis=1))
            if np.any(np.abs(np.abs(np.sum(nu[on] * ny[on], axis=1)) - 1) > 1e-6):
                raise ValidationError("traction on an interface requires the interface normal")
            tv = tv * sgn[:, None, None]
            out[on] = tv.reshape(on.sum(), 3, len(directions), 3).transpose(0, 2, 1, 3)
            done |= on
        if np.any(~done):
            idx = np.flatnonzero(~done)
            scale = max(1.0, float(np.abs(self.model.interfaces[0].mesh.nodes).max()))
            hstep = 1e-4 * scale
            grads = np.zeros((len(idx), len(directions), 3, 3, 3), complex)
            for k in range(3):
                e = np.zeros(3)
                e[k] = hstep
                up = self.plane_wave_response(y[idx] + e, directions)
                dn = self.plane_wave_response(y[idx] - e, directions)
                grads[:, :, k] = (up - dn) / (2 * hstep)
            dom = self.model.domain_of(y[idx])
            for j, p in enumerate(idx):
                med = self.model.media[dom[j]]
                out[p] = traction_batch(grads[j], np.broadcast_to(nu[p], (len(directions), 3)),
                                        med.lam, med.mu)
        return out

    def far_field(self, sol: TransmissionSolution, grid_dirs: np.ndarray, bases: np.ndarray) -> np.ndarray:
        """Scattered far field (rows ``3 i + m``: component along ``bases[i][:, m]``)."""
        nc = sol.u.shape[-1]
        out = np.zeros((3 * len(grid_dirs), nc), complex)
        wn0 = self._wn(self.model.exterior)
        for s, itf in enumerate(self.model.interfaces):
            if itf.outside != 0:
                continue
            FV, FD = self._far_mats(s, grid_dirs, bases, wn0)
            u, t = self._domain_traces(sol, s, inside=False, scattered=True)
            out += -(FV @ t.reshape(-1, nc) - FD @ u.reshape(-1, nc))
        return out

    def _far_mats(self, s, grid_dirs, bases, wn0):
        key = ("far", s, grid_dirs.tobytes(), np.ascontiguousarray(bases).tobytes())
        if key not in self._cache:
            self._cache[key] = far_field_matrices(self.model.interfaces[s].mesh, wn0,
                                                  self.model.exterior, grid_dirs, bases,
                                                  self.opts.n_far_field)
        return self._cache[key]

    def far_matrix(self, grid: DirectionGrid) -> np.ndarray:
        """Raw ``3N x 3N`` far-field matrix in the triad basis."""
        B = grid.polarization_basis
        sol = self.solve_plane_waves(grid.directions, B)
        return self.far_field(sol, grid.directions, B)

    def point_source_far_field(self, x0, xihat) -> np.ndarray:
        """``G_b^inf(xihat, x0)`` in Cartesian components: column ``k`` for source ``e_k``."""
        sol = self.solve_point_source(x0)
        xihat = np.atleast_2d(np.asarray(xihat, float))
        eye = np.broadcast_to(np.eye(3), (len(xihat), 3, 3))
        far = self.far_field(sol, xihat, eye).reshape(len(xihat), 3, 3)
        x0 = np.asarray(x0, float)
        if sol.source[1] == 0:
            wn0 = self._wn(self.model.exterior)
            far = far + plane_wave_tensor_batch(x0[None], -xihat, wn0)
        return far


# --------------------------------------------------------------------------
# operations
# --------------------------------------------------------------------------

@dataclass
class BackgroundFarField:
    """Background far-field matrix with its grid and frequency."""

    matrix: FarFieldMatrix
    grid: DirectionGrid
    omega: float


def transmission_solve(model: PenetrableInclusion, wn: WaveNumbers, incidence=None,
                       point_source=None) -> TransmissionSolution:
    """Cauchy data on the interfaces for a plane wave ``(d, q)`` or a point source.

    ``incidence = (d, q)`` gives one column; ``point_source = x0`` gives the
    three columns of the unit point forces at ``x0``.
    """
    solver = model.solver(wn)
    if point_source is not None:
        return solver.solve_point_source(point_source)
    d, q = incidence
    d = np.asarray(d, float)
    sol = solver.solve_plane_waves(d[None])
    q = np.asarray(q, complex)
    return TransmissionSolution(solver, sol.u @ q, sol.t @ q, sol.jump @ q, sol.residual)


def background_response(model, x, d, wn: WaveNumbers) -> np.ndarray:
    """``W_b(x, d)`` as a 3x3 matrix (column ``k``: polarization ``e_k``)."""
    return model.response(np.asarray(x, float)[None], np.asarray(d, float)[None], wn)[0, 0]


def background_traction(model, y, nu, d, wn: WaveNumbers) -> np.ndarray:
    """Traction with normal ``nu`` of the columns of ``W_b(., d)`` at ``y``."""
    return model.traction(np.asarray(y, float)[None], np.asarray(nu, float)[None],
                          np.asarray(d, float)[None], wn)[0, 0]


def background_far_matrix(model, grid: DirectionGrid, wn: WaveNumbers) -> BackgroundFarField:
    """Background far-field matrix ``F_b`` (zero for the homogeneous model)."""
    return BackgroundFarField(model.far_matrix(grid, wn), grid, wn.omega)


def mixed_reciprocity_residual(model, x, xihat, wn: WaveNumbers, transpose: bool = True) -> float:
    """Relative mismatch between ``G_b^inf(xihat, x)`` and ``W_b(x, -xihat)^T``.

    The point-source far field and the plane-wave response are computed by
    independent solves.  For the homogeneous model both sides are analytic.
    """
    x = np.asarray(x, float)
    xihat = np.asarray(xihat, float)
    if getattr(model, "kind", None) == "homogeneous":
        from .wavecore import kupradze_far_field
        G = kupradze_far_field(xihat, x, wn)
        W = plane_wave_tensor_batch(x, -xihat, wn)
    else:
        solver = model.solver(wn)
        G = solver.point_source_far_field(x, xihat[None])[0]
        W = solver.plane_wave_response(x[None], -xihat[None])[0, 0]
    Wc = W.T if transpose else W
    return float(np.linalg.norm(G - Wc) / np.linalg.norm(W))


def far_field_reciprocity(F: np.ndarray, grid: DirectionGrid) -> float:
    """Relative residual of ``W^inf(xi, d) = W^inf(-d, -xi)^T`` for a triad-basis matrix."""
    N = grid.N
    ant = grid.antipode()
    B = F.reshape(N, 3, N, 3).transpose(0, 2, 1, 3)
    Dg = np.diag([-1.0, 1.0, -1.0])
    Bt = np.einsum("ab,jicb,cd->ijad", Dg, B[ant][:, ant], Dg)
    nrm = np.linalg.norm(B)
    return float(np.linalg.norm(B - Bt) / nrm) if nrm > 0 else 0.0

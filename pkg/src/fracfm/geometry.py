"""Direction grids, sampling surfaces, closed boundary meshes and crack meshes."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np
from scipy.spatial import ConvexHull, Delaunay

from .wavecore import ValidationError

__all__ = [
    "DirectionGrid",
    "SamplingSurface",
    "SurfaceMesh",
    "CrackGeometry",
    "direction_grid",
    "parametric_surface",
    "closed_surface_mesh",
    "penny_crack",
    "surface_patch",
    "local_frame",
]


# --------------------------------------------------------------------------
# direction grids
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class DirectionGrid:
    """Uniform theta/phi grid on the unit sphere.

    Directions are ordered theta-major: index ``i = j * N_phi + k``.
    ``triads[i]`` holds the rows ``(d, theta_hat, phi_hat)``.
    """

    N_theta: int
    N_phi: int
    theta: np.ndarray
    phi: np.ndarray
    directions: np.ndarray
    triads: np.ndarray
    weights: np.ndarray

    @property
    def N(self) -> int:
        return self.N_theta * self.N_phi

    @property
    def polarization_basis(self) -> np.ndarray:
        """Per-direction matrices whose columns are ``(-d, -theta_hat, -phi_hat)``."""
        return -np.transpose(self.triads, (0, 2, 1))

    def antipode(self) -> np.ndarray:
        """Index of ``-d`` for every direction (requires even ``N_phi``)."""
        if self.N_phi % 2:
            raise ValidationError("antipodal directions need an even N_phi")
        j, k = np.divmod(np.arange(self.N), self.N_phi)
        return (self.N_theta - 1 - j) * self.N_phi + (k + self.N_phi // 2) % self.N_phi

    def same_as(self, other: "DirectionGrid") -> bool:
        return self.N_theta == other.N_theta and self.N_phi == other.N_phi


def direction_grid(N_theta: int, N_phi: int) -> DirectionGrid:
    """Pole-avoiding grid with ``theta_j = (j + 1/2) pi / N_theta``.

    The weight of a node is the exact area of its latitude-longitude cell,
    ``dphi (cos theta_j^- - cos theta_j^+) = 2 sin(theta_j) sin(dtheta/2) dphi``,
    which is the midpoint weight ``sin(theta) dtheta dphi`` up to a factor
    ``1 + O(dtheta^2)`` and sums to ``4 pi`` exactly.
    """
    if int(N_theta) != N_theta or int(N_phi) != N_phi or N_theta < 2 or N_phi < 2:
        raise ValidationError("N_theta and N_phi must be integers >= 2")
    N_theta, N_phi = int(N_theta), int(N_phi)
    dth = np.pi / N_theta
    dph = 2 * np.pi / N_phi
    th = (np.arange(N_theta) + 0.5) * dth
    ph = np.arange(N_phi) * dph
    TH, PH = np.meshgrid(th, ph, indexing="ij")
    TH, PH = TH.ravel(), PH.ravel()
    st, ct, sp, cp = np.sin(TH), np.cos(TH), np.sin(PH), np.cos(PH)
    d = np.stack([st * cp, st * sp, ct], axis=1)
    e_th = np.stack([ct * cp, ct * sp, -st], axis=1)
    e_ph = np.stack([-sp, cp, np.zeros_like(sp)], axis=1)
    triads = np.stack([d, e_th, e_ph], axis=1)
    w = 2.0 * st * np.sin(dth / 2) * dph
    return DirectionGrid(N_theta, N_phi, th, ph, d, triads, w)


def midpoint_weights(grid: DirectionGrid) -> np.ndarray:
    """Plain midpoint weights ``sin(theta) dtheta dphi`` (for comparison)."""
    dth = np.pi / grid.N_theta
    dph = 2 * np.pi / grid.N_phi
    return np.sin(np.repeat(grid.theta, grid.N_phi)) * dth * dph


def local_frame(normal) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Deterministic orthonormal frame ``(nu, tau1, tau2)`` from a normal.

    Works row-wise on ``(..., 3)`` arrays.
    """
    n = np.asarray(normal, dtype=float)
    nn = np.linalg.norm(n, axis=-1, keepdims=True)
    if np.any(nn < 1e-12):
        raise ValidationError("degenerate normal")
    n = n / nn
    ref = np.where((np.abs(n[..., 0:1]) < 0.9), np.array([1.0, 0, 0]), np.array([0, 1.0, 0]))
    t1 = ref - np.sum(ref * n, axis=-1, keepdims=True) * n
    t1 /= np.linalg.norm(t1, axis=-1, keepdims=True)
    t2 = np.cross(n, t1)
    return n, t1, t2


# --------------------------------------------------------------------------
# sampling surfaces
# --------------------------------------------------------------------------

@dataclass
class SamplingSurface:
    """Sampling points with unit normals on a host surface."""

    kind: str
    params: dict
    points: np.ndarray
    normals: np.ndarray
    truth: Optional[np.ndarray] = None

    @property
    def M(self) -> int:
        return self.points.shape[0]


def _fibonacci_sphere(n: int) -> np.ndarray:
    i = np.arange(n) + 0.5
    z = 1.0 - 2.0 * i / n
    golden = np.pi * (3.0 - np.sqrt(5.0))
    ph = golden * np.arange(n)
    rr = np.sqrt(np.maximum(0.0, 1.0 - z * z))
    return np.stack([rr * np.cos(ph), rr * np.sin(ph), z], axis=1)


def _r2_sequence(n: int) -> np.ndarray:
    g = 1.32471795724474602596
    a = np.array([1.0 / g, 1.0 / g ** 2])
    return (0.5 + np.outer(np.arange(1, n + 1), a)) % 1.0


def parametric_surface(kind: str, params: dict, counts) -> SamplingSurface:
    """Sampling points and exact outward normals on a parametric surface.

    Kinds
    -----
    ``sphere``: ``center``, ``radius``; Fibonacci points.
    ``ellipsoid``: ``center``, ``semi_axes``; Fibonacci points mapped from the
    unit sphere.
    ``cube``: ``center``, ``side``; points on the open faces (R2 sequence with
    a margin), facewise normals.
    ``plane``: ``center``, ``normal``, ``half_width``; a ``counts = (nx, ny)``
    (or square ``counts``) cell-centred grid, normal as given.
    """
    params = dict(params)
    center = np.asarray(params.get("center", (0.0, 0.0, 0.0)), dtype=float)
    if kind == "plane":
        if np.isscalar(counts):
            nx = int(round(np.sqrt(counts)))
            if nx * nx != counts:
                raise ValidationError("plane sampling needs a square count or (nx, ny)")
            ny = nx
        else:
            nx, ny = (int(c) for c in counts)
        if nx * ny < 4:
            raise ValidationError("counts must be >= 4")
        hw = params.get("half_width", 1.0)
        hx, hy = (hw, hw) if np.isscalar(hw) else hw
        if hx <= 0 or hy <= 0:
            raise ValidationError("half_width must be positive")
        n, t1, t2 = local_frame(params.get("normal", (0.0, 0.0, 1.0)))
        u = (np.arange(nx) + 0.5) / nx * 2 * hx - hx
        v = (np.arange(ny) + 0.5) / ny * 2 * hy - hy
        U, V = np.meshgrid(u, v, indexing="ij")
        pts = center + U.ravel()[:, None] * t1 + V.ravel()[:, None] * t2
        nrm = np.broadcast_to(n, pts.shape).copy()
        params.update(center=tuple(center), normal=tuple(n), half_width=(hx, hy), shape=(nx, ny))
        return SamplingSurface(kind, params, pts, nrm)
    count = int(counts)
    if count < 4:
        raise ValidationError("counts must be >= 4")
    if kind == "sphere":
        R = float(params["radius"])
        if R <= 0:
            raise ValidationError("radius must be positive")
        u = _fibonacci_sphere(count)
        return SamplingSurface(kind, params, center + R * u, u.copy())
    if kind == "ellipsoid":
        a = np.asarray(params["semi_axes"], dtype=float)
        if np.any(a <= 0):
            raise ValidationError("semi_axes must be positive")
        u = _fibonacci_sphere(count)
        pts = center + u * a
        nrm = u / a
        nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
        return SamplingSurface(kind, params, pts, nrm)
    if kind == "cube":
        s = float(params["side"])
        if s <= 0:
            raise ValidationError("side must be positive")
        per = [count // 6 + (1 if f < count % 6 else 0) for f in range(6)]
        pts, nrm = [], []
        margin = 0.02 * s
        for f in range(6):
            ax, sg = divmod(f, 2)
            sign = 1.0 if sg == 0 else -1.0
            uv = _r2_sequence(per[f]) * (s - 2 * margin) - (s / 2 - margin)
            others = [i for i in range(3) if i != ax]
            p = np.zeros((per[f], 3))
            p[:, ax] = sign * s / 2
            p[:, others[0]] = uv[:, 0]
            p[:, others[1]] = uv[:, 1]
            nv = np.zeros(3)
            nv[ax] = sign
            pts.append(center + p)
            nrm.append(np.tile(nv, (per[f], 1)))
        return SamplingSurface(kind, params, np.concatenate(pts), np.concatenate(nrm))
    raise ValidationError(f"unknown surface kind {kind!r}")


# --------------------------------------------------------------------------
# closed surface meshes (boundary element meshes)
# --------------------------------------------------------------------------

@dataclass
class SurfaceMesh:
    """Triangulated closed surface with exact-geometry quadrature mapping.

    Nodes lie exactly on the analytic surface.  For ``sphere``/``ellipsoid``
    the flat triangles are used as parameter domains and quadrature points
    are projected onto the true surface (with the exact area Jacobian and
    normal); ``cube`` faces are flat.
    """

    kind: str
    params: dict
    nodes: np.ndarray
    triangles: np.ndarray
    node_normals: np.ndarray

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def center(self) -> np.ndarray:
        return np.asarray(self.params.get("center", (0, 0, 0)), dtype=float)

    def element_size(self) -> np.ndarray:
        v = self.nodes[self.triangles]
        e = np.linalg.norm(v - np.roll(v, 1, axis=1), axis=2)
        return e.max(axis=1)

    def map_points(self, tri_idx: np.ndarray, bary: np.ndarray):
        """Surface points, unit normals and area Jacobians.

        ``tri_idx`` has shape ``(...)`` and ``bary`` shape ``(..., 3)``; the
        Jacobian converts flat-triangle area (the triangle's own area) into
        surface area, so an integral is ``sum(w * area_flat * jac * f)``.
        """
        v = self.nodes[self.triangles[tri_idx]]              # (...,3,3)
        p = np.einsum("...a,...ai->...i", bary, v)
        e1 = v[..., 1, :] - v[..., 0, :]
        e2 = v[..., 2, :] - v[..., 0, :]
        nf = np.cross(e1, e2)
        nf = nf / np.linalg.norm(nf, axis=-1, keepdims=True)
        if self.kind in ("sphere", "ellipsoid"):
            c = self.center
            a = self._axes()
            q = (p - c) / a
            nq = nf * a            # normal transforms with A^T = A (diagonal), then normalize
            jac1 = np.linalg.norm(nq, axis=-1) / np.prod(a)
            nq = nq / np.linalg.norm(nq, axis=-1, keepdims=True)
            qn = np.linalg.norm(q, axis=-1)
            u = q / qn[..., None]
            jac2 = np.abs(np.sum(q * nq, axis=-1)) / qn ** 3
            y = c + a * u
            ny = u / a
            nyn = np.linalg.norm(ny, axis=-1)
            jac3 = np.prod(a) * nyn
            ny = ny / nyn[..., None]
            return y, ny, jac1 * jac2 * jac3
        return p, np.broadcast_to(nf, p.shape).copy(), np.ones(p.shape[:-1])

    def _axes(self) -> np.ndarray:
        if self.kind == "sphere":
            return np.full(3, float(self.params["radius"]))
        return np.asarray(self.params["semi_axes"], dtype=float)

    def flat_areas(self) -> np.ndarray:
        v = self.nodes[self.triangles]
        return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)

    def locate(self, points: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Triangle index and barycentric coordinates of surface points.

        For curved kinds the point is pulled back along the projection ray
        onto the flat triangle; for the cube the closest face triangle is used.
        """
        points = np.atleast_2d(points)
        v = self.nodes[self.triangles]
        if self.kind in ("sphere", "ellipsoid"):
            c, a = self.center, self._axes()
            q = (points - c) / a
            vq = (v - c) / a
        else:
            c = self.center
            q = points - c
            vq = v - c
        best_t = np.zeros(len(points), dtype=int)
        best_b = np.zeros((len(points), 3))
        for i, x in enumerate(q):
            e1 = vq[:, 1] - vq[:, 0]
            e2 = vq[:, 2] - vq[:, 0]
            if self.kind in ("sphere", "ellipsoid"):
                # ray s*x hits plane of triangle; solve [e1 e2 -x] [b1 b2 s] = -v0
                M = np.stack([e1, e2, -np.broadcast_to(x, e1.shape)], axis=2)
                rhs = -vq[:, 0]
                with np.errstate(all="ignore"):
                    sol = np.linalg.solve(M, rhs[..., None])[..., 0]
                b = np.stack([1 - sol[:, 0] - sol[:, 1], sol[:, 0], sol[:, 1]], axis=1)
                ok = sol[:, 2] > 0
                score = np.where(ok, b.min(axis=1), -np.inf)
            else:
                nrm = np.cross(e1, e2)
                nrm /= np.linalg.norm(nrm, axis=1, keepdims=True)
                dist = np.sum((x - vq[:, 0]) * nrm, axis=1)
                proj = x - dist[:, None] * nrm
                M = np.stack([e1, e2], axis=2)
                G = np.einsum("tia,tib->tab", M, M)
                rhs = np.einsum("tia,ti->ta", M, proj - vq[:, 0])
                s2 = np.linalg.solve(G, rhs[..., None])[..., 0]
                b = np.stack([1 - s2[:, 0] - s2[:, 1], s2[:, 0], s2[:, 1]], axis=1)
                score = b.min(axis=1) - 1e3 * np.abs(dist)
            t = int(np.argmax(score))
            best_t[i] = t
            best_b[i] = np.clip(b[t], 0.0, 1.0) / np.clip(b[t], 0.0, 1.0).sum()
        return best_t, best_b


def _sphere_mesh(n_nodes: int) -> tuple[np.ndarray, np.ndarray]:
    u = _fibonacci_sphere(n_nodes)
    hull = ConvexHull(u)
    tris = hull.simplices.copy()
    v = u[tris]
    nrm = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
    flip = np.sum(nrm * v.mean(axis=1), axis=1) < 0
    tris[flip] = tris[flip][:, ::-1]
    return u, tris


def closed_surface_mesh(kind: str, params: dict, n_nodes: int) -> SurfaceMesh:
    """Boundary mesh of a sphere, ellipsoid or cube with about ``n_nodes`` nodes."""
    params = dict(params)
    c = np.asarray(params.get("center", (0.0, 0.0, 0.0)), dtype=float)
    if kind in ("sphere", "ellipsoid"):
        a = np.full(3, float(params["radius"])) if kind == "sphere" else np.asarray(params["semi_axes"], float)
        if np.any(a <= 0):
            raise ValidationError("surface dimensions must be positive")
        u, tris = _sphere_mesh(int(n_nodes))
        nodes = c + u * a
        nn = u / a
        nn /= np.linalg.norm(nn, axis=1, keepdims=True)
        return SurfaceMesh(kind, params, nodes, tris, nn)
    if kind == "cube":
        s = float(params["side"])
        m = max(2, int(round(np.sqrt(max(n_nodes - 2, 6) / 6.0))) + 1)
        g = np.linspace(-s / 2, s / 2, m)
        nodes, index, tris = [], {}, []

        def node_id(p):
            key = tuple(np.round(p / s * 1e9).astype(np.int64))
            if key not in index:
                index[key] = len(nodes)
                nodes.append(p)
            return index[key]

        for ax in range(3):
            for sign in (1.0, -1.0):
                o = [i for i in range(3) if i != ax]
                ids = np.zeros((m, m), dtype=int)
                for i in range(m):
                    for j in range(m):
                        p = np.zeros(3)
                        p[ax] = sign * s / 2
                        p[o[0]] = g[i]
                        p[o[1]] = g[j]
                        ids[i, j] = node_id(p)
                for i in range(m - 1):
                    for j in range(m - 1):
                        a_, b_, c_, d_ = ids[i, j], ids[i + 1, j], ids[i + 1, j + 1], ids[i, j + 1]
                        tris += [[a_, b_, c_], [a_, c_, d_]]
        nodes = np.array(nodes) + c
        tris = np.array(tris)
        v = nodes[tris]
        nrm = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
        flip = np.sum(nrm * (v.mean(axis=1) - c), axis=1) < 0
        tris[flip] = tris[flip][:, ::-1]
        # node normals: average of adjacent face normals (undefined on edges)
        nn = np.zeros_like(nodes)
        v = nodes[tris]
        fn = np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0])
        fn /= np.linalg.norm(fn, axis=1, keepdims=True)
        np.add.at(nn, tris.ravel(), np.repeat(fn, 3, axis=0))
        nn /= np.linalg.norm(nn, axis=1, keepdims=True)
        return SurfaceMesh(kind, params, nodes, tris, nn)
    raise ValidationError(f"unknown surface kind {kind!r}")


# --------------------------------------------------------------------------
# cracks
# --------------------------------------------------------------------------

@dataclass
class CrackGeometry:
    """Open triangulated crack surface with local frames and stiffness.

    Attributes
    ----------
    nodes, triangles : arrays
        Mesh; triangles are oriented so that their right-hand normal equals
        the node normal ``nu``.
    normals, tau1, tau2 : (n, 3) arrays
        Orthonormal local frames ``(tau1, tau2, nu)``.
    edge : (n,) bool
        Nodes on the relative boundary (opening forced to zero there).
    sqrt_edge : (m,) bool
        Elements touching the boundary (sqrt-type opening behaviour).
    stiffness : (n, 3, 3) array
        ``K`` in the local ``(nu, tau1, tau2)`` basis.
    plane : dict or None
        For flat cracks: ``center``, ``normal``, ``tau1``, ``tau2`` and the
        2-D coordinates ``uv`` of the nodes.
    host : dict or None
        For interface cracks: host surface kind/params and the host node ids.
    """

    nodes: np.ndarray
    triangles: np.ndarray
    normals: np.ndarray
    tau1: np.ndarray
    tau2: np.ndarray
    edge: np.ndarray
    sqrt_edge: np.ndarray
    stiffness: np.ndarray
    plane: Optional[dict] = None
    host: Optional[dict] = None
    quadrature_order: int = 4

    def __post_init__(self):
        F = np.stack([self.tau1, self.tau2, self.normals], axis=1)
        err = np.abs(np.einsum("nij,nkj->nik", F, F) - np.eye(3)).max() if len(F) else 0.0
        if err > 1e-10:
            raise ValidationError("local frames are not orthonormal")
        K = np.asarray(self.stiffness)
        if np.abs(K - np.swapaxes(K, 1, 2)).max() > 1e-12 * max(1.0, np.abs(K).max()):
            raise ValidationError("stiffness must be symmetric")
        rng = np.random.default_rng(12345)
        eta = rng.normal(size=(8, 3)) + 1j * rng.normal(size=(8, 3))
        q = np.einsum("ai,nij,aj->na", eta.conj(), K, eta)
        if np.any(q.imag > 1e-12 * max(1.0, np.abs(K).max())):
            raise ValidationError("stiffness violates Im<K eta, eta> <= 0")

    @property
    def n_nodes(self) -> int:
        return self.nodes.shape[0]

    @property
    def interior(self) -> np.ndarray:
        return np.flatnonzero(~self.edge)

    def frames(self) -> np.ndarray:
        """``(n, 3, 3)`` rows ``(nu, tau1, tau2)`` (local-to-global transpose)."""
        return np.stack([self.normals, self.tau1, self.tau2], axis=1)

    def stiffness_global(self) -> np.ndarray:
        R = self.frames()
        return np.einsum("nai,nab,nbj->nij", R, self.stiffness, R)

    def areas(self) -> np.ndarray:
        v = self.nodes[self.triangles]
        return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)

    @property
    def area(self) -> float:
        return float(self.areas().sum())

    def with_stiffness(self, K) -> "CrackGeometry":
        K = np.asarray(K, dtype=complex if np.iscomplexobj(K) else float)
        if K.shape == (3, 3):
            K = np.broadcast_to(K, (self.n_nodes, 3, 3)).copy()
        return CrackGeometry(self.nodes, self.triangles, self.normals, self.tau1, self.tau2,
                             self.edge, self.sqrt_edge, K, self.plane, self.host,
                             self.quadrature_order)


def _boundary_nodes(tris: np.ndarray, n: int) -> np.ndarray:
    edges = np.sort(np.concatenate([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1)
    uniq, cnt = np.unique(edges, axis=0, return_counts=True)
    mask = np.zeros(n, dtype=bool)
    mask[uniq[cnt == 1].ravel()] = True
    return mask


def penny_radii(refinement: int) -> np.ndarray:
    """Graded ring radii (unit disc) for a refinement level."""
    n = 3 + 2 * int(refinement)
    s = np.arange(n + 1) / n
    return 1.0 - (1.0 - s) ** 1.6


def penny_crack(center=(0.0, 0.0, 0.0), radius: float = 1.0, normal=(0.0, 0.0, 1.0),
                refinement: int = 3, stiffness=None) -> CrackGeometry:
    """Flat disc crack meshed on concentric rings graded toward the edge.

    Ring ``j`` carries about ``2 pi r_j / h`` nodes so that elements are
    near-isotropic in the interior and elongated along the front near the
    edge.  The default stiffness is the identity in the local frame.
    """
    if radius <= 0:
        raise ValidationError("radius must be positive")
    n, t1, t2 = local_frame(normal)
    c = np.asarray(center, dtype=float)
    rr = penny_radii(refinement)
    nr = len(rr) - 1
    h_az = 2 * np.pi / (6 * nr) * 1.6
    uv = [np.zeros((1, 2))]
    for j in range(1, nr + 1):
        m = max(6, int(np.ceil(2 * np.pi * rr[j] / h_az)))
        off = 0.5 * (j % 2) * 2 * np.pi / m
        ang = off + 2 * np.pi * np.arange(m) / m
        uv.append(rr[j] * np.stack([np.cos(ang), np.sin(ang)], axis=1))
    uv = np.concatenate(uv) * radius
    tris = Delaunay(uv).simplices.copy()
    a = uv[tris]
    cr = (a[:, 1, 0] - a[:, 0, 0]) * (a[:, 2, 1] - a[:, 0, 1]) - (a[:, 1, 1] - a[:, 0, 1]) * (a[:, 2, 0] - a[:, 0, 0])
    tris[cr < 0] = tris[cr < 0][:, ::-1]
    keep = np.abs(cr) > 1e-14 * radius ** 2
    tris = tris[keep]
    nodes = c + uv[:, :1] * t1 + uv[:, 1:] * t2
    N = len(nodes)
    edge = np.zeros(N, dtype=bool)
    edge[np.abs(np.linalg.norm(uv, axis=1) - radius) < 1e-12 * radius] = True
    sqrt_edge = edge[tris].any(axis=1)
    K = np.broadcast_to(np.eye(3), (N, 3, 3)).copy() if stiffness is None else np.broadcast_to(
        np.asarray(stiffness), (N, 3, 3)).copy()
    plane = dict(center=c, normal=n, tau1=t1, tau2=t2, uv=uv, radius=float(radius))
    return CrackGeometry(nodes, tris, np.tile(n, (N, 1)), np.tile(t1, (N, 1)), np.tile(t2, (N, 1)),
                         edge, sqrt_edge, K, plane=plane)


def surface_patch(host: SurfaceMesh, predicate: Callable[[np.ndarray], np.ndarray],
                  stiffness=None) -> CrackGeometry:
    """Crack made of the host triangles whose centroids satisfy ``predicate``.

    The crack inherits the host nodes and exact host normals.  Selecting the
    whole closed surface is rejected since a crack must have a boundary.
    """
    cen = host.nodes[host.triangles].mean(axis=1)
    sel = np.asarray(predicate(cen), dtype=bool)
    if not sel.any():
        raise ValidationError("surface_patch: predicate selects no element")
    if sel.all():
        raise ValidationError("surface_patch: a crack must be an open surface (whole surface selected)")
    tris_h = host.triangles[sel]
    used = np.unique(tris_h)
    remap = -np.ones(host.n_nodes, dtype=int)
    remap[used] = np.arange(len(used))
    tris = remap[tris_h]
    nodes = host.nodes[used]
    nrm = host.node_normals[used]
    n, t1, t2 = local_frame(nrm)
    edge = _boundary_nodes(tris, len(used))
    sqrt_edge = edge[tris].any(axis=1)
    N = len(used)
    K = np.broadcast_to(np.eye(3), (N, 3, 3)).copy() if stiffness is None else np.broadcast_to(
        np.asarray(stiffness), (N, 3, 3)).copy()
    return CrackGeometry(nodes, tris, n, t1, t2, edge, sqrt_edge, K,
                         host=dict(kind=host.kind, params=host.params, node_ids=used, element_mask=sel))

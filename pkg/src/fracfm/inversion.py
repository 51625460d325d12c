"""F#-factorization inversion.

All operators act on ``3N``-vectors in the triad basis of a
:class:`~fracfm.geometry.DirectionGrid` (block ``i`` holds the components
along ``-d_i, -theta_i, -phi_i``).  The raw far-field matrices are stored as
sampled kernels.  The inversion works in the *weighted* representation

    F_w = C F C,    C = diag(sqrt(w_i) sqrt(pi_m)),

with ``w_i`` the grid quadrature weights and ``pi = (k_p alpha_p, k_s alpha_s,
k_s alpha_s)`` the energy-flux weights of the compressional and the two shear
components.  In this representation the discrete scattering matrix

    S_b = I + (i / 2 pi) C F_b C

is unitary for lossless backgrounds with the plain Euclidean adjoint, and
``S_b* F_D`` inherits the structure required by the factorization method.
The sign and the ``1 / 2 pi`` follow from the normalization of the far field
used here (no ``alpha`` factors in the pattern).
"""
from __future__ import annotations

import hashlib
import warnings
from dataclasses import dataclass, replace
from typing import Optional

import numpy as np
import scipy.linalg as sla
from scipy.optimize import brentq

from .geometry import DirectionGrid, SamplingSurface
from .wavecore import ValidationError, WaveNumbers

__all__ = [
    "FarFieldMatrix",
    "EigenSystem",
    "TrialFracture",
    "IndicatorMap",
    "RegularizationResult",
    "far_field_weights",
    "differential_matrix",
    "scattering_matrix",
    "unitarity_defect",
    "scattering_identity_residual",
    "apply_noise",
    "noise_for_target",
    "calibrate_noise",
    "f_sharp",
    "sqrt_psd",
    "eigensystem",
    "trial_far_fields",
    "trial_rhs",
    "tikhonov_morozov",
    "morozov_batch",
    "picard_norm",
    "picard_default",
    "indicator_map",
    "threshold",
]

ROLES = ("F", "F_b", "F_D", "S_b", "F_tilde", "F_sharp")
CLIP_TOL = 1e-10
WARN_TOL = 1e-8


# --------------------------------------------------------------------------
# types
# --------------------------------------------------------------------------

@dataclass
class FarFieldMatrix:
    """``3N x 3N`` block matrix on a direction grid.

    Block ``(i, j)`` is the response at observation ``xi_i`` to incidence
    ``d_j``.  ``weights`` is ``None`` for raw kernels (``F``, ``F_b``,
    ``F_D``) and holds the diagonal of ``C`` for matrices in the weighted
    representation (``S_b``, ``F_tilde``, ``F_sharp``).
    """

    grid: DirectionGrid
    omega: float
    data: np.ndarray
    role: str = "F"
    weights: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.role not in ROLES:
            raise ValidationError(f"unknown role {self.role!r}; expected one of {ROLES}")
        n = 3 * self.grid.N
        self.data = np.asarray(self.data, dtype=complex)
        if self.data.shape != (n, n):
            raise ValidationError(f"{self.role} must have shape ({n}, {n}), got {self.data.shape}")

    @property
    def shape(self):
        return self.data.shape

    def blocks(self) -> np.ndarray:
        """View with shape ``(N, N, 3, 3)``: ``[i, j]`` is block ``(i, j)``."""
        N = self.grid.N
        return self.data.reshape(N, 3, N, 3).transpose(0, 2, 1, 3)

    def weighted(self, weights: np.ndarray) -> np.ndarray:
        """``C F C`` for a raw matrix (returns the data if already weighted)."""
        if self.weights is not None:
            return self.data
        c = np.asarray(weights)
        return c[:, None] * self.data * c[None, :]

    def norm(self) -> float:
        return float(np.linalg.norm(self.data))

    def _check_compatible(self, other: "FarFieldMatrix"):
        if not self.grid.same_as(other.grid):
            raise ValidationError("far-field matrices live on different grids")
        if not np.isclose(self.omega, other.omega, rtol=1e-12, atol=0.0):
            raise ValidationError("far-field matrices have different frequencies")


@dataclass
class EigenSystem:
    """Eigenpairs of a Hermitian PSD matrix, eigenvalues descending."""

    values: np.ndarray
    vectors: np.ndarray
    fingerprint: str
    clipped: float = 0.0

    def reconstruct(self) -> np.ndarray:
        V = self.vectors
        return (V * self.values) @ V.conj().T


@dataclass
class TrialFracture:
    """Vanishing penny-shaped trial crack at ``x0`` with unit normal ``nu``."""

    x0: np.ndarray
    nu: np.ndarray
    far_field: Optional[np.ndarray] = None

    def __post_init__(self):
        self.x0 = np.asarray(self.x0, float)
        nu = np.asarray(self.nu, float)
        if abs(np.linalg.norm(nu) - 1) > 1e-10:
            raise ValidationError("trial normal must be a unit vector")
        self.nu = nu


@dataclass
class IndicatorMap:
    """Indicator ``I^F = 1 / ||g||`` on a sampling surface."""

    surface: SamplingSurface
    values: np.ndarray
    method: str
    params: np.ndarray
    tau: Optional[float] = None
    mask: Optional[np.ndarray] = None
    truncated: Optional[np.ndarray] = None
    flags: Optional[np.ndarray] = None


@dataclass
class RegularizationResult:
    g: np.ndarray
    alpha: float
    residual: float
    range_deficient: bool = False


# --------------------------------------------------------------------------
# weighting and elementary operators
# --------------------------------------------------------------------------

def far_field_weights(grid: DirectionGrid, wn: WaveNumbers) -> np.ndarray:
    """Diagonal of ``C``: ``sqrt(w_i pi_m)`` for entry ``3 i + m``."""
    pi = np.array([wn.k_p * wn.alpha_p, wn.k_s * wn.alpha_s, wn.k_s * wn.alpha_s])
    return np.sqrt(np.repeat(grid.weights, 3) * np.tile(pi, grid.N))


def differential_matrix(F: FarFieldMatrix, F_b: FarFieldMatrix) -> FarFieldMatrix:
    """Far-field signature of the damage, ``F_D = F - F_b``."""
    F._check_compatible(F_b)
    if F.weights is not None or F_b.weights is not None:
        raise ValidationError("differential_matrix expects raw far-field matrices")
    return FarFieldMatrix(F.grid, F.omega, F.data - F_b.data, "F_D")


def scattering_matrix(F_b: FarFieldMatrix, wn: WaveNumbers) -> FarFieldMatrix:
    """Discrete scattering operator ``S_b = I + (i / 2 pi) C F_b C`` (weighted)."""
    if not np.isclose(F_b.omega, wn.omega, rtol=1e-12, atol=0.0):
        raise ValidationError("F_b frequency does not match the wave numbers")
    c = far_field_weights(F_b.grid, wn)
    S = np.eye(3 * F_b.grid.N, dtype=complex) + (0.5j / np.pi) * F_b.weighted(c)
    return FarFieldMatrix(F_b.grid, F_b.omega, S, "S_b", c)


def unitarity_defect(S_b: FarFieldMatrix) -> float:
    """``||S S* - I||_F / ||I||_F``."""
    S = S_b.data
    n = S.shape[0]
    return float(np.linalg.norm(S @ S.conj().T - np.eye(n)) / np.sqrt(n))


def scattering_identity_residual(S_b: FarFieldMatrix, background, x, wn: WaveNumbers) -> np.ndarray:
    """Residual of ``C W_b(x, -xi) = S_b C conj(W_b(x, xi))`` at interior points.

    Both sides are taken row-wise (one row per Cartesian component of the
    response) in the triad basis of the grid.  Returns one relative Frobenius
    residual per point ``x``.
    """
    if S_b.weights is None:
        raise ValidationError("S_b must carry its weighting")
    x = np.atleast_2d(np.asarray(x, float))
    g = S_b.grid
    B = g.polarization_basis
    W = background.response(x, g.directions, wn)                 # (P, N, 3, 3)
    Wm = W[:, g.antipode()]
    c = np.einsum("nkm,pnjk->pjnm", B, Wm).reshape(len(x), 3, -1)
    q = np.einsum("nkm,pnjk->pjnm", B, W).reshape(len(x), 3, -1)
    C = S_b.weights
    lhs = C * c
    rhs = np.einsum("ab,pjb->pja", S_b.data, C * q.conj())
    return np.linalg.norm(lhs - rhs, axis=(1, 2)) / np.linalg.norm(lhs, axis=(1, 2))


def _noise_matrix(n: int, seed) -> np.ndarray:
    """Unit-amplitude noise: real and imaginary parts uniform on ``[-1, 1]``."""
    rng = np.random.Generator(np.random.PCG64(seed))
    re = rng.random((n, n))
    im = rng.random((n, n))
    return (2.0 * re - 1.0) + 1j * (2.0 * im - 1.0)


def apply_noise(F: FarFieldMatrix, epsilon: float, seed) -> tuple[FarFieldMatrix, float]:
    """Multiplicative noise ``F^delta = (I + N_eps) F``.

    ``N_eps = eps N_1`` with ``N_1`` drawn from PCG64 seeded by ``seed``, so
    the realized level ``delta = ||N_eps F|| / ||F||`` is exactly linear in
    ``eps`` for a fixed seed.
    """
    if epsilon < 0 or not np.isfinite(epsilon):
        raise ValidationError("epsilon must be a finite non-negative number")
    if epsilon == 0:
        return replace(F, data=F.data.copy()), 0.0
    NF = epsilon * (_noise_matrix(F.shape[0], seed) @ F.data)
    nrm = np.linalg.norm(F.data)
    delta = float(np.linalg.norm(NF) / nrm) if nrm > 0 else 0.0
    return replace(F, data=F.data + NF), delta


def noise_for_target(F: FarFieldMatrix, target: float, seed) -> tuple[FarFieldMatrix, float, float]:
    """Noisy matrix whose realized level equals ``target`` for this seed.

    Returns ``(F_delta, delta, epsilon)``.  A zero matrix stays noiseless
    (``epsilon = 0``).
    """
    if target < 0:
        raise ValidationError("target noise level must be non-negative")
    if target == 0 or np.linalg.norm(F.data) == 0:
        return replace(F, data=F.data.copy()), 0.0, 0.0
    _, d1 = apply_noise(F, 1.0, seed)
    eps = target / d1
    Fd, delta = apply_noise(F, eps, seed)
    return Fd, delta, eps


def calibrate_noise(F: FarFieldMatrix, epsilons, n_seeds: int = 100, seed0: int = 0) -> np.ndarray:
    """Mean realized ``delta`` over ``n_seeds`` seeds for each ``epsilon``."""
    d1 = np.array([apply_noise(F, 1.0, seed0 + s)[1] for s in range(n_seeds)])
    return np.asarray(epsilons, float) * d1.mean()


# --------------------------------------------------------------------------
# F# and its square root
# --------------------------------------------------------------------------

def _fingerprint(A: np.ndarray) -> str:
    return hashlib.blake2b(np.ascontiguousarray(A).tobytes(), digest_size=16).hexdigest()


def eigensystem(A: np.ndarray) -> EigenSystem:
    """Descending eigensystem of a Hermitian matrix (clipped at zero)."""
    A = np.asarray(A, complex)
    H = 0.5 * (A + A.conj().T)
    try:
        mu, V = sla.eigh(H)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise ValidationError(f"eigensolver failed: {exc}") from exc
    mu, V = mu[::-1].copy(), V[:, ::-1].copy()
    nrm = np.linalg.norm(H)
    neg = float(-mu.min()) if mu.size and mu.min() < 0 else 0.0
    if neg > WARN_TOL * nrm:
        warnings.warn(f"F_sharp has a negative eigenvalue {-neg:.3e} (relative {neg / nrm:.2e}); "
                      "data are noise dominated", RuntimeWarning, stacklevel=2)
    mu = np.maximum(mu, 0.0)
    return EigenSystem(mu, V, _fingerprint(A), neg)


def f_sharp(F_D: FarFieldMatrix, S_b: FarFieldMatrix) -> tuple[FarFieldMatrix, EigenSystem]:
    """``F_sharp = |Re F~| + Im F~`` with ``F~ = S_b* C F_D C``.

    ``Re A = (A + A*) / 2`` and ``Im A = (A - A*) / 2i``.  Negative
    eigenvalues of the result are clipped at zero; the returned matrix is the
    clipped eigen-reconstruction, which is Hermitian PSD.
    """
    F_D._check_compatible(S_b)
    if S_b.role != "S_b" or S_b.weights is None:
        raise ValidationError("f_sharp needs a scattering matrix from scattering_matrix()")
    Ft = S_b.data.conj().T @ F_D.weighted(S_b.weights)
    re = 0.5 * (Ft + Ft.conj().T)
    im = -0.5j * (Ft - Ft.conj().T)
    lam, U = sla.eigh(re)
    abs_re = (U * np.abs(lam)) @ U.conj().T
    Fs = abs_re + im
    Fs = 0.5 * (Fs + Fs.conj().T)
    eig = eigensystem(Fs)
    data = eig.reconstruct()
    data = 0.5 * (data + data.conj().T)
    eig.fingerprint = _fingerprint(data)
    return FarFieldMatrix(F_D.grid, F_D.omega, data, "F_sharp", S_b.weights), eig


def sqrt_psd(A) -> np.ndarray:
    """``V diag(sqrt(max(mu, 0))) V*`` for a Hermitian matrix or an :class:`EigenSystem`."""
    eig = A if isinstance(A, EigenSystem) else eigensystem(
        A.data if isinstance(A, FarFieldMatrix) else A)
    s = np.sqrt(np.maximum(eig.values, 0.0))
    return (eig.vectors * s) @ eig.vectors.conj().T


# --------------------------------------------------------------------------
# trial right-hand sides
# --------------------------------------------------------------------------

def trial_far_fields(points, normals, background, grid: DirectionGrid, wn: WaveNumbers) -> np.ndarray:
    """Far fields of vanishing trial cracks, shape ``(3N, M)`` in the triad basis.

    Component ``k`` (Cartesian) of the pattern at ``xi_i`` is
    ``nu . sigma[W_b(., -xi_i) e_k](x0) nu``, i.e. the normal component of the
    traction of the ``k``-th background plane wave on the trial plane.
    """
    points = np.atleast_2d(np.asarray(points, float))
    normals = np.atleast_2d(np.asarray(normals, float))
    if points.shape != normals.shape:
        raise ValidationError("points and normals must have the same shape")
    nn = np.linalg.norm(normals, axis=1)
    if np.any(np.abs(nn - 1) > 1e-10):
        raise ValidationError("trial normals must be unit vectors")
    T = background.traction(points, normals, -grid.directions, wn)       # (M, N, 3, 3) [i, k]
    phi = np.einsum("pi,pnik->pnk", normals, T)                           # (M, N, 3) Cartesian
    B = grid.polarization_basis                                           # (N, 3, 3) columns
    tri = np.einsum("nkm,pnk->pnm", B, phi)
    return tri.reshape(len(points), -1).T


def trial_rhs(x0, nu, background, grid: DirectionGrid, S_b: FarFieldMatrix, wn: WaveNumbers) -> np.ndarray:
    """Right-hand side ``b = S_b* C Phi`` for one or several trial cracks.

    ``x0`` and ``nu`` may be single points (returns ``(3N,)``) or arrays of
    shape ``(M, 3)`` (returns ``(3N, M)``).
    """
    single = np.ndim(x0) == 1
    phi = trial_far_fields(x0, nu, background, grid, wn)
    if S_b.weights is None:
        raise ValidationError("S_b must carry its weighting")
    b = S_b.data.conj().T @ (S_b.weights[:, None] * phi)
    return b[:, 0] if single else b


# --------------------------------------------------------------------------
# regularized solutions
# --------------------------------------------------------------------------

def _as_eig(A) -> EigenSystem:
    if isinstance(A, EigenSystem):
        return A
    return eigensystem(A.data if isinstance(A, FarFieldMatrix) else A)


def _perp2(nb2, in2, n):
    """Squared norm of the part of ``b`` outside the eigenvector span.

    The difference ``||b||^2 - sum |beta|^2`` is pure round-off for a complete
    eigenbasis; values below ``n eps ||b||^2`` are set to zero.
    """
    p = np.asarray(nb2 - in2, float)
    p = np.where(p > 4 * n * np.finfo(float).eps * np.asarray(nb2), p, 0.0)
    return float(p) if p.ndim == 0 else p


def _morozov_alpha(s2: np.ndarray, beta2: np.ndarray, perp2: float, target: float):
    """Root of ``sum (alpha / (s2 + alpha))^2 beta2 + perp2 = target^2`` in ``log alpha``."""
    nb2 = beta2.sum() + perp2

    def f(la):
        a = np.exp(la)
        return np.sqrt(np.sum((a / (s2 + a)) ** 2 * beta2) + perp2) - target

    smax = s2.max() if s2.size else 1.0
    pos = s2[s2 > 0]
    smin = pos.min() if pos.size else smax
    lo = np.log(smin * 1e-16 + 1e-300)
    hi = np.log(smax * 1e16 + 1e-300)
    flo = f(lo)
    if flo >= 0:
        return 0.0, True
    fhi = f(hi)
    while fhi <= 0 and target < np.sqrt(nb2):
        hi += 20.0
        fhi = f(hi)
    la = brentq(f, lo, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps, maxiter=500)
    return float(np.exp(la)), False


def tikhonov_morozov(sqrtF, b: np.ndarray, delta: float) -> RegularizationResult:
    """Tikhonov solution of ``A g = b`` with ``alpha`` from the discrepancy principle.

    ``A`` is Hermitian PSD (a matrix or an :class:`EigenSystem` of ``A``).
    ``alpha`` solves ``||A g_alpha - b|| = delta ||b||``.  If even ``alpha -> 0``
    leaves a larger residual the minimum-norm least-squares solution is
    returned with ``range_deficient = True``.
    """
    if not (0 <= delta < 1):
        raise ValidationError("delta must lie in [0, 1)")
    eig = _as_eig(sqrtF)
    b = np.asarray(b, complex)
    s = eig.values
    beta = eig.vectors.conj().T @ b
    nb = float(np.linalg.norm(b))
    perp2 = _perp2(nb ** 2, np.sum(np.abs(beta) ** 2), b.size)
    keep = s > 1e-14 * (s.max() if s.size else 1.0)
    s2 = np.where(keep, s ** 2, 0.0)
    beta2 = np.abs(beta) ** 2
    if delta == 0 or nb == 0:
        alpha, flag = 0.0, False
    else:
        alpha, flag = _morozov_alpha(s2, beta2, perp2, delta * nb)
    with np.errstate(divide="ignore", invalid="ignore"):
        filt = np.where(keep, s / (s2 + alpha), 0.0)
    g = eig.vectors @ (filt * beta)
    res = float(np.linalg.norm(eig.vectors @ (s * (eig.vectors.conj().T @ g)) - b))
    return RegularizationResult(g, alpha, res, flag)


def morozov_batch(eig: EigenSystem, B: np.ndarray, delta: float):
    """Column-wise :func:`tikhonov_morozov` sharing one eigensystem.

    ``eig`` is the eigensystem of ``A`` (the square root of F_sharp).
    Returns ``(gnorm, alpha, flags)``.
    """
    s = eig.values
    keep = s > 1e-14 * (s.max() if s.size else 1.0)
    s2 = np.where(keep, s ** 2, 0.0)
    beta = eig.vectors.conj().T @ B
    beta2 = np.abs(beta) ** 2
    nb = np.linalg.norm(B, axis=0)
    perp2 = _perp2(nb ** 2, beta2.sum(axis=0), B.shape[0])
    M = B.shape[1]
    alpha = np.zeros(M)
    flags = np.zeros(M, dtype=bool)
    gnorm = np.zeros(M)
    for m in range(M):
        if delta > 0 and nb[m] > 0:
            alpha[m], flags[m] = _morozov_alpha(s2, beta2[:, m], perp2[m], delta * nb[m])
        with np.errstate(divide="ignore", invalid="ignore"):
            filt = np.where(keep, s / (s2 + alpha[m]), 0.0)
        gnorm[m] = np.sqrt(np.sum(filt ** 2 * beta2[:, m]))
    return gnorm, alpha, flags


def picard_default(eig: EigenSystem, delta: float) -> int:
    """Largest ``l`` with ``mu_l >= delta mu_1`` (at least 1)."""
    mu = eig.values
    if mu.size == 0 or mu[0] <= 0:
        raise ValidationError("empty spectrum")
    return max(1, int(np.sum(mu >= delta * mu[0])))


def picard_norm(eig: EigenSystem, b: np.ndarray, N_P: int) -> np.ndarray:
    """``sum_{l <= N_P} |<b, Psi_l>|^2 / mu_l`` (``b`` may hold several columns)."""
    mu = eig.values
    if mu.size == 0 or mu[0] <= 1e-300:
        raise ValidationError("empty spectrum")
    if not (1 <= N_P <= mu.size):
        raise ValidationError(f"N_P must lie in [1, {mu.size}]")
    use = np.arange(N_P)
    use = use[mu[use] > 1e-14 * mu[0]]
    if use.size == 0:
        raise ValidationError("empty spectrum")
    beta = eig.vectors[:, use].conj().T @ np.asarray(b, complex)
    w = 1.0 / mu[use]
    if beta.ndim == 1:
        return float(np.sum(np.abs(beta) ** 2 * w))
    return np.sum(np.abs(beta) ** 2 * w[:, None], axis=0)


# --------------------------------------------------------------------------
# indicator maps
# --------------------------------------------------------------------------

def indicator_map(eig: EigenSystem, sampling: SamplingSurface, background, wn: WaveNumbers,
                  S_b: FarFieldMatrix, method: str = "tikhonov", delta: float = 0.05,
                  N_P: Optional[int] = None, B: Optional[np.ndarray] = None) -> IndicatorMap:
    """Indicator ``I^F = 1 / ||g||`` at every sampling point (batched).

    ``eig`` is the eigensystem of F_sharp.  Tikhonov solves
    ``F_sharp^{1/2} g = b`` with the discrepancy principle at level
    ``delta``; Picard uses the truncated series ``||g^P||^2`` with ``N_P``
    terms (default :func:`picard_default`).  ``B`` may supply precomputed
    right-hand sides ``(3N, M)``.
    """
    if B is None:
        B = trial_rhs(sampling.points, sampling.normals, background, S_b.grid, S_b, wn)
    if method == "tikhonov":
        root = EigenSystem(np.sqrt(np.maximum(eig.values, 0.0)), eig.vectors, eig.fingerprint)
        gnorm, params, flags = morozov_batch(root, B, delta)
    elif method == "picard":
        n = picard_default(eig, delta) if N_P is None else int(N_P)
        gnorm = np.sqrt(picard_norm(eig, B, n))
        params = np.full(B.shape[1], float(n))
        flags = np.zeros(B.shape[1], dtype=bool)
    else:
        raise ValidationError(f"unknown method {method!r}; use 'tikhonov' or 'picard'")
    with np.errstate(divide="ignore"):
        values = np.where(gnorm > 0, 1.0 / gnorm, np.inf)
    return IndicatorMap(sampling, values, method, params, flags=flags)


def threshold(imap: IndicatorMap, tau: float = 0.1) -> IndicatorMap:
    """Truncated indicator: ``mask = I > tau max(I)``, values ``mask * I``."""
    if not (0 <= tau <= 1):
        raise ValidationError("tau must lie in [0, 1]")
    mask = imap.values > tau * np.max(imap.values)
    return replace(imap, tau=float(tau), mask=mask, truncated=np.where(mask, imap.values, 0.0))

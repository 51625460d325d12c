"""Analytic elastodynamic building blocks.

Media, wave numbers, plane-wave tensors, the Kupradze fundamental tensor with
its far-field pattern, Herglotz fields and tractions.  Everything here is a
pure function of immutable inputs.

Conventions
-----------
Time dependence ``exp(-i omega t)`` is implied, so outgoing waves behave like
``exp(i k r) / r``.  The fundamental tensor solves

    div C : grad G + rho omega^2 G = -delta I,

which is the sign for which its far-field pattern equals the plane-wave
tensor ``W^i(x, -xi_hat)`` with the normalization constants ``alpha_p`` and
``alpha_s``.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "ElasticMedium",
    "WaveNumbers",
    "HerglotzDensity",
    "ValidationError",
    "SingularityError",
    "wave_numbers",
    "check_monotonicity",
    "plane_wave_tensor",
    "plane_wave_gradient",
    "plane_wave_tensor_batch",
    "plane_wave_gradient_batch",
    "traction",
    "traction_batch",
    "plane_wave_traction_batch",
    "kupradze",
    "kupradze_gradient",
    "kupradze_far_field",
    "navier_residual",
    "herglotz_field",
    "RadialKernel",
]

MIN_SEPARATION = 1e-10


class ValidationError(ValueError):
    """Raised when an input violates a documented precondition."""


class SingularityError(ValueError):
    """Raised when a kernel is evaluated at coincident points."""


@dataclass(frozen=True)
class ElasticMedium:
    """Isotropic elastic material (scaled, dimensionless).

    Attributes
    ----------
    lam, mu : float
        Lame parameters, both positive.
    rho : float
        Mass density.
    """

    lam: float
    mu: float
    rho: float = 1.0

    def __post_init__(self):
        for name in ("lam", "mu", "rho"):
            v = getattr(self, name)
            if not np.isfinite(v) or v <= 0:
                raise ValidationError(f"ElasticMedium.{name} must be positive, got {v!r}")

    @property
    def c_s(self) -> float:
        return float(np.sqrt(self.mu / self.rho))

    @property
    def c_p(self) -> float:
        return float(np.sqrt((self.lam + 2.0 * self.mu) / self.rho))

    @property
    def poisson(self) -> float:
        return self.lam / (2.0 * (self.lam + self.mu))

    def as_tuple(self) -> tuple[float, float, float]:
        return (float(self.lam), float(self.mu), float(self.rho))


@dataclass(frozen=True)
class WaveNumbers:
    """Frequency-dependent constants of one medium."""

    omega: float
    k_p: float
    k_s: float
    alpha_p: float
    alpha_s: float
    medium: ElasticMedium


def wave_numbers(omega: float, exterior: ElasticMedium) -> WaveNumbers:
    """Compressional/shear wave numbers and far-field constants.

    ``k = omega * sqrt(rho / modulus)``; with the scaled exterior density
    ``rho = 1`` this reduces to ``omega / sqrt(mu)`` and
    ``omega / sqrt(lambda + 2 mu)``.
    """
    if not isinstance(exterior, ElasticMedium):
        raise ValidationError("exterior must be an ElasticMedium")
    if not np.isfinite(omega) or omega <= 0:
        raise ValidationError(f"omega must be positive, got {omega!r}")
    m = exterior
    k_s = omega * np.sqrt(m.rho / m.mu)
    k_p = omega * np.sqrt(m.rho / (m.lam + 2.0 * m.mu))
    return WaveNumbers(
        omega=float(omega),
        k_p=float(k_p),
        k_s=float(k_s),
        alpha_p=1.0 / (4.0 * np.pi * (m.lam + 2.0 * m.mu)),
        alpha_s=1.0 / (4.0 * np.pi * m.mu),
        medium=m,
    )


def check_monotonicity(a: ElasticMedium, b: ElasticMedium) -> bool:
    """True iff ``(lam_a - lam_b) (mu_a - mu_b) >= 0``."""
    return bool((a.lam - b.lam) * (a.mu - b.mu) >= 0.0)


def _unit(d, name="d") -> np.ndarray:
    d = np.asarray(d, dtype=float)
    n = np.linalg.norm(d, axis=-1)
    if np.any(np.abs(n - 1.0) > 1e-12):
        raise ValidationError(f"{name} must be a unit vector (|{name}| = {n})")
    return d


# --------------------------------------------------------------------------
# plane waves
# --------------------------------------------------------------------------

def plane_wave_tensor_batch(xi: np.ndarray, d: np.ndarray, wn: WaveNumbers) -> np.ndarray:
    """Vectorized plane-wave tensor.

    ``xi`` has shape ``(..., 3)`` and ``d`` shape ``(..., 3)`` (broadcast);
    returns ``(..., 3, 3)``.  No unit-norm validation.
    """
    xi = np.asarray(xi, dtype=float)
    d = np.asarray(d, dtype=float)
    phase = np.sum(xi * d, axis=-1)
    P = d[..., :, None] * d[..., None, :]
    I = np.eye(3)
    es = np.exp(1j * wn.k_s * phase)[..., None, None]
    ep = np.exp(1j * wn.k_p * phase)[..., None, None]
    return es * (I - P) + ep * P


def plane_wave_gradient_batch(xi: np.ndarray, d: np.ndarray, wn: WaveNumbers) -> np.ndarray:
    """Vectorized gradient; ``out[..., k, i, j] = d W_ij / d xi_k``."""
    xi = np.asarray(xi, dtype=float)
    d = np.asarray(d, dtype=float)
    phase = np.sum(xi * d, axis=-1)
    P = d[..., :, None] * d[..., None, :]
    I = np.eye(3)
    es = (1j * wn.k_s * np.exp(1j * wn.k_s * phase))[..., None, None]
    ep = (1j * wn.k_p * np.exp(1j * wn.k_p * phase))[..., None, None]
    M = es * (I - P) + ep * P
    return d[..., :, None, None] * M[..., None, :, :]


def plane_wave_tensor(xi, d, wn: WaveNumbers) -> np.ndarray:
    """Incident plane-wave tensor ``W^i(xi, d)``.

    ``W^i q`` is the superposition of a P-wave polarized along ``(d.q) d``
    and an S-wave polarized along ``q - (d.q) d``.
    """
    d = _unit(d)
    return plane_wave_tensor_batch(np.asarray(xi, float), d, wn)


def plane_wave_gradient(xi, d, wn: WaveNumbers) -> np.ndarray:
    """Exact gradient of the plane-wave tensor, indexed ``[k, i, j]``."""
    d = _unit(d)
    return plane_wave_gradient_batch(np.asarray(xi, float), d, wn)


# --------------------------------------------------------------------------
# tractions
# --------------------------------------------------------------------------

def traction_batch(grad_u: np.ndarray, nu: np.ndarray, lam: float, mu: float) -> np.ndarray:
    """Traction ``nu . C : grad u`` for stacked gradients.

    ``grad_u[..., k, i] = d u_i / d x_k`` (optionally with a trailing column
    axis: ``grad_u[..., k, i, j]`` for the columns of a tensor field).  ``nu``
    broadcasts against the leading axes.  Returns ``[..., i]`` or
    ``[..., i, j]``.
    """
    g = np.asarray(grad_u)
    nu = np.asarray(nu, dtype=float)
    if g.ndim >= 3 and g.shape[-3:] == (3, 3, 3):
        div = np.einsum("...kkj->...j", g)
        # strain . nu : 0.5 (d_k u_i + d_i u_k) nu_k
        e1 = np.einsum("...kij,...k->...ij", g, nu)
        e2 = np.einsum("...ikj,...k->...ij", g, nu)
        return lam * nu[..., :, None] * div[..., None, :] + mu * (e1 + e2)
    div = np.einsum("...kk->...", g)
    e1 = np.einsum("...ki,...k->...i", g, nu)
    e2 = np.einsum("...ik,...k->...i", g, nu)
    return lam * nu * div[..., None] + mu * (e1 + e2)


def plane_wave_traction_batch(xi, d, nu, wn: WaveNumbers, lam: float, mu: float) -> np.ndarray:
    """Traction ``nu . C : grad W^i(xi, d)`` in closed form, columns = polarizations.

    Shapes broadcast over leading axes of ``xi``, ``d`` and ``nu``; returns
    ``(..., 3, 3)``.
    """
    xi = np.asarray(xi, dtype=float)
    d = np.asarray(d, dtype=float)
    nu = np.asarray(nu, dtype=float)
    phase = np.sum(xi * d, axis=-1)
    nd = np.sum(nu * d, axis=-1)[..., None, None]
    ep = (1j * wn.k_p * np.exp(1j * wn.k_p * phase))[..., None, None]
    es = (1j * wn.k_s * np.exp(1j * wn.k_s * phase))[..., None, None]
    dd = d[..., :, None] * d[..., None, :]
    nud = nu[..., :, None] * d[..., None, :]
    dnu = d[..., :, None] * nu[..., None, :]
    I = np.eye(3)
    return ep * (lam * nud + 2 * mu * nd * dd) + es * mu * (nd * (I - dd) + dnu - nd * dd)


def traction(grad_u, nu, medium: ElasticMedium) -> np.ndarray:
    """Co-normal derivative ``lambda (div u) nu + 2 mu eps(u) nu``.

    ``grad_u[k, i] = d u_i / d x_k``.
    """
    nu = _unit(nu, "nu")
    return traction_batch(np.asarray(grad_u), nu, medium.lam, medium.mu)


# --------------------------------------------------------------------------
# radial representation of the Kupradze tensor
# --------------------------------------------------------------------------

class RadialKernel:
    """Kupradze tensor in the radial form ``G = A(r) I + C(r) rhat rhat``.

    ``A = Phi_s / mu + B'/r`` and ``C = B'' - B'/r`` with
    ``B = (Phi_s - Phi_p) / (rho omega^2)`` and ``Phi_k = e^{ikr}/(4 pi r)``.
    Small arguments use the power series, which also provides the static
    (Kelvin) part ``A_st = a_{-1}/r``, ``C_st = c_{-1}/r`` and cancellation-free
    differences ``A - A_st`` and ``C - C_st``.

    Parameters
    ----------
    medium : ElasticMedium
    omega : float
    nterms : int
        Number of series terms.
    switch : float
        Series is used for ``k_s r < switch``.
    """

    def __init__(self, medium: ElasticMedium, omega: float, nterms: int = 16, switch: float = 0.2):
        self.medium = medium
        self.omega = float(omega)
        m = medium
        self.s_s = np.sqrt(m.rho / m.mu)
        self.s_p = np.sqrt(m.rho / (m.lam + 2 * m.mu))
        self.k_s = self.omega * self.s_s
        self.k_p = self.omega * self.s_p
        self.nterms = nterms
        self.switch = switch
        n = np.arange(nterms + 4)
        fact = np.array([float(np.prod(np.arange(1, j + 1))) for j in n])
        # b_n = i^n omega^{n-2} (s_s^n - s_p^n) / (4 pi rho n!)
        b = (1j ** n) * self.omega ** (n - 2.0) * (self.s_s ** n - self.s_p ** n) / (4 * np.pi * m.rho * fact)
        b[0] = 0.0
        phi = (1j * self.k_s) ** n / (4 * np.pi * m.mu * fact)
        # powers m = -1 .. nterms-2 ; index j = m + 1
        mm = np.arange(-1, nterms - 1)
        self._m = mm
        self._a = phi[mm + 1] + b[mm + 3] * (mm + 2)
        self._c = b[mm + 3] * (mm + 2) * mm
        self._e = b[mm + 3] * (mm + 2) ** 2        # planar Laplacian of B
        self._b = b
        self.a_static = float(np.real(self._a[0]))
        self.c_static = float(np.real(self._c[0]))
        self.e_static = float(np.real(self._e[0]))

    # -- closed forms ---------------------------------------------------
    def _phi_derivs(self, k, r):
        g = np.exp(1j * k * r) / (4 * np.pi)
        ir = 1.0 / r
        p0 = g * ir
        p1 = g * (1j * k * ir - ir ** 2)
        p2 = g * (-k ** 2 * ir - 2j * k * ir ** 2 + 2 * ir ** 3)
        p3 = g * (-1j * k ** 3 * ir + 3 * k ** 2 * ir ** 2 + 6j * k * ir ** 3 - 6 * ir ** 4)
        return p0, p1, p2, p3

    def _closed(self, r):
        m = self.medium
        s0, s1, s2, s3 = self._phi_derivs(self.k_s, r)
        p0, p1, p2, p3 = self._phi_derivs(self.k_p, r)
        row2 = m.rho * self.omega ** 2
        B1 = (s1 - p1) / row2
        B2 = (s2 - p2) / row2
        B3 = (s3 - p3) / row2
        A = s0 / m.mu + B1 / r
        dA = s1 / m.mu + B2 / r - B1 / r ** 2
        C = B2 - B1 / r
        dC = B3 - B2 / r + B1 / r ** 2
        E = B2 + B1 / r
        return A, dA, C, dC, E, s0, p0

    def _series(self, r, coef, skip_static=False):
        """Sum ``coef[j] r^(j-1)`` and its derivative by Horner's rule.

        Terms below ``1e-18`` of the largest term at ``max(r)`` are dropped.
        """
        c = np.array(coef, dtype=complex)
        if skip_static:
            c[0] = 0.0
        rmax = float(np.max(r)) if r.size else 0.0
        mags = np.abs(c) * rmax ** np.arange(len(c))
        keep = np.flatnonzero(mags > 1e-18 * mags.max()) if mags.max() > 0 else np.array([0])
        c = c[: keep.max() + 1]
        p = np.zeros(r.shape, dtype=complex)
        dp = np.zeros(r.shape, dtype=complex)
        for j in range(len(c) - 1, -1, -1):
            dp = dp * r + p
            p = p * r + c[j]
        val = p / r
        der = dp / r - p / r ** 2
        return val, der

    def evaluate(self, r, static: str = "full"):
        """Radial functions ``(A, A', C, C', E)`` at distances ``r``.

        ``static`` selects ``"full"`` (dynamic kernel), ``"static"`` (Kelvin
        kernel only) or ``"difference"`` (dynamic minus static, regular).
        ``E = B'' + B'/r`` is the in-plane Laplacian of ``B``.
        """
        r = np.asarray(r, dtype=float)
        if static == "static":
            A = self.a_static / r
            C = self.c_static / r
            E = self.e_static / r
            return (A.astype(complex), (-A / r).astype(complex), C.astype(complex),
                    (-C / r).astype(complex), E.astype(complex))
        small = self.k_s * r < self.switch
        out = [np.zeros(r.shape, dtype=complex) for _ in range(5)]
        if np.any(~small):
            rl = r[~small]
            A, dA, C, dC, E, _, _ = self._closed(rl)
            if static == "difference":
                A = A - self.a_static / rl
                dA = dA + self.a_static / rl ** 2
                C = C - self.c_static / rl
                dC = dC + self.c_static / rl ** 2
                E = E - self.e_static / rl
            for o, v in zip(out, (A, dA, C, dC, E)):
                o[~small] = v
        if np.any(small):
            rs = r[small]
            skip = static == "difference"
            A, dA = self._series(rs, self._a, skip)
            C, dC = self._series(rs, self._c, skip)
            E, _ = self._series(rs, self._e, skip)
            for o, v in zip(out, (A, dA, C, dC, E)):
                o[small] = v
        return tuple(out)

    def laplacian_b(self, r, static: str = "full"):
        """In-plane Laplacian ``E = B'' + B'/r`` only (cheaper than ``evaluate``)."""
        r = np.asarray(r, dtype=float)
        if static == "static":
            return (self.e_static / r).astype(complex)
        small = self.k_s * r < self.switch
        out = np.empty(r.shape, dtype=complex)
        if np.any(~small):
            rl = r[~small]
            _, s1, s2, _ = self._phi_derivs(self.k_s, rl)
            _, p1, p2, _ = self._phi_derivs(self.k_p, rl)
            row2 = self.medium.rho * self.omega ** 2
            E = (s2 - p2 + (s1 - p1) / rl) / row2
            if static == "difference":
                E = E - self.e_static / rl
            out[~small] = E
        if np.any(small):
            out[small] = self._series(r[small], self._e, static == "difference")[0]
        return out

    def phi(self, k, r):
        return np.exp(1j * k * r) / (4 * np.pi * r)

    # -- tensors --------------------------------------------------------
    def tensor(self, rvec, static: str = "full"):
        """``G(rvec)`` with shape ``(..., 3, 3)``."""
        rvec = np.asarray(rvec, dtype=float)
        r = np.linalg.norm(rvec, axis=-1)
        A, _, C, _, _ = self.evaluate(r, static)
        rh = rvec / r[..., None]
        return A[..., None, None] * np.eye(3) + C[..., None, None] * rh[..., :, None] * rh[..., None, :]

    def gradient(self, rvec, static: str = "full"):
        """``out[..., l, i, j] = d G_ij / d r_l``."""
        rvec = np.asarray(rvec, dtype=float)
        r = np.linalg.norm(rvec, axis=-1)
        A, dA, C, dC, _ = self.evaluate(r, static)
        rh = rvec / r[..., None]
        I = np.eye(3)
        Cr = (C / r)[..., None, None, None]
        rrr = rh[..., :, None, None] * rh[..., None, :, None] * rh[..., None, None, :]
        t1 = dA[..., None, None, None] * rh[..., :, None, None] * I
        t2 = dC[..., None, None, None] * rrr
        t3 = Cr * (I[:, :, None] * rh[..., None, None, :] + I[:, None, :] * rh[..., None, :, None] - 2 * rrr)
        return t1 + t2 + t3

    def tensor_and_traction(self, rvec, n, static: str = "full"):
        """``(G, H)`` with one radial evaluation; see :meth:`traction_kernel`."""
        rvec = np.asarray(rvec, dtype=float)
        n = np.asarray(n, dtype=float)
        r = np.linalg.norm(rvec, axis=-1)
        A, dA, C, dC, _ = self.evaluate(r, static)
        rh = rvec / r[..., None]
        rr = rh[..., :, None] * rh[..., None, :]
        I = np.eye(3)
        G = A[..., None, None] * I + C[..., None, None] * rr
        lam, mu = self.medium.lam, self.medium.mu
        nr = np.sum(n * rh, axis=-1)
        Cr = C / r
        nb = np.broadcast_to(n, rh.shape)
        H = ((nr * mu * (dA + Cr))[..., None, None] * I
             + (nr * mu * (2 * dC - 4 * Cr))[..., None, None] * rr
             + (lam * (dA + dC + 2 * Cr) + 2 * mu * Cr)[..., None, None] * nb[..., :, None] * rh[..., None, :]
             + (mu * (dA + Cr))[..., None, None] * rh[..., :, None] * nb[..., None, :])
        return G, H

    def traction_kernel(self, rvec, n, static: str = "full"):
        """Traction at ``y`` (normal ``n``) of the columns of ``G(y - x)``.

        ``rvec = y - x``.  Returns ``H[..., i, k]``: component ``i`` of the
        traction of column ``k``.
        """
        rvec = np.asarray(rvec, dtype=float)
        n = np.asarray(n, dtype=float)
        r = np.linalg.norm(rvec, axis=-1)
        A, dA, C, dC, _ = self.evaluate(r, static)
        rh = rvec / r[..., None]
        lam, mu = self.medium.lam, self.medium.mu
        nr = np.sum(n * rh, axis=-1)
        Cr = C / r
        c_d = (nr * mu * (dA + Cr))[..., None, None]
        c_rr = (nr * mu * (2 * dC - 4 * Cr))[..., None, None]
        c_nr = (lam * (dA + dC + 2 * Cr) + 2 * mu * Cr)[..., None, None]
        c_rn = (mu * (dA + Cr))[..., None, None]
        nb = np.broadcast_to(n, rh.shape)
        return (c_d * np.eye(3) + c_rr * rh[..., :, None] * rh[..., None, :]
                + c_nr * nb[..., :, None] * rh[..., None, :]
                + c_rn * rh[..., :, None] * nb[..., None, :])


def _kernel_for(wn: WaveNumbers, exterior: ElasticMedium | None) -> RadialKernel:
    medium = exterior if exterior is not None else wn.medium
    return RadialKernel(medium, wn.omega)


def kupradze(xi, x, wn: WaveNumbers, exterior: ElasticMedium | None = None) -> np.ndarray:
    """Kupradze matrix ``G_0(xi, x)``.

    ``G = (1/mu) Phi_s I + (1/(rho omega^2)) grad grad (Phi_s - Phi_p)``.
    """
    rvec = np.asarray(xi, float) - np.asarray(x, float)
    r = np.linalg.norm(rvec, axis=-1)
    if np.any(r < MIN_SEPARATION):
        raise SingularityError("kupradze evaluated at coincident points")
    return _kernel_for(wn, exterior).tensor(rvec)


def kupradze_gradient(xi, x, wn: WaveNumbers, exterior: ElasticMedium | None = None) -> np.ndarray:
    """Gradient with respect to ``xi``: ``out[l, i, j] = d G_ij / d xi_l``."""
    rvec = np.asarray(xi, float) - np.asarray(x, float)
    r = np.linalg.norm(rvec, axis=-1)
    if np.any(r < MIN_SEPARATION):
        raise SingularityError("kupradze evaluated at coincident points")
    return _kernel_for(wn, exterior).gradient(rvec)


def kupradze_far_field(xihat, x, wn: WaveNumbers) -> np.ndarray:
    """Far-field pattern ``exp(-i k_p xihat.x) P + exp(-i k_s xihat.x) (I - P)``."""
    xihat = _unit(xihat, "xihat")
    x = np.asarray(x, float)
    phase = np.sum(xihat * x, axis=-1)
    P = xihat[..., :, None] * xihat[..., None, :]
    return (np.exp(-1j * wn.k_p * phase)[..., None, None] * P
            + np.exp(-1j * wn.k_s * phase)[..., None, None] * (np.eye(3) - P))


_D1 = {-2: 1.0 / 12.0, -1: -8.0 / 12.0, 1: 8.0 / 12.0, 2: -1.0 / 12.0}
_D2 = {-2: -1.0 / 12.0, -1: 16.0 / 12.0, 0: -30.0 / 12.0, 1: 16.0 / 12.0, 2: -1.0 / 12.0}


def navier_residual(xi, x, wn: WaveNumbers, h: float | None = None) -> float:
    """Relative residual of ``Delta* G + rho omega^2 G = 0`` away from the source.

    Second derivatives in ``xi`` use fourth-order central differences with
    step ``h`` (default ``min(3e-3, 3e-3 |xi - x|)``, which balances
    truncation against round-off); the residual is normalized by
    ``rho omega^2 ||G||``.
    """
    xi = np.asarray(xi, float)
    m = wn.medium
    if h is None:
        h = 3e-3 * min(1.0, float(np.linalg.norm(xi - np.asarray(x, float))))

    def G(p):
        return kupradze(p, x, wn)

    E = np.eye(3)
    d2 = np.zeros((3, 3, 3, 3), dtype=complex)          # d2[a, b] = d_a d_b G
    for a in range(3):
        d2[a, a] = sum(c * G(xi + i * h * E[a]) for i, c in _D2.items()) / h ** 2
        for b in range(a + 1, 3):
            v = sum(ci * cj * G(xi + i * h * E[a] + j * h * E[b])
                    for i, ci in _D1.items() for j, cj in _D1.items()) / h ** 2
            d2[a, b] = d2[b, a] = v
    G0 = G(xi)
    lap = np.einsum("aaij->ij", d2)
    graddiv = np.einsum("iaaj->ij", d2)
    L = m.mu * lap + (m.lam + m.mu) * graddiv + m.rho * wn.omega ** 2 * G0
    return float(np.linalg.norm(L) / (m.rho * wn.omega ** 2 * np.linalg.norm(G0)))


# --------------------------------------------------------------------------
# Herglotz fields
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class HerglotzDensity:
    """Vector density on a direction grid.

    ``values`` has shape ``(N, 3)`` in Cartesian components.
    """

    grid: "object"
    values: np.ndarray

    @property
    def g_p(self) -> np.ndarray:
        d = self.grid.directions
        return d * np.sum(d * self.values, axis=1)[:, None]

    @property
    def g_s(self) -> np.ndarray:
        return self.values - self.g_p


def herglotz_field(g: HerglotzDensity, xi, wn: WaveNumbers) -> np.ndarray:
    """Quadrature of ``int g_p e^{i k_p d.xi} + g_s e^{i k_s d.xi} dS_d``."""
    d = g.grid.directions
    w = g.grid.weights
    xi = np.asarray(xi, float)
    phase = xi @ d.T if xi.ndim > 1 else d @ xi
    ep = np.exp(1j * wn.k_p * phase)
    es = np.exp(1j * wn.k_s * phase)
    if xi.ndim > 1:
        return (ep * w) @ g.g_p + (es * w) @ g.g_s
    return (ep * w) @ g.g_p + (es * w) @ g.g_s

"""Scaled compressible MHD systems: states, tendencies, balance forms, matrices.

Two systems live here.

* The *full* system in the unknowns ``U = (q, u, H, phi)`` with density
  ``1 + eps*q`` and temperature ``1 + eps*phi``; viscous, resistive and
  heat-conducting.
* The *ideal* system in ``V = (q, u, H, Theta)`` where ``q`` is a scaled
  log-pressure and ``Theta`` a scaled entropy, closed by a gas law
  ``rho = R(S, p)``.

Component index order for packed arrays and matrices is
``(q, u1, u2, u3, H1, H2, H3, phi|Theta)``.

Discretisation rule: every nonlinear product is truncated by the 2/3 mask
as soon as it is formed; linear operators are never masked. Time
tendencies are returned as fields whose coefficients are exactly the
masked spectra, so a band-limited state stays band-limited.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field, fields as dc_fields, replace
from typing import Callable, ClassVar, Optional, TextIO

import numpy as np

from .errors import InvalidGasLawError, StateSpaceExit, UsageError
from .fields import ScalarField, VectorField3
from .grid import Grid

NCOMP = 8
IQ, IU, IH, IP = 0, slice(1, 4), slice(4, 7), 7


# ---------------------------------------------------------------------------
# parameters


@dataclass(frozen=True)
class PhysicalParams:
    """Coefficients of the scaled full system.

    Args:
        mu: shear viscosity.
        lam: second (bulk-related) viscosity.
        nu: magnetic diffusivity.
        kappa: heat conductivity.
        gamma: ratio of specific heats, > 1.
        eps: Mach number, > 0.
    """

    mu: float = 0.05
    lam: float = 0.0
    nu: float = 0.05
    kappa: float = 0.05
    gamma: float = 5.0 / 3.0
    eps: float = 0.1

    def __post_init__(self):
        if not self.gamma > 1.0:
            raise UsageError(f"gamma must exceed 1, got {self.gamma}")
        if not self.eps > 0.0:
            raise UsageError(f"eps must be positive, got {self.eps}")
        if min(self.mu, self.nu, self.kappa) < 0:
            raise UsageError("mu, nu and kappa must be nonnegative")
        if (self.mu != 0 or self.lam != 0) and not (self.mu > 0 and 2 * self.mu + 3 * self.lam > 0):
            raise UsageError("viscosity requires mu > 0 and 2*mu + 3*lam > 0")

    @classmethod
    def ideal(cls, gamma: float = 5.0 / 3.0, eps: float = 0.1) -> "PhysicalParams":
        return cls(mu=0.0, lam=0.0, nu=0.0, kappa=0.0, gamma=gamma, eps=eps)

    @property
    def is_ideal(self) -> bool:
        return self.mu == self.lam == self.nu == self.kappa == 0.0

    def with_eps(self, eps: float) -> "PhysicalParams":
        return replace(self, eps=eps)


# ---------------------------------------------------------------------------
# states


class _State:
    """Shared packing logic for the two eight-component state types."""

    names: ClassVar[tuple[str, str, str, str]]

    @property
    def grid(self) -> Grid:
        return getattr(self, self.names[0]).grid

    def parts(self):
        return tuple(getattr(self, n) for n in self.names)

    def pack(self) -> np.ndarray:
        """Physical samples stacked to shape ``(8, *grid.shape)``."""
        a, b, c, d = self.parts()
        return np.concatenate([a.values[None], b.values, c.values, d.values[None]])

    def pack_hat(self) -> np.ndarray:
        a, b, c, d = self.parts()
        return np.concatenate([a.spectral[None], b.spectral, c.spectral, d.spectral[None]])

    @classmethod
    def from_array(cls, grid: Grid, arr: np.ndarray):
        return cls(ScalarField(grid, arr[IQ]), VectorField3(grid, arr[IU]),
                   VectorField3(grid, arr[IH]), ScalarField(grid, arr[IP]))

    @classmethod
    def from_hat(cls, grid: Grid, arr: np.ndarray):
        return cls(ScalarField(grid, spectral=arr[IQ]), VectorField3(grid, spectral=arr[IU]),
                   VectorField3(grid, spectral=arr[IH]), ScalarField(grid, spectral=arr[IP]))

    @classmethod
    def zeros(cls, grid: Grid):
        return cls.from_array(grid, np.zeros((NCOMP,) + grid.shape))

    def _check(self):
        g = getattr(self, self.names[0]).grid
        for n in self.names[1:]:
            getattr(self, n)._check_grid(getattr(self, self.names[0]))
        return g

    def __sub__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return type(self).from_array(self.grid, self.pack() - other.pack())

    def __add__(self, other):
        if type(other) is not type(self):
            return NotImplemented
        return type(self).from_array(self.grid, self.pack() + other.pack())


@dataclass(frozen=True, eq=False)
class FullState(_State):
    """Full-system unknown ``(q, u, H, phi)``."""

    q: ScalarField
    u: VectorField3
    H: VectorField3
    phi: ScalarField
    names: ClassVar = ("q", "u", "H", "phi")

    def __post_init__(self):
        self._check()


@dataclass(frozen=True, eq=False)
class IdealState(_State):
    """Ideal-system unknown ``(q, u, H, Theta)``."""

    q: ScalarField
    u: VectorField3
    H: VectorField3
    Theta: ScalarField
    names: ClassVar = ("q", "u", "H", "Theta")

    def __post_init__(self):
        self._check()


# ---------------------------------------------------------------------------
# gas law for the ideal system


def _polytropic_density(S, p, gamma):
    return (p * np.exp(-S)) ** (1.0 / gamma)


def _polytropic_ddp(S, p, gamma):
    return _polytropic_density(S, p, gamma) / (gamma * p)


def _polytropic_a(S, p, gamma):
    return np.full(np.shape(p), 1.0 / gamma)


@dataclass(frozen=True)
class GasLaw:
    """Equation of state ``rho = R(S, p)`` with base point ``(S_base, p_base)``.

    Args:
        density_fn: ``R(S, p)``.
        ddensity_dp_fn: ``dR/dp(S, p)``.
        S_base: reference entropy.
        p_base: reference pressure, > 0.
        a_fn: optional closed form for ``(p/R) dR/dp``; used instead of the
            quotient when given.
    """

    density_fn: Callable
    ddensity_dp_fn: Callable
    S_base: float = 0.0
    p_base: float = 1.0
    a_fn: Optional[Callable] = None

    def __post_init__(self):
        if not self.p_base > 0:
            raise UsageError("p_base must be positive")

    def coefficients(self, S: np.ndarray, p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Pointwise ``a = (p/R) dR/dp`` and ``r = R/p``."""
        R = np.asarray(self.density_fn(S, p), dtype=float)
        Rp = np.asarray(self.ddensity_dp_fn(S, p), dtype=float)
        if not (np.all(R > 0) and np.all(Rp > 0)):
            raise InvalidGasLawError(
                f"gas law needs R > 0 and dR/dp > 0; got min R = {R.min():.3g}, "
                f"min dR/dp = {Rp.min():.3g}")
        a = np.asarray(self.a_fn(S, p), dtype=float) if self.a_fn is not None else p * Rp / R
        return a, R / p

    @property
    def r0(self) -> float:
        """``r`` at the base point, the constant density of the ideal limit."""
        _, r = self.coefficients(np.array(self.S_base), np.array(self.p_base))
        return float(r)


def default_gas_law(gamma: float = 5.0 / 3.0, S_base: float = 0.0, p_base: float = 1.0) -> GasLaw:
    """Polytropic law ``R = (p e^{-S})^{1/gamma}``, for which ``a = 1/gamma``."""
    return GasLaw(functools.partial(_polytropic_density, gamma=gamma),
                  functools.partial(_polytropic_ddp, gamma=gamma),
                  S_base, p_base, functools.partial(_polytropic_a, gamma=gamma))


def _ideal_coeff_arrays(law: GasLaw, Theta: np.ndarray, q: np.ndarray, eps: float):
    S = law.S_base + eps * Theta
    p = law.p_base * np.exp(eps * q)
    return law.coefficients(S, p)


def gas_coeffs(law: GasLaw, Theta: ScalarField, q: ScalarField, eps: float) -> tuple[ScalarField, ScalarField]:
    """Coefficient fields ``a`` and ``r`` at ``S = S_base + eps*Theta``, ``p = p_base*exp(eps*q)``."""
    a, r = _ideal_coeff_arrays(law, Theta.values, q.values, eps)
    g = q.grid
    return ScalarField(g, np.broadcast_to(a, g.shape)), ScalarField(g, np.broadcast_to(r, g.shape))


# ---------------------------------------------------------------------------
# array kernels (spectral in, spectral out)


class _Kernel:
    """Small helper bundling the masked-product conventions for one grid."""

    def __init__(self, grid: Grid):
        self.g = grid

    def T(self, a):
        """Masked spectrum of physical data."""
        g = self.g
        return g.fft(a) * g.mask

    def Tp(self, a):
        """Masked physical data."""
        return self.g.ifft(self.T(a))

    def grad(self, fh):
        return self.g.ifft(self.g.grad_hat(fh))

    def jac(self, vh):
        """Physical ``J[i, j] = d_j v_i``."""
        g = self.g
        return g.ifft(np.stack([g.grad_hat(vh[i]) for i in range(3)]))


def _adv(u, J):
    """``(u . grad) v`` given ``J[i, j] = d_j v_i``."""
    return np.einsum("j...,ij...->i...", u, J)


def _curl_from_jac(J):
    return np.stack([J[2, 1] - J[1, 2], J[0, 2] - J[2, 0], J[1, 0] - J[0, 1]])


def _strain_terms(Ju, divu, mu, lam):
    D = 0.5 * (Ju + np.swapaxes(Ju, 0, 1))
    return 2.0 * mu * np.einsum("ij...,ij...->...", D, D) + lam * divu**2


def _check_positive(q, phi, eps, second: str):
    rho_min = 1.0 + eps * q.min()
    if rho_min <= 0:
        raise StateSpaceExit("q", q.min(), f"1 + eps*q reached {rho_min:.3g} (q min {q.min():.6g})")
    th_min = 1.0 + eps * phi.min()
    if th_min <= 0:
        raise StateSpaceExit(second, phi.min(), f"1 + eps*{second} reached {th_min:.3g}")


def full_tendency_hat(grid: Grid, Uh: np.ndarray, params: PhysicalParams) -> np.ndarray:
    """Spectral tendency of the full system for packed coefficients ``Uh``."""
    K = _Kernel(grid)
    g = grid
    eps, gm1 = params.eps, params.gamma - 1.0
    mu, lam, nu, kappa = params.mu, params.lam, params.nu, params.kappa
    qh, uh, Hh, ph = Uh[IQ], Uh[IU], Uh[IH], Uh[IP]
    X = g.ifft(Uh)
    q, u, H, phi = X[IQ], X[IU], X[IH], X[IP]
    _check_positive(q, phi, eps, "phi")

    gq, gphi = K.grad(qh), K.grad(ph)
    Ju, JH = K.jac(uh), K.jac(Hh)
    divu_h = g.div_hat(uh)
    divu = g.ifft(divu_h)
    curlH = _curl_from_jac(JH)
    inv = 1.0 / (1.0 + eps * q)

    out = np.empty_like(Uh)
    out[IQ] = -K.T(np.einsum("j...,j...->...", u, gq) + q * divu) - divu_h / eps

    visc = g.ifft(mu * g.lap_hat(uh) + (mu + lam) * g.grad_hat(divu_h))
    force = (-g.ifft(g.grad_hat(qh + ph)) / eps
             + K.Tp(np.cross(curlH, H, axis=0) - q * gphi - phi * gq)
             + visc)
    out[IU] = K.T(-_adv(u, Ju) + inv * force)

    out[IH] = K.T(-_adv(u, JH) - divu * H + _adv(H, Ju)) + nu * g.lap_hat(Hh)

    heat = (-gm1 / eps * divu
            + K.Tp(-gm1 * (q + phi) * divu - gm1 * eps * K.Tp(q * phi) * divu
                   + eps * (_strain_terms(Ju, divu, mu, lam) + nu * np.sum(curlH**2, axis=0)))
            + kappa * g.ifft(g.lap_hat(ph)))
    out[IP] = K.T(-np.einsum("j...,j...->...", u, gphi) + inv * heat)
    return out


def full_balance_hat(grid: Grid, Uh: np.ndarray, Ut_h: np.ndarray, params: PhysicalParams,
                     source: str = "S") -> np.ndarray:
    """Left sides of the full system minus a source, given a state and its time derivative.

    ``source="Q"`` subtracts the complete dissipative right side;
    ``source="S"`` subtracts only ``(0, mu lap u, nu lap H, 0)``.
    """
    if source not in ("S", "Q"):
        raise UsageError(f"source must be 'S' or 'Q', got {source!r}")
    K = _Kernel(grid)
    g = grid
    eps, gm1 = params.eps, params.gamma - 1.0
    mu, lam, nu, kappa = params.mu, params.lam, params.nu, params.kappa
    qh, uh, Hh, ph = Uh[IQ], Uh[IU], Uh[IH], Uh[IP]
    X = g.ifft(Uh)
    q, u, H, phi = X[IQ], X[IU], X[IH], X[IP]
    Xt = g.ifft(Ut_h)
    ut, phit = Xt[IU], Xt[IP]
    rho, theta = 1.0 + eps * q, 1.0 + eps * phi

    gq, gphi = K.grad(qh), K.grad(ph)
    Ju, JH = K.jac(uh), K.jac(Hh)
    divu_h = g.div_hat(uh)
    divu = g.ifft(divu_h)
    dot = functools.partial(np.einsum, "j...,j...->...")

    rows = np.empty_like(Uh)
    rows[IQ] = Ut_h[IQ] + K.T(dot(u, gq) + q * divu) + divu_h / eps
    magnetic = -K.T(_adv(H, JH)) + 0.5 * g.grad_hat(K.T(np.sum(H * H, axis=0)))
    rows[IU] = (K.T(rho * (ut + K.Tp(_adv(u, Ju))))
                + (K.T(rho * gphi) + K.T(theta * gq)) / eps + magnetic)
    rows[IH] = Ut_h[IH] + K.T(_adv(u, JH) + divu * H - _adv(H, Ju))
    rows[IP] = (K.T(rho * (phit + K.Tp(dot(u, gphi))))
                + gm1 / eps * K.T(K.Tp(rho * theta) * divu))

    rows[IU] -= mu * g.lap_hat(uh)
    rows[IH] -= nu * g.lap_hat(Hh)
    if source == "Q":
        rows[IU] -= (mu + lam) * g.grad_hat(divu_h)
        curlH = _curl_from_jac(JH)
        rows[IP] -= kappa * g.lap_hat(ph) + eps * K.T(
            _strain_terms(Ju, divu, mu, lam) + nu * np.sum(curlH**2, axis=0))
    return rows


def ideal_tendency_hat(grid: Grid, Vh: np.ndarray, law: GasLaw, eps: float) -> np.ndarray:
    """Spectral tendency of the ideal system for packed coefficients ``Vh``."""
    if not eps > 0:
        raise UsageError("eps must be positive")
    K = _Kernel(grid)
    g = grid
    qh, uh, Hh, Th = Vh[IQ], Vh[IU], Vh[IH], Vh[IP]
    X = g.ifft(Vh)
    q, u, H, Theta = X[IQ], X[IU], X[IH], X[IP]
    a, r = _ideal_coeff_arrays(law, Theta, q, eps)

    gq, gT = K.grad(qh), K.grad(Th)
    Ju, JH = K.jac(uh), K.jac(Hh)
    divu = g.ifft(g.div_hat(uh))
    curlH = _curl_from_jac(JH)
    dot = functools.partial(np.einsum, "j...,j...->...")

    out = np.empty_like(Vh)
    out[IQ] = -K.T(dot(u, gq)) - K.T(divu / a) / eps
    out[IU] = K.T(-_adv(u, Ju) + (-gq / eps + K.Tp(np.cross(curlH, H, axis=0))) / r)
    out[IH] = K.T(-_adv(u, JH) - divu * H + _adv(H, Ju))
    out[IP] = -K.T(dot(u, gT))
    return out


def ideal_balance_hat(grid: Grid, Vh: np.ndarray, Vt_h: np.ndarray, law: GasLaw, eps: float) -> np.ndarray:
    """Left sides of the ideal system given a state and its time derivative."""
    K = _Kernel(grid)
    g = grid
    qh, uh, Hh, Th = Vh[IQ], Vh[IU], Vh[IH], Vh[IP]
    X = g.ifft(Vh)
    q, u, H, Theta = X[IQ], X[IU], X[IH], X[IP]
    Xt = g.ifft(Vt_h)
    a, r = _ideal_coeff_arrays(law, Theta, q, eps)

    gq, gT = K.grad(qh), K.grad(Th)
    Ju, JH = K.jac(uh), K.jac(Hh)
    divu_h = g.div_hat(uh)
    divu = g.ifft(divu_h)
    dot = functools.partial(np.einsum, "j...,j...->...")

    rows = np.empty_like(Vh)
    rows[IQ] = K.T(a * (Xt[IQ] + K.Tp(dot(u, gq)))) + divu_h / eps
    rows[IU] = (K.T(r * (Xt[IU] + K.Tp(_adv(u, Ju)))) + g.grad_hat(qh) / eps
                - K.T(_adv(H, JH)) + 0.5 * g.grad_hat(K.T(np.sum(H * H, axis=0))))
    rows[IH] = Vt_h[IH] + K.T(_adv(u, JH) + divu * H - _adv(H, Ju))
    rows[IP] = Vt_h[IP] + K.T(dot(u, gT))
    return rows


# ---------------------------------------------------------------------------
# field-level API


def source_terms(u: VectorField3, H: VectorField3, params: PhysicalParams
                 ) -> tuple[VectorField3, ScalarField, ScalarField]:
    """Viscous force ``F``, viscous heating ``L`` and Joule heating ``G``.

    ``F = 2 mu div D(u) + lam grad tr D(u)`` is linear and exact;
    ``L = 2 mu |D|^2 + lam (tr D)^2`` and ``G = nu |curl H|^2`` are dealiased.
    """
    u._check_grid(H)
    g, K = u.grid, _Kernel(u.grid)
    uh = u.spectral
    divu_h = g.div_hat(uh)
    F = params.mu * g.lap_hat(uh) + (params.mu + params.lam) * g.grad_hat(divu_h)
    Ju = K.jac(uh)
    curlH = g.ifft(g.curl_hat(H.spectral))
    L = K.T(_strain_terms(Ju, g.ifft(divu_h), params.mu, params.lam))
    G = K.T(params.nu * np.sum(curlH**2, axis=0))
    return (VectorField3(g, spectral=F), ScalarField(g, spectral=L), ScalarField(g, spectral=G))


def rhs_full(U: FullState, params: PhysicalParams) -> FullState:
    """Time derivative of the full system at ``U``.

    Raises:
        StateSpaceExit: if ``1 + eps*q`` or ``1 + eps*phi`` is not positive.
    """
    g = U.grid
    return FullState.from_hat(g, full_tendency_hat(g, U.pack_hat(), params))


def full_balance(U: FullState, U_t: FullState, params: PhysicalParams, source: str = "S") -> FullState:
    """Row-wise defect of the full system for a state and a prescribed time derivative."""
    g = U.grid
    return FullState.from_hat(g, full_balance_hat(g, U.pack_hat(), U_t.pack_hat(), params, source))


def rhs_ideal(V: IdealState, law: GasLaw, eps: float) -> IdealState:
    """Time derivative of the ideal system at ``V``."""
    g = V.grid
    return IdealState.from_hat(g, ideal_tendency_hat(g, V.pack_hat(), law, eps))


def ideal_balance(V: IdealState, V_t: IdealState, law: GasLaw, eps: float) -> IdealState:
    """Row-wise defect of the ideal system for a state and a prescribed time derivative."""
    g = V.grid
    return IdealState.from_hat(g, ideal_balance_hat(g, V.pack_hat(), V_t.pack_hat(), law, eps))


# ---------------------------------------------------------------------------
# quasilinear matrices and symmetrizers (pointwise, vectorised over leading axes)


def _split_point(point) -> tuple[np.ndarray, ...]:
    P = np.asarray(point, dtype=float)
    if P.shape[-1] != NCOMP:
        raise UsageError(f"point values need a trailing axis of length 8, got {P.shape}")
    return P[..., 0], P[..., 1:4], P[..., 4:7], P[..., 7]


def assemble_matrices(point, params: PhysicalParams) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """Coefficient matrices ``A0, A1, A2, A3`` of the full system in quasilinear form.

    Args:
        point: state values with trailing axis ``(q, u1, u2, u3, H1, H2, H3, phi)``;
            any leading shape is broadcast.
        params: coefficient set; ``eps`` must be positive.

    Returns:
        Four arrays of shape ``point.shape[:-1] + (8, 8)``.
    """
    if not params.eps > 0:
        raise UsageError("matrices are singular at eps = 0")
    eps, gm1 = params.eps, params.gamma - 1.0
    q, u, H, phi = _split_point(point)
    rho, theta = 1.0 + eps * q, 1.0 + eps * phi
    lead = q.shape
    A0 = np.zeros(lead + (NCOMP, NCOMP))
    for i, d in enumerate((1.0, rho, rho, rho, 1.0, 1.0, 1.0, rho)):
        A0[..., i, i] = d
    mats = [A0]
    for j in range(3):
        A = np.zeros(lead + (NCOMP, NCOMP))
        uj = u[..., j]
        A[..., 0, 0] = uj
        A[..., 0, 1 + j] = rho / eps
        A[..., 1 + j, 0] = theta / eps
        A[..., 1 + j, 7] = rho / eps
        for i in range(3):
            A[..., 1 + i, 1 + i] = uj * rho
            A[..., 4 + i, 4 + i] = uj
            if i == j:
                for m in range(3):
                    if m != j:
                        A[..., 1 + j, 4 + m] = H[..., m]
            else:
                A[..., 1 + i, 4 + i] = -H[..., j]
                A[..., 4 + i, 1 + j] = H[..., i]
                A[..., 4 + i, 1 + i] = -H[..., j]
        A[..., 7, 1 + j] = gm1 * rho * theta / eps
        A[..., 7, 7] = rho * uj
        mats.append(A)
    return tuple(mats)


def normalized_jacobians(point, params: PhysicalParams) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """``A0^{-1} A_j`` for ``j = 1, 2, 3`` (``A0`` is diagonal)."""
    A0, *Aj = assemble_matrices(point, params)
    d = np.diagonal(A0, axis1=-2, axis2=-1)
    return tuple(A / d[..., :, None] for A in Aj)


def _diag(entries, lead) -> np.ndarray:
    M = np.zeros(lead + (NCOMP, NCOMP))
    for i, e in enumerate(entries):
        M[..., i, i] = e
    return M


def symmetrizers(point, params: PhysicalParams) -> tuple[np.ndarray, np.ndarray]:
    """The two diagonal symmetrizer candidates ``(Ahat0, Atilde0)``.

    ``Ahat0 = diag(theta/rho, 1, ..., 1, 1/((gamma-1) theta))`` and
    ``Atilde0 = diag(theta/rho^2, 1, 1, 1, 1/rho, 1/rho, 1/rho, 1/((gamma-1) theta))``
    with ``rho = 1 + eps*q`` and ``theta = 1 + eps*phi``.

    Raises:
        StateSpaceExit: on nonpositive ``rho`` or ``theta``.
    """
    eps, gm1 = params.eps, params.gamma - 1.0
    q, _, _, phi = _split_point(point)
    _check_positive(np.atleast_1d(q), np.atleast_1d(phi), eps, "phi")
    rho, theta = 1.0 + eps * q, 1.0 + eps * phi
    one = np.ones_like(rho)
    heat = 1.0 / (gm1 * theta)
    Ahat = _diag([theta / rho, one, one, one, one, one, one, heat], q.shape)
    Atil = _diag([theta / rho**2, one, one, one, 1 / rho, 1 / rho, 1 / rho, heat], q.shape)
    return Ahat, Atil


def ideal_energy_weights(point, law: GasLaw, eps: float) -> np.ndarray:
    """Diagonal weights ``(a, r, r, r, 1, 1, 1, 1)`` for the ideal system's energy."""
    q, _, _, Theta = _split_point(point)
    a, r = _ideal_coeff_arrays(law, Theta, q, eps)
    a = np.broadcast_to(a, q.shape)
    one = np.ones_like(q)
    return np.stack([a, r, r, r, one, one, one, one], axis=-1)


def canonical_energy(E: FullState, U: FullState, params: PhysicalParams) -> float:
    """Squared canonical energy ``int <Atilde0(U) E, E> dx`` by torus quadrature."""
    U._check()
    E.q._check_grid(U.q)
    eps, gm1 = params.eps, params.gamma - 1.0
    g = U.grid
    rho = 1.0 + eps * U.q.values
    theta = 1.0 + eps * U.phi.values
    if rho.min() <= 0 or theta.min() <= 0:
        raise StateSpaceExit("q" if rho.min() <= 0 else "phi",
                             U.q.values.min() if rho.min() <= 0 else U.phi.values.min())
    e = E.pack()
    dens = (theta / rho**2 * e[0] ** 2 + np.sum(e[IU] ** 2, axis=0)
            + np.sum(e[IH] ** 2, axis=0) / rho + e[7] ** 2 / (gm1 * theta))
    return float(g.integrate(dens))


def ideal_canonical_energy(E: IdealState, V: IdealState, law: GasLaw, eps: float) -> float:
    """Squared energy of an ideal-system difference weighted by ``diag(a, r, r, r, 1, ..., 1)``."""
    g = V.grid
    a, r = _ideal_coeff_arrays(law, V.Theta.values, V.q.values, eps)
    e = E.pack()
    dens = a * e[0] ** 2 + r * np.sum(e[IU] ** 2, axis=0) + np.sum(e[IH] ** 2, axis=0) + e[7] ** 2
    return float(g.integrate(dens))


def quasilinear_defect(U: FullState, params: PhysicalParams, U_t: FullState | None = None) -> np.ndarray:
    """Pointwise ``A0 U_t + sum_j A_j d_j U - Q(U)``, shape ``(8, *grid.shape)``.

    ``U_t`` defaults to :func:`rhs_full`; ``Q`` is evaluated pointwise with
    no truncation, so the result measures only the (small) dealiasing
    difference between the two encodings for band-limited states.
    """
    g = U.grid
    if U_t is None:
        U_t = rhs_full(U, params)
    Uh = U.pack_hat()
    point = np.moveaxis(U.pack(), 0, -1)
    A0, *Aj = assemble_matrices(point, params)
    acc = np.einsum("...ab,...b->...a", A0, np.moveaxis(U_t.pack(), 0, -1))
    for j in range(3):
        dU = np.moveaxis(g.ifft(np.stack([g.d_hat(Uh[c], j) for c in range(NCOMP)])), 0, -1)
        acc = acc + np.einsum("...ab,...b->...a", Aj[j], dU)
    mu, lam, nu, kappa, eps = params.mu, params.lam, params.nu, params.kappa, params.eps
    uh, Hh = Uh[IU], Uh[IH]
    divu_h = g.div_hat(uh)
    Ju = _Kernel(g).jac(uh)
    curlH = g.ifft(g.curl_hat(Hh))
    Q = np.zeros((NCOMP,) + g.shape)
    Q[IU] = g.ifft(mu * g.lap_hat(uh) + (mu + lam) * g.grad_hat(divu_h))
    Q[IH] = g.ifft(nu * g.lap_hat(Hh))
    Q[IP] = g.ifft(kappa * g.lap_hat(Uh[IP])) + eps * (
        _strain_terms(Ju, g.ifft(divu_h), mu, lam) + nu * np.sum(curlH**2, axis=0))
    return np.moveaxis(acc, -1, 0) - Q


def write_matrix_csv(stream: TextIO, M: np.ndarray) -> None:
    """Dump one 8x8 matrix as eight comma-separated rows."""
    M = np.asarray(M)
    if M.shape != (NCOMP, NCOMP):
        raise UsageError(f"expected an 8x8 matrix, got {M.shape}")
    np.savetxt(stream, M, delimiter=",", fmt="%.17g")


# ---------------------------------------------------------------------------
# admissible region


@dataclass(frozen=True)
class StateSpaceBox:
    """Pointwise bounds defining a compact part of the admissible state space.

    The scalar bound applies to ``phi`` for full states and ``Theta`` for
    ideal states. Containment is strict.
    """

    q_max: float = 2.0
    phi_max: float = 2.0
    u_max: float = 10.0
    H_max: float = 10.0

    def __post_init__(self):
        for f in dc_fields(self):
            if not getattr(self, f.name) > 0:
                raise UsageError(f"box bound {f.name} must be positive")

    @property
    def scalar_bound(self) -> float:
        return max(self.q_max, self.phi_max)

    def max_eps(self, margin: float = 0.9) -> float:
        """Largest ``eps`` keeping ``eps * bound <= margin``."""
        return margin / self.scalar_bound


@dataclass(frozen=True)
class BoxReport:
    ok: bool
    extrema: dict = field(default_factory=dict)
    violations: tuple = ()

    def __bool__(self):
        return self.ok


def in_state_space(state: FullState | IdealState, box: StateSpaceBox) -> BoxReport:
    """Check strict containment of pointwise extrema in ``box``."""
    scalar = state.parts()[3]
    second = state.names[3]
    ext = {
        "q": state.q.max_abs(),
        second: scalar.max_abs(),
        "u": state.u.max_abs(),
        "H": state.H.max_abs(),
    }
    bounds = {"q": box.q_max, second: box.phi_max, "u": box.u_max, "H": box.H_max}
    bad = tuple(k for k, v in ext.items() if not (np.isfinite(v) and v < bounds[k]))
    return BoxReport(not bad, ext, bad)


def energy_equivalence_constant(box: StateSpaceBox, eps: float, gamma: float) -> float:
    """``C`` with ``C^-1 |E|^2 <= <Atilde0 E, E> <= C |E|^2`` on the whole box."""
    b = eps * box.scalar_bound
    if b >= 1:
        raise UsageError("eps * box bound must be < 1")
    lo, hi = 1.0 - b, 1.0 + b
    entries_min = [lo / hi**2, 1.0, 1.0 / hi, 1.0 / ((gamma - 1.0) * hi)]
    entries_max = [hi / lo**2, 1.0, 1.0 / lo, 1.0 / ((gamma - 1.0) * lo)]
    return max(max(entries_max), 1.0 / min(entries_min))


def atilde0_min_diagonal(box: StateSpaceBox, eps: float, gamma: float) -> float:
    """Interval lower bound of the smallest diagonal entry of ``Atilde0`` over the box."""
    b = eps * box.scalar_bound
    lo, hi = 1.0 - b, 1.0 + b
    return min(lo / hi**2, 1.0, 1.0 / hi, 1.0 / ((gamma - 1.0) * hi))


def random_box_points(rng: np.random.Generator, count: int, box: StateSpaceBox,
                      fill: float = 0.99) -> np.ndarray:
    """``count`` pointwise states drawn uniformly inside ``fill`` times the box."""
    P = np.empty((count, NCOMP))
    P[:, 0] = rng.uniform(-1, 1, count) * box.q_max * fill
    P[:, 7] = rng.uniform(-1, 1, count) * box.phi_max * fill
    for sl, bound in ((IU, box.u_max), (IH, box.H_max)):
        v = rng.normal(size=(count, 3))
        v /= np.linalg.norm(v, axis=1, keepdims=True)
        P[:, sl] = v * (rng.uniform(0, 1, count) ** (1 / 3) * bound * fill)[:, None]
    return P


def max_asymmetry(M: np.ndarray) -> float:
    return float(np.max(np.abs(M - np.swapaxes(M, -1, -2))))


__all__ = [
    "PhysicalParams", "FullState", "IdealState", "GasLaw", "default_gas_law", "gas_coeffs",
    "StateSpaceBox", "BoxReport", "source_terms", "rhs_full", "full_balance", "rhs_ideal",
    "ideal_balance", "assemble_matrices", "normalized_jacobians", "symmetrizers",
    "canonical_energy", "ideal_canonical_energy", "ideal_energy_weights", "quasilinear_defect",
    "in_state_space", "energy_equivalence_constant", "atilde0_min_diagonal", "random_box_points",
    "max_asymmetry", "write_matrix_csv", "full_tendency_hat", "full_balance_hat",
    "ideal_tendency_hat", "ideal_balance_hat",
]

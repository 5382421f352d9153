"""Time integration of the eps-scaled compressible systems.

The full system is advanced by a second-order IMEX scheme: the
constant-coefficient acoustic operator ``(1/eps)(div u, grad(q+phi), 0,
(gamma-1) div u)`` together with the linear diffusion is treated by the
trapezoidal rule and solved mode by mode; everything else is explicit (Heun).
The ideal system, whose fast operator has state-dependent coefficients, is
advanced by classical RK4 with ``dt`` proportional to ``eps``.
"""

from __future__ import annotations

import enum
import logging
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .errors import LowMachError, StateSpaceExit, UsageError
from .fields import ScalarField, VectorField3, leray_project, sobolev_norm
from .grid import Grid
from .incompressible import Trajectory, _segment_steps
from .systems import (IH, IP, IQ, IU, NCOMP, FullState, GasLaw, IdealState, PhysicalParams,
                      StateSpaceBox, _ideal_coeff_arrays, full_tendency_hat, ideal_tendency_hat,
                      in_state_space)

log = logging.getLogger(__name__)

DIAGNOSTIC_COLUMNS = ("time", "mass", "divH", "maxq", "maxu", "maxH", "maxphi", "h0", "h2", "h4")


class Scheme(str, enum.Enum):
    IMEX_FULL = "imex-full"
    RK4_IDEAL = "rk4-ideal"
    RK4_FULL_EXPLICIT = "rk4-full-explicit"

    @classmethod
    def parse(cls, value) -> "Scheme":
        if isinstance(value, Scheme):
            return value
        key = str(value).strip().lower().replace("_", "-")
        aliases = {"imexfull": "imex-full", "rk4ideal": "rk4-ideal", "rk4fullexplicit": "rk4-full-explicit"}
        key = aliases.get(key.replace("-", ""), key)
        try:
            return cls(key)
        except ValueError:
            raise UsageError(f"unknown scheme {value!r}") from None


@dataclass(frozen=True)
class SchemeConfig:
    """Time-stepping choices.

    Args:
        scheme: which integrator to use.
        cfl: safety factor in (0, 1) for :func:`stable_dt`.
        dt_override: fixed step, bypassing :func:`stable_dt`.
        clean_div_every: steps between projections of ``H``.
    """

    scheme: Scheme = Scheme.IMEX_FULL
    cfl: float = 0.3
    dt_override: Optional[float] = None
    clean_div_every: int = 1

    def __post_init__(self):
        object.__setattr__(self, "scheme", Scheme.parse(self.scheme))
        if not 0 < self.cfl < 1:
            raise UsageError(f"cfl must lie in (0, 1), got {self.cfl}")
        if self.clean_div_every < 1:
            raise UsageError("clean_div_every must be >= 1")
        if self.dt_override is not None and not self.dt_override > 0:
            raise UsageError("dt_override must be positive")


# ---------------------------------------------------------------------------
# time-step control


def _max_mag(v: np.ndarray) -> float:
    return float(np.sqrt(np.max(np.sum(v * v, axis=0))))


def stable_dt(state: FullState | IdealState, params: PhysicalParams, scheme: Scheme | SchemeConfig,
              law: GasLaw | None = None, cfl: float | None = None) -> float:
    """Advisory step size for ``scheme`` at ``state``.

    ImexFull: ``cfl h / (max|u| + max|H| + 1)``, independent of eps.
    Rk4Ideal: ``cfl eps h / (max|u| + c_fast)`` with
    ``c_fast = 1/sqrt(a_min r_min) + max|H|/sqrt(r_min)``.
    Rk4FullExplicit: acoustic bound ``cfl h / (max|u| + max|H| + sqrt(gamma max theta)/eps)``
    capped by the RK4 diffusion limit.
    """
    if isinstance(scheme, SchemeConfig):
        cfl = scheme.cfl if cfl is None else cfl
        scheme = scheme.scheme
    cfl = 0.3 if cfl is None else cfl
    g = state.grid
    X = state.pack()
    umax, Hmax = _max_mag(X[IU]), _max_mag(X[IH])
    h, eps = g.h, params.eps
    if scheme is Scheme.IMEX_FULL:
        return cfl * h / (umax + Hmax + 1.0)
    if scheme is Scheme.RK4_IDEAL:
        if law is None:
            raise UsageError("Rk4Ideal needs a gas law")
        a, r = _ideal_coeff_arrays(law, X[IP], X[IQ], eps)
        a_min, r_min = float(np.min(a)), float(np.min(r))
        c_fast = 1.0 / math.sqrt(a_min * r_min) + Hmax / math.sqrt(r_min)
        return cfl * eps * h / (umax + c_fast)
    theta_max = 1.0 + eps * float(np.max(X[IP]))
    acoustic = cfl * h / (umax + Hmax + math.sqrt(params.gamma * max(theta_max, 0.0)) / eps)
    rho_min = 1.0 + eps * float(np.min(X[IQ]))
    diff = max(2 * params.mu + params.lam, params.nu, params.kappa) / max(rho_min, 1e-12)
    if diff > 0:
        acoustic = min(acoustic, cfl * 2.5 / (diff * float(np.max(g.k2))))
    return acoustic


# ---------------------------------------------------------------------------
# implicit part of the full system


class _AcousticSolver:
    """Per-mode solves of ``(I - tau L) U = b`` for the stiff linear operator ``L``."""

    def __init__(self, grid: Grid, params: PhysicalParams, tau: float):
        self.g, self.p, self.tau = grid, params, tau
        k1, k2, k3 = grid.kd
        kd2 = grid.kd2
        self.kmag = np.sqrt(kd2)
        inv = np.divide(1.0, self.kmag, out=np.zeros_like(self.kmag), where=self.kmag > 0)
        shape = grid.spectral_shape
        self.nhat = np.stack([np.broadcast_to(k * inv, shape) for k in (k1, k2, k3)])
        eps, mu, lam = params.eps, params.mu, params.lam
        k2full = grid.k2
        self.c = 1j * tau * self.kmag / eps
        self.d = 1.0 + tau * (mu * k2full + (mu + lam) * kd2)
        self.e = 1.0 + tau * params.kappa * k2full
        self.gm1 = params.gamma - 1.0
        self.denom = self.d - self.c**2 - self.gm1 * self.c**2 / self.e
        self.diag_u = 1.0 + tau * mu * k2full
        self.diag_H = 1.0 + tau * params.nu * k2full

    def apply_L(self, Uh: np.ndarray) -> np.ndarray:
        g, p = self.g, self.p
        eps = p.eps
        out = np.empty_like(Uh)
        divu = g.div_hat(Uh[IU])
        out[IQ] = -divu / eps
        out[IU] = (-g.grad_hat(Uh[IQ] + Uh[IP]) / eps + p.mu * g.lap_hat(Uh[IU])
                   + (p.mu + p.lam) * g.grad_hat(divu))
        out[IH] = p.nu * g.lap_hat(Uh[IH])
        out[IP] = -(p.gamma - 1.0) * divu / eps + p.kappa * g.lap_hat(Uh[IP])
        return out

    def solve(self, b: np.ndarray) -> np.ndarray:
        n, c, e = self.nhat, self.c, self.e
        bq, bu, bH, bp = b[IQ], b[IU], b[IH], b[IP]
        bL = np.sum(n * bu, axis=0)
        bT = bu - n * bL
        uL = (bL - c * bq - c * bp / e) / self.denom
        out = np.empty_like(b)
        out[IQ] = bq - c * uL
        out[IP] = (bp - self.gm1 * c * uL) / e
        out[IU] = bT / self.diag_u + n * uL
        out[IH] = bH / self.diag_H
        return out


def _project_H_hat(g: Grid, Uh: np.ndarray) -> np.ndarray:
    out = Uh.copy()
    out[IH] = g.project_hat(Uh[IH])
    return out


def imex_step_hat(g: Grid, Uh: np.ndarray, dt: float, params: PhysicalParams, stiff: bool = True,
                  solver: _AcousticSolver | None = None) -> np.ndarray:
    """One IMEX step (trapezoidal implicit part, Heun explicit part) on packed coefficients."""
    F = lambda X: full_tendency_hat(g, X, params)  # noqa: E731
    if not stiff:
        f0 = F(Uh)
        star = Uh + dt * f0
        return star + 0.5 * dt * (F(star) - f0)
    if solver is None or solver.tau != 0.5 * dt:
        solver = _AcousticSolver(g, params, 0.5 * dt)
    LU = solver.apply_L(Uh)
    N0 = F(Uh) - LU
    star = solver.solve(Uh + dt * N0 + 0.5 * dt * LU)
    N1 = F(star) - solver.apply_L(star)
    return star + 0.5 * dt * (N1 - N0)


def imex_step_full(U: FullState, dt: float, params: PhysicalParams, stiff: bool = True) -> FullState:
    """Advance the full system by one IMEX step.

    Args:
        U: current state.
        dt: step size.
        params: coefficients.
        stiff: if false, the acoustic and diffusive operator is treated
            explicitly as well, reducing the step to Heun's method.
    """
    if not dt > 0:
        raise UsageError("dt must be positive")
    g = U.grid
    return FullState.from_hat(g, imex_step_hat(g, U.pack_hat(), dt, params, stiff))


def _rk4(f, X: np.ndarray, dt: float) -> np.ndarray:
    k1 = f(X)
    k2 = f(X + 0.5 * dt * k1)
    k3 = f(X + 0.5 * dt * k2)
    k4 = f(X + dt * k3)
    return X + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)


def rk4_step_ideal(V: IdealState, law: GasLaw, eps: float, dt: float) -> IdealState:
    """Classical RK4 step of the ideal system (``dt`` may be negative)."""
    g = V.grid
    out = _rk4(lambda X: ideal_tendency_hat(g, X, law, eps), V.pack_hat(), dt)
    if not np.all(np.isfinite(out)):
        raise StateSpaceExit("q", float("nan"), "non-finite ideal state")
    return IdealState.from_hat(g, out)


def rk4_step_full(U: FullState, dt: float, params: PhysicalParams) -> FullState:
    """Classical RK4 step of the full system (explicit cross-check path)."""
    g = U.grid
    return FullState.from_hat(g, _rk4(lambda X: full_tendency_hat(g, X, params), U.pack_hat(), dt))


def clean_divergence(H: VectorField3) -> VectorField3:
    """Project ``H`` onto divergence-free fields."""
    return leray_project(H)


# ---------------------------------------------------------------------------
# driver


def ideal_mass(V: IdealState, law: GasLaw, eps: float) -> float:
    """``int (R(S, p) - R(S_base, p_base)) / eps``, the conserved mass of the ideal system."""
    g = V.grid
    S = law.S_base + eps * V.Theta.values
    p = law.p_base * np.exp(eps * V.q.values)
    R = np.asarray(law.density_fn(S, p))
    R0 = float(law.density_fn(np.array(law.S_base), np.array(law.p_base)))
    return float(g.integrate(R - R0)) / eps


def state_diagnostics(state: FullState | IdealState, t: float, params: PhysicalParams,
                      law: GasLaw | None = None) -> dict[str, float]:
    """One diagnostics row (see ``DIAGNOSTIC_COLUMNS``)."""
    g = state.grid
    Xh = state.pack_hat()
    divH = ScalarField(g, spectral=g.div_hat(Xh[IH]))
    if isinstance(state, IdealState):
        if law is None:
            raise UsageError("ideal diagnostics need the gas law")
        mass = ideal_mass(state, law, params.eps)
    else:
        mass = float(g.integrate(state.q.values))
    row = {
        "time": float(t),
        "mass": mass,
        "divH": sobolev_norm(divH, 0),
        "maxq": state.q.max_abs(),
        "maxu": state.u.max_abs(),
        "maxH": state.H.max_abs(),
        "maxphi": state.parts()[3].max_abs(),
    }
    for s in (0, 2, 4):
        power = np.sum(np.abs(Xh) ** 2, axis=0)
        row[f"h{s}"] = float(np.sqrt(g.sum_spectrum((1 + g.k2) ** s * power) * (2 * np.pi) ** 3))
    return row


def solve_compressible(init: FullState | IdealState, T: float, scheme: SchemeConfig,
                       params: PhysicalParams, law: GasLaw | None = None,
                       out_times: Sequence[float] | None = None,
                       box: StateSpaceBox | None = None) -> Trajectory:
    """Integrate a compressible system to ``T``, landing on every output time.

    The step size is taken from ``scheme.dt_override`` or re-evaluated by
    :func:`stable_dt` at the start of every output interval. Leaving the
    state-space box or producing non-finite values truncates the trajectory;
    its ``last_good_time`` is the achieved final time.
    """
    if T < 0:
        raise UsageError("T must be nonnegative")
    ideal = isinstance(init, IdealState)
    if ideal != (scheme.scheme is Scheme.RK4_IDEAL):
        raise UsageError(f"scheme {scheme.scheme.value} does not match state type {type(init).__name__}")
    if ideal and law is None:
        raise UsageError("ideal runs need a gas law")
    box = box or StateSpaceBox()
    g = init.grid
    cls = type(init)
    times = sorted(set(float(t) for t in (out_times if out_times is not None else [0.0, T])) | {0.0, float(T)})
    if T == 0:
        times = [0.0]
    if times[-1] > T * (1 + 1e-12) + 1e-300:
        raise UsageError("output times must lie in [0, T]")

    if scheme.scheme is Scheme.IMEX_FULL:
        cache: dict[float, _AcousticSolver] = {}

        def advance(X, h):
            solver = cache.get(h)
            if solver is None:
                solver = cache[h] = _AcousticSolver(g, params, 0.5 * h)
                if len(cache) > 8:
                    cache.pop(next(iter(cache)))
            return imex_step_hat(g, X, h, params, solver=solver)
    elif scheme.scheme is Scheme.RK4_IDEAL:
        def advance(X, h):
            return _rk4(lambda Y: ideal_tendency_hat(g, Y, law, params.eps), X, h)
    else:
        def advance(X, h):
            return _rk4(lambda Y: full_tendency_hat(g, Y, params), X, h)

    traj = Trajectory(metadata={"system": "ideal" if ideal else "full", "scheme": scheme.scheme.value,
                                "eps": params.eps, "cfl": scheme.cfl, "n": g.n,
                                "dim_mode": g.dim_mode.value})
    Xh = init.pack_hat()
    state = init
    traj.append(0.0, state, diagnostics=state_diagnostics(state, 0.0, params, law))
    report = in_state_space(state, box)
    if not report:
        traj.truncate(f"initial state outside box: {', '.join(report.violations)}")
        return traj
    t, nstep, dts = 0.0, 0, []
    try:
        for t_next in times[1:]:
            dt = scheme.dt_override or stable_dt(state, params, scheme, law)
            for h in _segment_steps(t_next - t, dt):
                Xh = advance(Xh, h)
                nstep += 1
                if nstep % scheme.clean_div_every == 0:
                    Xh = _project_H_hat(g, Xh)
                if not np.all(np.isfinite(Xh)):
                    raise StateSpaceExit("q", float("nan"), f"non-finite state at t = {t + h:.4g}")
                t += h
                state = cls.from_hat(g, Xh)
                report = in_state_space(state, box)
                if not report:
                    bad = report.violations[0]
                    raise StateSpaceExit(bad, report.extrema[bad], f"left state-space box on {bad} "
                                         f"(|{bad}| = {report.extrema[bad]:.4g}) at t = {t:.4g}")
                dts.append(h)
            t = t_next
            traj.append(t_next, state, diagnostics=state_diagnostics(state, t_next, params, law))
    except LowMachError as exc:
        log.warning("compressible solve truncated: %s", exc)
        traj.truncate(str(exc))
    traj.metadata["steps"] = nstep
    traj.metadata["dt_max"] = max(dts) if dts else 0.0
    return traj


__all__ = [
    "Scheme", "SchemeConfig", "stable_dt", "imex_step_full", "imex_step_hat", "rk4_step_ideal",
    "rk4_step_full", "clean_divergence", "solve_compressible", "state_diagnostics", "ideal_mass",
    "DIAGNOSTIC_COLUMNS", "NCOMP",
]

"""Incompressible MHD limit systems: time stepping and pressure recovery.

Two limit modes share one solver:

* ``Viscous(mu, nu)``: ``w_t + w.grad w + grad pi + grad|B|^2/2 - B.grad B = mu lap w``
  and ``B_t + w.grad B - B.grad w = nu lap B``;
* ``Ideal(r0)``: ``r0 (v_t + v.grad v) - curl J x J + grad Pi = 0`` and
  ``J_t + v.grad J - J.grad v = 0``.

Both are advanced in Leray-projected form by a Lawson (integrating factor)
fourth-order Runge-Kutta scheme. Pressure is a mean-zero diagnostic.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Any, Sequence, Union

import numpy as np

from .errors import LowMachError, StabilityError, StateSpaceExit, UsageError
from .fields import ScalarField, VectorField3
from .grid import TORUS_VOLUME, Grid

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class Viscous:
    mu: float
    nu: float

    def __post_init__(self):
        if self.mu < 0 or self.nu < 0:
            raise UsageError("limit diffusivities must be nonnegative")


@dataclass(frozen=True)
class Ideal:
    r0: float = 1.0

    def __post_init__(self):
        if not self.r0 > 0:
            raise UsageError("ideal limit density r0 must be positive")


LimitMode = Union[Viscous, Ideal]


@dataclass(frozen=True, eq=False)
class LimitState:
    """Incompressible state: velocity, magnetic field and mean-zero pressure."""

    vel: VectorField3
    mag: VectorField3
    pressure: ScalarField
    mode: LimitMode

    @property
    def grid(self) -> Grid:
        return self.vel.grid

    @classmethod
    def from_fields(cls, vel: VectorField3, mag: VectorField3, mode: LimitMode) -> "LimitState":
        """Build a state from divergence-free fields, recovering the pressure."""
        vel._check_grid(mag)
        return cls(vel, mag, recover_pressure(vel, mag, mode), mode)

    @classmethod
    def from_hat(cls, grid: Grid, Wh: np.ndarray, mode: LimitMode) -> "LimitState":
        vel = VectorField3(grid, spectral=Wh[:3])
        mag = VectorField3(grid, spectral=Wh[3:])
        return cls(vel, mag, ScalarField(grid, spectral=_pressure_hat(grid, Wh, mode)), mode)

    def pack_hat(self) -> np.ndarray:
        return np.concatenate([self.vel.spectral, self.mag.spectral])

    def pack(self) -> np.ndarray:
        """Physical samples ``(vel1..3, mag1..3, pressure)``."""
        return np.concatenate([self.vel.values, self.mag.values, self.pressure.values[None]])

    def energy(self) -> float:
        """``(|w|^2 + |B|^2)/2`` (viscous) or ``(r0 |v|^2 + |J|^2)/2`` (ideal)."""
        rho = self.mode.r0 if isinstance(self.mode, Ideal) else 1.0
        g = self.grid
        return 0.5 * float(g.integrate(rho * np.sum(self.vel.values**2, 0) + np.sum(self.mag.values**2, 0)))


@dataclass
class Trajectory:
    """Time series of snapshots with optional per-snapshot extras.

    Attributes:
        times: strictly increasing output times.
        snapshots: one state per time (limit or compressible).
        extras: named per-snapshot series (fields or numbers).
        metadata: free-form run description.
        status: ``"ok"`` or ``"truncated"``.
        last_good_time: time of the last valid snapshot.
        message: reason for truncation, if any.
    """

    times: list[float] = field(default_factory=list)
    snapshots: list[Any] = field(default_factory=list)
    extras: dict[str, list] = field(default_factory=dict)
    metadata: dict[str, Any] = field(default_factory=dict)
    status: str = "ok"
    last_good_time: float = 0.0
    message: str = ""

    def append(self, t: float, snap: Any, **extras) -> None:
        if self.times and not t > self.times[-1]:
            raise UsageError("trajectory times must increase strictly")
        if self.snapshots and snap.grid != self.snapshots[0].grid:
            raise UsageError("trajectory snapshots must share one grid")
        self.times.append(float(t))
        self.snapshots.append(snap)
        for k, v in extras.items():
            self.extras.setdefault(k, []).append(v)
        self.last_good_time = float(t)

    @property
    def grid(self) -> Grid:
        return self.snapshots[0].grid

    @property
    def ok(self) -> bool:
        return self.status == "ok"

    def truncate(self, message: str) -> None:
        self.status = "truncated"
        self.message = message

    def save(self, outdir, components: Sequence[str] | None = None):
        """Write snapshots and manifest with the binary snapshot format."""
        from .snapshot import save_trajectory_dir

        first = self.snapshots[0]
        if components is None:
            if isinstance(first, LimitState):
                components = ("vel1", "vel2", "vel3", "mag1", "mag2", "mag3", "pressure")
            else:
                components = ("q", "u1", "u2", "u3", "H1", "H2", "H3", first.names[3])
        meta = dict(self.metadata)
        meta.update(status=self.status, last_good_time=repr(self.last_good_time))
        return save_trajectory_dir(outdir, self.grid, self.times, (s.pack() for s in self.snapshots),
                                   components, meta)


# ---------------------------------------------------------------------------
# spectral kernels on packed coefficients Wh = (vel_hat[3], mag_hat[3])


def _masked(g: Grid, a: np.ndarray) -> np.ndarray:
    return g.fft(a) * g.mask


def _jac(g: Grid, vh: np.ndarray) -> np.ndarray:
    return g.ifft(np.stack([g.grad_hat(vh[i]) for i in range(3)]))


def _adv(a: np.ndarray, J: np.ndarray) -> np.ndarray:
    return np.einsum("j...,ij...->i...", a, J)


def _advection_terms(g: Grid, Wh: np.ndarray):
    """Masked ``(w.grad w, B.grad B, w.grad B, B.grad w)`` spectra."""
    w, B = g.ifft(Wh[:3]), g.ifft(Wh[3:])
    Jw, JB = _jac(g, Wh[:3]), _jac(g, Wh[3:])
    return (_masked(g, _adv(w, Jw)), _masked(g, _adv(B, JB)),
            _masked(g, _adv(w, JB)), _masked(g, _adv(B, Jw)))


def nonlinear_hat(g: Grid, Wh: np.ndarray, mode: LimitMode) -> np.ndarray:
    """Projected nonlinear tendency (without diffusion)."""
    ww, BB, wB, Bw = _advection_terms(g, Wh)
    scale = 1.0 / mode.r0 if isinstance(mode, Ideal) else 1.0
    return np.concatenate([g.project_hat(-ww + scale * BB), g.project_hat(-wB + Bw)])


def _diffusion_rates(g: Grid, mode: LimitMode) -> np.ndarray:
    """Per-component decay rates ``c`` in ``W_t = -c |k|^2 W``, shape ``(6, 1.., spec)``."""
    if isinstance(mode, Ideal):
        return np.zeros((6,) + (1,) * g.ndim)
    c = np.array([mode.mu] * 3 + [mode.nu] * 3)
    return c.reshape((6,) + (1,) * g.ndim)


def limit_tendency_hat(g: Grid, Wh: np.ndarray, mode: LimitMode) -> np.ndarray:
    """Full time derivative of the packed limit state."""
    return nonlinear_hat(g, Wh, mode) - _diffusion_rates(g, mode) * g.k2 * Wh


def _pressure_hat(g: Grid, Wh: np.ndarray, mode: LimitMode) -> np.ndarray:
    ww, BB, _, _ = _advection_terms(g, Wh)
    B = g.ifft(Wh[3:])
    rho = mode.r0 if isinstance(mode, Ideal) else 1.0
    half_b2 = 0.5 * _masked(g, np.sum(B * B, axis=0))
    ph = g.poisson_hat(g.div_hat(BB - rho * ww)) - half_b2
    ph.flat[0] = 0.0
    return ph


def _pressure_rate_hat(g: Grid, Wh: np.ndarray, Wt_h: np.ndarray, mode: LimitMode) -> np.ndarray:
    """Exact time derivative of the discrete pressure along ``Wt_h``."""
    w, B = g.ifft(Wh[:3]), g.ifft(Wh[3:])
    wt, Bt = g.ifft(Wt_h[:3]), g.ifft(Wt_h[3:])
    Jw, JB = _jac(g, Wh[:3]), _jac(g, Wh[3:])
    Jwt, JBt = _jac(g, Wt_h[:3]), _jac(g, Wt_h[3:])
    rho = mode.r0 if isinstance(mode, Ideal) else 1.0
    rhs = _masked(g, _adv(Bt, JB) + _adv(B, JBt) - rho * (_adv(wt, Jw) + _adv(w, Jwt)))
    ph = g.poisson_hat(g.div_hat(rhs)) - _masked(g, np.sum(B * Bt, axis=0))
    ph.flat[0] = 0.0
    return ph


def dissipation_rate(g: Grid, Wh: np.ndarray, mode: LimitMode) -> float:
    """``mu |grad w|^2 + nu |grad B|^2`` (zero in ideal mode)."""
    if isinstance(mode, Ideal):
        return 0.0
    pw = g.sum_spectrum(g.k2 * np.sum(np.abs(Wh[:3]) ** 2, axis=0))
    pb = g.sum_spectrum(g.k2 * np.sum(np.abs(Wh[3:]) ** 2, axis=0))
    return float(TORUS_VOLUME * (mode.mu * pw + mode.nu * pb))


def advective_dt_limit(g: Grid, Wh: np.ndarray) -> float:
    """Largest ``dt`` with ``dt (max|w| + max|B|) <= h``."""
    w, B = g.ifft(Wh[:3]), g.ifft(Wh[3:])
    speed = np.sqrt(np.max(np.sum(w * w, 0))) + np.sqrt(np.max(np.sum(B * B, 0)))
    return math.inf if speed == 0 else g.h / speed


def lawson_rk4_hat(g: Grid, Wh: np.ndarray, dt: float, mode: LimitMode) -> tuple[np.ndarray, float]:
    """One Lawson RK4 step; also returns the RK4 quadrature of the dissipation rate."""
    rates = _diffusion_rates(g, mode) * g.k2
    E_half = np.exp(-rates * (0.5 * dt))
    E_full = E_half * E_half
    N = lambda X: nonlinear_hat(g, X, mode)  # noqa: E731
    D = lambda X: dissipation_rate(g, X, mode)  # noqa: E731
    s1 = Wh
    k1 = N(s1)
    s2 = E_half * (Wh + 0.5 * dt * k1)
    k2 = N(s2)
    s3 = E_half * Wh + 0.5 * dt * k2
    k3 = N(s3)
    s4 = E_full * Wh + dt * E_half * k3
    k4 = N(s4)
    out = E_full * Wh + dt / 6.0 * (E_full * k1 + 2.0 * E_half * (k2 + k3) + k4)
    diss = dt / 6.0 * (D(s1) + 2.0 * D(s2) + 2.0 * D(s3) + D(s4))
    return out, diss


# ---------------------------------------------------------------------------
# public field-level API


def recover_pressure(vel: VectorField3, mag: VectorField3, mode: LimitMode) -> ScalarField:
    """Mean-zero pressure from ``lap(pi + |B|^2/2) = div(B.grad B - rho w.grad w)``.

    ``rho`` is 1 in viscous mode and ``r0`` in ideal mode.
    """
    vel._check_grid(mag)
    g = vel.grid
    Wh = np.concatenate([vel.spectral, mag.spectral])
    return ScalarField(g, spectral=_pressure_hat(g, Wh, mode))


def limit_tendency(state: LimitState) -> tuple[VectorField3, VectorField3]:
    """``(vel_t, mag_t)`` from the projected equations."""
    g = state.grid
    Wt = limit_tendency_hat(g, state.pack_hat(), state.mode)
    return VectorField3(g, spectral=Wt[:3]), VectorField3(g, spectral=Wt[3:])


def pressure_rate(state: LimitState) -> ScalarField:
    """``pi_t`` by the time-differentiated Poisson problem with analytic tendencies."""
    g = state.grid
    Wh = state.pack_hat()
    Wt = limit_tendency_hat(g, Wh, state.mode)
    return ScalarField(g, spectral=_pressure_rate_hat(g, Wh, Wt, state.mode))


def material_dt_pressure(state: LimitState) -> ScalarField:
    """``pi_t + w.grad pi`` with the advective product dealiased."""
    g = state.grid
    pt = pressure_rate(state)
    adv = g.ifft(g.grad_hat(state.pressure.spectral))
    adv = _masked(g, np.einsum("j...,j...->...", state.vel.values, adv))
    return ScalarField(g, spectral=pt.spectral + adv)


def step_limit(state: LimitState, dt: float, force: bool = False) -> LimitState:
    """Advance one Lawson RK4 step and refresh the pressure.

    Raises:
        StabilityError: if ``dt`` exceeds the advective limit and ``force`` is false.
    """
    if not dt > 0:
        raise UsageError("dt must be positive")
    g = state.grid
    Wh = state.pack_hat()
    limit = advective_dt_limit(g, Wh)
    if dt > limit and not force:
        raise StabilityError(f"dt = {dt:.3g} exceeds advective limit {limit:.3g}")
    new, _ = lawson_rk4_hat(g, Wh, dt, state.mode)
    return LimitState.from_hat(g, new, state.mode)


def _segment_steps(span: float, dt: float) -> list[float]:
    """Full ``dt`` steps followed by one shortened step landing on ``span``."""
    n_full = int(math.floor(span / dt * (1 + 1e-12)))
    steps = [dt] * n_full
    rest = span - n_full * dt
    if rest > 1e-12 * max(dt, span):
        steps.append(rest)
    return steps


def _limit_record(g: Grid, Wh: np.ndarray, mode: LimitMode, state: LimitState | None = None):
    if state is None:
        state = LimitState.from_hat(g, Wh, mode)
    Wt = limit_tendency_hat(g, Wh, mode)
    pt = _pressure_rate_hat(g, Wh, Wt, mode)
    grad_p = g.ifft(g.grad_hat(state.pressure.spectral))
    mat = pt + _masked(g, np.einsum("j...,j...->...", state.vel.values, grad_p))
    extras = {
        "vel_rate": VectorField3(g, spectral=Wt[:3]),
        "mag_rate": VectorField3(g, spectral=Wt[3:]),
        "pressure_rate": ScalarField(g, spectral=pt),
        "material_dt_pressure": ScalarField(g, spectral=mat),
        "energy": state.energy(),
    }
    return state, extras


def solve_limit(init: LimitState, T: float, dt: float, out_times: Sequence[float] | None = None,
                force: bool = False) -> Trajectory:
    """Integrate the limit system to ``T``, storing snapshots at ``out_times``.

    Each snapshot carries the pressure and, as extras, the analytic
    tendencies, the pressure rate, its material derivative, the energy and
    the cumulative dissipation integral. A non-finite state or a stability
    violation truncates the trajectory instead of raising.
    """
    if T < 0 or not dt > 0:
        raise UsageError("need T >= 0 and dt > 0")
    times = sorted(set(float(t) for t in (out_times if out_times is not None else [0.0, T])))
    times = sorted(set(times) | {0.0, float(T)}) if T > 0 else [0.0]
    if times[0] < 0 or times[-1] > T * (1 + 1e-12) + 1e-300:
        raise UsageError("output times must lie in [0, T]")
    g, mode = init.grid, init.mode
    traj = Trajectory(metadata={"system": "limit", "mode": type(mode).__name__.lower(),
                                "dt": dt, "scheme": "lawson-rk4", "n": g.n,
                                "dim_mode": g.dim_mode.value})
    Wh = init.pack_hat()
    t, dissipated = 0.0, 0.0
    state, extras = _limit_record(g, Wh, mode, init)
    traj.append(0.0, state, dissipated=0.0, **extras)
    try:
        for t_next in times[1:]:
            for h in _segment_steps(t_next - t, dt):
                limit = advective_dt_limit(g, Wh)
                if h > limit and not force:
                    raise StabilityError(f"dt = {h:.3g} exceeds advective limit {limit:.3g} at t = {t:.4g}")
                Wh, d = lawson_rk4_hat(g, Wh, h, mode)
                dissipated += d
                if not np.all(np.isfinite(Wh)):
                    raise StateSpaceExit("vel", float("nan"), f"non-finite state at t = {t + h:.4g}")
                t += h
            t = t_next
            state, extras = _limit_record(g, Wh, mode)
            traj.append(t_next, state, dissipated=dissipated, **extras)
    except LowMachError as exc:
        log.warning("limit solve truncated: %s", exc)
        traj.truncate(str(exc))
    return traj

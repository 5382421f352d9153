"""Asymptotic approximations built from limit trajectories, and error analysis.

For the full system the approximation of the compressible state is
``(eps pi/2, w, B, eps pi/2)``; for the ideal system it is
``(eps Pi, v, J, eps Pi)``. The residual left when these are substituted
into the compressible equations is evaluated two ways: from its closed
form and by direct substitution. The two must agree to roundoff.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from .errors import InsufficientPointsError, MissingSnapshotError, UsageError
from .fields import ScalarField
from .grid import TORUS_VOLUME, Grid
from .incompressible import Ideal, LimitState, Trajectory, Viscous
from .systems import (IH, IP, IQ, IU, NCOMP, FullState, GasLaw, IdealState, PhysicalParams,
                      _ideal_coeff_arrays, canonical_energy, full_balance_hat,
                      ideal_balance_hat, ideal_canonical_energy)

DEFAULT_S = (0, 2, 4)


@dataclass
class ApproxTrajectory:
    times: list[float]
    states: list


@dataclass
class ResidualSeries:
    """Residual rows per time, from the closed form and from direct substitution.

    Attributes:
        times: snapshot times.
        displayed: packed residual spectra ``(8, ...)`` from the closed form.
        direct: packed defects from substituting the approximation.
        norms: ``s -> [||R(t)||_s]`` for the closed-form residual.
        row_norms: ``row name -> s -> [norm]``.
        mismatch: L2 norm of ``displayed - direct`` per time.
    """

    times: list[float]
    displayed: list[np.ndarray] = field(default_factory=list)
    direct: list[np.ndarray] = field(default_factory=list)
    norms: dict[int, list[float]] = field(default_factory=dict)
    row_norms: dict[str, dict[int, list[float]]] = field(default_factory=dict)
    mismatch: list[float] = field(default_factory=list)

    def max_norm(self, s: int = 2) -> float:
        return max(self.norms[s])

    def max_row_norm(self, row: str, s: int = 2) -> float:
        return max(self.row_norms[row][s])


@dataclass
class ErrorSeries:
    times: list[float]
    norms: dict[float, list[float]]
    canonical: list[float]

    def sup(self, s: float) -> float:
        return max(self.norms[s])

    @property
    def sup_canonical(self) -> float:
        return max(self.canonical)


@dataclass(frozen=True)
class RateFit:
    """Least-squares fit ``log err = p log eps + log K``."""

    eps_list: tuple[float, ...]
    errors: tuple[float, ...]
    slope: float
    K: float
    max_residual: float

    def summary(self, label: str = "error") -> str:
        lines = [f"rate fit for {label}",
                 f"  points       : {len(self.eps_list)}",
                 f"  slope p      : {self.slope:.6f}",
                 f"  constant K   : {self.K:.6g}",
                 f"  max |resid|  : {self.max_residual:.3e}"]
        for e, v in zip(self.eps_list, self.errors):
            lines.append(f"  eps={e:<10.6g} err={v:.6e} err/eps={v / e:.6e}")
        return "\n".join(lines)


# ---------------------------------------------------------------------------
# helpers


def _packed_norm(g: Grid, Xh: np.ndarray, s: float) -> float:
    power = np.sum(np.abs(Xh) ** 2, axis=0)
    return float(math.sqrt(g.sum_spectrum((1.0 + g.k2) ** s * power) * TORUS_VOLUME))


def _masked(g: Grid, a: np.ndarray) -> np.ndarray:
    return g.fft(a) * g.mask


def _require_limit(limit: Trajectory, mode_type) -> None:
    if not limit.snapshots or not all(isinstance(s, LimitState) for s in limit.snapshots):
        raise MissingSnapshotError("trajectory does not hold limit-system snapshots")
    if not isinstance(limit.snapshots[0].mode, mode_type):
        raise MissingSnapshotError(f"expected a {mode_type.__name__.lower()}-mode limit trajectory")
    for key in ("vel_rate", "mag_rate", "pressure_rate", "material_dt_pressure"):
        if len(limit.extras.get(key, ())) != len(limit.snapshots):
            raise MissingSnapshotError(f"limit trajectory lacks {key!r} snapshots")


def _approx_state(cls, snap: LimitState, scale: float):
    p = snap.pressure.spectral * scale
    g = snap.grid
    return cls(ScalarField(g, spectral=p), snap.vel, snap.mag, ScalarField(g, spectral=p))


# ---------------------------------------------------------------------------
# approximations


def build_approx_full(limit: Trajectory, eps: float) -> ApproxTrajectory:
    """``(eps pi/2, w, B, eps pi/2)`` at every limit snapshot."""
    if not limit.snapshots or not all(isinstance(s, LimitState) for s in limit.snapshots):
        raise MissingSnapshotError("limit trajectory has no pressure snapshots")
    return ApproxTrajectory(list(limit.times), [_approx_state(FullState, s, 0.5 * eps) for s in limit.snapshots])


def build_approx_ideal(limit: Trajectory, eps: float) -> ApproxTrajectory:
    """``(eps Pi, v, J, eps Pi)`` at every limit snapshot."""
    if not limit.snapshots or not all(isinstance(s, LimitState) for s in limit.snapshots):
        raise MissingSnapshotError("limit trajectory has no pressure snapshots")
    return ApproxTrajectory(list(limit.times), [_approx_state(IdealState, s, eps) for s in limit.snapshots])


def _finish_residual(series: ResidualSeries, g: Grid, disp: np.ndarray, direct: np.ndarray,
                     s_list: Sequence[float], row_names: Sequence[str]) -> None:
    series.displayed.append(disp)
    series.direct.append(direct)
    series.mismatch.append(_packed_norm(g, disp - direct, 0))
    for s in s_list:
        series.norms.setdefault(s, []).append(_packed_norm(g, disp, s))
    slices = dict(zip(row_names, (slice(0, 1), IU, IH, slice(7, 8))))
    for name, sl in slices.items():
        for s in s_list:
            series.row_norms.setdefault(name, {}).setdefault(s, []).append(_packed_norm(g, disp[sl], s))


def residual_full(limit: Trajectory, eps: float, params: PhysicalParams,
                  s_list: Sequence[float] = DEFAULT_S) -> ResidualSeries:
    """Residual of the full-system approximation.

    Closed form, with ``X = pi_t + w.grad pi`` and ``Y = w_t + w.grad w + grad pi``:
    rows ``(eps/2 X, eps^2/2 pi Y, 0, eps/2 X + eps^3/4 pi X)``. The direct
    evaluation substitutes the approximation into the full equations and
    subtracts ``(0, mu lap w, nu lap B, 0)``.
    """
    _require_limit(limit, Viscous)
    p = params.with_eps(eps)
    series = ResidualSeries(list(limit.times))
    for k, snap in enumerate(limit.snapshots):
        g = snap.grid
        Xh = limit.extras["material_dt_pressure"][k].spectral
        wt_h = limit.extras["vel_rate"][k].spectral
        Bt_h = limit.extras["mag_rate"][k].spectral
        pt_h = limit.extras["pressure_rate"][k].spectral
        pi = snap.pressure.values
        w = snap.vel.values
        Jw = g.ifft(np.stack([g.grad_hat(snap.vel.spectral[i]) for i in range(3)]))
        adv = _masked(g, np.einsum("j...,ij...->i...", w, Jw))
        Yh = wt_h + adv + g.grad_hat(snap.pressure.spectral)
        disp = np.zeros((NCOMP,) + g.spectral_shape, dtype=complex)
        disp[IQ] = 0.5 * eps * Xh
        disp[IU] = 0.5 * eps**2 * _masked(g, pi * g.ifft(Yh))
        disp[IP] = 0.5 * eps * Xh + 0.25 * eps**3 * _masked(g, pi * g.ifft(Xh))

        U = _approx_state(FullState, snap, 0.5 * eps).pack_hat()
        Ut = np.concatenate([0.5 * eps * pt_h[None], wt_h, Bt_h, 0.5 * eps * pt_h[None]])
        direct = full_balance_hat(g, U, Ut, p, source="S")
        _finish_residual(series, g, disp, direct, s_list, ("q", "u", "H", "phi"))
    return series


def residual_ideal(limit: Trajectory, eps: float, law: GasLaw,
                   s_list: Sequence[float] = DEFAULT_S) -> ResidualSeries:
    """Residual of the ideal-system approximation.

    Closed form, with ``X = Pi_t + v.grad Pi`` and ``Y = v_t + v.grad v``:
    rows ``(eps a X, (r - r0) Y, 0, eps X)`` where ``a`` and ``r`` are taken
    at ``Theta = q = eps Pi``. The momentum row uses the gradient of
    ``|J|^2/2``.
    """
    _require_limit(limit, Ideal)
    r0 = limit.snapshots[0].mode.r0
    if not math.isclose(r0, law.r0, rel_tol=1e-12):
        raise UsageError(f"limit density r0 = {r0} does not match the gas law ({law.r0})")
    series = ResidualSeries(list(limit.times))
    for k, snap in enumerate(limit.snapshots):
        g = snap.grid
        Xh = limit.extras["material_dt_pressure"][k].spectral
        vt_h = limit.extras["vel_rate"][k].spectral
        Jt_h = limit.extras["mag_rate"][k].spectral
        pt_h = limit.extras["pressure_rate"][k].spectral
        Pi = snap.pressure.values
        v = snap.vel.values
        a, r = _ideal_coeff_arrays(law, eps * Pi, eps * Pi, eps)
        Jv = g.ifft(np.stack([g.grad_hat(snap.vel.spectral[i]) for i in range(3)]))
        Yh = vt_h + _masked(g, np.einsum("j...,ij...->i...", v, Jv))
        disp = np.zeros((NCOMP,) + g.spectral_shape, dtype=complex)
        disp[IQ] = eps * _masked(g, a * g.ifft(Xh))
        disp[IU] = _masked(g, (r - r0) * g.ifft(Yh))
        disp[IP] = eps * Xh

        V = _approx_state(IdealState, snap, eps).pack_hat()
        Vt = np.concatenate([eps * pt_h[None], vt_h, Jt_h, eps * pt_h[None]])
        direct = ideal_balance_hat(g, V, Vt, law, eps)
        _finish_residual(series, g, disp, direct, s_list, ("q", "u", "H", "Theta"))
    return series


# ---------------------------------------------------------------------------
# initial data


def _random_band(g: Grid, rng: np.random.Generator, ncomp: int, kmax: float) -> np.ndarray:
    shape = (ncomp,) + g.spectral_shape
    c = rng.standard_normal(shape) + 1j * rng.standard_normal(shape)
    keep = (g.k2 <= kmax**2) & (g.k2 > 0) & g.mask
    return g.ifft(c * keep)


def well_prepared_init(limit0: LimitState, eps: float, perturbation_amplitude: float = 0.0,
                       seed: int = 0, s: float = 2.0, kmax: float = 4.0) -> FullState | IdealState:
    """Approximation at ``t = 0`` plus an optional seeded perturbation.

    The perturbation is band-limited to ``|k| <= kmax``, mean zero, with
    divergence-free velocity and magnetic parts; its combined ``H^s`` norm
    is exactly ``perturbation_amplitude * eps``. A viscous-mode state yields
    a :class:`FullState`, an ideal-mode state an :class:`IdealState`.
    """
    if perturbation_amplitude < 0:
        raise UsageError("perturbation amplitude must be nonnegative")
    if isinstance(limit0.mode, Ideal):
        base = _approx_state(IdealState, limit0, eps)
    else:
        base = _approx_state(FullState, limit0, 0.5 * eps)
    if perturbation_amplitude == 0:
        return base
    g = limit0.grid
    rng = np.random.default_rng(seed)
    pert = _random_band(g, rng, NCOMP, kmax)
    ph = g.fft(pert)
    ph[IU] = g.project_hat(ph[IU])
    ph[IH] = g.project_hat(ph[IH])
    norm = _packed_norm(g, ph, s)
    ph *= perturbation_amplitude * eps / norm
    cls = type(base)
    return cls.from_hat(g, base.pack_hat() + ph)


# ---------------------------------------------------------------------------
# errors and rates


def error_series(full: Trajectory, approx: ApproxTrajectory, s_list: Sequence[float] = DEFAULT_S,
                 params: PhysicalParams | None = None, law: GasLaw | None = None) -> ErrorSeries:
    """Errors ``E = U - U_approx`` at the shared snapshot times.

    Norms are the packed ``H^s`` norms; the canonical column is the square
    root of the symmetrizer-weighted energy (full system) or of the
    ``diag(a, r, r, r, 1, ...)`` energy (ideal system). A truncated
    compressible trajectory is compared over its common prefix.
    """
    n = min(len(full.times), len(approx.times))
    if n == 0:
        raise UsageError("no snapshots to compare")
    if not np.allclose(full.times[:n], approx.times[:n], rtol=0, atol=1e-12):
        raise UsageError("trajectories do not share output times")
    if full.snapshots[0].grid != approx.states[0].grid:
        raise UsageError("trajectories do not share a grid")
    norms: dict[float, list[float]] = {s: [] for s in s_list}
    canonical: list[float] = []
    for U, A in zip(full.snapshots[:n], approx.states[:n]):
        if type(U) is not type(A):
            raise UsageError("state types differ between trajectories")
        E = U - A
        Eh = E.pack_hat()
        for s in s_list:
            norms[s].append(_packed_norm(U.grid, Eh, s))
        if isinstance(U, FullState) and params is not None:
            canonical.append(math.sqrt(max(canonical_energy(E, U, params), 0.0)))
        elif isinstance(U, IdealState) and law is not None and params is not None:
            canonical.append(math.sqrt(max(ideal_canonical_energy(E, U, law, params.eps), 0.0)))
        else:
            canonical.append(float("nan"))
    return ErrorSeries(list(full.times[:n]), norms, canonical)


def fit_rate(sweep: Iterable[tuple[float, float]]) -> RateFit:
    """Fit ``log err = p log eps + log K`` by least squares.

    Raises:
        InsufficientPointsError: fewer than three points.
        UsageError: a nonpositive epsilon or error.
    """
    pts = sorted(((float(e), float(v)) for e, v in sweep), reverse=True)
    if len(pts) < 3:
        raise InsufficientPointsError(f"need at least 3 points to fit a rate, got {len(pts)}")
    eps = np.array([p[0] for p in pts])
    err = np.array([p[1] for p in pts])
    if np.any(eps <= 0) or np.any(err <= 0) or not np.all(np.isfinite(err)):
        raise UsageError("rate fit needs positive finite eps and error values")
    x, y = np.log(eps), np.log(err)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    return RateFit(tuple(eps.tolist()), tuple(err.tolist()), float(slope), float(math.exp(intercept)),
                   float(np.max(np.abs(resid))))


def ratio_spread(values: Sequence[float]) -> float:
    """``max/min`` of positive values (1 means perfectly uniform)."""
    v = np.asarray(values, dtype=float)
    return float(v.max() / v.min())


__all__ = [
    "ApproxTrajectory", "ResidualSeries", "ErrorSeries", "RateFit", "build_approx_full",
    "build_approx_ideal", "residual_full", "residual_ideal", "well_prepared_init",
    "error_series", "fit_rate", "ratio_spread", "DEFAULT_S",
]

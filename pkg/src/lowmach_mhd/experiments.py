"""Sweep orchestration: one limit solve, many compressible runs, one rate fit."""

from __future__ import annotations

import logging
import math
import re
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

from . import report
from .asymptotics import (RateFit, build_approx_full, build_approx_ideal, error_series, fit_rate,
                          residual_full, residual_ideal, well_prepared_init)
from .compressible import DIAGNOSTIC_COLUMNS, SchemeConfig, solve_compressible
from .config import RunConfig
from .errors import GridMismatchError, LowMachError, UsageError
from .fields import VectorField3, leray_project
from .grid import DimMode, Grid
from .incompressible import Ideal, LimitState, Trajectory, Viscous, solve_limit
from .presets import preset_fields
from .snapshot import read_snapshot
from .systems import GasLaw, PhysicalParams, default_gas_law

log = logging.getLogger(__name__)


def make_grid(cfg: RunConfig) -> Grid:
    return Grid(cfg.n, DimMode.parse(cfg.dim_mode))


def gas_law(cfg: RunConfig) -> GasLaw:
    return default_gas_law(cfg.gamma, cfg.S_base, cfg.p_base)


def params_for(cfg: RunConfig, eps: float) -> PhysicalParams:
    if cfg.is_ideal:
        return PhysicalParams.ideal(cfg.gamma, eps)
    return PhysicalParams(mu=cfg.mu, lam=cfg.lam, nu=cfg.nu, kappa=cfg.kappa, gamma=cfg.gamma, eps=eps)


def limit_mode(cfg: RunConfig):
    return Ideal(gas_law(cfg).r0) if cfg.is_ideal else Viscous(cfg.mu, cfg.nu)


def scheme_config(cfg: RunConfig) -> SchemeConfig:
    return SchemeConfig(cfg.effective_scheme, cfg.effective_cfl, cfg.dt_override or None, cfg.clean_div_every)


def initial_limit_state(cfg: RunConfig) -> LimitState:
    """Preset or file-based initial data; file data is projected divergence-free."""
    g = make_grid(cfg)
    if cfg.init_file:
        fg, arr = read_snapshot(cfg.init_file)
        if fg != g:
            raise GridMismatchError(f"{cfg.init_file} holds an {fg.n} {fg.dim_mode.value} grid, "
                                    f"config asks for {g.n} {g.dim_mode.value}")
        if arr.shape[0] != 6:
            raise UsageError(f"{cfg.init_file} must hold 6 components (velocity, magnetic field)")
        vel = leray_project(VectorField3(g, values=arr[:3]))
        mag = leray_project(VectorField3(g, values=arr[3:]))
    else:
        vel, mag = preset_fields(cfg.preset, g, cfg.beta)
    return LimitState.from_fields(vel, mag, limit_mode(cfg))


def run_limit(cfg: RunConfig) -> Trajectory:
    init = initial_limit_state(cfg)
    return solve_limit(init, cfg.T_final, cfg.limit_dt, out_times=cfg.output_times())


def run_single(cfg: RunConfig, eps: Optional[float] = None) -> Trajectory:
    """Compressible run at ``eps`` (default: first of ``eps_list``) from well-prepared data."""
    eps = cfg.eps_list[0] if eps is None else eps
    init = well_prepared_init(initial_limit_state(cfg), eps, cfg.perturbation, cfg.seed)
    law = gas_law(cfg) if cfg.is_ideal else None
    return solve_compressible(init, cfg.T_final, scheme_config(cfg), params_for(cfg, eps), law,
                              out_times=cfg.output_times())


@dataclass
class MemberResult:
    """Summary of one compressible run compared against the limit."""

    eps: float
    status: str
    achieved_T: float
    message: str
    steps: int
    seconds: float
    sup_error: dict[float, float]
    sup_error_canonical: float
    residual_over_eps: dict[float, float]
    residual_row_u: float
    mismatch: float
    mass_drift: float
    max_divH: float
    diagnostics: list[dict] = field(default_factory=list)


@dataclass
class SweepResult:
    config: RunConfig
    limit: Optional[Trajectory]
    members: list[MemberResult]
    fit: Optional[RateFit] = None
    fit_canonical: Optional[RateFit] = None

    def rows(self) -> list[dict]:
        out = []
        for m in self.members:
            for s in self.config.s_list:
                out.append({"eps": m.eps, "s": s, "sup_error": m.sup_error[s],
                            "sup_error_canonical": m.sup_error_canonical,
                            "max_residual_over_eps": m.residual_over_eps[s], "achieved_T": m.achieved_T})
        return out


def run_member(cfg: RunConfig, limit: Trajectory, eps: float) -> MemberResult:
    """Run one sweep member. Top-level so it pickles for worker processes."""
    t0 = time.perf_counter()
    params = params_for(cfg, eps)
    law = gas_law(cfg) if cfg.is_ideal else None
    init = well_prepared_init(limit.snapshots[0], eps, cfg.perturbation, cfg.seed)
    traj = solve_compressible(init, cfg.T_final, scheme_config(cfg), params, law, out_times=limit.times)
    if cfg.is_ideal:
        approx = build_approx_ideal(limit, eps)
        res = residual_ideal(limit, eps, law, cfg.s_list)
    else:
        approx = build_approx_full(limit, eps)
        res = residual_full(limit, eps, params, cfg.s_list)
    errs = error_series(traj, approx, cfg.s_list, params, law)
    diags = traj.extras.get("diagnostics", [])
    return MemberResult(
        eps=eps, status=traj.status, achieved_T=traj.last_good_time, message=traj.message,
        steps=int(traj.metadata.get("steps", 0)), seconds=time.perf_counter() - t0,
        sup_error={s: errs.sup(s) for s in cfg.s_list}, sup_error_canonical=errs.sup_canonical,
        residual_over_eps={s: res.max_norm(s) / eps for s in cfg.s_list},
        residual_row_u=res.max_row_norm("u", cfg.rate_s), mismatch=max(res.mismatch),
        mass_drift=max(abs(d["mass"] - diags[0]["mass"]) for d in diags),
        max_divH=max(d["divH"] for d in diags), diagnostics=diags)


def parse_synthetic(spec: str) -> tuple[float, float]:
    """``"err=3eps"`` or ``"err=2*eps^2"`` -> ``(coefficient, power)``."""
    m = re.fullmatch(r"\s*err\s*=\s*([0-9.eE+-]*)\s*\*?\s*eps\s*(?:\^\s*([0-9.]+))?\s*", spec)
    if not m:
        raise UsageError(f"synthetic spec must look like 'err=3eps' or 'err=eps^2', got {spec!r}")
    try:
        coeff = float(m.group(1)) if m.group(1) else 1.0
        power = float(m.group(2)) if m.group(2) else 1.0
    except ValueError:
        raise UsageError(f"bad synthetic spec {spec!r}") from None
    if not coeff > 0:
        raise UsageError("synthetic coefficient must be positive")
    return coeff, power


def synthetic_member(cfg: RunConfig, eps: float, coeff: float = 3.0, power: float = 1.0) -> MemberResult:
    """Fabricated member with error ``coeff * eps**power``; exercises reporting without solving."""
    err = coeff * eps**power
    return MemberResult(eps=eps, status="ok", achieved_T=cfg.T_final, message="synthetic", steps=0,
                        seconds=0.0, sup_error={s: err for s in cfg.s_list},
                        sup_error_canonical=err,
                        residual_over_eps={s: 1.0 for s in cfg.s_list}, residual_row_u=eps * eps,
                        mismatch=0.0, mass_drift=0.0, max_divH=0.0)


def _fit(members: list[MemberResult], key) -> Optional[RateFit]:
    pts = [(m.eps, key(m)) for m in members if m.status == "ok"]
    if len(pts) < 3 or any(not (v > 0 and math.isfinite(v)) for _, v in pts):
        return None
    return fit_rate(pts)


def run_sweep(cfg: RunConfig, workers: Optional[int] = None,
              synthetic: Optional[tuple[float, float]] = None) -> SweepResult:
    """Solve the limit once, then every member of ``eps_list``.

    Members run in worker processes when ``workers > 1``. Truncated members
    are kept in the result but excluded from the fit. ``synthetic`` is a
    ``(coefficient, power)`` pair that replaces the solves by exact data.
    """
    cfg.validate()
    workers = workers or cfg.workers
    if synthetic is not None:
        members = [synthetic_member(cfg, e, *synthetic) for e in cfg.eps_list]
        limit = None
    else:
        limit = run_limit(cfg)
        if not limit.ok:
            raise LowMachError(f"limit solve failed: {limit.message}")
        if workers > 1 and len(cfg.eps_list) > 1:
            with ProcessPoolExecutor(max_workers=workers) as pool:
                futures = [pool.submit(run_member, cfg, limit, e) for e in cfg.eps_list]
                members = [f.result() for f in futures]
        else:
            members = [run_member(cfg, limit, e) for e in cfg.eps_list]
    for m in members:
        log.info("eps=%g status=%s err=%.4e (%.1fs)", m.eps, m.status, m.sup_error[cfg.rate_s], m.seconds)
    return SweepResult(cfg, limit, members,
                       _fit(members, lambda m: m.sup_error[cfg.rate_s]),
                       _fit(members, lambda m: m.sup_error_canonical))


def write_sweep_outputs(result: SweepResult, outdir: str | Path) -> list[Path]:
    """CSV tables, the fit summary and the log-log chart."""
    out = Path(outdir)
    out.mkdir(parents=True, exist_ok=True)
    cfg = result.config
    written = [report.write_csv(out / "sweep.csv", report.SWEEP_COLUMNS, result.rows())]
    (out / "config.txt").write_text(cfg.as_text())
    written.append(out / "config.txt")
    for m in result.members:
        if m.diagnostics:
            written.append(report.write_csv(out / f"diagnostics_eps{m.eps:g}.csv", DIAGNOSTIC_COLUMNS,
                                            m.diagnostics))
    fits = [(f"H^{cfg.rate_s:g} error", result.fit), ("canonical error", result.fit_canonical)]
    text = [f.summary(label) for label, f in fits if f is not None]
    if not text:
        text = ["rate fit unavailable: fewer than 3 completed members"]
    (out / "rate.txt").write_text("\n\n".join(text) + "\n")
    written.append(out / "rate.txt")
    rows = [report.rate_row(f, label) for label, f in fits if f is not None]
    written.append(report.write_csv(out / "rate.csv", report.RATE_COLUMNS, rows))
    ok = [m for m in result.members if m.status == "ok"]
    if ok:
        written.append(report.svg_loglog(out / "error_vs_eps.svg", [m.eps for m in ok],
                                         [m.sup_error[cfg.rate_s] for m in ok], result.fit,
                                         title=f"sup H^{cfg.rate_s:g} error vs eps"))
    return written

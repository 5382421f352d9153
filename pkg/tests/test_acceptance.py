"""Acceptance criteria 1-10 at their stated tolerances.

Each test records one ``criterion k: PASS|FAIL`` line, printed in the
terminal summary, and then asserts the same condition. The sweeps are
computed once per module.
"""

from __future__ import annotations

import math
from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from lowmach_mhd.asymptotics import fit_rate, ratio_spread
from lowmach_mhd.checks import identity_residuals, symmetrizer_battery
from lowmach_mhd.compressible import imex_step_hat
from lowmach_mhd.config import RunConfig
from lowmach_mhd.experiments import run_sweep
from lowmach_mhd.grid import DimMode, Grid
from lowmach_mhd.incompressible import LimitState, Viscous, solve_limit
from lowmach_mhd.presets import orszag_tang_like, taylor_green
from lowmach_mhd.scaling import (DimensionlessNumbers, PhysicalInputs, nondimensionalize,
                                 scaled_coefficients)
from lowmach_mhd.systems import IQ, PhysicalParams

pytestmark = pytest.mark.slow

EPS = (0.2, 0.1, 0.05, 0.025)
FULL = RunConfig(system="full", n=64, eps_list=EPS, T_final=0.5, out_times=21, limit_dt=2e-3)
IDEAL = RunConfig(system="ideal", n=64, eps_list=EPS, T_final=0.3, out_times=16, limit_dt=1e-3)


@pytest.fixture(scope="module")
def full_sweep():
    return run_sweep(FULL)


@pytest.fixture(scope="module")
def ideal_sweep():
    return run_sweep(IDEAL)


@pytest.fixture(scope="module")
def perturbed_sweep():
    return run_sweep(replace(FULL, perturbation=0.5, seed=1))


def _record(lines, k: int, passed: bool, detail: str) -> bool:
    line = f"criterion {k}: {'PASS' if passed else 'FAIL'}  {detail}"
    lines.append(line)
    print(line)
    return passed


def _all_ok(*sweeps) -> bool:
    return all(m.status == "ok" for s in sweeps for m in s.members)


def test_criterion_1_full_rate(full_sweep, acceptance_lines):
    fit = full_sweep.fit
    per_eps = [m.sup_error[2.0] / m.eps for m in full_sweep.members]
    slope = fit.slope if fit else float("nan")
    spread = ratio_spread(per_eps)
    ok = _all_ok(full_sweep) and fit is not None and slope >= 0.9 and spread <= 1.30
    assert _record(acceptance_lines, 1, ok,
                   f"slope {slope:.4f} (>= 0.9), err/eps spread {spread:.4f} (<= 1.30)")


def test_criterion_2_ideal_rate(ideal_sweep, acceptance_lines):
    fit = ideal_sweep.fit
    slope = fit.slope if fit else float("nan")
    ok = _all_ok(ideal_sweep) and fit is not None and slope >= 0.9
    assert _record(acceptance_lines, 2, ok, f"slope {slope:.4f} (>= 0.9)")


def test_criterion_3_residual_bound(full_sweep, ideal_sweep, acceptance_lines):
    spreads = {name: ratio_spread([m.residual_over_eps[2.0] for m in s.members])
               for name, s in (("full", full_sweep), ("ideal", ideal_sweep))}
    u_fit = fit_rate([(m.eps, m.residual_row_u) for m in ideal_sweep.members])
    ok = max(spreads.values()) <= 1.25 and u_fit.slope >= 1.9
    assert _record(acceptance_lines, 3, ok,
                   f"R/eps spread full {spreads['full']:.4f}, ideal {spreads['ideal']:.4f} (<= 1.25); "
                   f"ideal u-row slope {u_fit.slope:.4f} (>= 1.9)")


def test_criterion_4_residual_agreement(full_sweep, ideal_sweep, perturbed_sweep, acceptance_lines):
    worst = max(m.mismatch for s in (full_sweep, ideal_sweep, perturbed_sweep) for m in s.members)
    assert _record(acceptance_lines, 4, worst <= 1e-8, f"max mismatch {worst:.3e} (<= 1e-8)")


def test_criterion_5_symmetrizer(acceptance_lines):
    rng = np.random.default_rng(5)
    results = [symmetrizer_battery(1000, eps, 5.0 / 3.0, rng) for eps in (0.05, 0.2, 0.45)]
    asym = max(r[0] for r in results)
    diag = min(r[1] for r in results)
    ok = asym <= 1e-12 and diag > 0
    assert _record(acceptance_lines, 5, ok,
                   f"max asymmetry {asym:.3e} (<= 1e-12), min diagonal {diag:.4f} (> 0)")


def test_criterion_6_identities(acceptance_lines):
    rng = np.random.default_rng(6)
    worst = max(identity_residuals(Grid(16, mode), 100, rng) for mode in (DimMode.SLAB, DimMode.FULL3D))
    assert _record(acceptance_lines, 6, worst <= 1e-10, f"max identity residual {worst:.3e} (<= 1e-10)")


def test_criterion_7_conservation(full_sweep, ideal_sweep, perturbed_sweep, acceptance_lines):
    members = [m for s in (full_sweep, ideal_sweep, perturbed_sweep) for m in s.members]
    mass = max(m.mass_drift for m in members)
    divH = max(m.max_divH for m in members)
    e = ideal_sweep.limit.extras["energy"]
    energy = max(abs(x - e[0]) for x in e) / e[0]
    # viscous energy law defect under dt refinement
    s0 = LimitState.from_fields(*orszag_tang_like(Grid(32)), Viscous(0.05, 0.05))
    defects = []
    for dt in (0.05, 0.025, 0.0125):
        traj = solve_limit(s0, 0.5, dt)
        ex = traj.extras
        defects.append(abs(ex["energy"][-1] - ex["energy"][0] + ex["dissipated"][-1]))
    order = min(math.log2(defects[0] / defects[1]), math.log2(defects[1] / defects[2]))
    ok = mass <= 1e-9 and divH <= 1e-11 and energy <= 1e-8 and order >= 3.5
    assert _record(acceptance_lines, 7, ok,
                   f"mass drift {mass:.3e} (<= 1e-9), divH {divH:.3e} (<= 1e-11), "
                   f"ideal energy drift {energy:.3e} (<= 1e-8), energy-law order {order:.2f} (~4)")


def _acoustic_frequency(eps: float, gamma: float) -> float:
    g, dt, steps = Grid(16), 0.005, 1000
    params = PhysicalParams.ideal(gamma=gamma, eps=eps)
    X = np.zeros((8,) + g.shape)
    X[IQ] = 1e-8 * np.cos(g.mesh()[0])
    Xh = g.fft(X)
    sig = [Xh[IQ][1, 0].real]
    for _ in range(steps):
        Xh = imex_step_hat(g, Xh, dt, params)
        sig.append(Xh[IQ][1, 0].real)
    sig = np.asarray(sig)
    t = dt * np.arange(sig.size)

    def neg_power(w):
        return -abs(np.sum(sig * np.exp(-1j * w * t)))

    ws = np.linspace(1.0, 40.0, 2000)
    w0 = ws[np.argmin([neg_power(w) for w in ws])]
    return minimize_scalar(neg_power, bounds=(w0 - 0.1, w0 + 0.1), method="bounded").x


def test_criterion_8_closed_forms(acceptance_lines):
    g = Grid(32)
    w, B = taylor_green(g)
    traj = solve_limit(LimitState.from_fields(w, B, Viscous(0.1, 0.1)), 1.0, 0.01)
    want = w.values * math.exp(-2 * 0.1)
    tg = float(np.linalg.norm(traj.snapshots[-1].vel.values - want) / np.linalg.norm(want))
    gamma, eps = 5.0 / 3.0, 0.1
    omega = _acoustic_frequency(eps, gamma)
    exact = math.sqrt(gamma) / eps
    rel = abs(omega - exact) / exact
    ok = tg <= 1e-6 and rel <= 0.02
    assert _record(acceptance_lines, 8, ok,
                   f"Taylor-Green rel. error {tg:.3e} (<= 1e-6), acoustic omega {omega:.4f} "
                   f"vs {exact:.4f}, rel. {rel:.2e} (<= 0.02)")


def test_criterion_9_nondimensionalization(acceptance_lines):
    ones = nondimensionalize(PhysicalInputs())
    ex = nondimensionalize(PhysicalInputs(R_gas=1.0, theta0=4.0, u0=1.0))
    dn = DimensionlessNumbers(reynolds=1.0, mach=0.1, prandtl=1.0, magnetic_reynolds=1.0, cowling=1.0,
                              gamma=5.0 / 3.0, sound_speed=1.0)
    p = scaled_coefficients(dn).params
    checks = [ones.reynolds == 1.0, ones.mach == 1.0, ones.magnetic_reynolds == 1.0,
              ones.prandtl == 2.0, ones.gamma == 2.0, ones.cowling == 0.0,
              ex.sound_speed == 2.0, ex.mach == 0.5,
              p.eps == 0.1, p.mu == 1.0, p.nu == 1.0, math.isclose(p.kappa, 5.0 / 3.0, rel_tol=1e-15)]
    assert _record(acceptance_lines, 9, all(checks), f"{sum(checks)}/{len(checks)} formula checks exact")


def test_criterion_10_perturbed_rate(perturbed_sweep, acceptance_lines):
    fit = perturbed_sweep.fit
    slope = fit.slope if fit else float("nan")
    ok = _all_ok(perturbed_sweep) and fit is not None and slope >= 0.85
    assert _record(acceptance_lines, 10, ok, f"slope {slope:.4f} (>= 0.85)")

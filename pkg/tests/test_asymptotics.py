from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from lowmach_mhd.asymptotics import (ApproxTrajectory, _packed_norm, build_approx_full,
                                     build_approx_ideal, error_series, fit_rate, ratio_spread,
                                     residual_full, residual_ideal, well_prepared_init)
from lowmach_mhd.compressible import Scheme, SchemeConfig, solve_compressible
from lowmach_mhd.errors import InsufficientPointsError, MissingSnapshotError, UsageError
from lowmach_mhd.fields import VectorField3, div, sobolev_norm
from lowmach_mhd.grid import Grid
from lowmach_mhd.incompressible import Ideal, LimitState, Trajectory, Viscous, solve_limit
from lowmach_mhd.presets import orszag_tang_like
from lowmach_mhd.systems import (IH, IP, IQ, IU, FullState, IdealState, PhysicalParams,
                                 StateSpaceBox, default_gas_law, energy_equivalence_constant)

GAMMA = 5.0 / 3.0
LAW = default_gas_law(GAMMA)


@pytest.fixture(scope="module")
def viscous_limit():
    s0 = LimitState.from_fields(*orszag_tang_like(Grid(32)), Viscous(0.05, 0.05))
    return solve_limit(s0, 0.2, 2e-3, out_times=np.linspace(0, 0.2, 5))


@pytest.fixture(scope="module")
def ideal_limit():
    s0 = LimitState.from_fields(*orszag_tang_like(Grid(32)), Ideal(LAW.r0))
    return solve_limit(s0, 0.2, 2e-3, out_times=np.linspace(0, 0.2, 5))


def _zero_limit(g, mode):
    z = VectorField3.zeros(g)
    return solve_limit(LimitState.from_fields(z, z, mode), 0.1, 0.05)


# ---------------------------------------------------------------------------
# approximations


@pytest.mark.parametrize("build,fixture", [(build_approx_full, "viscous_limit"),
                                           (build_approx_ideal, "ideal_limit")])
def test_approximation_structure(request, build, fixture):
    limit = request.getfixturevalue(fixture)
    a0 = build(limit, 0.0)
    for st_, snap in zip(a0.states, limit.snapshots):
        X = st_.pack()
        assert np.max(np.abs(X[IQ])) == 0 and np.max(np.abs(X[IP])) == 0
        assert np.array_equal(X[IU], snap.vel.values) and np.array_equal(X[IH], snap.mag.values)
    a1, a2 = build(limit, 0.1), build(limit, 0.2)
    for s1, s2 in zip(a1.states, a2.states):
        assert np.array_equal(s1.pack()[IQ], s1.pack()[IP])
        assert np.array_equal(2 * s1.q.spectral, s2.q.spectral)


def test_full_approximation_uses_half_pressure(viscous_limit):
    a = build_approx_full(viscous_limit, 0.1)
    assert np.allclose(a.states[2].q.values, 0.05 * viscous_limit.snapshots[2].pressure.values,
                       rtol=0, atol=1e-15)
    assert isinstance(a.states[0], FullState)


def test_approximation_needs_limit_snapshots(slab32):
    traj = Trajectory()
    traj.append(0.0, FullState.zeros(slab32))
    with pytest.raises(MissingSnapshotError):
        build_approx_full(traj, 0.1)
    with pytest.raises(MissingSnapshotError):
        build_approx_ideal(Trajectory(), 0.1)


# ---------------------------------------------------------------------------
# residuals


def test_zero_limit_residual_vanishes(grid):
    series = residual_full(_zero_limit(grid, Viscous(0.05, 0.05)), 0.1, PhysicalParams())
    assert series.max_norm(4) == 0.0 and max(series.mismatch) == 0.0
    series = residual_ideal(_zero_limit(grid, Ideal(LAW.r0)), 0.1, LAW)
    assert series.max_norm(4) == 0.0


def test_full_residual_agrees_with_substitution(viscous_limit):
    series = residual_full(viscous_limit, 0.1, PhysicalParams())
    assert max(series.mismatch) <= 1e-8
    assert series.max_row_norm("H", 4) == 0.0
    assert series.max_norm(2) > 0


def test_full_q_row_scales_linearly(viscous_limit):
    r1 = residual_full(viscous_limit, 0.05, PhysicalParams())
    r2 = residual_full(viscous_limit, 0.1, PhysicalParams())
    for a, b in zip(r1.row_norms["q"][2], r2.row_norms["q"][2]):
        assert b / a == pytest.approx(2.0, rel=1e-13)


def test_ideal_residual_rows(ideal_limit):
    eps = 0.1
    series = residual_ideal(ideal_limit, eps, LAW)
    assert max(series.mismatch) <= 1e-8
    for k, disp in enumerate(series.displayed):
        X = ideal_limit.extras["material_dt_pressure"][k].spectral
        # default law: a = 1/gamma everywhere
        assert np.max(np.abs(disp[IQ] - eps / GAMMA * X)) <= 1e-14
        assert np.max(np.abs(disp[IP] - eps * X)) <= 1e-14
        assert np.max(np.abs(disp[IH])) == 0


def test_ideal_u_row_is_second_order(ideal_limit):
    scaled = [residual_ideal(ideal_limit, e, LAW).max_row_norm("u", 2) / e**2 for e in (0.2, 0.1, 0.05)]
    assert ratio_spread(scaled) <= 1.1


def test_ideal_residual_checks_density(ideal_limit):
    with pytest.raises(UsageError):
        residual_ideal(ideal_limit, 0.1, default_gas_law(GAMMA, p_base=2.0))


def test_residual_requires_rates(viscous_limit):
    stripped = Trajectory(list(viscous_limit.times), list(viscous_limit.snapshots))
    with pytest.raises(MissingSnapshotError):
        residual_full(stripped, 0.1, PhysicalParams())
    with pytest.raises(MissingSnapshotError):
        residual_ideal(viscous_limit, 0.1, LAW)


# ---------------------------------------------------------------------------
# initial data


def test_well_prepared_norm(viscous_limit):
    eps = 0.1
    limit0 = viscous_limit.snapshots[0]
    U = well_prepared_init(limit0, eps)
    base = FullState(U.q * 0.0, limit0.vel, limit0.mag, U.phi * 0.0)
    got = _packed_norm(U.grid, (U - base).pack_hat(), 4)
    want = eps / 2 * sobolev_norm(limit0.pressure, 4) * math.sqrt(2)
    assert got == pytest.approx(want, rel=1e-12)


def test_well_prepared_ideal_type(ideal_limit):
    V = well_prepared_init(ideal_limit.snapshots[0], 0.1)
    assert isinstance(V, IdealState)
    assert np.allclose(V.q.values, 0.1 * ideal_limit.snapshots[0].pressure.values, rtol=0, atol=1e-15)


def test_well_prepared_perturbation(viscous_limit):
    limit0 = viscous_limit.snapshots[0]
    a = well_prepared_init(limit0, 0.1, 0.5, seed=7)
    b = well_prepared_init(limit0, 0.1, 0.5, seed=7)
    c = well_prepared_init(limit0, 0.1, 0.5, seed=8)
    base = well_prepared_init(limit0, 0.1)
    assert np.array_equal(a.pack(), b.pack())
    assert not np.array_equal(a.pack(), c.pack())
    assert div(a.H).max_abs() <= 1e-12 and div(a.u).max_abs() <= 1e-12
    assert _packed_norm(a.grid, (a - base).pack_hat(), 2) == pytest.approx(0.05, rel=1e-12)
    with pytest.raises(UsageError):
        well_prepared_init(limit0, 0.1, -1.0)


# ---------------------------------------------------------------------------
# errors


def test_error_of_approximation_against_itself(viscous_limit):
    approx = build_approx_full(viscous_limit, 0.1)
    fake = Trajectory(list(approx.times), list(approx.states))
    errs = error_series(fake, approx, params=PhysicalParams(eps=0.1))
    assert all(v == 0 for s in errs.norms for v in errs.norms[s])
    assert errs.sup_canonical == 0


def test_error_norms_and_canonical_equivalence(viscous_limit):
    eps = 0.1
    params = PhysicalParams(eps=eps)
    U0 = well_prepared_init(viscous_limit.snapshots[0], eps, 0.5, seed=1)
    full = solve_compressible(U0, 0.2, SchemeConfig(), params, out_times=viscous_limit.times)
    errs = error_series(full, build_approx_full(viscous_limit, eps), params=params)
    C = energy_equivalence_constant(StateSpaceBox(), eps, GAMMA)
    for k in range(len(errs.times)):
        assert errs.norms[0][k] <= errs.norms[2][k] <= errs.norms[4][k]
        ratio = errs.canonical[k] / errs.norms[0][k]
        assert 1 / math.sqrt(C) <= ratio <= math.sqrt(C)


def test_error_series_mismatch(viscous_limit):
    approx = build_approx_full(viscous_limit, 0.1)
    shifted = ApproxTrajectory([t + 0.01 for t in approx.times], approx.states)
    fake = Trajectory(list(approx.times), list(approx.states))
    with pytest.raises(UsageError):
        error_series(fake, shifted)


def test_ideal_error_series(ideal_limit):
    eps = 0.1
    params = PhysicalParams.ideal(eps=eps)
    V0 = well_prepared_init(ideal_limit.snapshots[0], eps)
    full = solve_compressible(V0, 0.2, SchemeConfig(Scheme.RK4_IDEAL, cfl=0.4), params, LAW,
                              out_times=ideal_limit.times)
    errs = error_series(full, build_approx_ideal(ideal_limit, eps), params=params, law=LAW)
    assert errs.norms[0][0] == 0 and 0 < errs.sup(2) < 1
    assert all(math.isfinite(c) for c in errs.canonical)


# ---------------------------------------------------------------------------
# rate fits


def test_fit_linear():
    fit = fit_rate([(e, 3 * e) for e in (0.2, 0.1, 0.05, 0.025)])
    assert abs(fit.slope - 1) <= 1e-12 and abs(fit.K - 3) <= 1e-12
    assert fit.max_residual <= 1e-12
    assert "slope p      : 1.000000" in fit.summary("err")


def test_fit_quadratic():
    fit = fit_rate([(e, e**2) for e in (0.2, 0.1, 0.05)])
    assert fit.slope == pytest.approx(2.0, abs=1e-12)


@given(st.permutations([0.3, 0.2, 0.1, 0.05, 0.025]), st.floats(0.5, 3.0))
def test_fit_order_invariant(order, p):
    pts = [(e, 0.7 * e**p * (1 + 0.1 * math.sin(7 * e))) for e in order]
    a = fit_rate(pts)
    b = fit_rate(sorted(pts))
    assert a.slope == pytest.approx(b.slope, abs=1e-12) and a.K == pytest.approx(b.K, rel=1e-12)


def test_fit_errors():
    with pytest.raises(InsufficientPointsError):
        fit_rate([(0.1, 0.1), (0.2, 0.2)])
    with pytest.raises(UsageError):
        fit_rate([(0.1, 0.0), (0.2, 0.2), (0.3, 0.3)])


def test_ratio_spread():
    assert ratio_spread([2.0, 2.0]) == 1.0
    assert ratio_spread([1.0, 3.0, 2.0]) == 3.0

from __future__ import annotations

import math

import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from lowmach_mhd.asymptotics import well_prepared_init
from lowmach_mhd.compressible import (DIAGNOSTIC_COLUMNS, Scheme, SchemeConfig, clean_divergence,
                                      ideal_mass, imex_step_full, imex_step_hat, rk4_step_full,
                                      rk4_step_ideal, solve_compressible, stable_dt)
from lowmach_mhd.errors import UsageError
from lowmach_mhd.fields import ScalarField, VectorField3, div, grad, sobolev_norm
from lowmach_mhd.grid import Grid
from lowmach_mhd.incompressible import Ideal, LimitState, Viscous
from lowmach_mhd.presets import orszag_tang_like
from lowmach_mhd.systems import (IQ, FullState, IdealState, PhysicalParams, StateSpaceBox,
                                 default_gas_law, full_tendency_hat)

GAMMA = 5.0 / 3.0


def _limit0(g, mode):
    return LimitState.from_fields(*orszag_tang_like(g), mode)


def _full_init(g, eps, perturbation=0.0, seed=0):
    return well_prepared_init(_limit0(g, Viscous(0.05, 0.05)), eps, perturbation, seed)


def _ideal_init(g, eps, perturbation=0.0, seed=0):
    law = default_gas_law(GAMMA)
    return well_prepared_init(_limit0(g, Ideal(law.r0)), eps, perturbation, seed), law


def _constant_full(g):
    return FullState(ScalarField.constant(g, 0.4), VectorField3.zeros(g),
                     VectorField3.from_function(g, lambda x, y, z: (0.3 + 0 * x, 0 * x, -0.2 + 0 * x)),
                     ScalarField.constant(g, -0.3))


# ---------------------------------------------------------------------------
# configuration and step size


def test_scheme_config_validation():
    assert SchemeConfig("rk4_ideal").scheme is Scheme.RK4_IDEAL
    assert SchemeConfig("Rk4FullExplicit").scheme is Scheme.RK4_FULL_EXPLICIT
    for kwargs in (dict(cfl=0.0), dict(cfl=1.0), dict(clean_div_every=0), dict(dt_override=-1.0),
                   dict(scheme="leapfrog")):
        with pytest.raises(UsageError):
            SchemeConfig(**kwargs)


def test_stable_dt_at_rest():
    g = Grid(64)
    dt = stable_dt(FullState.zeros(g), PhysicalParams(), SchemeConfig(cfl=0.3))
    assert dt == pytest.approx(0.3 * (2 * math.pi / 64), rel=1e-14)


def test_stable_dt_imex_ignores_eps(slab32):
    U = _full_init(slab32, 0.1)
    a = stable_dt(U, PhysicalParams(eps=0.1), Scheme.IMEX_FULL)
    b = stable_dt(U, PhysicalParams(eps=0.01), Scheme.IMEX_FULL)
    assert a == b


def test_stable_dt_ideal_linear_in_eps():
    g = Grid(16)
    law = default_gas_law(GAMMA)
    V = IdealState.zeros(g)
    dts = [stable_dt(V, PhysicalParams.ideal(eps=e), Scheme.RK4_IDEAL, law) for e in (0.2, 0.1, 0.05)]
    assert dts[0] / dts[1] == pytest.approx(2.0, rel=1e-13)
    assert dts[1] / dts[2] == pytest.approx(2.0, rel=1e-13)
    with pytest.raises(UsageError):
        stable_dt(V, PhysicalParams.ideal(), Scheme.RK4_IDEAL)


@pytest.mark.parametrize("scheme", [Scheme.IMEX_FULL, Scheme.RK4_IDEAL])
def test_stable_dt_scales_with_h(scheme):
    law = default_gas_law(GAMMA)
    cls = IdealState if scheme is Scheme.RK4_IDEAL else FullState
    params = PhysicalParams.ideal(eps=0.1)
    dt32 = stable_dt(cls.zeros(Grid(32)), params, scheme, law)
    dt16 = stable_dt(cls.zeros(Grid(16)), params, scheme, law)
    assert dt32 / dt16 == pytest.approx(0.5, rel=1e-13)


# ---------------------------------------------------------------------------
# single steps


def test_constant_state_is_imex_fixed_point(grid):
    U = _constant_full(grid)
    out = imex_step_full(U, 0.05, PhysicalParams(eps=0.05))
    assert np.max(np.abs(out.pack() - U.pack())) <= 1e-14
    assert np.max(np.abs(rk4_step_full(U, 0.01, PhysicalParams()).pack() - U.pack())) <= 1e-14


def test_constant_state_is_rk4_ideal_fixed_point(grid):
    law = default_gas_law(GAMMA)
    V = IdealState.from_array(grid, _constant_full(grid).pack())
    out = rk4_step_ideal(V, law, 0.1, 0.01)
    assert np.max(np.abs(out.pack() - V.pack())) <= 1e-14


def test_imex_rejects_nonpositive_dt(grid):
    with pytest.raises(UsageError):
        imex_step_full(FullState.zeros(grid), 0.0, PhysicalParams())


def test_acoustic_dispersion():
    # linear acoustics about rest: omega^2 = gamma |k|^2 / eps^2
    g, eps, dt, steps = Grid(16), 0.1, 0.005, 1000
    params = PhysicalParams.ideal(gamma=GAMMA, eps=eps)
    X = np.zeros((8,) + g.shape)
    X[IQ] = 1e-8 * np.cos(g.mesh()[0])
    Xh = g.fft(X)
    signal = [Xh[IQ][1, 0].real]
    for _ in range(steps):
        Xh = imex_step_hat(g, Xh, dt, params)
        signal.append(Xh[IQ][1, 0].real)
    sig = np.asarray(signal)
    t = dt * np.arange(sig.size)

    def neg_power(w):
        return -abs(np.sum(sig * np.exp(-1j * w * t)))

    grid_w = np.linspace(1.0, 40.0, 2000)
    w0 = grid_w[np.argmin([neg_power(w) for w in grid_w])]
    w = minimize_scalar(neg_power, bounds=(w0 - 0.1, w0 + 0.1), method="bounded").x
    want = math.sqrt(GAMMA) / eps
    assert abs(w - want) / want <= 0.02


def test_imex_matches_explicit_midpoint_without_stiffness():
    # with the stiff part explicit, the step is Heun; Heun and midpoint differ by O(dt^3)
    g = Grid(16)
    params = PhysicalParams(eps=0.5)
    U = _full_init(g, 0.5, 0.5, seed=3)
    Uh = U.pack_hat()

    def midpoint(h):
        f = lambda X: full_tendency_hat(g, X, params)  # noqa: E731
        return Uh + h * f(Uh + 0.5 * h * f(Uh))

    diffs = [np.max(np.abs(g.ifft(imex_step_hat(g, Uh, h, params, stiff=False) - midpoint(h))))
             for h in (0.02, 0.01, 0.005)]
    assert diffs[0] / diffs[1] == pytest.approx(8.0, rel=0.15)
    assert diffs[1] / diffs[2] == pytest.approx(8.0, rel=0.15)


def test_imex_local_error_is_third_order():
    g = Grid(16)
    params = PhysicalParams(eps=0.5)
    U = _full_init(g, 0.5, 0.5, seed=3)
    diffs = [np.max(np.abs(imex_step_full(U, h, params).pack() - rk4_step_full(U, h, params).pack()))
             for h in (0.01, 0.005, 0.0025)]
    assert diffs[0] / diffs[1] == pytest.approx(8.0, rel=0.2)
    assert diffs[1] / diffs[2] == pytest.approx(8.0, rel=0.2)


def test_rk4_ideal_time_reversal(slab32):
    V, law = _ideal_init(slab32, 0.1, 0.5, seed=2)
    back = rk4_step_ideal(rk4_step_ideal(V, law, 0.1, 1e-3), law, 0.1, -1e-3)
    assert np.max(np.abs(back.pack() - V.pack())) <= 1e-10


# ---------------------------------------------------------------------------
# divergence cleaning


def test_clean_divergence_keeps_solenoidal(grid):
    H = VectorField3.from_function(grid, lambda x, y, z: (np.sin(y), np.cos(x), 0 * x))
    assert np.max(np.abs(clean_divergence(H).values - H.values)) <= 1e-13


def test_clean_divergence_removes_gradient(grid):
    H = grad(ScalarField.from_function(grid, lambda x, y, z: np.sin(x)))
    assert clean_divergence(H).max_abs() <= 1e-13


def test_clean_divergence_random(grid, rng):
    H = VectorField3(grid, rng.standard_normal((3,) + grid.shape))
    assert sobolev_norm(div(H), 0) > 1.0
    assert sobolev_norm(div(clean_divergence(H)), 0) <= 1e-12


# ---------------------------------------------------------------------------
# driver


def test_zero_time_returns_init(slab32):
    U = _full_init(slab32, 0.1)
    traj = solve_compressible(U, 0.0, SchemeConfig(), PhysicalParams(eps=0.1))
    assert traj.times == [0.0] and traj.snapshots[0] is U
    assert set(traj.extras["diagnostics"][0]) == set(DIAGNOSTIC_COLUMNS)


def test_scheme_must_match_state(slab32):
    U = _full_init(slab32, 0.1)
    with pytest.raises(UsageError):
        solve_compressible(U, 0.1, SchemeConfig(Scheme.RK4_IDEAL), PhysicalParams(eps=0.1))
    V, law = _ideal_init(slab32, 0.1)
    with pytest.raises(UsageError):
        solve_compressible(V, 0.1, SchemeConfig(Scheme.IMEX_FULL), PhysicalParams.ideal(), law)
    with pytest.raises(UsageError):
        solve_compressible(V, 0.1, SchemeConfig(Scheme.RK4_IDEAL), PhysicalParams.ideal())


def test_full_run_conserves_mass_and_constraint(slab32):
    U = _full_init(slab32, 0.1, 0.5, seed=1)
    traj = solve_compressible(U, 0.5, SchemeConfig(), PhysicalParams(eps=0.1),
                              out_times=np.linspace(0, 0.5, 6))
    assert traj.ok and traj.times[-1] == 0.5
    rows = traj.extras["diagnostics"]
    assert max(abs(r["mass"] - rows[0]["mass"]) for r in rows) <= 1e-9
    assert max(r["divH"] for r in rows[1:]) <= 1e-11
    assert traj.metadata["steps"] > 0


def test_ideal_run_conserves_mass(slab32):
    V, law = _ideal_init(slab32, 0.1, 0.5, seed=1)
    params = PhysicalParams.ideal(eps=0.1)
    traj = solve_compressible(V, 0.2, SchemeConfig(Scheme.RK4_IDEAL, cfl=0.4), params, law)
    assert traj.ok
    m0 = ideal_mass(V, law, 0.1)
    assert abs(ideal_mass(traj.snapshots[-1], law, 0.1) - m0) <= 1e-9
    assert traj.extras["diagnostics"][-1]["divH"] <= 1e-11


def test_theta_maximum_principle(slab32):
    V, law = _ideal_init(slab32, 0.1)
    traj = solve_compressible(V, 0.3, SchemeConfig(Scheme.RK4_IDEAL, cfl=0.4),
                              PhysicalParams.ideal(eps=0.1), law, out_times=np.linspace(0, 0.3, 4))
    assert traj.ok
    top0 = float(np.max(V.Theta.values))
    assert max(float(np.max(s.Theta.values)) for s in traj.snapshots) - top0 <= 1e-6


@pytest.mark.parametrize("eps", [0.2, 0.025])
def test_eps_uniform_stability(slab32, eps):
    U = _full_init(slab32, eps)
    params = PhysicalParams(eps=eps)
    dt = stable_dt(U, params, Scheme.IMEX_FULL)
    traj = solve_compressible(U, 0.5, SchemeConfig(dt_override=dt), params,
                              out_times=np.linspace(0, 0.5, 6))
    assert traj.ok and traj.last_good_time == 0.5
    rows = traj.extras["diagnostics"]
    for key in ("maxq", "maxu", "maxH", "maxphi"):
        assert max(r[key] for r in rows) <= 2 * rows[0][key]


@pytest.mark.parametrize("scheme,order", [(Scheme.IMEX_FULL, 2), (Scheme.RK4_FULL_EXPLICIT, 4)])
def test_self_convergence(scheme, order):
    g = Grid(16)
    params = PhysicalParams(eps=0.5)
    U = _full_init(g, 0.5, 0.5, seed=3)
    ends = [solve_compressible(U, 0.2, SchemeConfig(scheme, dt_override=h), params).snapshots[-1].pack()
            for h in (0.01, 0.005, 0.0025)]
    ratio = np.linalg.norm(ends[0] - ends[1]) / np.linalg.norm(ends[1] - ends[2])
    assert ratio == pytest.approx(2.0**order, rel=0.15)


def test_box_exit_truncates(slab32):
    U = _full_init(slab32, 0.1)
    traj = solve_compressible(U, 0.1, SchemeConfig(), PhysicalParams(eps=0.1), box=StateSpaceBox(u_max=0.5))
    assert not traj.ok and traj.last_good_time == 0.0 and "u" in traj.message
    # max|H| grows from 0.707 to about 0.72 by t = 0.1, so this box is left mid-run
    traj = solve_compressible(U, 0.5, SchemeConfig(), PhysicalParams(eps=0.1),
                              box=StateSpaceBox(H_max=0.715), out_times=np.linspace(0, 0.5, 11))
    assert not traj.ok and 0.0 < traj.last_good_time < 0.5 and "H" in traj.message

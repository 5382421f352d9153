from __future__ import annotations

import math

import pytest
from hypothesis import given
from hypothesis import strategies as st

from lowmach_mhd.errors import FormatError, UsageError
from lowmach_mhd.scaling import (DimensionlessNumbers, PhysicalInputs, inputs_as_dict,
                                 nondimensionalize, read_inputs_file, scaled_coefficients)

positive = st.floats(1e-3, 1e3)


def test_all_ones():
    dn = nondimensionalize(PhysicalInputs())
    assert (dn.reynolds, dn.mach, dn.magnetic_reynolds, dn.sound_speed) == (1.0, 1.0, 1.0, 1.0)
    assert dn.prandtl == 2.0 and dn.gamma == 2.0
    assert dn.cowling == 0.0


def test_sound_speed_and_mach():
    dn = nondimensionalize(PhysicalInputs(R_gas=1.0, theta0=4.0, u0=1.0))
    assert dn.sound_speed == 2.0 and dn.mach == 0.5


def test_cowling_number():
    dn = nondimensionalize(PhysicalInputs(H0=2.0, rho0=0.5, u0=2.0, perm=3.0))
    assert dn.cowling == pytest.approx(3.0 * 4.0 / (4 * math.pi * 0.5) / 4.0, rel=1e-15)


def test_gamma_from_heat_capacities():
    dn = nondimensionalize(PhysicalInputs(cV=1.5, R_gas=1.0))
    assert dn.gamma == pytest.approx(5.0 / 3.0, rel=1e-15)


@given(positive, st.floats(0.01, 100.0))
def test_mach_linear_in_speed(u0, alpha):
    m1 = nondimensionalize(PhysicalInputs(u0=u0, theta0=3.0)).mach
    m2 = nondimensionalize(PhysicalInputs(u0=alpha * u0, theta0=3.0)).mach
    assert m2 == pytest.approx(alpha * m1, rel=1e-13)


@given(positive, positive)
def test_homogeneity(scale, rho0):
    # scaling numerator and denominator of each ratio together leaves it unchanged
    a = nondimensionalize(PhysicalInputs(rho0=rho0, mu=2.0, kappa=3.0, nu=0.5, H0=1.0, perm=1.0))
    b = nondimensionalize(PhysicalInputs(rho0=scale * rho0, mu=2.0 * scale, kappa=3.0 * scale,
                                         nu=0.5, H0=math.sqrt(scale), perm=1.0))
    assert b.reynolds == pytest.approx(a.reynolds, rel=1e-12)
    assert b.prandtl == pytest.approx(a.prandtl, rel=1e-12)
    assert b.cowling == pytest.approx(a.cowling, rel=1e-12)
    assert b.magnetic_reynolds == a.magnetic_reynolds


@pytest.mark.parametrize("kwargs", [dict(rho0=0.0), dict(u0=-1.0), dict(H0=-0.1), dict(cV=0.0),
                                    dict(mu=1.0, lam=-1.0), dict(perm=0.0)])
def test_rejects_invalid_inputs(kwargs):
    with pytest.raises(UsageError):
        PhysicalInputs(**kwargs)


def test_scaled_coefficients():
    dn = DimensionlessNumbers(reynolds=1.0, mach=0.1, prandtl=1.0, magnetic_reynolds=1.0, cowling=1.0,
                              gamma=5.0 / 3.0, sound_speed=1.0)
    sc = scaled_coefficients(dn)
    assert sc.params.kappa == pytest.approx(5.0 / 3.0, rel=1e-15)
    assert sc.params.eps == 0.1 and sc.params.mu == 1.0 and sc.params.nu == 1.0
    assert not sc.cowling_flag
    assert sc.joule_factor == pytest.approx(2.0 / 3.0 * 0.01, rel=1e-14)


def test_second_viscosity_ratio_kept():
    sc = scaled_coefficients(nondimensionalize(PhysicalInputs(mu=2.0, lam=1.0, rho0=4.0)))
    assert sc.params.mu == 0.5 and sc.params.lam == 0.25


def test_cowling_flag():
    assert scaled_coefficients(nondimensionalize(PhysicalInputs())).cowling_flag
    unit = nondimensionalize(PhysicalInputs(H0=1.0, perm=4 * math.pi))
    assert unit.cowling == 1.0
    assert not scaled_coefficients(unit).cowling_flag


def test_read_inputs_file(tmp_path):
    p = tmp_path / "phys.txt"
    p.write_text("# reference state\nrho0 = 2\nu0=0.5  # slow\nlambda = 0.1\n\n")
    inp = read_inputs_file(p)
    assert inp.rho0 == 2.0 and inp.u0 == 0.5 and inp.lam == 0.1
    assert inputs_as_dict(inp)["L0"] == 1.0


@pytest.mark.parametrize("text", ["rho0 2\n", "speed = 1\n", "u0 = fast\n"])
def test_read_inputs_file_errors(tmp_path, text):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    with pytest.raises(FormatError):
        read_inputs_file(p)


def test_read_inputs_file_invalid_value(tmp_path):
    p = tmp_path / "neg.txt"
    p.write_text("mu = -1\n")
    with pytest.raises(UsageError):
        read_inputs_file(p)

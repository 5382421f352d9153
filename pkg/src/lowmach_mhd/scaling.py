"""Nondimensionalisation of the physical MHD equations.

Maps reference scales and material constants to the characteristic
numbers (Reynolds, Mach, Prandtl, magnetic Reynolds, Cowling) and to the
coefficient set of the scaled system.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, fields
from pathlib import Path

from .errors import FormatError, UsageError
from .systems import PhysicalParams


@dataclass(frozen=True)
class PhysicalInputs:
    """Dimensional reference values (any consistent unit system).

    ``perm`` is the magnetic permeability factor entering the Cowling
    number; it defaults to 1.
    """

    rho0: float = 1.0
    u0: float = 1.0
    L0: float = 1.0
    theta0: float = 1.0
    H0: float = 0.0
    mu: float = 1.0
    lam: float = 0.0
    nu: float = 1.0
    kappa: float = 1.0
    R_gas: float = 1.0
    cV: float = 1.0
    perm: float = 1.0

    def __post_init__(self):
        for name in ("rho0", "u0", "L0", "theta0", "mu", "nu", "kappa", "R_gas", "cV", "perm"):
            if not getattr(self, name) > 0:
                raise UsageError(f"{name} must be positive, got {getattr(self, name)}")
        if self.H0 < 0:
            raise UsageError("H0 must be nonnegative")
        if not 2 * self.mu + 3 * self.lam > 0:
            raise UsageError("need 2*mu + 3*lam > 0")


@dataclass(frozen=True)
class DimensionlessNumbers:
    reynolds: float
    mach: float
    prandtl: float
    magnetic_reynolds: float
    cowling: float
    gamma: float
    sound_speed: float
    lam_ratio: float = 0.0

    def as_rows(self) -> list[tuple[str, float]]:
        return [(f.name, getattr(self, f.name)) for f in fields(self)]


@dataclass(frozen=True)
class ScaledSystem:
    """Coefficients of the scaled system plus the Cowling-number flag.

    ``joule_factor`` and ``viscous_heating_factor`` are the prefactors of
    the heating terms in the scaled temperature equation, reported for
    reference; the solver uses ``eps * (L + G)`` with unit factors.
    """

    params: PhysicalParams
    cowling: float
    cowling_flag: bool
    joule_factor: float
    viscous_heating_factor: float


def nondimensionalize(inp: PhysicalInputs) -> DimensionlessNumbers:
    """Characteristic numbers of the reference state."""
    a0 = math.sqrt(inp.R_gas * inp.theta0)
    cp = inp.cV + inp.R_gas
    return DimensionlessNumbers(
        reynolds=inp.rho0 * inp.u0 * inp.L0 / inp.mu,
        mach=inp.u0 / a0,
        prandtl=cp * inp.mu / inp.kappa,
        magnetic_reynolds=inp.u0 * inp.L0 / inp.nu,
        cowling=(inp.perm * inp.H0**2 / (4 * math.pi * inp.rho0)) / inp.u0**2,
        gamma=cp / inp.cV,
        sound_speed=a0,
        lam_ratio=inp.lam / inp.mu,
    )


def scaled_coefficients(dn: DimensionlessNumbers) -> ScaledSystem:
    """Coefficients of the scaled equations.

    ``eps = M``, viscosity ``1/R`` (second viscosity ``(lam/mu)/R``),
    magnetic diffusivity ``1/Rm`` and heat conductivity ``gamma/(R Pr)``.
    The scaled equations carry no Cowling factor, so ``cowling_flag`` is
    set whenever ``C != 1``.
    """
    R, M, Rm = dn.reynolds, dn.mach, dn.magnetic_reynolds
    params = PhysicalParams(mu=1.0 / R, lam=dn.lam_ratio / R, nu=1.0 / Rm,
                            kappa=dn.gamma / (R * dn.prandtl), gamma=dn.gamma, eps=M)
    g1 = dn.gamma - 1.0
    return ScaledSystem(params, dn.cowling, dn.cowling != 1.0,
                        joule_factor=g1 * dn.cowling * M**2 / Rm,
                        viscous_heating_factor=g1 * M**2 / R)


_ALIASES = {"lambda": "lam"}


def read_inputs_file(path: str | Path) -> PhysicalInputs:
    """Parse a ``key = value`` file of :class:`PhysicalInputs` fields (``#`` comments)."""
    known = {f.name for f in fields(PhysicalInputs)}
    values: dict[str, float] = {}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read inputs {path}: {exc}") from None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise FormatError(f"{path}:{lineno}: expected key = value")
        key, val = (s.strip() for s in line.split("=", 1))
        key = _ALIASES.get(key, key)
        if key not in known:
            raise FormatError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            values[key] = float(val)
        except ValueError:
            raise FormatError(f"{path}:{lineno}: {key} is not a number: {val!r}") from None
    return PhysicalInputs(**values)


def inputs_as_dict(inp: PhysicalInputs) -> dict[str, float]:
    return asdict(inp)

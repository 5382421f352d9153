"""Seeded property battery shared by the ``check`` command and the test suite."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .asymptotics import residual_full, residual_ideal
from .fields import VectorField3, check_identities
from .grid import DimMode, Grid
from .incompressible import Ideal, LimitState, Viscous, solve_limit
from .presets import orszag_tang_like
from .systems import (PhysicalParams, StateSpaceBox, default_gas_law, max_asymmetry,
                      normalized_jacobians, random_box_points, symmetrizers)


@dataclass(frozen=True)
class CheckResult:
    name: str
    value: float
    threshold: float
    passed: bool

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.value:.3e} (limit {self.threshold:.1e})"


def random_dealiased_field(grid: Grid, rng: np.random.Generator, amplitude: float = 1.0) -> VectorField3:
    """Random real vector field whose coefficients live inside the 2/3 band."""
    shape = (3,) + grid.spectral_shape
    c = (rng.standard_normal(shape) + 1j * rng.standard_normal(shape)) * grid.mask
    # round-trip through physical space enforces Hermitian symmetry
    v = grid.ifft(c)
    v *= amplitude / max(np.max(np.abs(v)), 1e-300)
    return VectorField3(grid, spectral=grid.fft(v) * grid.mask)


def identity_residuals(grid: Grid, count: int, rng: np.random.Generator) -> float:
    """Largest identity residual over ``count`` random field pairs."""
    worst = 0.0
    for _ in range(count):
        u = random_dealiased_field(grid, rng)
        H = random_dealiased_field(grid, rng)
        worst = max(worst, check_identities(u, H).max())
    return worst


def symmetrizer_battery(count: int, eps: float, gamma: float, rng: np.random.Generator,
                        box: StateSpaceBox | None = None, poison: bool = False) -> tuple[float, float]:
    """``(max asymmetry of Atilde0 A0^{-1} A_j, min diagonal of Atilde0)`` over random box states.

    ``poison`` negates one diagonal entry of ``Atilde0`` as a negative control.
    """
    box = box or StateSpaceBox()
    P = random_box_points(rng, count, box)
    params = PhysicalParams(gamma=gamma, eps=eps)
    _, At = symmetrizers(P, params)
    if poison:
        At = At.copy()
        At[..., 0, 0] *= -1.0
    asym = max(max_asymmetry(At @ J) for J in normalized_jacobians(P, params))
    return asym, float(np.min(np.diagonal(At, axis1=-2, axis2=-1)))


def residual_agreement(n: int = 16, T: float = 0.05, eps: float = 0.1) -> float:
    """Largest displayed-vs-direct residual mismatch on short limit trajectories of both systems."""
    g = Grid(n, DimMode.SLAB)
    w, B = orszag_tang_like(g)
    law = default_gas_law()
    times = [0.0, T / 2, T]
    worst = 0.0
    full = solve_limit(LimitState.from_fields(w, B, Viscous(0.05, 0.05)), T, T / 10, out_times=times)
    worst = max(worst, max(residual_full(full, eps, PhysicalParams(eps=eps)).mismatch))
    ideal = solve_limit(LimitState.from_fields(w, B, Ideal(law.r0)), T, T / 10, out_times=times)
    worst = max(worst, max(residual_ideal(ideal, eps, law).mismatch))
    return worst


def run_checks(n: int = 16, seed: int = 0, identity_count: int = 20, state_count: int = 1000,
               eps: float = 0.45, gamma: float = 5.0 / 3.0, poison: bool = False) -> list[CheckResult]:
    rng = np.random.default_rng(seed)
    g = Grid(n, DimMode.SLAB)
    ident = identity_residuals(g, identity_count, rng)
    asym, diag = symmetrizer_battery(state_count, eps, gamma, rng, poison=poison)
    mism = residual_agreement(n)
    return [
        CheckResult("vector identities", ident, 1e-10, ident <= 1e-10),
        CheckResult("symmetrizer symmetry", asym, 1e-12, asym <= 1e-12),
        CheckResult("symmetrizer positivity (min diagonal)", diag, 0.0, diag > 0),
        CheckResult("residual two-way agreement", mism, 1e-8, mism <= 1e-8),
    ]

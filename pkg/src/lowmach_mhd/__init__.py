"""Pseudo-spectral verification suite for low-Mach-number MHD on the periodic torus.

The package solves the eps-scaled compressible MHD systems (viscous and
heat-conducting, or ideal with a general gas law), their incompressible
limits, and measures how fast the compressible solutions approach the
asymptotic approximations built from the limits.
"""

from __future__ import annotations

from .grid import DimMode, Grid
from .fields import ScalarField, VectorField3
from .systems import FullState, GasLaw, IdealState, PhysicalParams, default_gas_law
from .incompressible import Ideal, LimitState, Trajectory, Viscous, solve_limit
from .compressible import Scheme, SchemeConfig, solve_compressible
from .asymptotics import fit_rate, residual_full, residual_ideal, well_prepared_init

__version__ = "0.1.0"

__all__ = [
    "DimMode", "Grid", "ScalarField", "VectorField3", "FullState", "IdealState", "GasLaw",
    "PhysicalParams", "default_gas_law", "Ideal", "Viscous", "LimitState", "Trajectory",
    "solve_limit", "Scheme", "SchemeConfig", "solve_compressible", "fit_rate", "residual_full",
    "residual_ideal", "well_prepared_init", "__version__",
]

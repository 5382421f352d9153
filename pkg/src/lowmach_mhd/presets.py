"""Named divergence-free initial data for the limit systems."""

from __future__ import annotations

import numpy as np

from .errors import UsageError
from .fields import VectorField3
from .grid import Grid

PRESETS = ("orszag-tang-like", "taylor-green")


def orszag_tang_like(grid: Grid, beta: float = 0.5) -> tuple[VectorField3, VectorField3]:
    """``w = (-sin x2, sin x1, 0)``, ``B = beta (-sin x2, sin 2x1, 0)``."""
    zero = lambda x1, x2, x3: 0.0 * x1  # noqa: E731
    w = VectorField3.from_function(grid, lambda x1, x2, x3: (-np.sin(x2), np.sin(x1), zero(x1, x2, x3)))
    B = VectorField3.from_function(
        grid, lambda x1, x2, x3: (-beta * np.sin(x2), beta * np.sin(2 * x1), zero(x1, x2, x3)))
    return w, B


def taylor_green(grid: Grid) -> tuple[VectorField3, VectorField3]:
    """``w = (-cos x1 sin x2, sin x1 cos x2, 0)`` with no magnetic field."""
    w = VectorField3.from_function(
        grid, lambda x1, x2, x3: (-np.cos(x1) * np.sin(x2), np.sin(x1) * np.cos(x2), 0.0 * x1))
    return w, VectorField3.zeros(grid)


def preset_fields(name: str, grid: Grid, beta: float = 0.5) -> tuple[VectorField3, VectorField3]:
    key = name.strip().lower().replace("_", "-")
    if key in ("orszag-tang-like", "orszag-tang", "ot"):
        return orszag_tang_like(grid, beta)
    if key in ("taylor-green", "tg"):
        return taylor_green(grid)
    raise UsageError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")

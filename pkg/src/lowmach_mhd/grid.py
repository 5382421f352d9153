"""Periodic torus grids and array-level spectral kernels.

Every field lives on ``[0, 2*pi)^3``. In slab mode the arrays only carry the
``(x1, x2)`` axes; the third coordinate is implicit and every ``d/dx3`` is zero.
Spectral coefficients use ``rfftn`` with forward normalisation, so that a field
equals ``sum_k fhat_k exp(i k.x)`` and coefficients are mesh independent.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np
import scipy.fft

from .errors import UsageError

TWO_PI = 2.0 * math.pi
#: measure of the unit torus [0, 2pi)^3; used by every integral and norm
TORUS_VOLUME = TWO_PI**3


class DimMode(str, enum.Enum):
    SLAB = "slab"
    FULL3D = "full3d"

    @property
    def code(self) -> int:
        return 0 if self is DimMode.SLAB else 1

    @classmethod
    def from_code(cls, code: int) -> "DimMode":
        try:
            return (cls.SLAB, cls.FULL3D)[code]
        except IndexError:
            raise UsageError(f"unknown dim_mode code {code}") from None

    @classmethod
    def parse(cls, value: "str | DimMode") -> "DimMode":
        if isinstance(value, DimMode):
            return value
        key = str(value).strip().lower().replace("-", "").replace("_", "")
        aliases = {"slab": cls.SLAB, "slab2p5d": cls.SLAB, "2.5d": cls.SLAB, "2p5d": cls.SLAB,
                   "full3d": cls.FULL3D, "3d": cls.FULL3D}
        if key not in aliases:
            raise UsageError(f"unknown dim_mode {value!r}")
        return aliases[key]


@dataclass(frozen=True)
class Grid:
    """Uniform periodic grid with ``n`` points per resolved axis.

    Args:
        n: points per axis, a power of two no smaller than 8.
        dim_mode: ``DimMode.SLAB`` (fields depend on x1, x2 only) or
            ``DimMode.FULL3D``.
    """

    n: int
    dim_mode: DimMode = DimMode.SLAB

    def __post_init__(self):
        n = self.n
        if not isinstance(n, (int, np.integer)) or n < 8 or n & (n - 1):
            raise UsageError(f"grid size must be a power of two >= 8, got {n!r}")
        object.__setattr__(self, "n", int(n))
        object.__setattr__(self, "dim_mode", DimMode.parse(self.dim_mode))

    @property
    def length(self) -> float:
        return TWO_PI

    @property
    def h(self) -> float:
        return TWO_PI / self.n

    @property
    def ndim(self) -> int:
        return 2 if self.dim_mode is DimMode.SLAB else 3

    @property
    def shape(self) -> tuple[int, ...]:
        return (self.n,) * self.ndim

    @property
    def axes(self) -> tuple[int, ...]:
        return tuple(range(-self.ndim, 0))

    @property
    def size(self) -> int:
        return self.n**self.ndim

    @cached_property
    def spectral_shape(self) -> tuple[int, ...]:
        return (self.n,) * (self.ndim - 1) + (self.n // 2 + 1,)

    @cached_property
    def k(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Integer wavenumbers per axis, broadcastable to ``spectral_shape``."""
        n, nd = self.n, self.ndim
        full = np.fft.fftfreq(n, 1.0 / n)
        half = np.arange(n // 2 + 1, dtype=float)
        out = []
        for ax in range(nd):
            vals = half if ax == nd - 1 else full
            shape = [1] * nd
            shape[ax] = vals.size
            out.append(vals.reshape(shape))
        if nd == 2:
            out.append(np.zeros([1] * nd))
        return tuple(out)

    @cached_property
    def kd(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Derivative wavenumbers: as ``k`` but with the Nyquist mode zeroed.

        Zeroing keeps first derivatives real and the derivative matrix
        skew-symmetric on the grid.
        """
        nyq = self.n // 2
        return tuple(np.where(np.abs(kk) == nyq, 0.0, kk) for kk in self.k)

    @cached_property
    def k2(self) -> np.ndarray:
        k1, k2, k3 = self.k
        return np.broadcast_to(k1**2 + k2**2 + k3**2, self.spectral_shape).copy()

    @cached_property
    def kd2(self) -> np.ndarray:
        k1, k2, k3 = self.kd
        return np.broadcast_to(k1**2 + k2**2 + k3**2, self.spectral_shape).copy()

    @cached_property
    def mask(self) -> np.ndarray:
        """2/3-rule dealiasing mask: keeps modes with every ``|k_i| <= n/3``."""
        keep = np.ones(self.spectral_shape, dtype=bool)
        for kk in self.k:
            keep &= 3 * np.abs(kk) <= self.n
        return keep

    @cached_property
    def weights(self) -> np.ndarray:
        """Multiplicity of each stored rfft coefficient in a full-spectrum sum."""
        last = np.arange(self.n // 2 + 1)
        w = np.where((last == 0) | (last == self.n // 2), 1.0, 2.0)
        return np.broadcast_to(w, self.spectral_shape).copy()

    def coords(self) -> tuple[np.ndarray, ...]:
        """Physical coordinates ``(x1, x2[, x3])`` as broadcast-ready arrays."""
        x = np.arange(self.n) * self.h
        out = []
        for ax in range(self.ndim):
            shape = [1] * self.ndim
            shape[ax] = self.n
            out.append(x.reshape(shape))
        return tuple(out)

    def mesh(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Full-shape coordinate arrays; x3 is zero in slab mode."""
        c = [np.broadcast_to(ci, self.shape) for ci in self.coords()]
        if self.ndim == 2:
            c.append(np.zeros(self.shape))
        return tuple(c)

    # -- transforms -------------------------------------------------------

    def fft(self, a: np.ndarray) -> np.ndarray:
        return scipy.fft.rfftn(a, axes=self.axes, norm="forward")

    def ifft(self, a_hat: np.ndarray) -> np.ndarray:
        return scipy.fft.irfftn(a_hat, s=self.shape, axes=self.axes, norm="forward")

    def truncate(self, a: np.ndarray) -> np.ndarray:
        """Apply the dealiasing mask to physical data."""
        return self.ifft(self.fft(a) * self.mask)

    # -- spectral derivative kernels (coefficient space) -----------------

    def d_hat(self, f_hat: np.ndarray, axis: int) -> np.ndarray:
        if axis == 2 and self.ndim == 2:
            return np.zeros_like(f_hat)
        return 1j * self.kd[axis] * f_hat

    def grad_hat(self, f_hat: np.ndarray) -> np.ndarray:
        return np.stack([self.d_hat(f_hat, j) for j in range(3)])

    def div_hat(self, v_hat: np.ndarray) -> np.ndarray:
        out = self.d_hat(v_hat[0], 0) + self.d_hat(v_hat[1], 1)
        if self.ndim == 3:
            out = out + self.d_hat(v_hat[2], 2)
        return out

    def curl_hat(self, v_hat: np.ndarray) -> np.ndarray:
        d = self.d_hat
        return np.stack([
            d(v_hat[2], 1) - d(v_hat[1], 2),
            d(v_hat[0], 2) - d(v_hat[2], 0),
            d(v_hat[1], 0) - d(v_hat[0], 1),
        ])

    def lap_hat(self, f_hat: np.ndarray) -> np.ndarray:
        return -self.k2 * f_hat

    def project_hat(self, v_hat: np.ndarray) -> np.ndarray:
        """Leray projection ``v - grad lap^{-1} div v`` in coefficient space.

        Uses the derivative wavenumbers so that the result is exactly
        divergence free under ``div_hat``; modes with no resolved derivative
        (the mean, pure Nyquist modes) pass through unchanged.
        """
        k1, k2, k3 = self.kd
        kk = self.kd2
        inv = np.divide(1.0, kk, out=np.zeros_like(kk), where=kk > 0)
        kdotv = k1 * v_hat[0] + k2 * v_hat[1] + k3 * v_hat[2]
        s = kdotv * inv
        return np.stack([v_hat[0] - k1 * s, v_hat[1] - k2 * s, v_hat[2] - k3 * s])

    def poisson_hat(self, r_hat: np.ndarray) -> np.ndarray:
        """Mean-zero solution of ``lap f = r`` (the mean of ``r`` is ignored)."""
        k2 = self.k2
        inv = np.divide(-1.0, k2, out=np.zeros_like(k2), where=k2 > 0)
        return r_hat * inv

    # -- quadrature -------------------------------------------------------

    def integrate(self, a: np.ndarray) -> np.ndarray | float:
        """Trapezoidal integral over the torus (exact for trig polynomials)."""
        return a.mean(axis=self.axes) * TORUS_VOLUME

    def sum_spectrum(self, power: np.ndarray) -> np.ndarray | float:
        """Sum a per-mode quantity over the full (two-sided) spectrum."""
        return (power * self.weights).sum(axis=self.axes)

"""Scalar and vector fields on the periodic torus, with spectral calculus.

Fields are immutable. Each keeps its physical samples and, lazily, its
spectral coefficients; whichever representation was supplied at
construction is authoritative and the other is derived once under a lock.
"""

from __future__ import annotations

import enum
import threading
from dataclasses import dataclass
from typing import Callable, Union

import numpy as np

from .errors import GridMismatchError, IncompatibleRHSError, UsageError
from .grid import TORUS_VOLUME, Grid

__all__ = [
    "ScalarField", "VectorField3", "Field", "DiffKind", "Contraction",
    "diff_op", "grad", "div", "curl", "laplacian", "partial",
    "dealias_product", "sobolev_norm", "inner", "l2_norm",
    "leray_project", "poisson_solve_mean_zero", "check_identities", "IdentityReport",
]


class _FieldBase:
    ncomp: int = 1

    def __init__(self, grid: Grid, values: np.ndarray | None = None,
                 spectral: np.ndarray | None = None):
        if values is None and spectral is None:
            raise UsageError("field needs physical values or spectral coefficients")
        self.grid = grid
        self._lock = threading.Lock()
        self._values = None
        self._spectral = None
        if values is not None:
            values = np.array(values, dtype=float)
            if values.shape != self._phys_shape():
                raise UsageError(f"expected shape {self._phys_shape()}, got {values.shape}")
            values.flags.writeable = False
            self._values = values
        else:
            spectral = np.array(spectral, dtype=complex)
            if spectral.shape != self._spec_shape():
                raise UsageError(f"expected spectral shape {self._spec_shape()}, got {spectral.shape}")
            spectral.flags.writeable = False
            self._spectral = spectral

    def __getstate__(self):
        # the lock is per-process; ship whichever representation exists
        return {"grid": self.grid, "values": self._values, "spectral": self._spectral}

    def __setstate__(self, state):
        self.grid = state["grid"]
        self._lock = threading.Lock()
        self._values = state["values"]
        self._spectral = state["spectral"]

    def _lead(self) -> tuple[int, ...]:
        return () if self.ncomp == 1 else (self.ncomp,)

    def _phys_shape(self):
        return self._lead() + self.grid.shape

    def _spec_shape(self):
        return self._lead() + self.grid.spectral_shape

    @property
    def values(self) -> np.ndarray:
        if self._values is None:
            with self._lock:
                if self._values is None:
                    v = self.grid.ifft(self._spectral)
                    v.flags.writeable = False
                    self._values = v
        return self._values

    @property
    def spectral(self) -> np.ndarray:
        if self._spectral is None:
            with self._lock:
                if self._spectral is None:
                    s = self.grid.fft(self._values)
                    s.flags.writeable = False
                    self._spectral = s
        return self._spectral

    def _check_grid(self, other):
        if other.grid != self.grid:
            raise GridMismatchError(f"grid mismatch: {self.grid} vs {other.grid}")

    def _new(self, values=None, spectral=None):
        return type(self)(self.grid, values=values, spectral=spectral)

    # linear arithmetic only; pointwise products go through dealias_product
    def __add__(self, other):
        if isinstance(other, _FieldBase):
            if type(other) is not type(self):
                return NotImplemented
            self._check_grid(other)
            return self._new(self.values + other.values)
        if np.isscalar(other):
            return self._new(self.values + other)
        return NotImplemented

    __radd__ = __add__

    def __sub__(self, other):
        if isinstance(other, _FieldBase):
            if type(other) is not type(self):
                return NotImplemented
            self._check_grid(other)
            return self._new(self.values - other.values)
        if np.isscalar(other):
            return self._new(self.values - other)
        return NotImplemented

    def __rsub__(self, other):
        if np.isscalar(other):
            return self._new(other - self.values)
        return NotImplemented

    def __neg__(self):
        return self._new(-self.values)

    def __mul__(self, other):
        if np.isscalar(other):
            return self._new(self.values * other)
        if isinstance(other, _FieldBase):
            raise TypeError("field-field products must use dealias_product")
        return NotImplemented

    __rmul__ = __mul__

    def __truediv__(self, other):
        if np.isscalar(other):
            return self._new(self.values / other)
        return NotImplemented

    def max_abs(self) -> float:
        v = self.values
        if self.ncomp == 1:
            return float(np.max(np.abs(v)))
        return float(np.sqrt(np.max(np.sum(v * v, axis=0))))

    def mean(self):
        return self.values.mean(axis=self.grid.axes)

    def __repr__(self):
        return f"{type(self).__name__}(n={self.grid.n}, mode={self.grid.dim_mode.value})"


class ScalarField(_FieldBase):
    ncomp = 1

    @classmethod
    def zeros(cls, grid: Grid) -> "ScalarField":
        return cls(grid, np.zeros(grid.shape))

    @classmethod
    def constant(cls, grid: Grid, c: float) -> "ScalarField":
        return cls(grid, np.full(grid.shape, float(c)))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable) -> "ScalarField":
        """Sample ``fn(x1, x2, x3)`` on the grid."""
        x1, x2, x3 = grid.mesh()
        return cls(grid, np.broadcast_to(fn(x1, x2, x3), grid.shape))


class VectorField3(_FieldBase):
    ncomp = 3

    @classmethod
    def zeros(cls, grid: Grid) -> "VectorField3":
        return cls(grid, np.zeros((3,) + grid.shape))

    @classmethod
    def from_components(cls, c1: ScalarField, c2: ScalarField, c3: ScalarField) -> "VectorField3":
        c1._check_grid(c2)
        c1._check_grid(c3)
        return cls(c1.grid, np.stack([c1.values, c2.values, c3.values]))

    @classmethod
    def from_function(cls, grid: Grid, fn: Callable) -> "VectorField3":
        """Sample ``fn(x1, x2, x3) -> (f1, f2, f3)`` on the grid."""
        x1, x2, x3 = grid.mesh()
        comps = fn(x1, x2, x3)
        return cls(grid, np.stack([np.broadcast_to(c, grid.shape) for c in comps]))

    def component(self, i: int) -> ScalarField:
        return ScalarField(self.grid, self.values[i])

    @property
    def components(self) -> tuple[ScalarField, ScalarField, ScalarField]:
        return tuple(self.component(i) for i in range(3))


Field = Union[ScalarField, VectorField3]


# ---------------------------------------------------------------------------
# differential operators


class DiffKind(enum.Enum):
    GRAD = "grad"
    DIV = "div"
    CURL = "curl"
    LAPLACIAN = "laplacian"
    PARTIAL = "partial"


def diff_op(kind: DiffKind, f: Field, axis: int | None = None) -> Field:
    """Exact spectral differentiation of the band-limited interpolant.

    No dealiasing is applied; linear operators act on every resolved mode.
    """
    g = f.grid
    is_vec = isinstance(f, VectorField3)
    if kind is DiffKind.GRAD:
        if is_vec:
            raise UsageError("Grad takes a scalar field")
        return VectorField3(g, spectral=g.grad_hat(f.spectral))
    if kind is DiffKind.DIV:
        if not is_vec:
            raise UsageError("Div takes a vector field")
        return ScalarField(g, spectral=g.div_hat(f.spectral))
    if kind is DiffKind.CURL:
        if not is_vec:
            raise UsageError("Curl takes a vector field")
        return VectorField3(g, spectral=g.curl_hat(f.spectral))
    if kind is DiffKind.LAPLACIAN:
        return type(f)(g, spectral=g.lap_hat(f.spectral))
    if kind is DiffKind.PARTIAL:
        if axis not in (0, 1, 2):
            raise UsageError(f"PartialJ needs axis in 0..2, got {axis!r}")
        return type(f)(g, spectral=g.d_hat(f.spectral, axis))
    raise UsageError(f"unknown derivative kind {kind!r}")


def grad(f: ScalarField) -> VectorField3:
    return diff_op(DiffKind.GRAD, f)


def div(v: VectorField3) -> ScalarField:
    return diff_op(DiffKind.DIV, v)


def curl(v: VectorField3) -> VectorField3:
    return diff_op(DiffKind.CURL, v)


def laplacian(f: Field) -> Field:
    return diff_op(DiffKind.LAPLACIAN, f)


def partial(f: Field, axis: int) -> Field:
    return diff_op(DiffKind.PARTIAL, f, axis)


# ---------------------------------------------------------------------------
# products


class Contraction(enum.Enum):
    POINTWISE = "pointwise"   # scalar*scalar, scalar*vector, vector*scalar
    DOT = "dot"               # a.b for two vectors
    ADVECT = "advect"         # (a.grad) b, a vector, b scalar or vector
    CROSS = "cross"           # a x b for two vectors


def _advect_values(a: VectorField3, b: Field) -> np.ndarray:
    g = a.grid
    av = a.values
    if isinstance(b, ScalarField):
        gb = g.ifft(g.grad_hat(b.spectral))
        return np.einsum("j...,j...->...", av, gb)
    bh = b.spectral
    gb = g.ifft(np.stack([g.grad_hat(bh[i]) for i in range(3)]))  # (i, j, ...) = d_j b_i
    return np.einsum("j...,ij...->i...", av, gb)


def dealias_product(a: Field, b: Field, contraction: Contraction = Contraction.POINTWISE) -> Field:
    """Product evaluated in physical space, then truncated by the 2/3 mask."""
    if a.grid != b.grid:
        raise GridMismatchError("dealias_product: grid mismatch")
    g = a.grid
    av_is_vec = isinstance(a, VectorField3)
    bv_is_vec = isinstance(b, VectorField3)
    if contraction is Contraction.POINTWISE:
        if av_is_vec and bv_is_vec:
            raise UsageError("pointwise product of two vectors is ambiguous; use DOT or CROSS")
        out = a.values * b.values if not (av_is_vec or bv_is_vec) else (
            a.values[None] * b.values if bv_is_vec else a.values * b.values[None])
        cls = VectorField3 if (av_is_vec or bv_is_vec) else ScalarField
    elif contraction is Contraction.DOT:
        if not (av_is_vec and bv_is_vec):
            raise UsageError("DOT needs two vector fields")
        out, cls = np.einsum("i...,i...->...", a.values, b.values), ScalarField
    elif contraction is Contraction.CROSS:
        if not (av_is_vec and bv_is_vec):
            raise UsageError("CROSS needs two vector fields")
        out, cls = np.cross(a.values, b.values, axis=0), VectorField3
    elif contraction is Contraction.ADVECT:
        if not av_is_vec:
            raise UsageError("ADVECT needs a vector transport field")
        out, cls = _advect_values(a, b), type(b)
    else:
        raise UsageError(f"unknown contraction {contraction!r}")
    return cls(g, spectral=g.fft(out) * g.mask)


# ---------------------------------------------------------------------------
# norms and inner products


def sobolev_norm(f: Field, s: float) -> float:
    """``H^s`` norm with the torus measure: ``(sum (1+|k|^2)^s |fhat|^2 (2pi)^3)^(1/2)``.

    Vector fields combine their components in quadrature.
    """
    if s < 0:
        raise UsageError(f"Sobolev index must be >= 0, got {s}")
    g = f.grid
    fh = f.spectral
    power = np.abs(fh) ** 2
    if power.ndim > g.ndim:
        power = power.reshape((-1,) + g.spectral_shape).sum(axis=0)
    mult = (1.0 + g.k2) ** s
    return float(np.sqrt(g.sum_spectrum(mult * power) * TORUS_VOLUME))


def inner(f: Field, h: Field) -> float:
    """L2 inner product on the torus."""
    f._check_grid(h)
    prod = f.values * h.values
    if prod.ndim > f.grid.ndim:
        prod = prod.sum(axis=0)
    return float(f.grid.integrate(prod))


def l2_norm(f: Field) -> float:
    return float(np.sqrt(max(inner(f, f), 0.0)))


# ---------------------------------------------------------------------------
# projection and Poisson


def leray_project(v: VectorField3) -> VectorField3:
    """Divergence-free part of ``v``; mean modes pass through unchanged."""
    return VectorField3(v.grid, spectral=v.grid.project_hat(v.spectral))


def poisson_solve_mean_zero(rhs: ScalarField, tol: float = 1e-10) -> ScalarField:
    """The mean-zero ``f`` with ``lap f = rhs``.

    Raises:
        IncompatibleRHSError: if ``|mean(rhs)| > tol``.
    """
    m = float(rhs.spectral.flat[0].real)
    if abs(m) > tol:
        raise IncompatibleRHSError(f"Poisson right-hand side has mean {m:.3e} (tolerance {tol:g})")
    return ScalarField(rhs.grid, spectral=rhs.grid.poisson_hat(rhs.spectral))


# ---------------------------------------------------------------------------
# vector identities


@dataclass(frozen=True)
class IdentityReport:
    """L2 residuals of the MHD vector identities; each should vanish."""

    div_H_cross_curlH: float      # div(H x curl H) = |curl H|^2 - curl curl H . H
    div_uxH_cross_H: float        # div((u x H) x H) = (curl H x H).u + curl(u x H).H
    grad_H2: float                # grad |H|^2 = 2 H.grad H + 2 H x curl H
    curl_u_cross_H: float         # curl(u x H) = u div H - H div u + H.grad u - u.grad H
    curl_curl: float              # curl curl H = grad div H - lap H

    def as_dict(self) -> dict[str, float]:
        return dict(self.__dict__)

    def max(self) -> float:
        return max(self.as_dict().values())


def _upsample(g: Grid, fine: Grid, f_hat: np.ndarray) -> np.ndarray:
    """Zero-pad coefficients from ``g`` onto the finer grid ``fine``."""
    lead = f_hat.shape[: f_hat.ndim - g.ndim]
    out = np.zeros(lead + fine.spectral_shape, dtype=complex)
    n, nf = g.n, fine.n
    half = n // 2
    # drop the (ambiguous) Nyquist planes; inputs are assumed band-limited
    src_idx = [np.r_[0:half, n - half + 1:n] for _ in range(g.ndim - 1)]
    dst_idx = [np.r_[0:half, nf - half + 1:nf] for _ in range(g.ndim - 1)]
    src_idx.append(np.arange(half))
    dst_idx.append(np.arange(half))
    out[(...,) + np.ix_(*dst_idx)] = f_hat[(...,) + np.ix_(*src_idx)]
    return out


def check_identities(u: VectorField3, H: VectorField3) -> IdentityReport:
    """Evaluate both sides of each identity and report their L2 differences.

    Products are formed exactly on a grid refined by two, so cubic terms of
    inputs inside the dealiased band carry no aliasing error.
    """
    u._check_grid(H)
    g = u.grid
    f = Grid(2 * g.n, g.dim_mode)
    uh = _upsample(g, f, u.spectral)
    Hh = _upsample(g, f, H.spectral)
    phys = f.ifft
    fft = f.fft

    def cross(a, b):
        return np.cross(a, b, axis=0)

    def dot(a, b):
        return np.einsum("i...,i...->...", a, b)

    def advect(a, b_hat):  # (a.grad) b with b given by coefficients
        gb = phys(np.stack([f.grad_hat(b_hat[i]) for i in range(3)]))
        return np.einsum("j...,ij...->i...", a, gb)

    uv, Hv = phys(uh), phys(Hh)
    cH_hat = f.curl_hat(Hh)
    cH = phys(cH_hat)
    ccH = phys(f.curl_hat(cH_hat))
    divH, divu = phys(f.div_hat(Hh)), phys(f.div_hat(uh))
    uxH = cross(uv, Hv)
    curl_uxH = phys(f.curl_hat(fft(uxH)))

    def l2(a):
        a2 = a * a
        if a2.ndim > f.ndim:
            a2 = a2.sum(axis=0)
        return float(np.sqrt(f.integrate(a2)))

    r16 = phys(f.div_hat(fft(cross(Hv, cH)))) - (dot(cH, cH) - dot(ccH, Hv))
    r17 = phys(f.div_hat(fft(cross(uxH, Hv)))) - (dot(cross(cH, Hv), uv) + dot(curl_uxH, Hv))
    r115 = phys(f.grad_hat(fft(dot(Hv, Hv)))) - (2 * advect(Hv, Hh) + 2 * cross(Hv, cH))
    r116 = curl_uxH - (uv * divH - Hv * divu + advect(Hv, uh) - advect(uv, Hh))
    rcc = ccH - (phys(f.grad_hat(f.div_hat(Hh))) - phys(f.lap_hat(Hh)))
    return IdentityReport(l2(r16), l2(r17), l2(r115), l2(r116), l2(rcc))

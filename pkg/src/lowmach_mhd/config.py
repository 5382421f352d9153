"""Run configuration: a documented ``key = value`` schema with overrides.

Example file::

    # full-system sweep
    system = full
    n = 64
    eps_list = 0.2, 0.1, 0.05, 0.025
    T_final = 0.5

Lists are comma separated; ``#`` starts a comment.
"""

from __future__ import annotations

import typing
from dataclasses import dataclass, fields, replace
from pathlib import Path
from typing import Iterable, Optional

from .errors import FormatError, UsageError
from .grid import DimMode


@dataclass(frozen=True)
class RunConfig:
    """Everything needed to reproduce a run or a sweep.

    Attributes:
        system: ``full`` or ``ideal``.
        dim_mode: ``slab`` or ``full3d``.
        n: points per axis.
        mu, lam, nu, kappa, gamma: coefficients of the full system.
        S_base, p_base: base point of the ideal gas law.
        eps_list: Mach numbers, strictly decreasing; single runs use the first.
        T_final: final time.
        scheme: time integrator; empty selects the system default.
        cfl: step-size safety factor; 0 selects the system default.
        dt_override: fixed compressible step (0 disables).
        clean_div_every: steps between magnetic projections.
        limit_dt: step of the limit solver.
        preset: named initial data.
        beta: magnetic amplitude of the Orszag-Tang-like preset.
        init_file: optional snapshot file with 6 components (velocity, magnetic field).
        out_times: number of equally spaced output times including 0 and T.
        s_list: Sobolev indices for reports.
        rate_s: Sobolev index used for the rate fit.
        perturbation: well-prepared perturbation amplitude (times eps).
        seed: seed of the perturbation and of property checks.
        out: output directory.
        workers: concurrent sweep members.
    """

    system: str = "full"
    dim_mode: str = "slab"
    n: int = 64
    mu: float = 0.05
    lam: float = 0.0
    nu: float = 0.05
    kappa: float = 0.05
    gamma: float = 5.0 / 3.0
    S_base: float = 0.0
    p_base: float = 1.0
    eps_list: tuple = (0.2, 0.1, 0.05, 0.025)
    T_final: float = 0.5
    scheme: str = ""
    cfl: float = 0.0
    dt_override: float = 0.0
    clean_div_every: int = 1
    limit_dt: float = 2e-3
    preset: str = "orszag-tang-like"
    beta: float = 0.5
    init_file: str = ""
    out_times: int = 21
    s_list: tuple = (0.0, 2.0, 4.0)
    rate_s: float = 2.0
    perturbation: float = 0.0
    seed: int = 0
    out: str = "out"
    workers: int = 1

    @property
    def is_ideal(self) -> bool:
        return self.system == "ideal"

    @property
    def effective_scheme(self) -> str:
        return self.scheme or ("rk4-ideal" if self.is_ideal else "imex-full")

    @property
    def effective_cfl(self) -> float:
        return self.cfl or (0.4 if self.is_ideal else 0.3)

    def validate(self, allow_zero_time: bool = False) -> "RunConfig":
        if self.system not in ("full", "ideal"):
            raise UsageError(f"system must be 'full' or 'ideal', got {self.system!r}")
        DimMode.parse(self.dim_mode)
        if self.n < 16 or self.n & (self.n - 1):
            raise UsageError(f"n must be a power of two >= 16, got {self.n}")
        eps = list(self.eps_list)
        if not eps:
            raise UsageError("eps_list must not be empty")
        if any(not 0 < e < 1 for e in eps):
            raise UsageError("every eps must lie in (0, 1)")
        if any(a <= b for a, b in zip(eps, eps[1:])):
            raise UsageError("eps_list must be strictly decreasing")
        if self.T_final < 0 or (self.T_final == 0 and not allow_zero_time):
            raise UsageError("T_final must be positive")
        if self.out_times < 1 or self.workers < 1 or self.clean_div_every < 1:
            raise UsageError("out_times, workers and clean_div_every must be >= 1")
        if self.perturbation < 0 or self.limit_dt <= 0 or self.dt_override < 0:
            raise UsageError("perturbation, limit_dt and dt_override must be nonnegative (limit_dt > 0)")
        if self.cfl and not 0 < self.cfl < 1:
            raise UsageError("cfl must lie in (0, 1)")
        return self

    def output_times(self) -> list[float]:
        if self.T_final == 0:
            return [0.0]
        k = max(self.out_times, 2)
        return [self.T_final * i / (k - 1) for i in range(k)]

    def as_text(self) -> str:
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if isinstance(v, tuple):
                v = ", ".join(repr(x) for x in v)
            lines.append(f"{f.name} = {v}")
        return "\n".join(lines) + "\n"


_HINTS = typing.get_type_hints(RunConfig)


def _convert(key: str, raw: str):
    hint = _HINTS[key]
    raw = raw.strip()
    try:
        if hint is int:
            return int(raw)
        if hint is float:
            return float(raw)
        if hint is tuple:
            return tuple(float(x) for x in raw.replace(";", ",").split(",") if x.strip())
        return raw
    except ValueError:
        raise UsageError(f"bad value for {key}: {raw!r}") from None


def parse_assignments(pairs: Iterable[str], source: str = "--set") -> dict:
    """Turn ``key=value`` strings into typed config overrides."""
    known = {f.name for f in fields(RunConfig)}
    out = {}
    for pair in pairs:
        if "=" not in pair:
            raise UsageError(f"{source}: expected key=value, got {pair!r}")
        key, val = (s.strip() for s in pair.split("=", 1))
        if key not in known:
            raise UsageError(f"{source}: unknown key {key!r}")
        out[key] = _convert(key, val)
    return out


def load_config(path: Optional[str | Path] = None, overrides: Iterable[str] = (),
                base: RunConfig | None = None) -> RunConfig:
    """Read a config file (optional) and apply ``key=value`` overrides in order."""
    cfg = base or RunConfig()
    if path is not None:
        try:
            text = Path(path).read_text()
        except OSError as exc:
            raise UsageError(f"cannot read config {path}: {exc}") from None
        lines = []
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise FormatError(f"{path}:{lineno}: expected key = value")
            lines.append(line)
        cfg = replace(cfg, **parse_assignments(lines, str(path)))
    return replace(cfg, **parse_assignments(overrides))


__all__ = ["RunConfig", "load_config", "parse_assignments"]

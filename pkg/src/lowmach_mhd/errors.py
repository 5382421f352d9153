"""Exception types raised by the solver suite."""

from __future__ import annotations


class LowMachError(Exception):
    """Base class for all package errors."""


class UsageError(LowMachError, ValueError):
    """An operation was called with arguments it cannot accept."""


class GridMismatchError(UsageError):
    """Two fields combined in one operation live on different grids."""


class IncompatibleRHSError(LowMachError):
    """Poisson right-hand side has a nonzero mean on the torus."""


class InvalidGasLawError(LowMachError):
    """The density law produced nonpositive R or dR/dp."""


class StateSpaceExit(LowMachError):
    """A state left the admissible region (positivity or box bound).

    Attributes:
        field: name of the offending field.
        extremum: the value that violated the bound.
    """

    def __init__(self, field: str, extremum: float, message: str | None = None):
        self.field = field
        self.extremum = float(extremum)
        super().__init__(message or f"state left admissible region: {field} reached {extremum:.6g}")


class StabilityError(LowMachError):
    """Time step exceeds the advisory CFL bound."""


class MissingSnapshotError(LowMachError):
    """A trajectory lacks data (pressure, pressure rate) a post-processor needs."""


class InsufficientPointsError(LowMachError):
    """Rate fitting was asked to fit fewer than three points."""


class FormatError(LowMachError):
    """A snapshot or configuration file is malformed."""

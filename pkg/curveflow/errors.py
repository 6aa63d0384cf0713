"""Exception hierarchy.

Every error carries the process exit code the CLI returns for it.
"""

__all__ = [
    "CurveflowError",
    "ConfigError",
    "NumericalError",
    "CFLError",
    "SourceError",
    "InconsistencyError",
    "UniquenessError",
    "DegenerateFitError",
    "AcceptanceError",
]


class CurveflowError(Exception):
    """Base class for all curveflow errors."""

    exit_code = 2


class ConfigError(CurveflowError):
    """Invalid or incomplete run configuration."""

    exit_code = 1


class NumericalError(CurveflowError):
    """Non finite values or an unstable time step."""

    exit_code = 2


class CFLError(NumericalError):
    """Requested time step violates the stability bound."""

    def __init__(self, dt: float, dt_max: float):
        self.dt = dt
        self.dt_max = dt_max
        super().__init__(f"time step {dt:.6g} exceeds the CFL bound {dt_max:.6g}")


class SourceError(CurveflowError, ValueError):
    """Source term violating nonnegativity, support or Lipschitz bound."""


class InconsistencyError(CurveflowError):
    """Equilibrium set came out empty for the given speed."""


class UniquenessError(CurveflowError):
    """Two profiles disagree on the equilibrium set, or anchors are unattainable."""


class DegenerateFitError(CurveflowError, ValueError):
    """Circle fit on collinear or otherwise degenerate points."""


class AcceptanceError(CurveflowError):
    """At least one acceptance criterion failed."""

    exit_code = 3

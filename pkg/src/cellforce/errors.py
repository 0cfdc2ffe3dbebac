"""Exception hierarchy and warning categories shared across the package."""


class CellforceError(Exception):
    """Base class for all package-specific errors."""


class GeometryError(CellforceError):
    """Invalid geometry (cell outside domain, broken mesh invariant, ...)."""


class ConfigurationError(CellforceError):
    """Inconsistent or unusable configuration of an operation."""


class LocationError(CellforceError):
    """A point could not be located inside any triangle."""


class AssemblyError(CellforceError):
    """Element or system assembly failed (degenerate geometry)."""


class SolverError(CellforceError):
    """Linear solver did not reach the requested tolerance."""

    def __init__(self, message, residual_history=None):
        super().__init__(message)
        self.residual_history = list(residual_history) if residual_history is not None else []


class SPDViolationError(SolverError):
    """Negative curvature detected: the reduced system is not positive definite."""


class UndefinedOrderError(CellforceError):
    """A convergence order cannot be computed (zero difference between levels)."""


class NumericsWarning(UserWarning):
    """Non-fatal numerical concern (under-resolved kernel, singular setup, ...)."""

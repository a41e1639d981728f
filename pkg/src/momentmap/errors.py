"""Exception hierarchy shared by all momentmap modules."""


class MomentMapError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(MomentMapError):
    """Malformed input: bad shapes, broken invariants, out-of-domain values."""


class ParseError(ValidationError):
    """Problem file could not be parsed; carries position information when known."""


class NumericError(MomentMapError):
    """A numerical kernel failed (eigendecomposition breakdown, overflow, ...)."""


class SolverError(MomentMapError):
    """An iterative solver failed to reach its target; carries diagnostics.

    Attributes
    ----------
    details : dict
        Solver-specific diagnostic payload (best residuals, iteration counts).
    """

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = dict(details) if details else {}


class ConsistencyError(MomentMapError):
    """An internal cross-check failed: two formulas that must agree did not."""

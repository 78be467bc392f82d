"""Exception types shared across the package.

The CLI maps these onto exit codes: ConfigurationError -> 2,
SolverNonConvergence -> 3, I/O errors -> 4.
"""


class PseigError(Exception):
    """Base class for all package-specific errors."""


class ConfigurationError(PseigError):
    """Invalid or inconsistent user-supplied configuration."""


class DataError(PseigError):
    """Numerical data violates a precondition (non-finite, wrong sign, ...)."""


class ShiftTooLargeError(PseigError):
    """(A - sigma*B) is not positive definite: sigma exceeds the smallest
    pencil eigenvalue."""


class SolverNonConvergence(PseigError):
    """An iterative solve hit its iteration cap.

    Carries whatever partial results are available (e.g. the residual
    history) in ``details``.
    """

    def __init__(self, message, details=None):
        super().__init__(message)
        self.details = details


class InconsistentSystemError(PseigError):
    """A singular system's right-hand side is not orthogonal to the
    nullspace, so no solution exists."""


class AlignmentError(PseigError):
    """Degenerate-pair alignment failed (target orthogonal to the span)."""

"""Exception types shared across the package."""


class AmpgateError(Exception):
    """Base class for all package errors."""


class InvalidRegimeError(AmpgateError, ValueError):
    """Raised when |delta| <= g, where the Bogoliubov transform is undefined."""


class NoSolutionError(AmpgateError):
    """Raised when the gate equations have no root with delta > g."""


class ConvergenceError(AmpgateError):
    """Raised when an iterative solver or fit does not converge."""


class IntegrationError(AmpgateError):
    """Raised on step-size violations or non-finite values during propagation."""


class EngineMismatchError(AmpgateError, ValueError):
    """Raised when an engine is asked to handle noise it cannot represent."""


class ConfigError(AmpgateError, ValueError):
    """Raised when a scenario configuration fails validation."""


class TruncationWarning(UserWarning):
    """Emitted when the Fock-space truncation is too small for the dynamics."""


class FitError(AmpgateError, ValueError):
    """Raised when a least-squares fit is ill-posed (e.g. rank-deficient design)."""


class IdentifiabilityWarning(UserWarning):
    """Emitted when a fit residual is nearly flat in a free parameter."""

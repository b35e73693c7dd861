"""Exception hierarchy shared by all modules."""


class LFSurvError(Exception):
    """Base class for package errors."""


class ValidationError(LFSurvError, ValueError):
    """Bad input data or configuration."""


class ParseError(ValidationError):
    """Malformed CSV or config input.

    Parameters
    ----------
    message : str
    line : int, optional
        1-based line number in the source file.
    """

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class DomainError(ValidationError):
    """Parameter outside the family's open parameter box."""


class BoundaryError(LFSurvError):
    """The likelihood has no interior maximum (e.g. zero events)."""


class ConvergenceError(LFSurvError, RuntimeError):
    """Iterative solver failed; ``trace`` carries the iteration history."""

    def __init__(self, message, trace=None):
        self.trace = list(trace) if trace is not None else []
        super().__init__(message)


class SeparationError(ConvergenceError):
    """Monotone partial likelihood: coefficients diverge."""


class SingularMatrixError(LFSurvError, ArithmeticError):
    """A matrix that must be inverted is (numerically) singular."""


class QuadratureError(LFSurvError, ArithmeticError):
    """Adaptive quadrature did not reach the requested tolerance."""

    def __init__(self, message, error_estimate=None):
        self.error_estimate = error_estimate
        super().__init__(message)

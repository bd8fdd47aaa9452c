"""Exception hierarchy shared by the solvers and the CLI."""


class WaveLsqError(Exception):
    """Base class for all package errors."""


class GeometryError(WaveLsqError, ValueError):
    """Control window or horizon violates the controllability-time condition."""


class ResolutionError(WaveLsqError, ValueError):
    """Grid too coarse to be meaningful."""


class StabilityError(WaveLsqError, ArithmeticError):
    """Explicit time stepping blew up."""


class ConvergenceError(WaveLsqError, RuntimeError):
    """An iterative linear solve did not reach its tolerance."""


class StagnationError(WaveLsqError, RuntimeError):
    """The least-squares iteration failed to decrease the error functional."""


class MaxIterError(WaveLsqError, RuntimeError):
    """Iteration budget exhausted before the stopping criterion was met."""


class DivergenceError(WaveLsqError, RuntimeError):
    """A baseline iteration diverged (increments grew or state blew up)."""


class ParseError(WaveLsqError, ValueError):
    """Configuration file is not valid TOML."""


class ValidationError(WaveLsqError, ValueError):
    """Configuration parsed but a field has an invalid value."""

"""Exception types shared across the package."""


class TreeboError(Exception):
    """Base class for all package errors."""


class InvalidParameterError(TreeboError, ValueError):
    """An argument violates a documented precondition."""


class DecompositionError(InvalidParameterError):
    """A decomposition violates its structural invariants.

    The ``code`` attribute is one of ``cycle-detected``,
    ``dimension-out-of-range``, ``dimension-uncovered``,
    ``component-too-large`` or ``duplicate-singleton``.
    """

    def __init__(self, code: str, message: str):
        super().__init__(message)
        self.code = code


class InvalidMatrixError(TreeboError, ValueError):
    """A matrix argument is not symmetric PSD within tolerance."""


class NumericalError(TreeboError, ArithmeticError):
    """A linear-algebra routine failed even after jitter."""


class FitError(TreeboError, RuntimeError):
    """Every hyperparameter optimisation restart failed."""


class ResourceError(TreeboError, RuntimeError):
    """A computation would exceed a configured resource cap."""


class BlackboxError(TreeboError, RuntimeError):
    """An external black-box process violated the line protocol."""


class UnknownOptimumError(TreeboError, LookupError):
    """The benchmark has no analytic optimum."""


class ConfigError(TreeboError, ValueError):
    """An experiment configuration file failed to parse or validate."""

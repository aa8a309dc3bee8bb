"""Exception hierarchy shared by every module of the toolkit."""


class SelfAffineError(Exception):
    """Base class for all toolkit errors."""


class ShapeError(SelfAffineError, ValueError):
    """A matrix or vector has the wrong shape."""


class DomainError(SelfAffineError, ValueError):
    """An argument lies outside the domain of the operation."""


class PreconditionError(SelfAffineError, ValueError):
    """Input data violate a mathematical precondition (e.g. contraction)."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class NumericalError(SelfAffineError, ArithmeticError):
    """An iterative numerical routine failed to converge."""


class BudgetError(SelfAffineError, RuntimeError):
    """An enumeration would exceed the configured work budget.

    The message names the flag (``--budget``) that raises the limit.
    """


class EstimationError(SelfAffineError, ValueError):
    """A statistical estimate cannot be formed from the available data."""


class ConfigError(SelfAffineError, ValueError):
    """A configuration file or command-line value is malformed."""

"""Exception hierarchy shared by all modules.

The CLI maps the two main branches onto exit codes: a violated mathematical
precondition exits with 2, a numerical failure with 3.
"""


class CarnotError(Exception):
    """Base class for all package errors."""


class PreconditionError(CarnotError, ValueError):
    """A mathematical precondition of an operation does not hold."""


class DimensionError(PreconditionError):
    pass


class InvalidAlgebraError(PreconditionError):
    pass


class NumericalError(CarnotError, ArithmeticError):
    """A numerical procedure failed (non-convergence, blow-up, ...)."""


class CalibrationError(NumericalError):
    pass

"""Exception hierarchy shared by every module."""


class QBroadcastError(Exception):
    """Base class for all package errors."""


class ShapeError(QBroadcastError, ValueError):
    """Operands have incompatible dimensions."""


class DomainError(QBroadcastError, ValueError):
    """A parameter lies outside its admissible range."""


class PreconditionError(QBroadcastError, ValueError):
    """An operation was called on an object that violates its precondition."""


class NumericalError(QBroadcastError, ArithmeticError):
    """An iterative numerical kernel failed."""


class ConvergenceError(NumericalError):
    """An iteration hit its budget without reaching the requested accuracy."""

"""Exception hierarchy shared by every solver in the package."""

from __future__ import annotations


class QsfError(Exception):
    """Base class for all package errors."""


class ModelError(QsfError, ValueError):
    """Invalid model parameters or a malformed model document.

    ``field`` names the offending parameter (dotted path for JSON input).
    """

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class DimensionMismatch(QsfError, ValueError):
    pass


class SingularMatrix(QsfError, ArithmeticError):
    pass


class NegativeEntries(QsfError, ValueError):
    pass


class NoConvergence(QsfError, ArithmeticError):
    """An iterative method stopped before reaching its tolerance."""

    def __init__(self, message: str, iterations: int = 0, residual: float = float("nan")):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"{message} (iterations={iterations}, residual={residual:.3e})")


class NotErgodic(QsfError, ValueError):
    pass


class InvalidBlocks(QsfError, ValueError):
    pass


class NoExitState(QsfError, ValueError):
    pass


class CapacityExceeded(QsfError, ValueError):
    pass


class NotTransient(QsfError, ValueError):
    pass

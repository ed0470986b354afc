"""Exception hierarchy shared by the solver modules."""

from __future__ import annotations


class FracRotheError(Exception):
    """Base class for all solver errors."""


class NonPositiveInput(FracRotheError, ValueError):
    pass


class DelayExceedsHorizon(FracRotheError, ValueError):
    pass


class StepTooLarge(FracRotheError, ValueError):
    pass


class OrderOutOfRange(FracRotheError, ValueError):
    pass


class NegativeWeight(FracRotheError, ValueError):
    pass


class DimensionMismatch(FracRotheError, ValueError):
    pass


class EmptyHistory(FracRotheError, ValueError):
    pass


class IndexOutOfRange(FracRotheError, IndexError):
    pass


class OutOfDomain(FracRotheError, ValueError):
    pass


class BadTermIndex(FracRotheError, IndexError):
    pass


class IncompatibleGrids(FracRotheError, ValueError):
    pass


class BadExponent(FracRotheError, ValueError):
    pass


class SolveFailure(FracRotheError, ArithmeticError):
    pass


class NonFiniteForcing(FracRotheError, ArithmeticError):
    pass


class QuadratureNonConvergence(FracRotheError, ArithmeticError):
    pass


class Aborted(FracRotheError):
    """A run hit a non-finite state.

    The states computed before the failure are kept on :attr:`trajectory`
    (later entries are NaN) and :attr:`index` is the step that failed.
    """

    def __init__(self, message: str, trajectory, index: int) -> None:
        super().__init__(message)
        self.trajectory = trajectory
        self.index = index

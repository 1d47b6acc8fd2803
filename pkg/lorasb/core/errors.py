from typing import Any, Dict, Optional


class LoraSBError(Exception):
    """Base class for every error raised deliberately by lorasb."""


class RejectedInputError(LoraSBError, ValueError):
    """Input violates a precondition: shapes, ranks, config fields, layouts."""


class NumericalFailureError(LoraSBError, ArithmeticError):
    """A factorization did not converge or produced non-finite values."""

    def __init__(self, message :str, iterations :Optional[int]=None):
        super().__init__(message)
        self.iterations = iterations


class SingularityError(LoraSBError, ArithmeticError):
    """Matrix is singular or too ill-conditioned for the requested operation."""

    def __init__(self, message :str, condition_number :float=float("inf")):
        super().__init__(message)
        self.condition_number = condition_number


class RunAbortedError(LoraSBError, RuntimeError):
    """A training run stopped before completing its step budget."""

    def __init__(self, message :str, step :int, diagnostics :Optional[Dict[str, Any]]=None):
        super().__init__(message)
        self.step = step
        self.diagnostics = diagnostics or {}


class InvariantViolationError(RunAbortedError):
    """Strict mode caught a broken invariant mid-run."""

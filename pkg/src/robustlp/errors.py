"""Exception hierarchy shared by all solver modules."""

from __future__ import annotations


class SolverError(Exception):
    """Base class for every error raised by robustlp."""


class SingularSystem(SolverError, ArithmeticError):
    """A normal-equation matrix is (numerically) rank deficient."""


class NonFiniteInput(SolverError, ValueError):
    """An input array contains NaN or infinity."""


class OutOfDomain(SolverError, ValueError):
    """A point lies on or outside the barrier domain."""


class DegenerateInput(SolverError, ValueError):
    """Input is structurally degenerate for the requested operation."""


class DriftTooLarge(SolverError):
    """Row scalings changed faster than the maintenance contract allows."""


class BudgetTooSmall(SolverError):
    """A rejection-sampling budget U was below the required bound."""


class CenteringLost(SolverError):
    """Path following could not keep the iterate centered."""

    def __init__(self, message: str, yinf: float = float("nan")):
        super().__init__(message)
        self.yinf = yinf


class CenteringCheckFailed(SolverError):
    """A constructed initial point failed the centering check."""


class Infeasible(SolverError):
    """The problem has no feasible solution."""


class RetriesExhausted(SolverError):
    """All randomized attempts failed verification."""


class ParseError(SolverError, ValueError):
    """Malformed input file; carries the offending line number."""

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class NotConverged(SolverError):
    """An iterative method hit its iteration cap before reaching tolerance."""

"""Exception types shared across the lab.

The CLI maps these onto exit codes: usage/config problems exit 2,
numerical failures (budget, overflow, precision loss) exit 3, and
failed assertions in check runs exit 1.
"""


class CircleLabError(Exception):
    """Base class for all lab errors."""


class DomainError(CircleLabError, ValueError):
    """Input outside the mathematical domain of an operation."""


class ParameterError(CircleLabError, ValueError):
    """Constructor parameter outside its admissible range."""


class ConvergentOverflowError(CircleLabError, OverflowError):
    """Convergent denominators left the 64-bit range at a named level."""

    def __init__(self, level, message=None):
        self.level = level
        super().__init__(message or f"convergent overflow at level {level}")


class PrecisionLossError(CircleLabError, ArithmeticError):
    """An orbit lost more than half the mantissa."""


class BudgetExceededError(CircleLabError, RuntimeError):
    """An iteration or bisection budget ran out before convergence.

    Distinct from a detected infinite height, which is a result,
    not a failure.
    """


class InvariantViolationError(CircleLabError, AssertionError):
    """A structural invariant failed; carries the name of the check."""

    def __init__(self, check, message=None):
        self.check = check
        super().__init__(message or f"invariant violated: {check}")


class DegeneratePairError(CircleLabError, ValueError):
    """Pair construction hit a degenerate configuration.

    Typical case: the critical orbit lands on 0 exactly, so an
    interval endpoint collapses.
    """


class InfiniteHeightError(CircleLabError, ValueError):
    """An operation needing a finite height met a confirmed infinite
    one (the pair sits inside or on the boundary of a tongue)."""


class SectorError(CircleLabError, ValueError):
    """A point lies outside the required attracting/repelling sector."""


class SolveError(CircleLabError, RuntimeError):
    """A solver failed to converge or to verify its result."""


class GridError(CircleLabError, ValueError):
    """A labeled-grid operation failed (marked point off grid,
    component touching the window edge, or similar)."""

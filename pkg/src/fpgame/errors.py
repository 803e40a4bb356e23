"""Exception hierarchy shared across the package."""

from __future__ import annotations


class FpgameError(Exception):
    """Base class for all package errors."""


class DomainError(FpgameError, ValueError):
    """An argument lies outside the domain of a function."""


class InfeasibleChannelError(FpgameError, ValueError):
    """A collusion channel violates the marking or symmetry constraints."""

    def __init__(self, violations):
        self.violations = list(violations)
        text = "; ".join(str(v) for v in self.violations)
        super().__init__(f"infeasible channel: {text}")


class InvalidPriorError(FpgameError, ValueError):
    """A prior violates one of its type invariants."""


class QuadratureError(FpgameError, ArithmeticError):
    """A quadrature rule could not be built or did not converge."""


class DivergentIntegralError(FpgameError, ArithmeticError):
    """The integral of 1 / (f(w) w (1 - w)) is infinite for this prior."""


class SingularityError(FpgameError, ArithmeticError):
    """A quantity is singular at the requested point."""


class NonConvergenceError(FpgameError, RuntimeError):
    """An iterative solver stopped before reaching its tolerance.

    The best iterate found so far is kept on the exception so callers can
    still emit a best-effort answer.
    """

    def __init__(self, message, best=None, gap=float("nan")):
        super().__init__(message)
        self.best = best
        self.gap = gap


class InfeasibleRestrictionError(FpgameError, RuntimeError):
    """The restricted game of the double-oracle loop lost its whole support."""


class CrossCheckError(FpgameError, ArithmeticError):
    """Two independent evaluation routes disagreed beyond their tolerance."""


class SpecError(FpgameError, ValueError):
    """A textual prior or channel specification does not parse.

    ``position`` is the 0-based offset of the offending character.
    """

    def __init__(self, message, text="", position=0):
        super().__init__(f"{message} at position {position} in {text!r}")
        self.text = text
        self.position = position

"""Exception types shared across the package."""


class QrouteError(Exception):
    """Base class for all package errors."""


class ParameterError(QrouteError):
    """Model or solver parameters outside their valid range."""


class InfeasibleActionError(QrouteError):
    """A routing action u=1 was requested from an empty queue."""


class ZeroProbabilityEventError(QrouteError):
    """Bayes conditioning on an event with zero probability mass.

    Signals an inconsistent trace or a policy assumption that does not match
    the actions actually taken.
    """


class NegativeSupportError(QrouteError):
    """A PMF shift would place probability mass below zero."""


class BudgetExceededError(QrouteError):
    """Exact enumeration or DP size exceeds the configured budget."""

    def __init__(self, size: int, budget: int):
        self.size = size
        self.budget = budget
        super().__init__(f"enumeration size {size} exceeds budget {budget}")


class ConvergenceError(QrouteError):
    """Iterative solver failed to reach the target residual."""


class ReducibleChainError(QrouteError):
    """Stationary distribution is not unique on the truncated chain."""


class DivergingCostError(QrouteError):
    """Stationary cost fails the tail Cauchy test at the truncation cap."""


class UnsupportedPolicyError(QrouteError):
    """Belief conditioning is not defined for this policy's action events."""


class InvariantViolationError(QrouteError):
    """A hard runtime invariant failed; indicates an implementation bug."""

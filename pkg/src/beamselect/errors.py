"""Exception hierarchy shared across the package."""


class BeamselectError(Exception):
    """Base class for all package errors."""


class InvalidConfigError(BeamselectError):
    """A configuration value or configuration file is unusable."""


class InvalidInputError(BeamselectError):
    """An argument violates a precondition (dimension, sign, emptiness)."""


class DegenerateSelectionError(BeamselectError):
    """A candidate user/beam selection is numerically rank-deficient.

    Greedy loops treat the offending candidate as infeasible and move on.
    """


class SelectionInfeasibleError(BeamselectError):
    """No feasible candidate remained in a greedy selection iteration."""


class OracleBudgetError(BeamselectError):
    """An exhaustive search would exceed the configured combination budget."""

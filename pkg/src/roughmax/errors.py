"""Exception types raised across the package."""


class ParameterError(ValueError):
    """An argument lies outside the range an operation accepts."""


class HypothesisError(ParameterError):
    """An exponent profile violates a hypothesis the computation relies on.

    The message names the violated condition, e.g. ``requires 1/m < p < n/alpha``.
    """


class DomainError(ValueError):
    """A cube or point falls outside the grid box."""


class RangeError(ValueError):
    """A dyadic level leaves the admissible window."""


class SingularDirectionError(ValueError):
    """A kernel was evaluated at a zero offset, where it has no direction."""


class BudgetError(RuntimeError):
    """A computation would exceed the configured cell/compute budget."""


class InvariantViolation(AssertionError):
    """A pointwise inequality that must hold with exact integrals failed."""


class DivergenceError(ParameterError):
    """A power integral diverges at the origin."""

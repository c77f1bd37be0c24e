"""Exception types shared across the toolkit."""


class InvalidInputError(ValueError):
    """An argument violates a documented precondition."""


class DegenerateInputError(ValueError):
    """The input sits on a degenerate set where the requested quantity is undefined."""


class DegeneratePositionError(DegenerateInputError):
    """A position (or a finite-difference step around it) yields degenerate feedback."""


class CombinatorialBudgetError(RuntimeError):
    """An exhaustive enumeration would exceed the configured budget."""

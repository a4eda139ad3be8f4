"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violates a documented precondition or format invariant."""


class NumericalError(ArithmeticError):
    """A numerical routine failed to converge or broke an exact identity."""

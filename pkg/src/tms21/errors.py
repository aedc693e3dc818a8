"""Exception types shared across the package."""


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class NumericError(ArithmeticError):
    """A numerical procedure did not meet its tolerance."""

    def __init__(self, message, estimate=None):
        super().__init__(message)
        self.estimate = estimate

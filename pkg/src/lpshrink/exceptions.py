"""Exception types shared across the package."""


class ValidationError(ValueError):
    """An input violates a precondition (bad parameter, wrong shape, wrong mode)."""


class DomainError(ArithmeticError):
    """A quantity is evaluated outside the set where it is defined."""

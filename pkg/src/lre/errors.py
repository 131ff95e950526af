"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """An argument violates an operation's precondition."""


class RatioUndefinedError(InvalidInputError):
    """The unregularized ratio q/p was requested where p vanishes."""


class NumericalError(ArithmeticError):
    """A linear-algebra step failed (e.g. a non-SPD factorization)."""

"""Shared exception types."""


class RangeError(ValueError):
    """A parameter is outside the domain an operation supports."""


class ToleranceError(ArithmeticError):
    """A requested tolerance could not be certified.

    Carries the best rigorous bound that was achieved so callers can
    retry with a looser target or report the shortfall.
    """

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved

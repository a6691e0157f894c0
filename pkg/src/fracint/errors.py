class DomainError(ValueError):
    """An argument lies outside the set where the operation is defined."""


class PreconditionError(ValueError):
    """Inputs are individually valid but violate a joint requirement."""


class AccuracyError(ArithmeticError):
    """An iterative computation did not reach its requested tolerance."""

    def __init__(self, message: str, previous: float, last: float):
        super().__init__(f"{message} (previous={previous!r}, last={last!r})")
        self.previous = previous
        self.last = last

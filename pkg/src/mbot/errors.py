"""Exception types shared across the package."""


class InvalidInputError(ValueError):
    """Raised when caller-supplied data violates an operation's precondition."""


class ConfigurationError(InvalidInputError):
    """Raised for incompatible option combinations (e.g. sliced inner metric
    with plan aggregation, which has no inner plans to aggregate)."""


class ConsistencyError(RuntimeError):
    """Raised when an internal invariant is broken, e.g. an outer coupling
    carries mass on a batch pair for which no inner plan was kept."""


class NoAcceptanceError(RuntimeError):
    """Raised when rejection sampling exhausts its proposal budget without a
    single acceptance. Carries the smallest distance seen so the caller can
    pick a feasible threshold."""

    def __init__(self, message: str, smallest_distance: float):
        super().__init__(message)
        self.smallest_distance = smallest_distance

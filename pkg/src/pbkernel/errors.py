"""Exception types shared across the package."""


class ParameterError(ValueError):
    """An input lies outside the domain of the requested computation."""


class InapplicableBoundError(ValueError):
    """The bound's preconditions fail for this data (e.g. a non-positive
    least-squares margin), so no certificate can be issued."""

"""Exception types shared across the package."""


class DimensionError(ValueError):
    """Matrix or vector shapes are empty or incompatible."""


class PreconditionError(ValueError):
    """An input violates a documented precondition (e.g. unnormalized columns)."""


class GenerationError(RuntimeError):
    """A synthetic instance could not be constructed with valid conditioning."""


class SolverError(RuntimeError):
    """Numerical breakdown inside an LP solve (not plain infeasibility)."""

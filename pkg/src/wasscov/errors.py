"""Exception types shared across the package."""


class DataError(ValueError):
    """Input data violates a documented contract (bad values, shapes, grids)."""


class NumericalError(ArithmeticError):
    """A computation is numerically undefined for the given input."""

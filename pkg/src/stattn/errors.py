"""Exception types shared across the package.

The CLI maps these onto exit codes: DataError -> 2, NumericError -> 3.
"""


class ShapeError(ValueError):
    """Operand shapes do not conform."""


class DataError(RuntimeError):
    """Input data is missing, malformed or inconsistent."""


class NumericError(ArithmeticError):
    """A non-finite value showed up where training cannot continue."""

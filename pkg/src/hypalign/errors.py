"""Exception hierarchy shared across the package.

The CLI maps these onto exit codes: usage problems exit 1, DataError
(and subclasses) exit 2, NumericalError exit 3.
"""


class DataError(ValueError):
    """Malformed or inconsistent input data."""


class ParseError(DataError):
    """A line of an input file could not be parsed; carries the line number."""

    def __init__(self, message, line_no=None):
        if line_no is not None:
            message = f"line {line_no}: {message}"
        super().__init__(message)
        self.line_no = line_no


class NumericalError(ArithmeticError):
    """A numerical routine produced a non-finite or degenerate result."""


class CoincidentPoints(NumericalError):
    """Distance gradient requested at (numerically) coincident points."""

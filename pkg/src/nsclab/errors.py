"""Exception hierarchy shared by every nsclab module."""


class NscLabError(Exception):
    """Base class for all nsclab errors."""


class InvalidMatrix(NscLabError, ValueError):
    pass


class RankDeficient(NscLabError, ArithmeticError):
    pass


class TooLarge(NscLabError, ValueError):
    pass


class ZeroVector(NscLabError, ValueError):
    pass


class WrongDimension(NscLabError, ValueError):
    pass


class NumericalInconsistency(NscLabError, ArithmeticError):
    pass


class NotAWitness(NscLabError, ValueError):
    pass


class NoSolutionWithinKmax(NscLabError, ArithmeticError):
    pass


class MaxIterations(NscLabError, RuntimeError):
    pass


class ParseError(NscLabError, ValueError):
    def __init__(self, message, line=None, column=None):
        loc = ""
        if line is not None:
            loc = f" (line {line}" + (f", column {column})" if column is not None else ")")
        super().__init__(message + loc)
        self.line = line
        self.column = column


class DimensionMismatch(NscLabError, ValueError):
    pass


class StatusDowngrade(UserWarning):
    """Emitted when a derived quantity relied on lower-bound estimates."""

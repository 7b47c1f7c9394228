"""Exception hierarchy shared by every module.

The CLI maps these onto exit codes: data problems (``DataError`` and its
subclasses) exit with 3, numeric/estimation failures exit with 4.
"""


class PLHMMError(Exception):
    """Base class for all package errors."""


class DataError(PLHMMError):
    """Input data or documents are unusable."""


class DomainError(DataError, ValueError):
    """An argument lies outside the domain of an operation."""


class ParseError(DataError):
    """A series or model file could not be parsed."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class ModelFormatError(DataError):
    """A model document has the wrong version, schema, or violates invariants."""


class ImpossibleSeriesError(DataError):
    """No segmentation of the series has nonzero probability under the model."""


class NumericError(PLHMMError, ArithmeticError):
    """An iterative numerical routine failed to converge."""

    def __init__(self, message, last=None):
        super().__init__(message)
        self.last = last


class EstimationError(PLHMMError):
    """A reestimation step could not produce valid parameters."""

    def __init__(self, message, state=None):
        if state is not None:
            message = f"state {state + 1}: {message}"
        super().__init__(message)
        self.state = state

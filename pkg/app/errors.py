"""
Exception hierarchy shared by the analysis modules and the command line.

The CLI maps these onto exit codes: validation problems exit with 1,
numeric faults with 2 (I/O errors surface as plain OSError and exit with 3).
"""


class MjdsError(Exception):
    """Base class for every error raised by this package"""


class ValidationError(MjdsError, ValueError):
    """An input violates a documented precondition"""


class DimensionMismatchError(ValidationError):
    """
    A vector or history does not have the dimensions the model expects.

    Args:
        field: Name of the offending quantity (e.g. "history.dim")
        expected: Expected size
        actual: Size that was supplied
        index: Offending slot or argument index, when there is one
    """

    def __init__(self, field, expected, actual, index=None):
        self.field = field
        self.expected = expected
        self.actual = actual
        self.index = index
        where = f" at index {index}" if index is not None else ""
        super().__init__(f"{field}{where}: expected {expected}, got {actual}")


class AlphabetViolationError(ValidationError):
    """A delay vector is not a member of the model's delay alphabet"""

    def __init__(self, delay, alphabet):
        self.delay = tuple(delay)
        self.alphabet = tuple(alphabet)
        super().__init__(f"delay {self.delay} is not in the alphabet {list(self.alphabet)}")


class DuplicateDelayError(ValidationError):
    """The same delay vector appears twice in an alphabet"""

    def __init__(self, delay, positions):
        self.delay = tuple(delay)
        self.positions = tuple(positions)
        super().__init__(f"delay {self.delay} appears more than once (positions {list(self.positions)})")


class TpmValidationError(ValidationError):
    """A transition probability matrix is not row-stochastic"""

    def __init__(self, message, row=None):
        self.row = row
        prefix = f"row {row}: " if row is not None else ""
        super().__init__(f"{prefix}{message}")


class NumericFaultError(MjdsError, ArithmeticError):
    """A dynamics map or functional produced a non-finite value"""


class DecayedBelowFloorError(NumericFaultError):
    """Too few moment values above the zero floor remain to fit a decay rate"""


class ConfigError(ValidationError):
    """
    A configuration file or flag could not be interpreted.

    Args:
        message: What went wrong
        field: Offending key, when known
        line: Line number in the JSON source, when known
    """

    def __init__(self, message, field=None, line=None):
        self.field = field
        self.line = line
        parts = []
        if line is not None:
            parts.append(f"line {line}")
        if field is not None:
            parts.append(f"field '{field}'")
        location = f"{', '.join(parts)}: " if parts else ""
        super().__init__(f"{location}{message}")

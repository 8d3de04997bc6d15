"""Exception hierarchy shared by every app.

Each family carries the process exit code the management commands report.
"""


class TensorRegError(Exception):
    """Base class for all toolkit errors"""
    exit_code = 1


class UsageError(TensorRegError):
    """Caller supplied an invalid argument, grid or configuration"""
    exit_code = 2


class DataError(TensorRegError):
    """Input data is malformed or inconsistent"""
    exit_code = 3


class NumericalError(TensorRegError):
    """A computation could not produce a usable result"""
    exit_code = 4


class InvalidPartitionError(UsageError):
    pass


class InvalidRankError(UsageError):
    pass


class InvalidGridError(UsageError):
    pass


class InvalidConfigError(UsageError):
    pass


class InvalidScenarioError(UsageError):
    pass


class DimensionMismatchError(DataError):
    pass


class InvalidDataError(DataError):
    pass


class InsufficientSamplesError(DataError):
    pass


class DuplicateCellError(DataError):
    pass


class MissingCellError(DataError):
    pass


class NonNumericValueError(DataError):
    pass


class TensorFormatError(DataError):
    """Raised when a DTF1 payload cannot be decoded"""
    pass


class NoViableCellError(NumericalError):
    pass


class NotPositiveSemidefiniteError(NumericalError):
    pass

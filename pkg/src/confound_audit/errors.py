"""Exception hierarchy shared by every module."""


class ConfoundAuditError(Exception):
    """Base class for all errors raised by this package."""


class DataError(ConfoundAuditError):
    """Input data cannot be used (bad file, bad column, bad target)."""


class MissingColumnError(DataError):
    def __init__(self, column):
        super().__init__(f"column {column!r} not found in header")
        self.column = column


class IngestionError(DataError):
    def __init__(self, message, row=None, column=None):
        where = []
        if row is not None:
            where.append(f"row {row}")
        if column is not None:
            where.append(f"column {column!r}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.row = row
        self.column = column


class InvalidTargetError(DataError):
    pass


class SplitError(DataError):
    pass


class UnderdeterminedDesignError(ConfoundAuditError):
    pass


class DimensionMismatchError(ConfoundAuditError, ValueError):
    pass


class UndefinedMetricError(ConfoundAuditError, ValueError):
    pass


class ModelError(ConfoundAuditError, ValueError):
    pass


class SimulationError(ConfoundAuditError):
    pass


class InconclusiveError(ConfoundAuditError):
    """Verdict requested without the score cells it depends on."""


class SchemaVersionError(ConfoundAuditError):
    pass

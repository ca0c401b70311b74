"""
Exception hierarchy shared by every package.

Everything the command line should report as a usage or data problem derives
from FairTreeError; the CLI turns those into exit code 2.
"""


class FairTreeError(Exception):
    pass


class SchemaError(FairTreeError):
    pass


class DataError(FairTreeError):
    def __init__(self, message: str, row: int | None = None, column: str | None = None):
        if row is not None and column is not None:
            message = f"row {row}, column '{column}': {message}"
        elif row is not None:
            message = f"row {row}: {message}"
        elif column is not None:
            message = f"column '{column}': {message}"
        super().__init__(message)
        self.row = row
        self.column = column


class ConfigError(FairTreeError):
    pass


class FitError(FairTreeError):
    pass


class RoutingError(DataError):
    pass


class ModelFormatError(FairTreeError):
    pass


class MetricError(FairTreeError):
    pass

"""Error types for SQL parsing, resolution, loading, and execution."""

from __future__ import annotations

from ..schema import VesselSqlError


class SqlError(VesselSqlError):
    pass


class SqlSyntaxError(SqlError):
    """Positioned syntax error; `position` is a character offset."""

    def __init__(self, message: str, position: int, token: str = ""):
        super().__init__(f"{message} at position {position}" + (f" near {token!r}" if token else ""))
        self.position = position
        self.token = token


class SqlSchemaError(SqlError):
    """Unknown table/column or arity violation found at resolution time."""

    def __init__(self, message: str, *, unknown: str = "", suggestion: str | None = None):
        if suggestion:
            message = f"{message} (did you mean {suggestion!r}?)"
        super().__init__(message)
        self.unknown = unknown
        self.suggestion = suggestion


class RuntimeExecError(SqlError):
    """Execution failure (type mismatch, bad scalar subquery, missing NOW)."""


class HeaderMismatchError(SqlError):
    pass


class KindError(SqlError):
    def __init__(self, message: str, row: int, column: str):
        super().__init__(f"{message} (row {row}, column {column})")
        self.row = row
        self.column = column

"""Parser and in-memory executor for the supported SQL subset."""

from .ast import SelectQuery
from .errors import (
    HeaderMismatchError,
    KindError,
    RuntimeExecError,
    SqlError,
    SqlSchemaError,
    SqlSyntaxError,
)
from .executor import execute
from .parser import parse_sql
from .store import TableStore, export_sql, load_csv, load_dir

__all__ = [
    "SelectQuery",
    "SqlError",
    "SqlSyntaxError",
    "SqlSchemaError",
    "RuntimeExecError",
    "HeaderMismatchError",
    "KindError",
    "parse_sql",
    "execute",
    "TableStore",
    "load_csv",
    "load_dir",
    "export_sql",
]

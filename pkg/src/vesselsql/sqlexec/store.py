"""In-memory table store plus CSV import/export and SQL dump.

Rows are tuples aligned with the registry column order. The store is the
only mutable piece of the query stack; a version counter lets sessions
detect that cached results went stale after a reload.
"""

from __future__ import annotations

import csv
from datetime import datetime
from pathlib import Path

from ..schema import (
    REGISTRY,
    GeoShape,
    SchemaRegistry,
    TableDef,
    format_timestamp,
    parse_timestamp,
)
from ..wkt import WktError, parse_wkt, to_wkt
from .errors import HeaderMismatchError, KindError, SqlSchemaError


class TableStore:
    """Holds the working copy of every registry table."""

    def __init__(self, registry: SchemaRegistry = REGISTRY):
        self.registry = registry
        self._tables: dict[str, list[tuple]] = {t.name: [] for t in registry.tables}
        self.version = 0

    def _table_def(self, table: str) -> TableDef:
        table_def = self.registry.table(table)
        if table_def is None:
            raise SqlSchemaError(f"unknown table '{table}'", unknown=table)
        return table_def

    def rows(self, table: str) -> tuple[tuple, ...]:
        self._table_def(table)
        return tuple(self._tables[table])

    def replace(self, table: str, rows: list[tuple] | tuple[tuple, ...]) -> None:
        table_def = self._table_def(table)
        width = len(table_def.columns)
        out = []
        for row in rows:
            if len(row) != width:
                raise SqlSchemaError(
                    f"row of arity {len(row)} for table '{table}' with {width} columns"
                )
            out.append(tuple(row))
        self._tables[table] = out
        self.version += 1

    def row_count(self, table: str) -> int:
        self._table_def(table)
        return len(self._tables[table])

    def shapes(self) -> tuple[GeoShape, ...]:
        idx = self._table_def("shp_data").column_names.index("geometry")
        return tuple(row[idx] for row in self._tables["shp_data"])

    def shape_by_name(self, name: str) -> GeoShape | None:
        want = name.strip().lower()
        for shape in self.shapes():
            if shape.name.strip().lower() == want:
                return shape
        return None


def cell_to_text(value: object) -> str:
    """Render one cell for CSV; round-trips through `text_to_cell`."""
    if isinstance(value, datetime):
        return format_timestamp(value)
    if isinstance(value, GeoShape):
        return to_wkt(value)
    if isinstance(value, float):
        if value == int(value) and abs(value) < 1e16:
            return str(int(value))
        return repr(value)
    return str(value)


def text_to_cell(kind: str, text: str, row_num: int, column: str) -> object:
    if kind == "integer":
        try:
            return int(text)
        except ValueError:
            raise KindError(f"not an integer: {text!r}", row=row_num, column=column) from None
    if kind == "real":
        try:
            return float(text)
        except ValueError:
            raise KindError(f"not a number: {text!r}", row=row_num, column=column) from None
    if kind == "timestamp":
        try:
            return parse_timestamp(text)
        except ValueError:
            raise KindError(f"not a timestamp: {text!r}", row=row_num, column=column) from None
    if kind == "geometry":
        try:
            return parse_wkt(text)
        except (WktError, ValueError) as exc:
            raise KindError(f"bad geometry: {exc}", row=row_num, column=column) from None
    return text


def _rebuild_shp_row(table_def: TableDef, row: list) -> list:
    """Give the parsed geometry its id/name/codes from the sibling cells."""
    names = table_def.column_names
    geom: GeoShape = row[names.index("geometry")]
    rebuilt = GeoShape(
        id=row[names.index("id")],
        obj_type=geom.obj_type,
        name=row[names.index("name")],
        geometry=geom.geometry,
        region_code=row[names.index("region_code")],
        remark=row[names.index("remark")],
    )
    row[names.index("geometry")] = rebuilt
    row[names.index("obj_type")] = rebuilt.obj_type
    return row


def load_csv(store: TableStore, table: str, path: str | Path) -> int:
    """Replace one table from a CSV file; returns the number of rows loaded."""
    table_def = store._table_def(table)
    expected = list(table_def.column_names)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise HeaderMismatchError(f"{path}: empty file, expected header {expected}") from None
        if header != expected:
            raise HeaderMismatchError(
                f"{path}: header {header} does not match {table} columns {expected}"
            )
        rows: list[tuple] = []
        for row_num, cells in enumerate(reader, start=1):
            if len(cells) != len(expected):
                raise KindError(
                    f"expected {len(expected)} cells, got {len(cells)}",
                    row=row_num,
                    column="",
                )
            parsed = [
                text_to_cell(col.kind, cell, row_num, col.name)
                for col, cell in zip(table_def.columns, cells)
            ]
            if table == "shp_data":
                parsed = _rebuild_shp_row(table_def, parsed)
            rows.append(tuple(parsed))
    store.replace(table, rows)
    return len(rows)


def save_csv(store: TableStore, table: str, path: str | Path) -> None:
    table_def = store._table_def(table)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(table_def.column_names)
        for row in store.rows(table):
            writer.writerow([cell_to_text(c) for c in row])


def load_dir(store: TableStore, directory: str | Path) -> dict[str, int]:
    """Load `<table>.csv` for every registry table present in the directory."""
    directory = Path(directory)
    if not directory.is_dir():
        raise FileNotFoundError(f"not a directory: {directory}")
    loaded: dict[str, int] = {}
    for table_def in store.registry.tables:
        path = directory / f"{table_def.name}.csv"
        if path.exists():
            loaded[table_def.name] = load_csv(store, table_def.name, path)
    return loaded


def save_dir(store: TableStore, directory: str | Path) -> list[str]:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    written: list[str] = []
    for table_def in store.registry.tables:
        if store.row_count(table_def.name):
            save_csv(store, table_def.name, directory / f"{table_def.name}.csv")
            written.append(table_def.name)
    return written


_SQL_TYPES = {
    "integer": "INTEGER",
    "real": "REAL",
    "text": "TEXT",
    "timestamp": "TEXT",
    "geometry": "TEXT",
}


def _sql_value(value: object) -> str:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return cell_to_text(value)
    return "'" + cell_to_text(value).replace("'", "''") + "'"


def export_sql(store: TableStore) -> str:
    """DDL plus INSERT statements for every non-empty table, deterministic order."""
    lines: list[str] = []
    for table_def in store.registry.tables:
        cols = ",\n".join(
            f"  {c.name} {_SQL_TYPES[c.kind]}" for c in table_def.columns
        )
        lines.append(f"CREATE TABLE {table_def.name} (\n{cols}\n);")
        col_list = ", ".join(table_def.column_names)
        for row in store.rows(table_def.name):
            values = ", ".join(_sql_value(c) for c in row)
            lines.append(f"INSERT INTO {table_def.name} ({col_list}) VALUES ({values});")
        lines.append("")
    return "\n".join(lines).rstrip() + "\n"

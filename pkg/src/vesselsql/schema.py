"""Domain types, the fixed table registry, and canonical value normalization.

Everything downstream (parser, executor, IR compiler, metric) resolves names
and compares rows through this module, so the schema and the normalization
rules live in exactly one place.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from datetime import datetime, timezone


class VesselSqlError(Exception):
    """Base class for every error raised by this package."""


class ArityMismatchError(VesselSqlError):
    """Row arity does not match the column list."""


KINDS = ("integer", "real", "text", "timestamp", "geometry")


@dataclass(frozen=True)
class ColumnDef:
    name: str
    kind: str

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise VesselSqlError(f"unknown column kind: {self.kind}")


@dataclass(frozen=True)
class TableDef:
    name: str
    columns: tuple[ColumnDef, ...]
    key_columns: tuple[str, ...]

    def __post_init__(self) -> None:
        names = [c.name for c in self.columns]
        if len(set(names)) != len(names):
            raise VesselSqlError(f"duplicate column names in {self.name}")
        for key in self.key_columns:
            if key not in names:
                raise VesselSqlError(f"key column {key} missing from {self.name}")

    @property
    def column_names(self) -> tuple[str, ...]:
        return tuple(c.name for c in self.columns)

    def column(self, name: str) -> ColumnDef | None:
        for c in self.columns:
            if c.name == name:
                return c
        return None


_AIS_COLUMNS = tuple(
    ColumnDef(n, k)
    for n, k in (
        ("mmsi", "integer"),
        ("ship_name", "text"),
        ("callsign", "text"),
        ("imo", "integer"),
        ("ship_type", "text"),
        ("length", "real"),
        ("width", "real"),
        ("tonnage", "real"),
        ("draft", "real"),
        ("lat", "real"),
        ("lon", "real"),
        ("sog", "real"),
        ("cog", "real"),
        ("heading", "real"),
        ("nav_status", "text"),
        ("eta", "timestamp"),
        ("ts", "timestamp"),
    )
)

_SHP_COLUMNS = tuple(
    ColumnDef(n, k)
    for n, k in (
        ("id", "integer"),
        ("obj_type", "text"),
        ("name", "text"),
        ("geometry", "geometry"),
        ("region_code", "text"),
        ("remark", "text"),
    )
)

_WARN_COLUMNS = tuple(
    ColumnDef(n, k)
    for n, k in (
        ("id", "integer"),
        ("mmsi_a", "integer"),
        ("name_a", "text"),
        ("mmsi_b", "integer"),
        ("name_b", "text"),
        ("cpa_nm", "real"),
        ("tcpa_min", "real"),
        ("warn_level", "integer"),
        ("lat", "real"),
        ("lon", "real"),
        ("ts", "timestamp"),
    )
)


@dataclass(frozen=True)
class SchemaRegistry:
    """The four vessel-traffic tables with their columns and key columns."""

    tables: tuple[TableDef, ...]

    def table(self, name: str) -> TableDef | None:
        for t in self.tables:
            if t.name == name:
                return t
        return None

    def table_names(self) -> tuple[str, ...]:
        return tuple(t.name for t in self.tables)

    def to_json_dict(self) -> dict:
        """Schema as a plain JSON document for prompt formatters and the UI."""
        return {
            t.name: [{"name": c.name, "kind": c.kind} for c in t.columns]
            for t in self.tables
        }


REGISTRY = SchemaRegistry(
    tables=(
        TableDef("ship_ais", _AIS_COLUMNS, ("mmsi",)),
        TableDef("ship_ais_quarter", _AIS_COLUMNS, ("mmsi",)),
        TableDef("shp_data", _SHP_COLUMNS, ("id",)),
        TableDef("warn_single", _WARN_COLUMNS, ("id",)),
    )
)

# Operator vocabulary that does not match any column name verbatim; used to
# produce "did you mean" hints on unknown-column errors.
COLUMN_SYNONYMS = {
    "speed": "sog",
    "course": "cog",
    "name": "ship_name",
    "vessel_name": "ship_name",
    "type": "ship_type",
    "position": "lat, lon",
    "location": "lat, lon",
    "arrival": "eta",
    "time": "ts",
    "timestamp": "ts",
    "draught": "draft",
}


def suggest_column(unknown: str, candidates: tuple[str, ...] | list[str]) -> str | None:
    """Best-effort replacement hint for an unresolved column name."""
    from difflib import get_close_matches

    hit = COLUMN_SYNONYMS.get(unknown.lower())
    if hit is not None:
        return hit
    close = get_close_matches(unknown.lower(), [c.lower() for c in candidates], n=1, cutoff=0.6)
    return close[0] if close else None


@dataclass(frozen=True)
class GeoShape:
    """Named point or polygon in WGS84; vertices are (lat, lon) degrees.

    A POLYGON is stored closed: first vertex equals the last. POINT geometry
    is a single vertex.
    """

    id: int
    obj_type: str  # POINT | POLYGON
    name: str
    geometry: tuple[tuple[float, float], ...]
    region_code: str = ""
    remark: str = ""

    def __post_init__(self) -> None:
        if self.obj_type not in ("POINT", "POLYGON"):
            raise VesselSqlError(f"bad obj_type: {self.obj_type}")
        if self.obj_type == "POINT":
            if len(self.geometry) != 1:
                raise VesselSqlError("POINT needs exactly one vertex")
        else:
            verts = list(self.geometry)
            if len(verts) >= 3 and verts[0] != verts[-1]:
                verts.append(verts[0])
            if len(verts) < 4:  # closed triangle = 4 vertices
                raise VesselSqlError("POLYGON needs at least 3 distinct vertices")
            object.__setattr__(self, "geometry", tuple(verts))

    @property
    def ring(self) -> tuple[tuple[float, float], ...]:
        """Closed vertex ring (POLYGON only)."""
        return self.geometry


@dataclass(frozen=True)
class AisRecord:
    """One vessel's static and kinematic state at a timestamp."""

    mmsi: int
    ship_name: str
    callsign: str
    imo: int
    ship_type: str
    length: float
    width: float
    tonnage: float
    draft: float
    lat: float
    lon: float
    sog: float
    cog: float
    heading: float
    nav_status: str
    eta: datetime
    ts: datetime

    def __post_init__(self) -> None:
        if not (-90.0 <= self.lat <= 90.0 and -180.0 <= self.lon <= 180.0):
            raise VesselSqlError(f"coordinates out of range: ({self.lat}, {self.lon})")
        if self.sog < 0 or self.draft < 0 or self.length <= 0:
            raise VesselSqlError("sog/draft must be >= 0 and length > 0")

    def row(self) -> tuple:
        return (
            self.mmsi, self.ship_name, self.callsign, self.imo, self.ship_type,
            self.length, self.width, self.tonnage, self.draft, self.lat, self.lon,
            self.sog, self.cog, self.heading, self.nav_status, self.eta, self.ts,
        )


@dataclass(frozen=True)
class WarnRecord:
    """One ship-pair encounter warning (CPA/TCPA at a sample time)."""

    id: int
    mmsi_a: int
    name_a: str
    mmsi_b: int
    name_b: str
    cpa_nm: float
    tcpa_min: float
    warn_level: int
    lat: float
    lon: float
    ts: datetime

    def __post_init__(self) -> None:
        if self.cpa_nm < 0:
            raise VesselSqlError("cpa_nm must be >= 0")
        if self.mmsi_a == self.mmsi_b:
            raise VesselSqlError("warning requires two distinct vessels")

    def row(self) -> tuple:
        return (
            self.id, self.mmsi_a, self.name_a, self.mmsi_b, self.name_b,
            self.cpa_nm, self.tcpa_min, self.warn_level, self.lat, self.lon, self.ts,
        )


def parse_timestamp(text: str) -> datetime:
    """Accept ISO-8601 (with or without 'Z'/offset) and 'YYYY-MM-DD HH:MM:SS'."""
    s = text.strip()
    if s.endswith("Z"):
        s = s[:-1] + "+00:00"
    if " " in s and "T" not in s:
        s = s.replace(" ", "T", 1)
    dt = datetime.fromisoformat(s)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.astimezone(timezone.utc)


def format_timestamp(dt: datetime) -> str:
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    dt = dt.astimezone(timezone.utc)
    return dt.strftime("%Y-%m-%dT%H:%M:%SZ")


def normalize_value(v: object) -> str:
    """Canonical text for any cell value. Total: never raises.

    Text is trimmed and lowercased; numerics render as the shortest
    round-trip decimal (integral floats collapse to the integer form so
    12.0 and 12 compare equal); timestamps render as ISO-8601 UTC.
    """
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        if math.isnan(v) or math.isinf(v):
            return repr(v)
        if v == int(v) and abs(v) < 1e16:
            return str(int(v))
        return repr(v)
    if isinstance(v, datetime):
        return format_timestamp(v)
    if isinstance(v, GeoShape):
        from .wkt import to_wkt

        return to_wkt(v).lower()
    return str(v).strip().lower()


def canonical_row(columns: list[str] | tuple[str, ...], row: list | tuple) -> tuple[str, ...]:
    """Reorder cells by ascending column name, then normalize each cell.

    The output tuple is the identity under which result rows are compared.
    Duplicate column names keep their relative order.
    """
    if len(columns) != len(row):
        raise ArityMismatchError(
            f"row has {len(row)} cells for {len(columns)} columns"
        )
    order = sorted(range(len(columns)), key=lambda i: (columns[i], i))
    return tuple(normalize_value(row[i]) for i in order)


@dataclass(frozen=True)
class ResultSet:
    """Ordered columns plus a deduplicated set of rows.

    `rows` keeps raw values in a deterministic order for display; comparisons
    (equality, the match-score metric) go through `canonical_rows()`, which is
    invariant under column reordering and input row duplication.
    """

    columns: tuple[str, ...]
    rows: tuple[tuple, ...]
    _canon: frozenset = field(init=False, repr=False, compare=False, hash=False)

    def __post_init__(self) -> None:
        seen: dict[tuple[str, ...], tuple] = {}
        for row in self.rows:
            key = canonical_row(self.columns, row)
            if key not in seen:
                seen[key] = tuple(row)
        object.__setattr__(self, "rows", tuple(seen.values()))
        object.__setattr__(self, "_canon", frozenset(seen.keys()))

    def canonical_rows(self) -> frozenset:
        return self._canon

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ResultSet):
            return NotImplemented
        return (
            tuple(sorted(self.columns)) == tuple(sorted(other.columns))
            and self._canon == other._canon
        )

    def __hash__(self) -> int:
        return hash((tuple(sorted(self.columns)), self._canon))

    def __len__(self) -> int:
        return len(self.rows)

    def to_json_dict(self) -> dict:
        return {
            "columns": list(self.columns),
            "rows": [[normalize_value(c) for c in row] for row in self.rows],
        }

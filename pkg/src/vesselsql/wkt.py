"""Minimal WKT round-trip for GeoShape geometry cells.

Axis order follows the WKT convention (`lon lat`), while GeoShape vertices
are stored as (lat, lon). Only POINT and single-ring POLYGON are supported.
"""

from __future__ import annotations

import re

from .schema import GeoShape, VesselSqlError


class WktError(VesselSqlError):
    pass


def _fmt(x: float) -> str:
    if x == int(x):
        return str(int(x))
    return repr(round(float(x), 8))


def to_wkt(shape: GeoShape) -> str:
    if shape.obj_type == "POINT":
        lat, lon = shape.geometry[0]
        return f"POINT({_fmt(lon)} {_fmt(lat)})"
    pairs = ", ".join(f"{_fmt(lon)} {_fmt(lat)}" for lat, lon in shape.ring)
    return f"POLYGON(({pairs}))"


_POINT_RE = re.compile(r"^\s*POINT\s*\(\s*(\S+)\s+(\S+)\s*\)\s*$", re.IGNORECASE)
_POLY_RE = re.compile(r"^\s*POLYGON\s*\(\s*\((.*)\)\s*\)\s*$", re.IGNORECASE | re.DOTALL)


def _coord(text: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise WktError(f"bad coordinate: {text!r}") from None


def parse_wkt(text: str, *, id: int = 0, name: str = "", region_code: str = "", remark: str = "") -> GeoShape:
    m = _POINT_RE.match(text)
    if m:
        lon, lat = _coord(m.group(1)), _coord(m.group(2))
        return GeoShape(id=id, obj_type="POINT", name=name,
                        geometry=((lat, lon),), region_code=region_code, remark=remark)
    m = _POLY_RE.match(text)
    if m:
        verts = []
        for pair in m.group(1).split(","):
            parts = pair.split()
            if len(parts) != 2:
                raise WktError(f"bad coordinate pair: {pair.strip()!r}")
            verts.append((_coord(parts[1]), _coord(parts[0])))
        try:
            return GeoShape(id=id, obj_type="POLYGON", name=name,
                            geometry=tuple(verts), region_code=region_code,
                            remark=remark)
        except VesselSqlError as exc:  # ring too short, degenerate, …
            raise WktError(str(exc)) from None
    raise WktError(f"unparsable WKT: {text[:40]!r}")

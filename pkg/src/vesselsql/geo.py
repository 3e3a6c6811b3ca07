"""Spatial primitives shared by the executor and the traffic generator.

Containment is evaluated in the plain lat/lon plane (supervision zones span
well under a degree, so planar error is negligible at desk scale); distances
are great-circle. Two independent point-in-polygon routines are kept on
purpose: ray casting drives the executor, winding number drives ground-truth
labeling and cross-checks.
"""

from __future__ import annotations

import math

from .schema import GeoShape, VesselSqlError

EARTH_RADIUS_KM = 6371.0088
KM_PER_NM = 1.852
NM_PER_DEG = EARTH_RADIUS_KM * math.pi / 180.0 / KM_PER_NM

_EDGE_EPS = 1e-12


class NotAPolygonError(VesselSqlError):
    """Containment asked of a shape that is not a polygon."""


def haversine_nm(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Great-circle distance between (lat, lon) points in nautical miles."""
    lat1, lon1 = a
    lat2, lon2 = b
    p1 = math.radians(lat1)
    p2 = math.radians(lat2)
    dp = math.radians(lat2 - lat1)
    dl = math.radians(lon2 - lon1)
    h = math.sin(dp / 2.0) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2.0) ** 2
    return 2.0 * EARTH_RADIUS_KM * math.asin(math.sqrt(h)) / KM_PER_NM


def st_distance(a: tuple[float, float], b: tuple[float, float]) -> float:
    return haversine_nm(a, b)


def _on_segment(p: tuple[float, float], a: tuple[float, float], b: tuple[float, float]) -> bool:
    cross = (b[0] - a[0]) * (p[1] - a[1]) - (b[1] - a[1]) * (p[0] - a[0])
    if abs(cross) > _EDGE_EPS:
        return False
    lo0, hi0 = min(a[0], b[0]), max(a[0], b[0])
    lo1, hi1 = min(a[1], b[1]), max(a[1], b[1])
    return lo0 - _EDGE_EPS <= p[0] <= hi0 + _EDGE_EPS and lo1 - _EDGE_EPS <= p[1] <= hi1 + _EDGE_EPS


def st_contains(polygon: GeoShape, point: tuple[float, float]) -> bool:
    """Ray-casting point-in-polygon; boundary points count as contained."""
    if polygon.obj_type != "POLYGON":
        raise NotAPolygonError(f"shape {polygon.name!r} is a {polygon.obj_type}, not a POLYGON")
    ring = polygon.ring
    lat, lon = point
    for i in range(len(ring) - 1):
        if _on_segment((lat, lon), ring[i], ring[i + 1]):
            return True
    inside = False
    for i in range(len(ring) - 1):
        (alat, alon), (blat, blon) = ring[i], ring[i + 1]
        if (alat > lat) != (blat > lat):
            cross_lon = alon + (lat - alat) * (blon - alon) / (blat - alat)
            if lon < cross_lon:
                inside = not inside
    return inside


def winding_number_contains(ring: tuple[tuple[float, float], ...], point: tuple[float, float]) -> bool:
    """Winding-number containment over a closed (lat, lon) ring.

    Independent of `st_contains`; used as its oracle and for generator labels.
    """
    lat, lon = point
    wn = 0
    for i in range(len(ring) - 1):
        (alat, alon), (blat, blon) = ring[i], ring[i + 1]
        side = (blon - alon) * (lat - alat) - (blat - alat) * (lon - alon)
        if alat <= lat:
            if blat > lat and side > 0:
                wn += 1
        else:
            if blat <= lat and side < 0:
                wn -= 1
    return wn != 0


def point_segment_distance_deg(
    p: tuple[float, float], a: tuple[float, float], b: tuple[float, float]
) -> float:
    """Planar distance in degrees from point to segment; for edge-margin tests."""
    ax, ay = a
    bx, by = b
    px, py = p
    dx, dy = bx - ax, by - ay
    denom = dx * dx + dy * dy
    if denom == 0.0:
        return math.hypot(px - ax, py - ay)
    t = max(0.0, min(1.0, ((px - ax) * dx + (py - ay) * dy) / denom))
    return math.hypot(px - (ax + t * dx), py - (ay + t * dy))


def min_edge_distance_deg(ring: tuple[tuple[float, float], ...], point: tuple[float, float]) -> float:
    return min(
        point_segment_distance_deg(point, ring[i], ring[i + 1])
        for i in range(len(ring) - 1)
    )


def initial_bearing_deg(a: tuple[float, float], b: tuple[float, float]) -> float:
    """Initial great-circle bearing from a to b, degrees in [0, 360)."""
    p1, p2 = math.radians(a[0]), math.radians(b[0])
    dl = math.radians(b[1] - a[1])
    x = math.sin(dl) * math.cos(p2)
    y = math.cos(p1) * math.sin(p2) - math.sin(p1) * math.cos(p2) * math.cos(dl)
    return math.degrees(math.atan2(x, y)) % 360.0


def destination_point(start: tuple[float, float], bearing_deg: float, distance_nm: float) -> tuple[float, float]:
    """Great-circle destination from start along a bearing."""
    delta = distance_nm * KM_PER_NM / EARTH_RADIUS_KM
    theta = math.radians(bearing_deg)
    p1 = math.radians(start[0])
    l1 = math.radians(start[1])
    p2 = math.asin(
        math.sin(p1) * math.cos(delta) + math.cos(p1) * math.sin(delta) * math.cos(theta)
    )
    l2 = l1 + math.atan2(
        math.sin(theta) * math.sin(delta) * math.cos(p1),
        math.cos(delta) - math.sin(p1) * math.sin(p2),
    )
    lon = math.degrees(l2)
    if lon > 180.0:
        lon -= 360.0
    elif lon < -180.0:
        lon += 360.0
    return (math.degrees(p2), lon)


def cpa_tcpa(
    pos_a: tuple[float, float],
    sog_a: float,
    cog_a: float,
    pos_b: tuple[float, float],
    sog_b: float,
    cog_b: float,
) -> tuple[float, float]:
    """Closest point of approach under linear relative motion.

    Positions are (lat, lon) degrees, speeds in knots, courses in degrees.
    Returns (cpa_nm, tcpa_minutes); tcpa is 0 when the relative velocity is
    zero and may be negative when the pair is already opening.
    """
    ref_lat = math.radians((pos_a[0] + pos_b[0]) / 2.0)
    # local planar frame in nautical miles: x east, y north
    ax = pos_a[1] * NM_PER_DEG * math.cos(ref_lat)
    ay = pos_a[0] * NM_PER_DEG
    bx = pos_b[1] * NM_PER_DEG * math.cos(ref_lat)
    by = pos_b[0] * NM_PER_DEG

    def velocity(sog: float, cog: float) -> tuple[float, float]:
        r = math.radians(cog)
        return (sog * math.sin(r) / 60.0, sog * math.cos(r) / 60.0)  # nm per minute

    avx, avy = velocity(sog_a, cog_a)
    bvx, bvy = velocity(sog_b, cog_b)
    dx, dy = ax - bx, ay - by
    dvx, dvy = avx - bvx, avy - bvy
    vv = dvx * dvx + dvy * dvy
    if vv == 0.0:
        return (math.hypot(dx, dy), 0.0)
    tcpa = -(dx * dvx + dy * dvy) / vv
    cpa = math.hypot(dx + dvx * tcpa, dy + dvy * tcpa)
    return (cpa, tcpa)

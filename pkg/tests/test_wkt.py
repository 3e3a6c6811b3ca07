"""WKT rendering and parsing: lon-lat order on the wire, lat-lon in memory."""

import pytest

from vesselsql.schema import GeoShape
from vesselsql.wkt import WktError, parse_wkt, to_wkt


def test_point_round_trip():
    shape = GeoShape(1, "POINT", "pilot", ((1.1, 103.35),))
    text = to_wkt(shape)
    assert text == "POINT(103.35 1.1)"
    back = parse_wkt(text, id=1, name="pilot")
    assert back.geometry == shape.geometry
    assert back.obj_type == "POINT"


def test_polygon_round_trip_closes_ring():
    shape = GeoShape(2, "POLYGON", "box",
                     ((1.0, 103.0), (1.0, 103.5), (1.2, 103.5), (1.2, 103.0)))
    text = to_wkt(shape)
    assert text.startswith("POLYGON((103 1,")
    back = parse_wkt(text)
    assert back.geometry == shape.geometry  # stays closed
    assert back.geometry[0] == back.geometry[-1]


def test_parse_rejects_garbage():
    for bad in ("", "CIRCLE(1 2)", "POINT(1)", "POLYGON((1 2, 3 4))",
                "POINT(abc def)"):
        with pytest.raises(WktError):
            parse_wkt(bad)


def test_numeric_formatting_is_minimal():
    shape = GeoShape(3, "POINT", "p", ((1.0, 103.0),))
    assert to_wkt(shape) == "POINT(103 1)"

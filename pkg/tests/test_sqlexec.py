"""SQL front end and engine behaviors not covered by the oracle suite."""

import textwrap
from datetime import datetime, timezone

import pytest

from vesselsql.schema import GeoShape
from vesselsql.sqlexec.errors import (
    HeaderMismatchError,
    KindError,
    RuntimeExecError,
    SqlSchemaError,
    SqlSyntaxError,
)
from vesselsql.sqlexec.executor import execute, run_query
from vesselsql.sqlexec.parser import parse_sql
from vesselsql.sqlexec.store import TableStore, export_sql, load_csv, load_dir, save_dir


# --- parsing ---

def test_parse_render_round_trip():
    sql = ("SELECT mmsi, ship_name FROM ship_ais WHERE (ship_type = 'VLCC' "
           "OR draft >= 15) AND sog > 2 ORDER BY mmsi LIMIT 3")
    q = parse_sql(sql)
    assert parse_sql(q.render()) == q


def test_parse_case_insensitive_keywords():
    q = parse_sql("select mmsi from ship_ais where sog > 5 order by mmsi desc")
    assert q.select_items[0].label == "mmsi"
    assert q.order_by[0].descending


def test_parse_star_expansion():
    q = parse_sql("SELECT * FROM shp_data")
    assert [i.label for i in q.select_items] == [
        "id", "obj_type", "name", "geometry", "region_code", "remark"]


def test_syntax_error_carries_position():
    with pytest.raises(SqlSyntaxError) as err:
        parse_sql("SELECT FROM ship_ais")
    assert err.value.position >= 0
    with pytest.raises(SqlSyntaxError):
        parse_sql("SELECT mmsi ship_ais")
    with pytest.raises(SqlSyntaxError):
        parse_sql("DELETE FROM ship_ais")
    with pytest.raises(SqlSyntaxError):
        parse_sql("SELECT mmsi FROM ship_ais; SELECT 1")


def test_schema_error_suggests_column():
    with pytest.raises(SqlSchemaError) as err:
        parse_sql("SELECT speed FROM ship_ais")
    assert "did you mean 'sog'" in str(err.value)
    with pytest.raises(SqlSchemaError):
        parse_sql("SELECT mmsi FROM vessels")
    with pytest.raises(SqlSchemaError):
        # column of a table that is not in scope
        parse_sql("SELECT warn_level FROM ship_ais")


def test_ambiguous_column_needs_qualification():
    with pytest.raises(SqlSchemaError):
        parse_sql("SELECT lat FROM ship_ais JOIN warn_single ON mmsi = mmsi_a")
    q = parse_sql(
        "SELECT ship_ais.lat FROM ship_ais JOIN warn_single ON mmsi = mmsi_a")
    assert q.select_items[0].expr.table == "ship_ais"


# --- store loading ---

AIS_HEADER = ("mmsi,ship_name,callsign,imo,ship_type,length,width,tonnage,"
              "draft,lat,lon,sog,cog,heading,nav_status,eta,ts")


def _ais_line(mmsi: int, name: str, sog: str = "5") -> str:
    return (f"{mmsi},{name},9V1,9100001,CARGO,100,20,5000,8,1.05,103.2,"
            f"{sog},90,90,under way using engine,"
            "2024-01-01T08:00:00Z,2024-01-01T06:00:00Z")


def test_load_csv_round_trip(tmp_path):
    path = tmp_path / "ship_ais.csv"
    path.write_text(AIS_HEADER + "\n" + _ais_line(1, "A") + "\n" + _ais_line(2, "B") + "\n")
    store = TableStore()
    assert load_csv(store, "ship_ais", path) == 2
    assert store.row_count("ship_ais") == 2
    out = tmp_path / "out"
    save_dir(store, out)
    store2 = TableStore()
    assert load_dir(store2, out)["ship_ais"] == 2
    assert store2.rows("ship_ais") == store.rows("ship_ais")


def test_load_csv_header_mismatch(tmp_path):
    path = tmp_path / "ship_ais.csv"
    path.write_text("mmsi,name\n1,A\n")
    with pytest.raises(HeaderMismatchError):
        load_csv(TableStore(), "ship_ais", path)


def test_load_csv_kind_error(tmp_path):
    path = tmp_path / "ship_ais.csv"
    path.write_text(AIS_HEADER + "\n" + _ais_line(1, "A", sog="abc") + "\n")
    with pytest.raises(KindError) as err:
        load_csv(TableStore(), "ship_ais", path)
    assert err.value.column == "sog"


def test_store_version_bumps_on_load(tmp_path):
    path = tmp_path / "ship_ais.csv"
    path.write_text(AIS_HEADER + "\n" + _ais_line(1, "A") + "\n")
    store = TableStore()
    v0 = store.version
    load_csv(store, "ship_ais", path)
    assert store.version == v0 + 1


def test_shape_by_name_case_insensitive(store):
    assert store.shape_by_name("STRAIT").name == "strait"
    assert store.shape_by_name("no such zone") is None


def test_export_sql_is_replayable(store):
    text = export_sql(store)
    assert text.count("CREATE TABLE") == 4
    assert "INSERT INTO ship_ais" in text
    assert "POLYGON((" in text  # geometry serialized as WKT literals


# --- execution details ---

def test_now_requires_injected_clock(store):
    with pytest.raises(RuntimeExecError):
        execute("SELECT mmsi FROM ship_ais WHERE eta > NOW()", store)


def test_now_arithmetic(store, now):
    result = execute(
        "SELECT mmsi FROM ship_ais WHERE eta BETWEEN NOW() AND NOW() + INTERVAL 30 MINUTE",
        store, now=now)
    assert all(isinstance(r[0], int) for r in result.rows)


def test_set_semantics_deduplicate(store):
    result = execute("SELECT ship_type FROM ship_ais", store)
    types = [r[0] for r in result.rows]
    assert len(types) == len(set(types))


def test_limit_applies_after_ordering(store):
    result = execute(
        "SELECT mmsi, sog FROM ship_ais ORDER BY sog DESC LIMIT 3", store)
    sogs = [r[1] for r in result.rows]
    assert sogs == sorted(sogs, reverse=True)
    assert len(result.rows) == 3


def test_scalar_subquery_must_return_one_row(store):
    with pytest.raises(RuntimeExecError):
        execute("SELECT mmsi FROM ship_ais WHERE ST_CONTAINS("
                "(SELECT geometry FROM shp_data WHERE name = 'atlantis'), lat, lon)",
                store)


def test_text_comparisons_ignore_case(store):
    a = execute("SELECT mmsi FROM ship_ais WHERE ship_name = 'alabama'", store)
    b = execute("SELECT mmsi FROM ship_ais WHERE ship_name = 'ALABAMA'", store)
    assert a == b
    assert len(a.rows) == 1


def test_comparing_text_with_number_fails(store):
    with pytest.raises(RuntimeExecError):
        execute("SELECT mmsi FROM ship_ais WHERE ship_name > 5", store)


def test_like_escapes_regex_metacharacters():
    store = TableStore()
    ts = datetime(2024, 1, 1, tzinfo=timezone.utc)
    # name containing a regex metacharacter must be matched literally
    from vesselsql.schema import AisRecord
    rec = AisRecord(mmsi=1, ship_name="A+B", callsign="X", imo=1,
                    ship_type="CARGO", length=1.0, width=1.0, tonnage=1.0,
                    draft=1.0, lat=0.0, lon=0.0, sog=0.0, cog=0.0,
                    heading=0.0, nav_status="x", eta=ts, ts=ts)
    store.replace("ship_ais", [rec.row()])
    hit = execute("SELECT mmsi FROM ship_ais WHERE ship_name LIKE 'A+B'", store)
    assert len(hit.rows) == 1
    miss = execute("SELECT mmsi FROM ship_ais WHERE ship_name LIKE 'AB'", store)
    assert len(miss.rows) == 0

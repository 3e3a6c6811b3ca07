"""HTTP service: bootstrap data, the query endpoint, sessions, failure modes."""

import json

import pytest
from fastapi.testclient import TestClient

from vesselsql.knowledge import load_knowledge
from vesselsql.llm import LiveBackend, ScriptedBackend, fingerprint
from vesselsql.pipeline import PipelineConfig, compose_prompt
from vesselsql.service import (
    ServiceConfig,
    ServiceConfigError,
    ServiceState,
    SessionMap,
    build_backend,
    create_app,
    default_state,
    load_demo_queries,
    load_service_config,
)

DEMO_CHART = "List draft and type information of VLCC and deep-draught vessel in the strait, show them on the Chart"
DEMO_WARN = "Show all active collision warnings."
DEMO_SPEED = "Which ships are exceeding 12 knots in the fairway?"


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app(default_state()))


# ---------------------------------------------------------------- bootstrap

def test_vessels_endpoint_serves_the_fleet(client):
    body = client.get("/api/vessels").json()
    vessels = body["vessels"]
    assert len(vessels) == 20
    assert [v["mmsi"] for v in vessels] == sorted(v["mmsi"] for v in vessels)
    first = vessels[0]
    assert first["ship_name"] == "FALCON"
    assert isinstance(first["lat"], float)
    # timestamps arrive as ISO text, ready for JSON consumers
    assert first["ts"].startswith("2024-01-01T06:00:00")


def test_zones_endpoint_serves_shapes_with_wkt(client):
    zones = client.get("/api/zones").json()["zones"]
    assert [z["id"] for z in zones] == [1, 2, 3, 4, 5]
    names = {z["name"] for z in zones}
    assert {"strait", "fairway", "port", "anchorage"} <= names
    poly = next(z for z in zones if z["name"] == "strait")
    assert poly["wkt"].startswith("POLYGON((")
    assert len(poly["vertices"]) >= 4
    assert all(len(v) == 2 for v in poly["vertices"])


# -------------------------------------------------------------------- query

def test_demo_chart_query_returns_rows_highlights_and_zone(client):
    body = client.post("/api/query", json={"text": DEMO_CHART}).json()
    assert body["status"] == "RESULT"
    assert body["ir"].startswith("(project")
    assert body["sql"].startswith("SELECT mmsi, ship_name, ship_type, draft")
    assert body["columns"][:2] == ["mmsi", "ship_name"]
    # row cells arrive in canonical (case-folded) text form
    names = {row[1] for row in body["rows"]}
    assert names == {"titan glory", "oakmont", "golden ray"}
    mmsis = [h["mmsi"] for h in body["highlights"]]
    assert mmsis == sorted(mmsis)
    assert set(mmsis) == {412000004, 412000005, 412000016}
    assert [z["name"] for z in body["zones"]] == ["strait"]
    assert body["failure"] is None
    assert body["trace"]["status"] == "RESULT"


def test_warning_query_highlights_both_vessels_of_each_pair(client):
    body = client.post("/api/query", json={"text": DEMO_WARN}).json()
    assert body["status"] == "RESULT"
    assert {h["mmsi"] for h in body["highlights"]} == {412000006, 412000007}
    assert body["zones"] == []


def test_session_carries_previous_query_forward(client):
    first = client.post("/api/query", json={"text": DEMO_CHART}).json()
    sid = first["session_id"]
    second = client.post(
        "/api/query", json={"text": DEMO_SPEED, "session_id": sid}
    ).json()
    assert second["session_id"] == sid
    assert second["status"] == "RESULT"
    assert "Previous query in this session:" in second["trace"]["prompt"]["user_text"]
    third = client.post(
        "/api/query", json={"text": DEMO_WARN, "session_id": sid}
    ).json()
    assert third["status"] == "RESULT"


def test_unknown_session_id_starts_a_fresh_session(client):
    body = client.post(
        "/api/query", json={"text": DEMO_WARN, "session_id": "stale-id"}
    ).json()
    assert body["status"] == "RESULT"
    assert body["session_id"] != "stale-id"


def test_representation_override_is_honoured(client):
    body = client.post(
        "/api/query", json={"text": DEMO_WARN, "representation": "MARKDOWN"}
    ).json()
    assert body["status"] == "RESULT"
    assert body["trace"]["config"]["representation"] == "MARKDOWN"
    assert body["trace"]["prompt"]["representation"] == "MARKDOWN"


def test_responses_are_deterministic_modulo_session_and_timings(client):
    def scrub(body):
        body.pop("session_id")
        body["trace"].pop("timings")
        return body

    a = scrub(client.post("/api/query", json={"text": DEMO_CHART}).json())
    b = scrub(client.post("/api/query", json={"text": DEMO_CHART}).json())
    assert a == b


# ------------------------------------------------------------ failure modes

def test_blank_text_is_422(client):
    assert client.post("/api/query", json={"text": "   "}).status_code == 422


def test_unknown_representation_is_422(client):
    resp = client.post(
        "/api/query", json={"text": DEMO_WARN, "representation": "YAML"}
    )
    assert resp.status_code == 422
    assert "YAML" in resp.json()["detail"]


def test_unscripted_question_maps_to_bad_gateway(client):
    resp = client.post("/api/query", json={"text": "What is the meaning of life?"})
    assert resp.status_code == 502
    assert "no scripted reply" in resp.json()["detail"]


def test_missing_store_yields_503():
    state = ServiceState(
        store=None,
        kb=load_knowledge(),
        backend=ScriptedBackend({}),
        config=PipelineConfig(),
        sessions=SessionMap(),
    )
    client = TestClient(create_app(state))
    assert client.get("/api/vessels").status_code == 503
    assert client.get("/api/zones").status_code == 503
    assert client.post("/api/query", json={"text": "x"}).status_code == 503


def test_failed_episode_reports_the_failure_card(store, kb, now):
    config = PipelineConfig(enable_sair=False, enable_rethink=False, now=now)
    question = "Show me the speed of every ship"
    ctx = compose_prompt(question, config, store, kb)
    script = {
        fingerprint(rep, ctx.user_text): "SELECT speed FROM ship_ais"
        for rep in ("BASIC", "CODE", "MARKDOWN", "ALPACA", "TEXT")
    }
    state = ServiceState(
        store=store, kb=kb, backend=ScriptedBackend(script),
        config=config, sessions=SessionMap(),
    )
    client = TestClient(create_app(state))
    body = client.post("/api/query", json={"text": question}).json()
    assert body["status"] == "FAILED"
    assert body["failure"]["status"] == "SCHEMA"
    assert "sog" in body["failure"]["message"]
    assert body["rows"] == []
    assert body["highlights"] == []


def test_cors_header_present_only_when_configured(store, kb):
    base = dict(
        store=store, kb=kb, backend=ScriptedBackend({}),
        config=PipelineConfig(), sessions=SessionMap(),
    )
    open_state = ServiceState(**base, cors_origin="http://localhost:5173")
    client = TestClient(create_app(open_state))
    resp = client.get("/api/zones", headers={"Origin": "http://localhost:5173"})
    assert resp.headers["access-control-allow-origin"] == "http://localhost:5173"
    closed = TestClient(create_app(ServiceState(**base)))
    resp2 = closed.get("/api/zones", headers={"Origin": "http://localhost:5173"})
    assert "access-control-allow-origin" not in resp2.headers


# ----------------------------------------------------------------- sessions

def test_sessions_expire_after_idle_window():
    clock = [1000.0]
    sessions = SessionMap(idle_seconds=60.0, clock=lambda: clock[0])
    sess = sessions.touch(None)
    assert sessions.touch(sess.session_id) is sess
    clock[0] += 61.0
    fresh = sessions.touch(sess.session_id)
    assert fresh.session_id != sess.session_id
    assert len(sessions) == 1


def test_record_attaches_trace_to_live_sessions_only():
    clock = [0.0]
    sessions = SessionMap(idle_seconds=10.0, clock=lambda: clock[0])
    sess = sessions.touch(None)
    sessions.record(sess.session_id, trace="marker")
    assert sess.trace == "marker"
    sessions.record("gone", trace="ignored")  # silently dropped
    assert len(sessions) == 1


# ------------------------------------------------------------------- config

def test_load_service_config_defaults():
    cfg = load_service_config(None)
    assert cfg == ServiceConfig()
    assert cfg.port == 8077
    assert cfg.backend == {"kind": "scripted"}


def test_load_service_config_parses_and_validates(tmp_path):
    path = tmp_path / "svc.json"
    path.write_text(json.dumps({
        "port": 9001,
        "cors_origin": "http://localhost:5173",
        "now": "2024-01-01T06:00:00Z",
        "pipeline": {"representation": "CODE", "retrieval_k": 2},
    }))
    cfg = load_service_config(path)
    assert cfg.port == 9001
    assert cfg.pipeline.representation == "CODE"
    assert cfg.pipeline.retrieval_k == 2

    path.write_text(json.dumps({"ports": 9001}))
    with pytest.raises(ServiceConfigError, match="ports"):
        load_service_config(path)
    path.write_text(json.dumps({"max_in_flight": 0}))
    with pytest.raises(ServiceConfigError, match="max_in_flight"):
        load_service_config(path)
    path.write_text(json.dumps({"session_idle_seconds": -5}))
    with pytest.raises(ServiceConfigError, match="positive"):
        load_service_config(path)
    path.write_text(json.dumps({"now": "not a clock"}))
    with pytest.raises(ValueError):
        load_service_config(path)


def test_build_backend_selects_kind(store, kb):
    config = PipelineConfig()
    live = build_backend(
        {"kind": "live", "base_url": "http://m.test", "model": "m1", "timeout": 5},
        store, kb, config,
    )
    assert isinstance(live, LiveBackend)
    assert live.timeout == 5
    with pytest.raises(ServiceConfigError, match="model"):
        build_backend({"kind": "live", "base_url": "http://m.test"}, store, kb, config)
    with pytest.raises(ServiceConfigError, match="oracle"):
        build_backend({"kind": "oracle"}, store, kb, config)


def test_demo_queries_are_packaged_with_replies():
    demos = load_demo_queries()
    assert len(demos) >= 3
    for entry in demos:
        assert entry["question"].strip()
        assert entry["reply"].lstrip().startswith("(project")

"""HTTP face of the agent: a query endpoint plus chart bootstrap data.

The service is single-tenant and read-only: every handler works against one
in-memory snapshot and nothing an operator sends can mutate it. Sessions only
carry the previous query forward so follow-up questions can reference it.
"""

from __future__ import annotations

import json
import threading
import time
import uuid
from dataclasses import dataclass, field, replace
from pathlib import Path

from fastapi import FastAPI, HTTPException
from fastapi.middleware.cors import CORSMiddleware
from pydantic import BaseModel

from .evalsuite import load_default_replies, load_default_testset
from .knowledge import KnowledgeBase, load_knowledge
from .llm import REPRESENTATIONS, LiveBackend, LlmError, ScriptedBackend, fingerprint
from .pipeline import (EpisodeTrace, PipelineConfig, compose_prompt,
                       run_episode, validate_draft)
from .schema import REGISTRY, GeoShape, format_timestamp, parse_timestamp
from .sqlexec.ast import shape_names_referenced
from .sqlexec.errors import SqlError
from .sqlexec.parser import parse_sql
from .sqlexec.store import TableStore, load_dir
from .trafficgen import demo_now, generate, load_scenario
from .wkt import to_wkt


class ServiceConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ServiceConfig:
    """Deployment knobs read from a JSON file; everything has a default."""

    host: str = "127.0.0.1"
    port: int = 8077
    cors_origin: str = ""
    session_idle_seconds: float = 1800.0
    max_in_flight: int = 4
    now: str | None = None
    pipeline: PipelineConfig = field(default_factory=PipelineConfig)
    backend: dict = field(default_factory=lambda: {"kind": "scripted"})


def load_service_config(path: str | Path | None = None) -> ServiceConfig:
    """Parse a config file; None yields the defaults."""
    if path is None:
        return ServiceConfig()
    raw = json.loads(Path(path).read_text(encoding="utf-8"))
    if not isinstance(raw, dict):
        raise ServiceConfigError("config root must be a JSON object")
    known = {
        "host", "port", "cors_origin", "session_idle_seconds",
        "max_in_flight", "now", "pipeline", "backend",
    }
    extra = set(raw) - known
    if extra:
        raise ServiceConfigError(f"unknown config keys: {sorted(extra)}")
    kwargs: dict = {k: raw[k] for k in known & set(raw)}
    if "pipeline" in kwargs:
        kwargs["pipeline"] = PipelineConfig.from_json_dict(kwargs["pipeline"])
    if "backend" in kwargs and not isinstance(kwargs["backend"], dict):
        raise ServiceConfigError("backend must be an object")
    if "now" in kwargs and kwargs["now"] is not None:
        parse_timestamp(kwargs["now"])  # fail fast on a bad clock
    cfg = ServiceConfig(**kwargs)
    if cfg.max_in_flight < 1:
        raise ServiceConfigError("max_in_flight must be at least 1")
    if cfg.session_idle_seconds <= 0:
        raise ServiceConfigError("session_idle_seconds must be positive")
    return cfg


@dataclass
class SessionState:
    session_id: str
    created: float
    last_active: float
    trace: EpisodeTrace | None = None


class SessionMap:
    """Guarded session table with idle expiry.

    Ids come from uuid4 so they are not guessable; the clock is injectable
    so tests can drive expiry without sleeping.
    """

    def __init__(self, idle_seconds: float = 1800.0, clock=time.time):
        self._idle = float(idle_seconds)
        self._clock = clock
        self._lock = threading.Lock()
        self._sessions: dict[str, SessionState] = {}

    def _sweep(self, now: float) -> None:
        dead = [k for k, s in self._sessions.items()
                if now - s.last_active > self._idle]
        for k in dead:
            del self._sessions[k]

    def touch(self, session_id: str | None) -> SessionState:
        """Return the named live session, or a fresh one."""
        now = self._clock()
        with self._lock:
            self._sweep(now)
            if session_id is not None:
                sess = self._sessions.get(session_id)
                if sess is not None:
                    sess.last_active = now
                    return sess
            sess = SessionState(uuid.uuid4().hex, created=now, last_active=now)
            self._sessions[sess.session_id] = sess
            return sess

    def record(self, session_id: str, trace: EpisodeTrace) -> None:
        with self._lock:
            sess = self._sessions.get(session_id)
            if sess is not None:
                sess.trace = trace
                sess.last_active = self._clock()

    def __len__(self) -> int:
        with self._lock:
            return len(self._sessions)


def load_demo_queries() -> list[dict]:
    from importlib import resources

    path = resources.files("vesselsql.data") / "demo_queries.json"
    return json.loads(path.read_text(encoding="utf-8"))


def build_backend(descriptor: dict, store: TableStore, kb: KnowledgeBase,
                  config: PipelineConfig):
    """Instantiate the completion backend a config descriptor names.

    The scripted backend is seeded with the packaged benchmark replies plus
    the demo console queries, keyed across every schema representation.
    """
    kind = descriptor.get("kind", "scripted")
    if kind == "scripted":
        replies = load_default_replies()
        entries = [(item.question, replies[item.id])
                   for item in load_default_testset()]
        entries += [(e["question"], e["reply"]) for e in load_demo_queries()]
        # A follow-up prompt embeds the session's previous SQL, which shifts
        # the fingerprint. Cover chains among the packaged questions by also
        # keying each reply under every packaged query's compiled SQL.
        previous = [""]
        for _, reply in entries:
            verdict = validate_draft(reply, config, store)
            if verdict.ok:
                previous.append(verdict.sql_text)
        script = {}
        for question, reply in entries:
            for prev in dict.fromkeys(previous):
                ctx = compose_prompt(question, config, store, kb,
                                     previous_sql=prev)
                for rep in REPRESENTATIONS:
                    script[fingerprint(rep, ctx.user_text)] = reply
        return ScriptedBackend(script)
    if kind == "live":
        try:
            base_url = descriptor["base_url"]
            model = descriptor["model"]
        except KeyError as exc:
            raise ServiceConfigError(f"live backend needs {exc.args[0]!r}")
        opts = {}
        for key in ("api_key_env", "timeout", "max_retries"):
            if key in descriptor:
                opts[key] = descriptor[key]
        return LiveBackend(base_url, model, **opts)
    raise ServiceConfigError(f"unknown backend kind {kind!r}")


@dataclass
class ServiceState:
    """Everything the handlers share. The store reference is swapped whole."""

    store: TableStore | None
    kb: KnowledgeBase
    backend: object
    config: PipelineConfig
    sessions: SessionMap
    cors_origin: str = ""
    max_in_flight: int = 4

    def __post_init__(self) -> None:
        self.gate = threading.Semaphore(self.max_in_flight)


def default_state(data_dir: str | Path | None = None,
                  config: ServiceConfig | None = None) -> ServiceState:
    """Build a ready-to-serve state: packaged scenario unless a dir is given."""
    cfg = config or ServiceConfig()
    now = parse_timestamp(cfg.now) if cfg.now is not None else None
    if data_dir is not None:
        store = TableStore()
        load_dir(store, data_dir)
    else:
        spec = load_scenario()
        store, _ = generate(spec)
        if now is None:
            now = demo_now(spec)
    pipeline = cfg.pipeline if now is None else replace(cfg.pipeline, now=now)
    kb = load_knowledge()
    backend = build_backend(cfg.backend, store, kb, pipeline)
    return ServiceState(
        store=store,
        kb=kb,
        backend=backend,
        config=pipeline,
        sessions=SessionMap(cfg.session_idle_seconds),
        cors_origin=cfg.cors_origin,
        max_in_flight=cfg.max_in_flight,
    )


class QueryRequest(BaseModel):
    text: str
    session_id: str | None = None
    style: str | None = None
    representation: str | None = None


def _json_cell(value: object) -> object:
    """Raw store values to JSON-native ones; timestamps become ISO text."""
    if isinstance(value, GeoShape):
        return to_wkt(value)
    if hasattr(value, "isoformat"):
        return format_timestamp(value)
    return value


def _vessel_dicts(store: TableStore) -> list[dict]:
    cols = [c.name for c in REGISTRY.table("ship_ais").columns]
    rows = sorted(store.rows("ship_ais"), key=lambda r: r[0])
    return [dict(zip(cols, (_json_cell(v) for v in row))) for row in rows]


def _zone_dict(shape: GeoShape) -> dict:
    return {
        "id": shape.id,
        "obj_type": shape.obj_type,
        "name": shape.name,
        "region_code": shape.region_code,
        "remark": shape.remark,
        "vertices": [[lat, lon] for lat, lon in shape.geometry],
        "wkt": to_wkt(shape),
    }


def _highlights(trace: EpisodeTrace, store: TableStore) -> list[dict]:
    """Vessels named by the result rows, joined back to current positions."""
    if trace.result is None:
        return []
    idx = [i for i, name in enumerate(trace.result.columns)
           if name in ("mmsi", "mmsi_a", "mmsi_b")]
    if not idx:
        return []
    cols = {c.name: j for j, c in enumerate(REGISTRY.table("ship_ais").columns)}
    position = {row[cols["mmsi"]]: (row[cols["lat"]], row[cols["lon"]])
                for row in store.rows("ship_ais")}
    seen: set[int] = set()
    out = []
    for row in trace.result.rows:
        for i in idx:
            mmsi = row[i]
            if not isinstance(mmsi, int) or mmsi in seen:
                continue
            seen.add(mmsi)
            pos = position.get(mmsi)
            if pos is not None:
                out.append({"mmsi": mmsi, "lat": pos[0], "lon": pos[1]})
    out.sort(key=lambda h: h["mmsi"])
    return out


def _zones_used(trace: EpisodeTrace, store: TableStore) -> list[dict]:
    """Shapes the final query actually looked up, ordered by id."""
    if not trace.sql:
        return []
    try:
        query = parse_sql(trace.sql)
    except SqlError:
        return []
    shapes: dict[int, GeoShape] = {}
    for name in shape_names_referenced(query):
        shape = store.shape_by_name(name)
        if shape is not None:
            shapes[shape.id] = shape
    return [_zone_dict(shapes[i]) for i in sorted(shapes)]


def create_app(state: ServiceState) -> FastAPI:
    app = FastAPI(title="vesselsql", docs_url=None, redoc_url=None)
    if state.cors_origin:
        app.add_middleware(
            CORSMiddleware,
            allow_origins=[state.cors_origin],
            allow_methods=["GET", "POST"],
            allow_headers=["*"],
        )

    def _store_or_503() -> TableStore:
        store = state.store
        if store is None:
            raise HTTPException(status_code=503, detail="no data snapshot loaded")
        return store

    @app.post("/api/query")
    def query(req: QueryRequest) -> dict:
        store = _store_or_503()
        if not req.text.strip():
            raise HTTPException(status_code=422, detail="text must not be empty")
        config = state.config
        if req.representation is not None:
            if req.representation not in REPRESENTATIONS:
                raise HTTPException(
                    status_code=422,
                    detail=f"unknown representation {req.representation!r}")
            config = replace(config, representation=req.representation)
        sess = state.sessions.touch(req.session_id)
        previous_sql = sess.trace.sql if sess.trace is not None else ""
        try:
            with state.gate:
                trace = run_episode(req.text, config, store, state.kb,
                                    state.backend, style=req.style,
                                    previous_sql=previous_sql)
        except LlmError as exc:
            raise HTTPException(status_code=502, detail=str(exc))
        state.sessions.record(sess.session_id, trace)
        result = trace.result
        return {
            "session_id": sess.session_id,
            "status": trace.status,
            "sql": trace.sql,
            "ir": trace.ir_text or None,
            "columns": list(result.columns) if result is not None else [],
            "rows": result.to_json_dict()["rows"] if result is not None else [],
            "highlights": _highlights(trace, store),
            "zones": _zones_used(trace, store),
            "failure": trace.failure,
            "trace": trace.to_json_dict(),
        }

    @app.get("/api/vessels")
    def vessels() -> dict:
        store = _store_or_503()
        return {"vessels": _vessel_dicts(store)}

    @app.get("/api/zones")
    def zones() -> dict:
        store = _store_or_503()
        ordered = sorted(store.shapes(), key=lambda s: s.id)
        return {"zones": [_zone_dict(s) for s in ordered]}

    return app

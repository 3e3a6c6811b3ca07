"""Evaluate a resolved query against a table store.

Set semantics: duplicates collapse under the canonical-row identity before
ORDER BY and LIMIT apply. The current time never comes from the wall clock;
NOW() resolves against a caller-injected datetime or the query fails.
"""

from __future__ import annotations

import re
from datetime import datetime, timedelta

from .. import geo
from ..schema import REGISTRY, GeoShape, ResultSet, canonical_row, parse_timestamp
from ..soundex import sounds_like
from ..wkt import WktError, parse_wkt
from .ast import (
    AndPred,
    BetweenPred,
    ColumnRef,
    Comparison,
    ContainsPred,
    DistanceCall,
    InPred,
    JoinClause,
    LikePred,
    Literal,
    NotPred,
    NowExpr,
    OrPred,
    Predicate,
    ScalarSubquery,
    SelectQuery,
    SoundsLikePred,
    ValueExpr,
)
from .errors import RuntimeExecError
from .parser import parse_sql
from .store import TableStore

Env = dict[tuple[str, str], object]


def _render(value: object) -> str:
    return repr(value) if isinstance(value, str) else str(value)


class _Evaluator:
    def __init__(self, store: TableStore, now: datetime | None):
        self.store = store
        self.now = now

    # --- scalar evaluation ---

    def value(self, expr: ValueExpr, env: Env) -> object:
        if isinstance(expr, ColumnRef):
            return env[(expr.table, expr.column)]
        if isinstance(expr, Literal):
            return expr.value
        if isinstance(expr, NowExpr):
            if self.now is None:
                raise RuntimeExecError("NOW() used but no current time was supplied")
            return self.now + timedelta(minutes=expr.offset_minutes)
        if isinstance(expr, DistanceCall):
            lat1 = self.number(expr.lat1, env)
            lon1 = self.number(expr.lon1, env)
            lat2 = self.number(expr.lat2, env)
            lon2 = self.number(expr.lon2, env)
            return geo.st_distance((lat1, lon1), (lat2, lon2))
        if isinstance(expr, ScalarSubquery):
            result = run_query(expr.query, self.store, now=self.now)
            if len(result.rows) == 0:
                raise RuntimeExecError(
                    f"scalar subquery {expr.query.render()!r} returned no rows"
                )
            if len(result.rows) > 1:
                raise RuntimeExecError(
                    f"scalar subquery {expr.query.render()!r} returned "
                    f"{len(result.rows)} rows, expected one"
                )
            return result.rows[0][0]
        raise RuntimeExecError(f"cannot evaluate {type(expr).__name__}")

    def number(self, expr: ValueExpr, env: Env) -> float:
        v = self.value(expr, env)
        if isinstance(v, (int, float)) and not isinstance(v, bool):
            return float(v)
        raise RuntimeExecError(f"expected a number, got {_render(v)}")

    def text(self, expr: ValueExpr, env: Env) -> str:
        v = self.value(expr, env)
        if isinstance(v, str):
            return v
        raise RuntimeExecError(f"expected text, got {_render(v)}")

    # --- comparison semantics ---

    def compare(self, op: str, left: object, right: object) -> bool:
        l, r = self._coerce_pair(left, right)
        if op == "=":
            return l == r
        if op == "<>":
            return l != r
        if isinstance(l, GeoShape) or isinstance(r, GeoShape):
            raise RuntimeExecError("geometry values only support = and <>")
        if op == "<":
            return l < r
        if op == ">":
            return l > r
        if op == "<=":
            return l <= r
        if op == ">=":
            return l >= r
        raise RuntimeExecError(f"unknown comparison operator {op!r}")

    def _coerce_pair(self, left: object, right: object) -> tuple[object, object]:
        def numeric(v: object) -> bool:
            return isinstance(v, (int, float)) and not isinstance(v, bool)

        if numeric(left) and numeric(right):
            return float(left), float(right)
        if isinstance(left, datetime) and isinstance(right, datetime):
            return left, right
        if isinstance(left, datetime) and isinstance(right, str):
            return left, self._as_timestamp(right)
        if isinstance(left, str) and isinstance(right, datetime):
            return self._as_timestamp(left), right
        if isinstance(left, str) and isinstance(right, str):
            return left.strip().lower(), right.strip().lower()
        if isinstance(left, GeoShape) and isinstance(right, GeoShape):
            return left.geometry, right.geometry
        raise RuntimeExecError(
            f"cannot compare {_render(left)} with {_render(right)}"
        )

    def _as_timestamp(self, text: str) -> datetime:
        try:
            return parse_timestamp(text)
        except ValueError:
            raise RuntimeExecError(f"not a timestamp: {text!r}") from None

    # --- predicate evaluation ---

    def pred(self, p: Predicate, env: Env) -> bool:
        if isinstance(p, Comparison):
            return self.compare(p.op, self.value(p.left, env), self.value(p.right, env))
        if isinstance(p, LikePred):
            subject = self.text(p.expr, env)
            hit = _like_regex(p.pattern).fullmatch(subject.strip()) is not None
            return not hit if p.negated else hit
        if isinstance(p, InPred):
            left = self.value(p.expr, env)
            return any(self.compare("=", left, lit.value) for lit in p.values)
        if isinstance(p, BetweenPred):
            v = self.value(p.expr, env)
            lo = self.value(p.low, env)
            hi = self.value(p.high, env)
            return self.compare(">=", v, lo) and self.compare("<=", v, hi)
        if isinstance(p, SoundsLikePred):
            return sounds_like(self.text(p.expr, env), self.text(p.probe, env))
        if isinstance(p, ContainsPred):
            shape = self._shape(p.geometry, env)
            lat = self.number(p.lat, env)
            lon = self.number(p.lon, env)
            try:
                return geo.st_contains(shape, (lat, lon))
            except geo.NotAPolygonError as exc:
                raise RuntimeExecError(str(exc)) from None
        if isinstance(p, AndPred):
            return all(self.pred(part, env) for part in p.parts)
        if isinstance(p, OrPred):
            return any(self.pred(part, env) for part in p.parts)
        if isinstance(p, NotPred):
            return not self.pred(p.child, env)
        raise RuntimeExecError(f"cannot evaluate predicate {type(p).__name__}")

    def _shape(self, expr: ValueExpr, env: Env) -> GeoShape:
        v = self.value(expr, env)
        if isinstance(v, GeoShape):
            return v
        if isinstance(v, str):
            try:
                return parse_wkt(v)
            except WktError as exc:
                raise RuntimeExecError(str(exc)) from None
        raise RuntimeExecError(f"expected a geometry value, got {_render(v)}")


def _like_regex(pattern: str) -> re.Pattern:
    parts: list[str] = []
    for ch in pattern:
        if ch == "%":
            parts.append(".*")
        elif ch == "_":
            parts.append(".")
        else:
            parts.append(re.escape(ch))
    return re.compile("".join(parts), re.IGNORECASE | re.DOTALL)


# --- row sources and joins ---

def _table_envs(store: TableStore, table: str) -> list[Env]:
    table_def = store.registry.table(table)
    assert table_def is not None
    names = table_def.column_names
    return [
        {(table, col): cell for col, cell in zip(names, row)}
        for row in store.rows(table)
    ]


def _equi_join_key(on: Predicate, left_tables: set[str], right_table: str):
    """For `a.x = b.y` ON clauses return the two refs, else None."""
    if not (isinstance(on, Comparison) and on.op == "="):
        return None
    l, r = on.left, on.right
    if not (isinstance(l, ColumnRef) and isinstance(r, ColumnRef)):
        return None
    if l.table in left_tables and r.table == right_table:
        return l, r
    if r.table in left_tables and l.table == right_table:
        return r, l
    return None


def _join(
    evaluator: _Evaluator,
    left_envs: list[Env],
    left_tables: set[str],
    clause: JoinClause,
) -> list[Env]:
    right_envs = _table_envs(evaluator.store, clause.table)
    key = _equi_join_key(clause.on, left_tables, clause.table)
    if key is not None:
        left_ref, right_ref = key
        buckets: dict[object, list[Env]] = {}
        for env in right_envs:
            k = _hash_key(env[(right_ref.table, right_ref.column)])
            buckets.setdefault(k, []).append(env)
        out: list[Env] = []
        for lenv in left_envs:
            k = _hash_key(lenv[(left_ref.table, left_ref.column)])
            for renv in buckets.get(k, ()):
                merged = {**lenv, **renv}
                if evaluator.pred(clause.on, merged):
                    out.append(merged)
        return out
    out = []
    for lenv in left_envs:
        for renv in right_envs:
            merged = {**lenv, **renv}
            if evaluator.pred(clause.on, merged):
                out.append(merged)
    return out


def _hash_key(value: object) -> object:
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return float(value)
    if isinstance(value, str):
        return value.strip().lower()
    return value


# --- driver ---

def run_query(query: SelectQuery, store: TableStore, *, now: datetime | None = None) -> ResultSet:
    evaluator = _Evaluator(store, now)
    envs = _table_envs(store, query.from_table)
    seen_tables = {query.from_table}
    for clause in query.joins:
        envs = _join(evaluator, envs, seen_tables, clause)
        seen_tables.add(clause.table)
    if query.where is not None:
        envs = [env for env in envs if evaluator.pred(query.where, env)]

    columns = tuple(item.label for item in query.select_items)
    projected = [
        tuple(evaluator.value(item.expr, env) for item in query.select_items)
        for env in envs
    ]

    # set semantics first, then a deterministic order
    unique: dict[tuple[str, ...], tuple] = {}
    for row in projected:
        key = canonical_row(columns, row)
        if key not in unique:
            unique[key] = row
    rows = sorted(unique.values(), key=lambda r: canonical_row(columns, r))

    for order_key in reversed(query.order_by):
        label = order_key.ref.column
        idx = columns.index(label) if label in columns else columns.index(order_key.ref.render())
        rows.sort(key=lambda r: _sort_key(r[idx]), reverse=order_key.descending)

    if query.limit is not None:
        rows = rows[: query.limit]
    return ResultSet(columns=columns, rows=tuple(rows))


def _sort_key(value: object):
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return (0, float(value))
    if isinstance(value, datetime):
        return (1, value)
    if isinstance(value, str):
        return (2, value.strip().lower())
    return (3, str(value))


def execute(
    sql: str | SelectQuery,
    store: TableStore,
    *,
    now: datetime | None = None,
) -> ResultSet:
    """Parse (if needed), resolve, and run one SELECT against the store."""
    query = parse_sql(sql, registry=store.registry) if isinstance(sql, str) else sql
    return run_query(query, store, now=now)

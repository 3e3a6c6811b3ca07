"""AST for the supported SQL subset.

Nodes are immutable; `ColumnRef.table` is filled in during resolution.
Value expressions and boolean predicates are separate families.
"""

from __future__ import annotations

from dataclasses import dataclass, field


# --- value expressions ---

@dataclass(frozen=True)
class ColumnRef:
    column: str
    table: str | None = None

    def render(self) -> str:
        return f"{self.table}.{self.column}" if self.table else self.column


@dataclass(frozen=True)
class Literal:
    value: int | float | str

    def render(self) -> str:
        if isinstance(self.value, str):
            return "'" + self.value.replace("'", "''") + "'"
        if isinstance(self.value, float) and self.value == int(self.value):
            return str(int(self.value))
        return str(self.value)


@dataclass(frozen=True)
class NowExpr:
    """NOW() plus an optional interval, minutes. Resolved against an injected clock."""

    offset_minutes: float = 0.0

    def render(self) -> str:
        if self.offset_minutes == 0:
            return "NOW()"
        sign = "+" if self.offset_minutes > 0 else "-"
        n = abs(self.offset_minutes)
        n_txt = str(int(n)) if n == int(n) else str(n)
        return f"NOW() {sign} INTERVAL {n_txt} MINUTE"


@dataclass(frozen=True)
class DistanceCall:
    """ST_DISTANCE(lat1, lon1, lat2, lon2) -> nautical miles."""

    lat1: "ValueExpr"
    lon1: "ValueExpr"
    lat2: "ValueExpr"
    lon2: "ValueExpr"

    def render(self) -> str:
        args = ", ".join(a.render() for a in (self.lat1, self.lon1, self.lat2, self.lon2))
        return f"ST_DISTANCE({args})"


@dataclass(frozen=True)
class ScalarSubquery:
    query: "SelectQuery"

    def render(self) -> str:
        return f"({self.query.render()})"


ValueExpr = ColumnRef | Literal | NowExpr | DistanceCall | ScalarSubquery


# --- predicates ---

@dataclass(frozen=True)
class Comparison:
    op: str  # = < > <= >= <>
    left: ValueExpr
    right: ValueExpr

    def render(self) -> str:
        return f"{self.left.render()} {self.op} {self.right.render()}"


@dataclass(frozen=True)
class LikePred:
    expr: ValueExpr
    pattern: str
    negated: bool = False

    def render(self) -> str:
        op = "NOT LIKE" if self.negated else "LIKE"
        return f"{self.expr.render()} {op} '" + self.pattern.replace("'", "''") + "'"


@dataclass(frozen=True)
class InPred:
    expr: ValueExpr
    values: tuple[Literal, ...]

    def render(self) -> str:
        return f"{self.expr.render()} IN ({', '.join(v.render() for v in self.values)})"


@dataclass(frozen=True)
class BetweenPred:
    expr: ValueExpr
    low: ValueExpr
    high: ValueExpr

    def render(self) -> str:
        return f"{self.expr.render()} BETWEEN {self.low.render()} AND {self.high.render()}"


@dataclass(frozen=True)
class SoundsLikePred:
    expr: ValueExpr
    probe: ValueExpr

    def render(self) -> str:
        return f"SOUNDS_LIKE({self.expr.render()}, {self.probe.render()})"


@dataclass(frozen=True)
class ContainsPred:
    """ST_CONTAINS(geometry, lat, lon): geometry plus one (lat, lon) point."""

    geometry: ValueExpr
    lat: ValueExpr
    lon: ValueExpr

    def render(self) -> str:
        return f"ST_CONTAINS({self.geometry.render()}, {self.lat.render()}, {self.lon.render()})"


@dataclass(frozen=True)
class AndPred:
    parts: tuple["Predicate", ...]

    def render(self) -> str:
        return " AND ".join(
            f"({p.render()})" if isinstance(p, OrPred) else p.render() for p in self.parts
        )


@dataclass(frozen=True)
class OrPred:
    parts: tuple["Predicate", ...]

    def render(self) -> str:
        return " OR ".join(p.render() for p in self.parts)


@dataclass(frozen=True)
class NotPred:
    child: "Predicate"

    def render(self) -> str:
        return f"NOT ({self.child.render()})"


Predicate = (
    Comparison | LikePred | InPred | BetweenPred | SoundsLikePred | ContainsPred
    | AndPred | OrPred | NotPred
)


# --- query ---

@dataclass(frozen=True)
class SelectItem:
    expr: ValueExpr
    label: str

    def render(self) -> str:
        return self.expr.render()


@dataclass(frozen=True)
class JoinClause:
    table: str
    on: Predicate

    def render(self) -> str:
        return f"JOIN {self.table} ON {self.on.render()}"


@dataclass(frozen=True)
class OrderKey:
    ref: ColumnRef
    descending: bool = False

    def render(self) -> str:
        return self.ref.render() + (" DESC" if self.descending else "")


@dataclass(frozen=True)
class SelectQuery:
    select_items: tuple[SelectItem, ...]
    from_table: str
    joins: tuple[JoinClause, ...] = ()
    where: Predicate | None = None
    order_by: tuple[OrderKey, ...] = ()
    limit: int | None = None

    def render(self) -> str:
        parts = [
            "SELECT " + ", ".join(i.render() for i in self.select_items),
            f"FROM {self.from_table}",
        ]
        parts.extend(j.render() for j in self.joins)
        if self.where is not None:
            parts.append(f"WHERE {self.where.render()}")
        if self.order_by:
            parts.append("ORDER BY " + ", ".join(k.render() for k in self.order_by))
        if self.limit is not None:
            parts.append(f"LIMIT {self.limit}")
        return " ".join(parts)

    def tables_in_scope(self) -> tuple[str, ...]:
        return (self.from_table, *(j.table for j in self.joins))


def walk_predicates(pred: Predicate):
    """Yield every predicate node in a boolean tree, pre-order."""
    yield pred
    if isinstance(pred, (AndPred, OrPred)):
        for p in pred.parts:
            yield from walk_predicates(p)
    elif isinstance(pred, NotPred):
        yield from walk_predicates(pred.child)


def shape_names_referenced(query: SelectQuery) -> list[str]:
    """Names looked up in shp_data by scalar subqueries of this query."""
    names: list[str] = []

    def scan_value(v: ValueExpr) -> None:
        if isinstance(v, ScalarSubquery) and v.query.from_table == "shp_data":
            w = v.query.where
            if isinstance(w, Comparison) and w.op == "=":
                for side in (w.left, w.right):
                    if isinstance(side, Literal) and isinstance(side.value, str):
                        names.append(side.value)

    def scan_pred(p: Predicate) -> None:
        for node in walk_predicates(p):
            if isinstance(node, Comparison):
                scan_value(node.left)
                scan_value(node.right)
            elif isinstance(node, ContainsPred):
                scan_value(node.geometry)

    if query.where is not None:
        scan_pred(query.where)
    for j in query.joins:
        scan_pred(j.on)
    out: list[str] = []
    for n in names:
        if n not in out:
            out.append(n)
    return out

"""Semantic-algebra IR: s-expression grammar, canonical printer, SQL compiler.

Grammar (lowercase heads, single quotes for strings):

    query  := (project (col+) child)
    child  := (select pred child) | (join (= col col) rel rel) | (rel table)
    pred   := (and pred pred+) | (or pred pred+) | (not pred)
            | (= | <> | < | > | <= | >= value value)
            | (like col 'pattern') | (in col ('v' ...)) | (between col value value)
            | (sounds_like col value) | (st_contains shaperef (latcol loncol))
            | (call tool arg*)
    value  := col | number | 'string' | (now) | (now minutes)
            | (st_distance value value value value)
    shaperef := (shape 'name') | (polygon (lat lon)+)

Exactly one project at the root. The compiler is deterministic text
generation: the same tree always yields the same SQL bytes. (call …) nodes
are tool placeholders; compile() expands them through a supplied expander
and rejects them otherwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

from .schema import REGISTRY, SchemaRegistry, VesselSqlError, suggest_column
from .wkt import to_wkt
from .schema import GeoShape


class SairError(VesselSqlError):
    pass


class SairSyntaxError(SairError):
    def __init__(self, message: str, position: int = 0):
        super().__init__(f"{message} at position {position}")
        self.position = position


class SairSchemaError(SairError):
    def __init__(self, message: str, *, unknown: str = "", suggestion: str | None = None):
        if suggestion:
            message = f"{message} (did you mean {suggestion!r}?)"
        super().__init__(message)
        self.unknown = unknown
        self.suggestion = suggestion


# --- nodes ---

@dataclass(frozen=True)
class SCol:
    name: str

    def render(self) -> str:
        return self.name


@dataclass(frozen=True)
class SNum:
    value: int | float

    def render(self) -> str:
        if isinstance(self.value, float) and self.value == int(self.value):
            return str(int(self.value))
        return str(self.value)


@dataclass(frozen=True)
class SStr:
    value: str

    def render(self) -> str:
        return "'" + self.value.replace("'", "''") + "'"


@dataclass(frozen=True)
class SNow:
    offset_minutes: float = 0.0

    def render(self) -> str:
        if self.offset_minutes == 0:
            return "(now)"
        n = self.offset_minutes
        n_txt = str(int(n)) if n == int(n) else str(n)
        return f"(now {n_txt})"


@dataclass(frozen=True)
class SDist:
    args: tuple["SairValue", ...]  # lat1 lon1 lat2 lon2

    def render(self) -> str:
        return "(st_distance " + " ".join(a.render() for a in self.args) + ")"


SairValue = SCol | SNum | SStr | SNow | SDist


@dataclass(frozen=True)
class SShape:
    name: str

    def render(self) -> str:
        return f"(shape '{self.name}')"


@dataclass(frozen=True)
class SPolygon:
    vertices: tuple[tuple[float, float], ...]  # (lat, lon)

    def render(self) -> str:
        pts = " ".join(f"({_num(lat)} {_num(lon)})" for lat, lon in self.vertices)
        return f"(polygon {pts})"


@dataclass(frozen=True)
class SCmp:
    op: str
    left: SairValue
    right: SairValue

    def render(self) -> str:
        return f"({self.op} {self.left.render()} {self.right.render()})"


@dataclass(frozen=True)
class SAnd:
    parts: tuple["SairPred", ...]

    def render(self) -> str:
        return "(and " + " ".join(p.render() for p in self.parts) + ")"


@dataclass(frozen=True)
class SOr:
    parts: tuple["SairPred", ...]

    def render(self) -> str:
        return "(or " + " ".join(p.render() for p in self.parts) + ")"


@dataclass(frozen=True)
class SNot:
    child: "SairPred"

    def render(self) -> str:
        return f"(not {self.child.render()})"


@dataclass(frozen=True)
class SLike:
    col: SCol
    pattern: str

    def render(self) -> str:
        return f"(like {self.col.render()} '" + self.pattern.replace("'", "''") + "')"


@dataclass(frozen=True)
class SIn:
    col: SCol
    values: tuple[SairValue, ...]

    def render(self) -> str:
        return f"(in {self.col.render()} (" + " ".join(v.render() for v in self.values) + "))"


@dataclass(frozen=True)
class SBetween:
    col: SCol
    low: SairValue
    high: SairValue

    def render(self) -> str:
        return f"(between {self.col.render()} {self.low.render()} {self.high.render()})"


@dataclass(frozen=True)
class SSoundsLike:
    col: SCol
    probe: SairValue

    def render(self) -> str:
        return f"(sounds_like {self.col.render()} {self.probe.render()})"


@dataclass(frozen=True)
class SContains:
    shape_ref: SShape | SPolygon
    point: tuple[SCol, SCol]  # (lat col, lon col)

    def render(self) -> str:
        lat, lon = self.point
        return f"(st_contains {self.shape_ref.render()} ({lat.render()} {lon.render()}))"


@dataclass(frozen=True)
class SCall:
    name: str
    args: tuple[SairValue, ...]

    def render(self) -> str:
        inner = " ".join(a.render() for a in self.args)
        return f"(call {self.name}" + (f" {inner}" if inner else "") + ")"


SairPred = SCmp | SAnd | SOr | SNot | SLike | SIn | SBetween | SSoundsLike | SContains | SCall


@dataclass(frozen=True)
class SRel:
    table: str

    def render(self) -> str:
        return f"(rel {self.table})"


@dataclass(frozen=True)
class SSelect:
    pred: SairPred
    child: "SairRelExpr"

    def render(self) -> str:
        return f"(select {self.pred.render()} {self.child.render()})"


@dataclass(frozen=True)
class SJoin:
    on: SCmp
    left: "SairRelExpr"
    right: "SairRelExpr"

    def render(self) -> str:
        return f"(join {self.on.render()} {self.left.render()} {self.right.render()})"


SairRelExpr = SRel | SSelect | SJoin


@dataclass(frozen=True)
class SProject:
    columns: tuple[SCol, ...]
    child: SairRelExpr

    def render(self) -> str:
        cols = " ".join(c.render() for c in self.columns)
        return f"(project ({cols}) {self.child.render()})"


SairExpr = SProject


def _num(x: float) -> str:
    if x == int(x):
        return str(int(x))
    return repr(x)


def print_sair(expr: SairExpr) -> str:
    """Canonical serialization; parse_sair inverts it."""
    return expr.render()


# --- s-expression reader ---

@dataclass(frozen=True)
class _Tok:
    kind: str  # LP RP ATOM STRING NUMBER EOF
    text: str
    pos: int
    value: object = None


def _lex(text: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, n = 0, len(text)
    while i < n:
        ch = text[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "(":
            toks.append(_Tok("LP", "(", i))
            i += 1
            continue
        if ch == ")":
            toks.append(_Tok("RP", ")", i))
            i += 1
            continue
        if ch == "'":
            j = i + 1
            buf: list[str] = []
            while True:
                if j >= n:
                    raise SairSyntaxError("unterminated string", position=i)
                if text[j] == "'":
                    if j + 1 < n and text[j + 1] == "'":
                        buf.append("'")
                        j += 2
                        continue
                    break
                buf.append(text[j])
                j += 1
            toks.append(_Tok("STRING", text[i : j + 1], i, "".join(buf)))
            i = j + 1
            continue
        j = i
        while j < n and not text[j].isspace() and text[j] not in "()'":
            j += 1
        atom = text[i:j]
        num = _try_number(atom)
        if num is not None:
            toks.append(_Tok("NUMBER", atom, i, num))
        else:
            toks.append(_Tok("ATOM", atom, i))
        i = j
    toks.append(_Tok("EOF", "", n))
    return toks


def _try_number(atom: str) -> int | float | None:
    try:
        return int(atom)
    except ValueError:
        pass
    try:
        return float(atom)
    except ValueError:
        return None


class _Reader:
    """Turns tokens into nested lists of (_Tok | list)."""

    def __init__(self, toks: list[_Tok]):
        self.toks = toks
        self.i = 0

    def peek(self) -> _Tok:
        return self.toks[self.i]

    def read(self):
        tok = self.toks[self.i]
        if tok.kind == "EOF":
            raise SairSyntaxError("unexpected end of input", position=tok.pos)
        self.i += 1
        if tok.kind == "LP":
            items = []
            while True:
                nxt = self.peek()
                if nxt.kind == "RP":
                    self.i += 1
                    return _Form(items, tok.pos)
                if nxt.kind == "EOF":
                    raise SairSyntaxError("missing ')'", position=tok.pos)
                items.append(self.read())
        if tok.kind == "RP":
            raise SairSyntaxError("unexpected ')'", position=tok.pos)
        return tok


@dataclass
class _Form:
    items: list
    pos: int

    def head(self) -> str:
        if not self.items or not isinstance(self.items[0], _Tok) or self.items[0].kind != "ATOM":
            raise SairSyntaxError("expected an operator head", position=self.pos)
        return self.items[0].text.lower()

    def rest(self) -> list:
        return self.items[1:]


_CMP_OPS = ("=", "<>", "<", ">", "<=", ">=")


def _build_value(node) -> SairValue:
    if isinstance(node, _Tok):
        if node.kind == "NUMBER":
            return SNum(node.value)
        if node.kind == "STRING":
            return SStr(node.value)
        if node.kind == "ATOM":
            return SCol(node.text)
        raise SairSyntaxError(f"unexpected token {node.text!r}", position=node.pos)
    head = node.head()
    if head == "now":
        rest = node.rest()
        if not rest:
            return SNow()
        if len(rest) == 1 and isinstance(rest[0], _Tok) and rest[0].kind == "NUMBER":
            return SNow(float(rest[0].value))
        raise SairSyntaxError("now takes at most one number", position=node.pos)
    if head == "st_distance":
        rest = node.rest()
        if len(rest) != 4:
            raise SairSyntaxError("st_distance takes 4 values", position=node.pos)
        return SDist(tuple(_build_value(a) for a in rest))
    raise SairSyntaxError(f"unexpected form ({head} …) in value position", position=node.pos)


def _build_col(node) -> SCol:
    v = _build_value(node)
    if not isinstance(v, SCol):
        pos = node.pos if isinstance(node, _Form) else node.pos
        raise SairSyntaxError("expected a column name", position=pos)
    return v


def _build_shape_ref(node) -> SShape | SPolygon:
    if not isinstance(node, _Form):
        raise SairSyntaxError("expected (shape 'name') or (polygon …)", position=node.pos)
    head = node.head()
    if head == "shape":
        rest = node.rest()
        if len(rest) != 1 or not isinstance(rest[0], _Tok) or rest[0].kind != "STRING":
            raise SairSyntaxError("shape takes one quoted name", position=node.pos)
        return SShape(rest[0].value)
    if head == "polygon":
        verts = []
        for item in node.rest():
            if not isinstance(item, _Form) or len(item.items) != 2:
                raise SairSyntaxError("polygon vertices are (lat lon) pairs", position=node.pos)
            a, b = item.items
            if not (isinstance(a, _Tok) and a.kind == "NUMBER" and isinstance(b, _Tok) and b.kind == "NUMBER"):
                raise SairSyntaxError("polygon vertices are numeric", position=item.pos)
            verts.append((float(a.value), float(b.value)))
        if len(verts) < 3:
            raise SairSyntaxError("polygon needs at least 3 vertices", position=node.pos)
        return SPolygon(tuple(verts))
    raise SairSyntaxError(f"expected shape or polygon, got {head}", position=node.pos)


def _build_pred(node) -> SairPred:
    if not isinstance(node, _Form):
        raise SairSyntaxError("expected a predicate form", position=node.pos)
    head = node.head()
    rest = node.rest()
    if head in _CMP_OPS:
        if len(rest) != 2:
            raise SairSyntaxError(f"{head} takes two values", position=node.pos)
        return SCmp(head, _build_value(rest[0]), _build_value(rest[1]))
    if head in ("and", "or"):
        if len(rest) < 2:
            raise SairSyntaxError(f"{head} takes at least two predicates", position=node.pos)
        parts = tuple(_build_pred(p) for p in rest)
        return SAnd(parts) if head == "and" else SOr(parts)
    if head == "not":
        if len(rest) != 1:
            raise SairSyntaxError("not takes one predicate", position=node.pos)
        return SNot(_build_pred(rest[0]))
    if head == "like":
        if len(rest) != 2 or not isinstance(rest[1], _Tok) or rest[1].kind != "STRING":
            raise SairSyntaxError("like takes a column and a quoted pattern", position=node.pos)
        return SLike(_build_col(rest[0]), rest[1].value)
    if head == "in":
        if len(rest) != 2 or not isinstance(rest[1], _Form):
            raise SairSyntaxError("in takes a column and a value list", position=node.pos)
        values = tuple(_build_value(v) for v in rest[1].items)
        if not values:
            raise SairSyntaxError("in needs at least one value", position=node.pos)
        return SIn(_build_col(rest[0]), values)
    if head == "between":
        if len(rest) != 3:
            raise SairSyntaxError("between takes a column and two bounds", position=node.pos)
        return SBetween(_build_col(rest[0]), _build_value(rest[1]), _build_value(rest[2]))
    if head == "sounds_like":
        if len(rest) != 2:
            raise SairSyntaxError("sounds_like takes a column and a probe", position=node.pos)
        return SSoundsLike(_build_col(rest[0]), _build_value(rest[1]))
    if head == "st_contains":
        if len(rest) != 2 or not isinstance(rest[1], _Form) or len(rest[1].items) != 2:
            raise SairSyntaxError(
                "st_contains takes a shape and a (lat lon) column pair", position=node.pos
            )
        point = (_build_col(rest[1].items[0]), _build_col(rest[1].items[1]))
        return SContains(_build_shape_ref(rest[0]), point)
    if head == "call":
        if not rest or not isinstance(rest[0], _Tok) or rest[0].kind != "ATOM":
            raise SairSyntaxError("call takes a tool name", position=node.pos)
        return SCall(rest[0].text, tuple(_build_value(a) for a in rest[1:]))
    raise SairSyntaxError(f"unknown predicate head {head!r}", position=node.pos)


def _build_rel_expr(node) -> SairRelExpr:
    if not isinstance(node, _Form):
        raise SairSyntaxError("expected (rel …), (select …) or (join …)", position=node.pos)
    head = node.head()
    rest = node.rest()
    if head == "rel":
        if len(rest) != 1 or not isinstance(rest[0], _Tok) or rest[0].kind != "ATOM":
            raise SairSyntaxError("rel takes one table name", position=node.pos)
        return SRel(rest[0].text)
    if head == "select":
        if len(rest) != 2:
            raise SairSyntaxError("select takes a predicate and a child", position=node.pos)
        return SSelect(_build_pred(rest[0]), _build_rel_expr(rest[1]))
    if head == "join":
        if len(rest) != 3:
            raise SairSyntaxError("join takes a condition and two children", position=node.pos)
        cond = _build_pred(rest[0])
        if not isinstance(cond, SCmp) or cond.op != "=":
            raise SairSyntaxError("join condition must be an equality", position=node.pos)
        if not (isinstance(cond.left, SCol) and isinstance(cond.right, SCol)):
            raise SairSyntaxError("join condition compares two columns", position=node.pos)
        return SJoin(cond, _build_rel_expr(rest[1]), _build_rel_expr(rest[2]))
    if head == "project":
        raise SairSyntaxError("project is only allowed at the root", position=node.pos)
    raise SairSyntaxError(f"unknown relation head {head!r}", position=node.pos)


def parse_sair(text: str, registry: SchemaRegistry = REGISTRY) -> SairExpr:
    """Parse and schema-resolve one SAIR expression; the root must be a project."""
    reader = _Reader(_lex(text))
    node = reader.read()
    tail = reader.peek()
    if tail.kind != "EOF":
        raise SairSyntaxError("unexpected trailing input", position=tail.pos)
    if not isinstance(node, _Form):
        raise SairSyntaxError("expected a (project …) form", position=node.pos)
    if node.head() != "project":
        raise SairSyntaxError("the root must be a project", position=node.pos)
    rest = node.rest()
    if len(rest) != 2 or not isinstance(rest[0], _Form):
        raise SairSyntaxError("project takes a column list and a child", position=node.pos)
    cols = tuple(_build_col(c) for c in rest[0].items)
    if not cols:
        raise SairSyntaxError("project needs at least one column", position=node.pos)
    expr = SProject(cols, _build_rel_expr(rest[1]))
    _resolve(expr, registry)
    return expr


# --- resolution ---

def _tables_below(node: SairRelExpr) -> list[str]:
    if isinstance(node, SRel):
        return [node.table]
    if isinstance(node, SSelect):
        return _tables_below(node.child)
    return _tables_below(node.left) + _tables_below(node.right)


def _resolve(expr: SairExpr, registry: SchemaRegistry) -> None:
    tables = _tables_below(expr.child)
    for t in tables:
        if registry.table(t) is None:
            from difflib import get_close_matches

            close = get_close_matches(t.lower(), list(registry.table_names()), n=1, cutoff=0.6)
            raise SairSchemaError(
                f"unknown table '{t}'", unknown=t, suggestion=close[0] if close else None
            )

    def check_col(col: SCol, scope: list[str]) -> None:
        for t in scope:
            table_def = registry.table(t)
            assert table_def is not None
            if table_def.column(col.name) is not None:
                return
        candidates = [
            c for t in scope for c in registry.table(t).column_names  # type: ignore[union-attr]
        ]
        raise SairSchemaError(
            f"unknown column '{col.name}'",
            unknown=col.name,
            suggestion=suggest_column(col.name, candidates),
        )

    def check_value(v: SairValue, scope: list[str]) -> None:
        if isinstance(v, SCol):
            check_col(v, scope)
        elif isinstance(v, SDist):
            for a in v.args:
                check_value(a, scope)

    def check_pred(p: SairPred, scope: list[str]) -> None:
        if isinstance(p, SCmp):
            check_value(p.left, scope)
            check_value(p.right, scope)
        elif isinstance(p, (SAnd, SOr)):
            for part in p.parts:
                check_pred(part, scope)
        elif isinstance(p, SNot):
            check_pred(p.child, scope)
        elif isinstance(p, SLike):
            check_col(p.col, scope)
        elif isinstance(p, SIn):
            check_col(p.col, scope)
            for v in p.values:
                check_value(v, scope)
        elif isinstance(p, SBetween):
            check_col(p.col, scope)
            check_value(p.low, scope)
            check_value(p.high, scope)
        elif isinstance(p, SSoundsLike):
            check_col(p.col, scope)
            check_value(p.probe, scope)
        elif isinstance(p, SContains):
            check_col(p.point[0], scope)
            check_col(p.point[1], scope)
        # SCall args are tool arguments, not columns; checked at expansion

    def walk(node: SairRelExpr) -> None:
        if isinstance(node, SSelect):
            check_pred(node.pred, _tables_below(node.child))
            walk(node.child)
        elif isinstance(node, SJoin):
            scope = _tables_below(node)
            check_pred(node.on, scope)
            walk(node.left)
            walk(node.right)

    for col in expr.columns:
        check_col(col, tables)
    walk(expr.child)


# --- compiler ---

ToolExpander = Callable[[str, tuple], SairPred]


def _sql_value(v: SairValue) -> str:
    if isinstance(v, SCol):
        return v.name
    if isinstance(v, SNum):
        return v.render()
    if isinstance(v, SStr):
        return "'" + v.value.replace("'", "''") + "'"
    if isinstance(v, SNow):
        if v.offset_minutes == 0:
            return "NOW()"
        sign = "+" if v.offset_minutes > 0 else "-"
        n = abs(v.offset_minutes)
        n_txt = str(int(n)) if n == int(n) else str(n)
        return f"NOW() {sign} INTERVAL {n_txt} MINUTE"
    if isinstance(v, SDist):
        return "ST_DISTANCE(" + ", ".join(_sql_value(a) for a in v.args) + ")"
    raise SairSchemaError(f"cannot compile value {v!r}")


def _sql_shape(ref: SShape | SPolygon) -> str:
    if isinstance(ref, SShape):
        name = ref.name.replace("'", "''")
        return f"(SELECT geometry FROM shp_data WHERE name = '{name}')"
    shape = GeoShape(id=0, obj_type="POLYGON", name="", geometry=ref.vertices)
    return "'" + to_wkt(shape) + "'"


def _sql_pred(p: SairPred, expander: ToolExpander | None, *, parent: str = "") -> str:
    if isinstance(p, SCmp):
        return f"{_sql_value(p.left)} {p.op} {_sql_value(p.right)}"
    if isinstance(p, SAnd):
        text = " AND ".join(_sql_pred(q, expander, parent="and") for q in p.parts)
        return f"({text})" if parent == "not" else text
    if isinstance(p, SOr):
        text = " OR ".join(_sql_pred(q, expander, parent="or") for q in p.parts)
        return f"({text})" if parent in ("and", "not") else text
    if isinstance(p, SNot):
        return f"NOT ({_sql_pred(p.child, expander, parent='not')})"
    if isinstance(p, SLike):
        return f"{p.col.name} LIKE '" + p.pattern.replace("'", "''") + "'"
    if isinstance(p, SIn):
        return f"{p.col.name} IN (" + ", ".join(_sql_value(v) for v in p.values) + ")"
    if isinstance(p, SBetween):
        return f"{p.col.name} BETWEEN {_sql_value(p.low)} AND {_sql_value(p.high)}"
    if isinstance(p, SSoundsLike):
        return f"SOUNDS_LIKE({p.col.name}, {_sql_value(p.probe)})"
    if isinstance(p, SContains):
        lat, lon = p.point
        return f"ST_CONTAINS({_sql_shape(p.shape_ref)}, {lat.name}, {lon.name})"
    if isinstance(p, SCall):
        if expander is None:
            raise SairSchemaError(f"unexpanded tool call '{p.name}'", unknown=p.name)
        args = tuple(a.value if isinstance(a, (SNum, SStr)) else a.render() for a in p.args)
        expanded = expander(p.name, args)
        return _sql_pred(expanded, None, parent=parent)
    raise SairSchemaError(f"cannot compile predicate {type(p).__name__}")


def compile_sair(expr: SairExpr, tool_expander: ToolExpander | None = None) -> str:
    """Deterministic SQL text for a valid IR tree."""
    preds: list[SairPred] = []
    node = expr.child
    while isinstance(node, SSelect):
        preds.append(node.pred)
        node = node.child

    if isinstance(node, SRel):
        from_clause = f"FROM {node.table}"
    elif isinstance(node, SJoin):
        left, right = node.left, node.right
        # selects under a join fold into WHERE
        while isinstance(left, SSelect):
            preds.append(left.pred)
            left = left.child
        while isinstance(right, SSelect):
            preds.append(right.pred)
            right = right.child
        if not (isinstance(left, SRel) and isinstance(right, SRel)):
            raise SairSchemaError("join children must reduce to relations")
        on = f"{node.on.left.render()} {node.on.op} {node.on.right.render()}"
        from_clause = f"FROM {left.table} JOIN {right.table} ON {on}"
    else:
        raise SairSchemaError("query body must reduce to a relation or a join")

    cols = ", ".join(c.name for c in expr.columns)
    sql = f"SELECT {cols} {from_clause}"
    if preds:
        rendered = [_sql_pred(p, tool_expander, parent="and" if len(preds) > 1 else "") for p in preds]
        sql += " WHERE " + " AND ".join(rendered)
    return sql


def explain(expr) -> list[str]:
    """One line per node, pre-order; shape names appear verbatim.

    Accepts a full query or any relational subtree.
    """
    lines: list[str] = []

    def walk(node) -> None:
        if isinstance(node, SProject):
            lines.append("project columns " + ", ".join(c.name for c in node.columns))
            walk(node.child)
        elif isinstance(node, SSelect):
            lines.append("filter rows where " + node.pred.render())
            walk(node.child)
        elif isinstance(node, SJoin):
            lines.append(f"join on {node.on.left.render()} {node.on.op} {node.on.right.render()}")
            walk(node.left)
            walk(node.right)
        elif isinstance(node, SRel):
            lines.append(f"scan table {node.table}")

    walk(expr)
    return lines

"""Tokenizer, recursive-descent parser, and schema resolution for the SQL subset.

Grammar (case-insensitive keywords, single statement, no trailing semicolon
required but one is tolerated):

    query    := SELECT items FROM ident join* where? order? limit?
    items    := '*' | value (',' value)*
    join     := JOIN ident ON pred
    where    := WHERE pred
    order    := ORDER BY key (',' key)*         key := colref (ASC|DESC)?
    limit    := LIMIT integer
    pred     := and_t (OR and_t)*
    and_t    := not_t (AND not_t)*
    not_t    := NOT not_t | prim
    prim     := '(' pred ')' when '(' is not followed by SELECT
              | ST_CONTAINS '(' value ',' value ',' value ')'
              | SOUNDS_LIKE '(' value ',' value ')'
              | value (cmp value | NOT? LIKE string | IN list | BETWEEN value AND value)
    value    := NOW '(' ')' (('+'|'-') INTERVAL number (MINUTE|MINUTES))?
              | ST_DISTANCE '(' value ',' value ',' value ',' value ')'
              | '(' query ')'                    scalar subquery
              | number | string | colref
    colref   := ident ('.' ident)?

Syntax errors carry the character position of the offending token.
Resolution checks table and column names against the registry and attaches
a table to every column reference.
"""

from __future__ import annotations

import difflib
from dataclasses import dataclass

from ..schema import REGISTRY, SchemaRegistry, suggest_column
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
    OrderKey,
    OrPred,
    Predicate,
    ScalarSubquery,
    SelectItem,
    SelectQuery,
    SoundsLikePred,
    ValueExpr,
)
from .errors import SqlSchemaError, SqlSyntaxError

KEYWORDS = {
    "SELECT", "FROM", "WHERE", "AND", "OR", "NOT", "LIKE", "IN", "BETWEEN",
    "JOIN", "ON", "ORDER", "BY", "ASC", "DESC", "LIMIT", "INTERVAL",
    "MINUTE", "MINUTES", "NOW", "ST_CONTAINS", "ST_DISTANCE", "SOUNDS_LIKE",
}

_SYMBOLS = ("<=", ">=", "<>", "(", ")", ",", ".", "=", "<", ">", "+", "-", "*", ";")


@dataclass(frozen=True)
class Token:
    kind: str  # KEYWORD, IDENT, NUMBER, STRING, SYMBOL, EOF
    text: str
    pos: int
    value: int | float | str | None = None


def tokenize(sql: str) -> list[Token]:
    tokens: list[Token] = []
    i, n = 0, len(sql)
    while i < n:
        ch = sql[i]
        if ch.isspace():
            i += 1
            continue
        if ch == "'":
            j = i + 1
            buf: list[str] = []
            while True:
                if j >= n:
                    raise SqlSyntaxError("unterminated string literal", position=i)
                if sql[j] == "'":
                    if j + 1 < n and sql[j + 1] == "'":
                        buf.append("'")
                        j += 2
                        continue
                    break
                buf.append(sql[j])
                j += 1
            tokens.append(Token("STRING", sql[i : j + 1], i, "".join(buf)))
            i = j + 1
            continue
        if ch.isdigit() or (ch == "." and i + 1 < n and sql[i + 1].isdigit()):
            j = i
            saw_dot = False
            while j < n and (sql[j].isdigit() or (sql[j] == "." and not saw_dot)):
                if sql[j] == ".":
                    # keep "1." from eating a following ident: require a digit after
                    if j + 1 >= n or not sql[j + 1].isdigit():
                        break
                    saw_dot = True
                j += 1
            text = sql[i:j]
            value: int | float = float(text) if "." in text else int(text)
            tokens.append(Token("NUMBER", text, i, value))
            i = j
            continue
        if ch.isalpha() or ch == "_":
            j = i
            while j < n and (sql[j].isalnum() or sql[j] == "_"):
                j += 1
            text = sql[i:j]
            upper = text.upper()
            if upper in KEYWORDS:
                tokens.append(Token("KEYWORD", upper, i))
            else:
                tokens.append(Token("IDENT", text, i))
            i = j
            continue
        for sym in _SYMBOLS:
            if sql.startswith(sym, i):
                tokens.append(Token("SYMBOL", sym, i))
                i += len(sym)
                break
        else:
            raise SqlSyntaxError(f"unexpected character {ch!r}", position=i, token=ch)
    tokens.append(Token("EOF", "", n))
    return tokens


class _Parser:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.i = 0

    def peek(self, ahead: int = 0) -> Token:
        j = min(self.i + ahead, len(self.tokens) - 1)
        return self.tokens[j]

    def next(self) -> Token:
        tok = self.tokens[self.i]
        if tok.kind != "EOF":
            self.i += 1
        return tok

    def fail(self, message: str, tok: Token | None = None) -> SqlSyntaxError:
        tok = tok or self.peek()
        shown = tok.text if tok.kind != "EOF" else "end of input"
        return SqlSyntaxError(f"{message}, got {shown!r}", position=tok.pos, token=tok.text)

    def expect_keyword(self, word: str) -> Token:
        tok = self.peek()
        if tok.kind == "KEYWORD" and tok.text == word:
            return self.next()
        raise self.fail(f"expected {word}")

    def expect_symbol(self, sym: str) -> Token:
        tok = self.peek()
        if tok.kind == "SYMBOL" and tok.text == sym:
            return self.next()
        raise self.fail(f"expected {sym!r}")

    def at_keyword(self, *words: str) -> bool:
        tok = self.peek()
        return tok.kind == "KEYWORD" and tok.text in words

    def at_symbol(self, sym: str) -> bool:
        tok = self.peek()
        return tok.kind == "SYMBOL" and tok.text == sym

    # --- query ---

    def parse_query(self) -> SelectQuery:
        self.expect_keyword("SELECT")
        items = self.parse_select_items()
        self.expect_keyword("FROM")
        from_tok = self.peek()
        if from_tok.kind != "IDENT":
            raise self.fail("expected table name after FROM")
        self.next()
        joins: list[JoinClause] = []
        while self.at_keyword("JOIN"):
            self.next()
            tbl = self.peek()
            if tbl.kind != "IDENT":
                raise self.fail("expected table name after JOIN")
            self.next()
            self.expect_keyword("ON")
            joins.append(JoinClause(table=tbl.text, on=self.parse_pred()))
        where = None
        if self.at_keyword("WHERE"):
            self.next()
            where = self.parse_pred()
        order: list[OrderKey] = []
        if self.at_keyword("ORDER"):
            self.next()
            self.expect_keyword("BY")
            order.append(self.parse_order_key())
            while self.at_symbol(","):
                self.next()
                order.append(self.parse_order_key())
        limit = None
        if self.at_keyword("LIMIT"):
            self.next()
            tok = self.peek()
            if tok.kind != "NUMBER" or not isinstance(tok.value, int) or tok.value < 0:
                raise self.fail("expected non-negative integer after LIMIT")
            self.next()
            limit = tok.value
        return SelectQuery(
            select_items=tuple(items),
            from_table=from_tok.text,
            joins=tuple(joins),
            where=where,
            order_by=tuple(order),
            limit=limit,
        )

    def parse_select_items(self) -> list[SelectItem]:
        if self.at_symbol("*"):
            self.next()
            return [SelectItem(expr=ColumnRef(column="*"), label="*")]
        items = [self.parse_select_item()]
        while self.at_symbol(","):
            self.next()
            items.append(self.parse_select_item())
        return items

    def parse_select_item(self) -> SelectItem:
        expr = self.parse_value()
        if isinstance(expr, ColumnRef):
            label = expr.column
        elif isinstance(expr, NowExpr):
            label = "now"
        elif isinstance(expr, DistanceCall):
            label = "distance_nm"
        else:
            label = expr.render()
        return SelectItem(expr=expr, label=label)

    def parse_order_key(self) -> OrderKey:
        tok = self.peek()
        if tok.kind != "IDENT":
            raise self.fail("expected column name in ORDER BY")
        ref = self.parse_colref()
        descending = False
        if self.at_keyword("ASC"):
            self.next()
        elif self.at_keyword("DESC"):
            self.next()
            descending = True
        return OrderKey(ref=ref, descending=descending)

    # --- predicates ---

    def parse_pred(self) -> Predicate:
        parts = [self.parse_and_term()]
        while self.at_keyword("OR"):
            self.next()
            parts.append(self.parse_and_term())
        return parts[0] if len(parts) == 1 else OrPred(parts=tuple(parts))

    def parse_and_term(self) -> Predicate:
        parts = [self.parse_not_term()]
        while self.at_keyword("AND"):
            self.next()
            parts.append(self.parse_not_term())
        return parts[0] if len(parts) == 1 else AndPred(parts=tuple(parts))

    def parse_not_term(self) -> Predicate:
        if self.at_keyword("NOT"):
            self.next()
            return NotPred(child=self.parse_not_term())
        return self.parse_prim_pred()

    def parse_prim_pred(self) -> Predicate:
        tok = self.peek()
        if tok.kind == "SYMBOL" and tok.text == "(":
            nxt = self.peek(1)
            if not (nxt.kind == "KEYWORD" and nxt.text == "SELECT"):
                self.next()
                inner = self.parse_pred()
                self.expect_symbol(")")
                return inner
            # '(' SELECT: a scalar subquery used as a comparison operand
        if tok.kind == "KEYWORD" and tok.text == "ST_CONTAINS":
            self.next()
            self.expect_symbol("(")
            geometry = self.parse_value()
            self.expect_symbol(",")
            lat = self.parse_value()
            self.expect_symbol(",")
            lon = self.parse_value()
            self.expect_symbol(")")
            return ContainsPred(geometry=geometry, lat=lat, lon=lon)
        if tok.kind == "KEYWORD" and tok.text == "SOUNDS_LIKE":
            self.next()
            self.expect_symbol("(")
            expr = self.parse_value()
            self.expect_symbol(",")
            probe = self.parse_value()
            self.expect_symbol(")")
            return SoundsLikePred(expr=expr, probe=probe)
        left = self.parse_value()
        if self.at_keyword("NOT"):
            self.next()
            self.expect_keyword("LIKE")
            pat = self.expect_string("expected string pattern after LIKE")
            return LikePred(expr=left, pattern=pat, negated=True)
        if self.at_keyword("LIKE"):
            self.next()
            pat = self.expect_string("expected string pattern after LIKE")
            return LikePred(expr=left, pattern=pat)
        if self.at_keyword("IN"):
            self.next()
            self.expect_symbol("(")
            values = [self.parse_literal()]
            while self.at_symbol(","):
                self.next()
                values.append(self.parse_literal())
            self.expect_symbol(")")
            return InPred(expr=left, values=tuple(values))
        if self.at_keyword("BETWEEN"):
            self.next()
            low = self.parse_value()
            self.expect_keyword("AND")
            high = self.parse_value()
            return BetweenPred(expr=left, low=low, high=high)
        op_tok = self.peek()
        if op_tok.kind == "SYMBOL" and op_tok.text in ("=", "<", ">", "<=", ">=", "<>"):
            self.next()
            right = self.parse_value()
            return Comparison(op=op_tok.text, left=left, right=right)
        raise self.fail("expected a comparison operator")

    def expect_string(self, message: str) -> str:
        tok = self.peek()
        if tok.kind != "STRING":
            raise self.fail(message)
        self.next()
        assert isinstance(tok.value, str)
        return tok.value

    def parse_literal(self) -> Literal:
        tok = self.peek()
        if tok.kind == "SYMBOL" and tok.text == "-":
            self.next()
            num = self.peek()
            if num.kind != "NUMBER":
                raise self.fail("expected number after unary minus")
            self.next()
            assert isinstance(num.value, (int, float))
            return Literal(value=-num.value)
        if tok.kind == "NUMBER":
            self.next()
            assert isinstance(tok.value, (int, float))
            return Literal(value=tok.value)
        if tok.kind == "STRING":
            self.next()
            assert isinstance(tok.value, str)
            return Literal(value=tok.value)
        raise self.fail("expected a literal")

    # --- values ---

    def parse_value(self) -> ValueExpr:
        tok = self.peek()
        if tok.kind == "KEYWORD" and tok.text == "NOW":
            self.next()
            self.expect_symbol("(")
            self.expect_symbol(")")
            offset = 0.0
            if self.at_symbol("+") or self.at_symbol("-"):
                sign = 1.0 if self.next().text == "+" else -1.0
                self.expect_keyword("INTERVAL")
                num = self.peek()
                if num.kind != "NUMBER":
                    raise self.fail("expected number after INTERVAL")
                self.next()
                if not self.at_keyword("MINUTE", "MINUTES"):
                    raise self.fail("expected MINUTE after interval amount")
                self.next()
                assert isinstance(num.value, (int, float))
                offset = sign * float(num.value)
            return NowExpr(offset_minutes=offset)
        if tok.kind == "KEYWORD" and tok.text == "ST_DISTANCE":
            self.next()
            self.expect_symbol("(")
            args = [self.parse_value()]
            for _ in range(3):
                self.expect_symbol(",")
                args.append(self.parse_value())
            self.expect_symbol(")")
            return DistanceCall(lat1=args[0], lon1=args[1], lat2=args[2], lon2=args[3])
        if tok.kind == "SYMBOL" and tok.text == "(":
            nxt = self.peek(1)
            if nxt.kind == "KEYWORD" and nxt.text == "SELECT":
                self.next()
                sub = self.parse_query()
                self.expect_symbol(")")
                return ScalarSubquery(query=sub)
            raise self.fail("expected a scalar subquery after '('")
        if tok.kind == "SYMBOL" and tok.text == "-":
            return self.parse_literal()
        if tok.kind in ("NUMBER", "STRING"):
            return self.parse_literal()
        if tok.kind == "IDENT":
            return self.parse_colref()
        raise self.fail("expected a value expression")

    def parse_colref(self) -> ColumnRef:
        first = self.next()
        if self.at_symbol("."):
            self.next()
            second = self.peek()
            if second.kind != "IDENT":
                raise self.fail("expected column name after '.'")
            self.next()
            return ColumnRef(column=second.text, table=first.text)
        return ColumnRef(column=first.text)


# --- resolution ---

def _suggest_table(name: str, registry: SchemaRegistry) -> str | None:
    hits = difflib.get_close_matches(name.lower(), list(registry.table_names()), n=1, cutoff=0.6)
    return hits[0] if hits else None


class _Resolver:
    def __init__(self, registry: SchemaRegistry):
        self.registry = registry

    def resolve_query(self, query: SelectQuery) -> SelectQuery:
        scope = []
        for name in query.tables_in_scope():
            if self.registry.table(name) is None:
                raise SqlSchemaError(
                    f"unknown table '{name}'",
                    unknown=name,
                    suggestion=_suggest_table(name, self.registry),
                )
            if name in scope:
                raise SqlSchemaError(f"table '{name}' appears twice in FROM/JOIN")
            scope.append(name)

        items: list[SelectItem] = []
        for item in query.select_items:
            if isinstance(item.expr, ColumnRef) and item.expr.column == "*":
                items.extend(self._expand_star(scope))
            else:
                items.append(SelectItem(expr=self.resolve_value(item.expr, scope), label=item.label))

        joins = tuple(
            JoinClause(table=j.table, on=self.resolve_pred(j.on, scope)) for j in query.joins
        )
        where = self.resolve_pred(query.where, scope) if query.where is not None else None

        labels = {it.label for it in items}
        order: list[OrderKey] = []
        for key in query.order_by:
            ref = self.resolve_value(key.ref, scope)
            assert isinstance(ref, ColumnRef)
            if ref.column not in labels and key.ref.render() not in labels:
                raise SqlSchemaError(
                    f"ORDER BY column '{key.ref.render()}' is not in the select list"
                )
            order.append(OrderKey(ref=ref, descending=key.descending))

        return SelectQuery(
            select_items=tuple(items),
            from_table=query.from_table,
            joins=joins,
            where=where,
            order_by=tuple(order),
            limit=query.limit,
        )

    def _expand_star(self, scope: list[str]) -> list[SelectItem]:
        counts: dict[str, int] = {}
        for tbl in scope:
            table_def = self.registry.table(tbl)
            assert table_def is not None
            for col in table_def.columns:
                counts[col.name] = counts.get(col.name, 0) + 1
        out: list[SelectItem] = []
        for tbl in scope:
            table_def = self.registry.table(tbl)
            assert table_def is not None
            for col in table_def.columns:
                label = f"{tbl}.{col.name}" if counts[col.name] > 1 else col.name
                out.append(SelectItem(expr=ColumnRef(column=col.name, table=tbl), label=label))
        return out

    def resolve_value(self, expr: ValueExpr, scope: list[str]) -> ValueExpr:
        if isinstance(expr, ColumnRef):
            return self.resolve_colref(expr, scope)
        if isinstance(expr, DistanceCall):
            return DistanceCall(
                lat1=self.resolve_value(expr.lat1, scope),
                lon1=self.resolve_value(expr.lon1, scope),
                lat2=self.resolve_value(expr.lat2, scope),
                lon2=self.resolve_value(expr.lon2, scope),
            )
        if isinstance(expr, ScalarSubquery):
            inner = self.resolve_query(expr.query)
            if len(inner.select_items) != 1:
                raise SqlSchemaError("scalar subquery must select exactly one column")
            return ScalarSubquery(query=inner)
        return expr

    def _table_def(self, name: str):
        table_def = self.registry.table(name)
        assert table_def is not None
        return table_def

    def resolve_colref(self, ref: ColumnRef, scope: list[str]) -> ColumnRef:
        if ref.table is not None:
            if ref.table not in scope:
                raise SqlSchemaError(
                    f"table '{ref.table}' is not in this query",
                    unknown=ref.table,
                    suggestion=_suggest_table(ref.table, self.registry),
                )
            table_def = self._table_def(ref.table)
            if table_def.column(ref.column) is None:
                raise SqlSchemaError(
                    f"no column '{ref.column}' in table '{ref.table}'",
                    unknown=ref.column,
                    suggestion=suggest_column(ref.column, table_def.column_names),
                )
            return ref
        homes = [t for t in scope if self._table_def(t).column(ref.column) is not None]
        if len(homes) == 1:
            return ColumnRef(column=ref.column, table=homes[0])
        if len(homes) > 1:
            raise SqlSchemaError(
                f"column '{ref.column}' is ambiguous across {', '.join(homes)};"
                " qualify it with a table name"
            )
        candidates = [c for t in scope for c in self._table_def(t).column_names]
        suggestion = suggest_column(ref.column, candidates)
        raise SqlSchemaError(
            f"unknown column '{ref.column}'", unknown=ref.column, suggestion=suggestion
        )

    def resolve_pred(self, pred: Predicate, scope: list[str]) -> Predicate:
        if isinstance(pred, Comparison):
            return Comparison(
                op=pred.op,
                left=self.resolve_value(pred.left, scope),
                right=self.resolve_value(pred.right, scope),
            )
        if isinstance(pred, LikePred):
            return LikePred(
                expr=self.resolve_value(pred.expr, scope),
                pattern=pred.pattern,
                negated=pred.negated,
            )
        if isinstance(pred, InPred):
            return InPred(expr=self.resolve_value(pred.expr, scope), values=pred.values)
        if isinstance(pred, BetweenPred):
            return BetweenPred(
                expr=self.resolve_value(pred.expr, scope),
                low=self.resolve_value(pred.low, scope),
                high=self.resolve_value(pred.high, scope),
            )
        if isinstance(pred, SoundsLikePred):
            return SoundsLikePred(
                expr=self.resolve_value(pred.expr, scope),
                probe=self.resolve_value(pred.probe, scope),
            )
        if isinstance(pred, ContainsPred):
            return ContainsPred(
                geometry=self.resolve_value(pred.geometry, scope),
                lat=self.resolve_value(pred.lat, scope),
                lon=self.resolve_value(pred.lon, scope),
            )
        if isinstance(pred, AndPred):
            return AndPred(parts=tuple(self.resolve_pred(p, scope) for p in pred.parts))
        if isinstance(pred, OrPred):
            return OrPred(parts=tuple(self.resolve_pred(p, scope) for p in pred.parts))
        if isinstance(pred, NotPred):
            return NotPred(child=self.resolve_pred(pred.child, scope))
        raise SqlSchemaError(f"unsupported predicate node {type(pred).__name__}")


def parse_sql(sql: str, registry: SchemaRegistry = REGISTRY, resolve: bool = True) -> SelectQuery:
    """Parse one SELECT statement; optionally resolve names against the schema."""
    tokens = tokenize(sql)
    parser = _Parser(tokens)
    query = parser.parse_query()
    if parser.at_symbol(";"):
        parser.next()
    tail = parser.peek()
    if tail.kind != "EOF":
        raise parser.fail("unexpected trailing input")
    if resolve:
        query = _Resolver(registry).resolve_query(query)
    return query

"""Curated maritime knowledge: document corpus, zone rules, and lookup tools.

The corpus is a directory of markdown files with YAML front matter. Rules
live in a JSON file and can be compiled into IR filter fragments so a draft
query can enforce them verbatim instead of paraphrasing the text.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from datetime import datetime
from importlib import resources

import yaml

from .ner import EntityAnnotation
from .sair import (
    SAnd,
    SBetween,
    SCmp,
    SCol,
    SContains,
    SNow,
    SNum,
    SOr,
    SRel,
    SSelect,
    SShape,
    SStr,
    SairPred,
)
from .schema import parse_timestamp
from .sqlexec.store import TableStore


class KnowledgeError(Exception):
    pass


class CorpusError(KnowledgeError):
    """A document or the rules file fails validation."""


class EmptyCorpusError(KnowledgeError):
    """Retrieval was attempted against an index with no documents."""


class UnknownZoneError(KnowledgeError):
    def __init__(self, zone: str):
        super().__init__(f"rule references unknown zone '{zone}'")
        self.zone = zone


class UnknownToolError(KnowledgeError):
    def __init__(self, name: str):
        super().__init__(f"unknown tool '{name}'")
        self.name = name


class ArgSchemaError(KnowledgeError):
    """Tool arguments do not match the tool's parameter schema."""


DOC_KINDS = ("TERMINOLOGY", "RULE", "NOTICE", "PROCEDURE")
RULE_KINDS = ("MAX_SPEED", "NO_ENTRY", "TIME_WINDOW_NO_ENTRY")

_FRONT_MATTER = re.compile(r"\A---\n(.*?)\n---\n", re.DOTALL)
_TOKEN = re.compile(r"[a-z0-9]+")


@dataclass(frozen=True)
class KnowledgeDoc:
    doc_id: str
    kind: str
    title: str
    body: str
    effective_from: datetime | None = None
    effective_to: datetime | None = None

    def active_at(self, now: datetime | None) -> bool:
        """Whether the document applies at the given moment.

        Documents without a validity window are always active. Windowed
        documents require an injected now; without one they are excluded
        rather than silently treated as current.
        """
        if self.effective_from is None and self.effective_to is None:
            return True
        if now is None:
            return False
        if self.effective_from is not None and now < self.effective_from:
            return False
        if self.effective_to is not None and now >= self.effective_to:
            return False
        return True

    def to_json_dict(self) -> dict:
        out: dict = {"doc_id": self.doc_id, "kind": self.kind, "title": self.title}
        if self.effective_from is not None:
            out["effective_from"] = self.effective_from.strftime("%Y-%m-%dT%H:%M:%SZ")
        if self.effective_to is not None:
            out["effective_to"] = self.effective_to.strftime("%Y-%m-%dT%H:%M:%SZ")
        return out


def parse_doc(text: str, source: str = "<doc>") -> KnowledgeDoc:
    m = _FRONT_MATTER.match(text)
    if m is None:
        raise CorpusError(f"{source}: missing front matter block")
    try:
        meta = yaml.safe_load(m.group(1))
    except yaml.YAMLError as exc:
        raise CorpusError(f"{source}: bad front matter: {exc}") from exc
    if not isinstance(meta, dict):
        raise CorpusError(f"{source}: front matter must be a mapping")

    body = text[m.end():].strip()
    doc_id = meta.get("doc_id")
    kind = meta.get("kind")
    title = meta.get("title")
    if not isinstance(doc_id, str) or not doc_id:
        raise CorpusError(f"{source}: doc_id is required")
    if kind not in DOC_KINDS:
        raise CorpusError(f"{source}: kind must be one of {', '.join(DOC_KINDS)}")
    if not isinstance(title, str) or not title:
        raise CorpusError(f"{source}: title is required")
    if not body:
        raise CorpusError(f"{source}: document body is empty")

    def _window(key: str) -> datetime | None:
        raw = meta.get(key)
        if raw is None:
            return None
        if isinstance(raw, datetime):
            return parse_timestamp(raw.strftime("%Y-%m-%dT%H:%M:%SZ"))
        try:
            return parse_timestamp(str(raw))
        except ValueError as exc:
            raise CorpusError(f"{source}: bad {key}: {raw!r}") from exc

    eff_from = _window("effective_from")
    eff_to = _window("effective_to")
    if kind == "NOTICE" and (eff_from is None or eff_to is None):
        raise CorpusError(f"{source}: NOTICE documents need effective_from and effective_to")
    if eff_from is not None and eff_to is not None and eff_to <= eff_from:
        raise CorpusError(f"{source}: effective_to must come after effective_from")
    return KnowledgeDoc(doc_id, kind, title, body, eff_from, eff_to)


def load_corpus(directory=None) -> tuple[KnowledgeDoc, ...]:
    """Load every ``*.md`` document, sorted by doc_id. Duplicate ids are an error."""
    if directory is None:
        directory = resources.files("vesselsql.data") / "corpus"
    docs = []
    for entry in sorted(directory.iterdir(), key=lambda e: e.name):
        if not entry.name.endswith(".md"):
            continue
        docs.append(parse_doc(entry.read_text(encoding="utf-8"), source=entry.name))
    seen: set[str] = set()
    for doc in docs:
        if doc.doc_id in seen:
            raise CorpusError(f"duplicate doc_id '{doc.doc_id}'")
        seen.add(doc.doc_id)
    return tuple(sorted(docs, key=lambda d: d.doc_id))


def _tokens(text: str) -> list[str]:
    return _TOKEN.findall(text.lower())


class Bm25Index:
    """Ranked retrieval over the corpus (BM25, k1=1.2, b=0.75).

    Scoring text is title plus body. Documents with a validity window are
    filtered against the caller's clock before ranking.
    """

    K1 = 1.2
    B = 0.75

    def __init__(self, docs):
        self.docs: tuple[KnowledgeDoc, ...] = tuple(docs)
        self._doc_tokens = [_tokens(d.title + "\n" + d.body) for d in self.docs]
        self._doc_len = [len(t) for t in self._doc_tokens]
        self._avg_len = (
            sum(self._doc_len) / len(self._doc_len) if self._doc_len else 0.0
        )
        self._tf: list[dict[str, int]] = []
        df: dict[str, int] = {}
        for toks in self._doc_tokens:
            counts: dict[str, int] = {}
            for t in toks:
                counts[t] = counts.get(t, 0) + 1
            self._tf.append(counts)
            for t in counts:
                df[t] = df.get(t, 0) + 1
        n = len(self.docs)
        self._idf = {
            t: math.log((n - c + 0.5) / (c + 0.5) + 1.0) for t, c in df.items()
        }

    def score(self, query: str, doc_index: int) -> float:
        total = 0.0
        dl = self._doc_len[doc_index]
        counts = self._tf[doc_index]
        for term in _tokens(query):
            idf = self._idf.get(term)
            if idf is None:
                continue
            tf = counts.get(term, 0)
            if tf == 0:
                continue
            denom = tf + self.K1 * (1 - self.B + self.B * dl / self._avg_len)
            total += idf * tf * (self.K1 + 1) / denom
        return total

    def retrieve(self, query: str, k: int, now: datetime | None = None):
        """Top-k (doc, score) pairs with positive score, best first.

        Ties are broken by doc_id so rankings are reproducible.
        """
        if not self.docs:
            raise EmptyCorpusError("retrieval over an empty corpus")
        scored = []
        for i, doc in enumerate(self.docs):
            if not doc.active_at(now):
                continue
            s = self.score(query, i)
            if s > 0.0:
                scored.append((doc, s))
        scored.sort(key=lambda pair: (-pair[1], pair[0].doc_id))
        return scored[: max(k, 0)]


@dataclass(frozen=True)
class RuleRecord:
    rule_id: str
    zone: str
    kind: str
    limit_knots: float | None = None
    window_from: str | None = None
    window_to: str | None = None
    applies_to: dict | None = None
    source_doc: str = ""
    summary: str = ""

    def to_json_dict(self) -> dict:
        out: dict = {
            "rule_id": self.rule_id,
            "zone": self.zone,
            "kind": self.kind,
            "summary": self.summary,
        }
        if self.limit_knots is not None:
            out["limit_knots"] = self.limit_knots
        if self.window_from is not None:
            out["window_from"] = self.window_from
            out["window_to"] = self.window_to
        return out


def _check_applies(node: dict, rule_id: str) -> None:
    if not isinstance(node, dict):
        raise CorpusError(f"rule {rule_id}: applies_to must be a mapping")
    if "any_of" in node or "all_of" in node:
        key = "any_of" if "any_of" in node else "all_of"
        branches = node[key]
        if not isinstance(branches, list) or not branches:
            raise CorpusError(f"rule {rule_id}: {key} must be a non-empty list")
        for b in branches:
            _check_applies(b, rule_id)
        return
    if set(node) != {"column", "op", "value"}:
        raise CorpusError(f"rule {rule_id}: condition needs column, op, value")
    if node["op"] not in ("=", "<>", "<", "<=", ">", ">="):
        raise CorpusError(f"rule {rule_id}: bad op {node['op']!r}")


def load_rules(path=None) -> tuple[RuleRecord, ...]:
    if path is None:
        path = resources.files("vesselsql.data") / "rules.json"
    raw = json.loads(path.read_text(encoding="utf-8"))
    entries = raw.get("rules")
    if not isinstance(entries, list):
        raise CorpusError("rules file must hold a 'rules' list")
    rules = []
    seen: set[str] = set()
    for entry in entries:
        rid = entry.get("rule_id")
        if not isinstance(rid, str) or not rid:
            raise CorpusError("every rule needs a rule_id")
        if rid in seen:
            raise CorpusError(f"duplicate rule_id '{rid}'")
        seen.add(rid)
        kind = entry.get("kind")
        if kind not in RULE_KINDS:
            raise CorpusError(f"rule {rid}: kind must be one of {', '.join(RULE_KINDS)}")
        zone = entry.get("zone")
        if not isinstance(zone, str) or not zone:
            raise CorpusError(f"rule {rid}: zone is required")
        limit = entry.get("limit_knots")
        if kind == "MAX_SPEED":
            if not isinstance(limit, (int, float)):
                raise CorpusError(f"rule {rid}: MAX_SPEED needs limit_knots")
        wfrom = entry.get("window_from")
        wto = entry.get("window_to")
        if kind == "TIME_WINDOW_NO_ENTRY":
            if not wfrom or not wto:
                raise CorpusError(f"rule {rid}: time window rule needs window_from/window_to")
            parse_timestamp(wfrom)
            parse_timestamp(wto)
        applies = entry.get("applies_to")
        if applies is not None:
            _check_applies(applies, rid)
        rules.append(
            RuleRecord(
                rule_id=rid,
                zone=zone,
                kind=kind,
                limit_knots=float(limit) if limit is not None else None,
                window_from=wfrom,
                window_to=wto,
                applies_to=applies,
                source_doc=entry.get("source_doc", ""),
                summary=entry.get("summary", ""),
            )
        )
    return tuple(sorted(rules, key=lambda r: r.rule_id))


def _applies_pred(node: dict) -> SairPred:
    if "any_of" in node or "all_of" in node:
        key = "any_of" if "any_of" in node else "all_of"
        branches = tuple(_applies_pred(b) for b in node[key])
        if len(branches) == 1:
            return branches[0]
        return SOr(branches) if key == "any_of" else SAnd(branches)
    value = node["value"]
    operand = SStr(value) if isinstance(value, str) else SNum(float(value))
    return SCmp(node["op"], SCol(node["column"]), operand)


def rule_to_predicate(rule: RuleRecord, store: TableStore) -> SSelect:
    """Compile a rule into an IR filter over the live position table.

    Time-window rules scan the quarter-hour history instead, since the
    window may lie wholly in the past relative to the latest fix.
    """
    if store.shape_by_name(rule.zone) is None:
        raise UnknownZoneError(rule.zone)
    parts: list[SairPred] = [
        SContains(SShape(rule.zone), (SCol("lat"), SCol("lon")))
    ]
    table = "ship_ais"
    if rule.kind == "MAX_SPEED":
        parts.append(SCmp(">", SCol("sog"), SNum(rule.limit_knots)))
    elif rule.kind == "TIME_WINDOW_NO_ENTRY":
        table = "ship_ais_quarter"
        parts.append(SBetween(SCol("ts"), SStr(rule.window_from), SStr(rule.window_to)))
    elif rule.kind != "NO_ENTRY":
        raise CorpusError(f"rule {rule.rule_id}: unsupported kind {rule.kind!r}")
    if rule.applies_to is not None:
        parts.append(_applies_pred(rule.applies_to))
    pred = parts[0] if len(parts) == 1 else SAnd(tuple(parts))
    return SSelect(pred, SRel(table))


@dataclass(frozen=True)
class ToolSpec:
    name: str
    params: tuple  # (arg name, python type, required)
    description: str
    fn: object = field(compare=False)

    def signature(self) -> str:
        rendered = []
        for pname, ptype, required in self.params:
            kind = (
                ptype.__name__
                if isinstance(ptype, type)
                else " or ".join(t.__name__ for t in ptype)
            )
            label = f"{pname}: {kind}"
            rendered.append(label if required else f"[{label}]")
        return f"{self.name}({', '.join(rendered)})"


@dataclass
class ToolContext:
    store: TableStore | None
    rules: tuple[RuleRecord, ...]
    now: datetime | None = None


def _tool_resolve_zone(args: dict, ctx: ToolContext) -> dict:
    name = args["name"]
    if ctx.store is None:
        return {"found": False, "name": name}
    shape = ctx.store.shape_by_name(name)
    if shape is None:
        return {"found": False, "name": name}
    return {
        "found": True,
        "id": shape.id,
        "name": shape.name,
        "obj_type": shape.obj_type,
        "region_code": shape.region_code,
        "vertices": len(shape.geometry),
    }


def _tool_list_rules(args: dict, ctx: ToolContext) -> dict:
    zone = args["zone"]
    matched = [
        r.to_json_dict()
        for r in ctx.rules
        if r.zone.strip().lower() == zone.strip().lower()
    ]
    return {"zone": zone, "rules": matched}


def _tool_eta_window(args: dict, ctx: ToolContext) -> dict:
    minutes = args["minutes"]
    if minutes <= 0:
        raise ArgSchemaError("eta_window: minutes must be positive")
    pred = SBetween(SCol("eta"), SNow(), SNow(float(minutes)))
    out: dict = {"fragment": pred.render()}
    if ctx.now is not None:
        out["from"] = ctx.now.strftime("%Y-%m-%dT%H:%M:%SZ")
        end = ctx.now.timestamp() + minutes * 60
        out["to"] = datetime.fromtimestamp(end, tz=ctx.now.tzinfo).strftime(
            "%Y-%m-%dT%H:%M:%SZ"
        )
    return out


TOOLS: tuple[ToolSpec, ...] = (
    ToolSpec(
        "resolve_zone",
        (("name", str, True),),
        "Look up a named zone or point and report whether it exists.",
        _tool_resolve_zone,
    ),
    ToolSpec(
        "list_rules",
        (("zone", str, True),),
        "List the traffic rules attached to a zone.",
        _tool_list_rules,
    ),
    ToolSpec(
        "eta_window",
        (("minutes", (int, float), True),),
        "Build an eta filter fragment covering the next N minutes.",
        _tool_eta_window,
    ),
)

_TOOL_BY_NAME = {t.name: t for t in TOOLS}


def parse_tool_call(reply: str):
    """Extract a tool call from a model reply, or None if it is not one.

    The wire format is a bare JSON object {"tool": name, "args": {...}}.
    Anything else is treated as an ordinary draft.
    """
    text = reply.strip()
    if not text.startswith("{"):
        return None
    try:
        obj = json.loads(text)
    except json.JSONDecodeError:
        return None
    if not isinstance(obj, dict) or not isinstance(obj.get("tool"), str):
        return None
    args = obj.get("args", {})
    if not isinstance(args, dict):
        return None
    return obj["tool"], args


def call_tool(name: str, args: dict, ctx: ToolContext) -> dict:
    spec = _TOOL_BY_NAME.get(name)
    if spec is None:
        raise UnknownToolError(name)
    known = {p[0] for p in spec.params}
    extra = set(args) - known
    if extra:
        raise ArgSchemaError(f"{name}: unexpected argument '{sorted(extra)[0]}'")
    for pname, ptype, required in spec.params:
        if pname not in args:
            if required:
                raise ArgSchemaError(f"{name}: missing argument '{pname}'")
            continue
        value = args[pname]
        if isinstance(value, bool) or not isinstance(value, ptype):
            type_name = (
                ptype.__name__
                if isinstance(ptype, type)
                else " or ".join(t.__name__ for t in ptype)
            )
            raise ArgSchemaError(f"{name}: argument '{pname}' must be {type_name}")
    return spec.fn(args, ctx)


class KnowledgeBase:
    """Corpus index, rule table, and tool registry bundled for the pipeline."""

    def __init__(self, docs, rules, tools=TOOLS):
        self.docs: tuple[KnowledgeDoc, ...] = tuple(docs)
        self.rules: tuple[RuleRecord, ...] = tuple(rules)
        self.tools: tuple[ToolSpec, ...] = tuple(tools)
        self.index = Bm25Index(self.docs)

    def retrieve(self, query: str, k: int, now: datetime | None = None):
        return self.index.retrieve(query, k, now=now)

    def call_tool(self, name, args, store=None, now=None) -> dict:
        return call_tool(name, args, ToolContext(store, self.rules, now))

    def tool_help(self) -> str:
        return "\n".join(f"- {t.signature()}: {t.description}" for t in self.tools)


def load_knowledge() -> KnowledgeBase:
    return KnowledgeBase(load_corpus(), load_rules())


def rules_for_query(kb: KnowledgeBase, annotations) -> tuple[RuleRecord, ...]:
    """Rules worth quoting for a question, judged from its entity annotations.

    Zone mentions pull that zone's rules; a speed-rule mention pulls every
    speed rule; a generic rule mention pulls everything.
    """
    zones: set[str] = set()
    want_speed = False
    want_all = False
    for a in annotations:
        if not isinstance(a, EntityAnnotation):
            continue
        if a.root == "REGION" and a.canonical:
            zones.add(a.canonical.strip().lower())
        elif a.tag_path == "RULE/SPEED":
            want_speed = True
        elif a.root == "RULE":
            want_all = True
    picked = [
        r
        for r in kb.rules
        if want_all
        or r.zone.strip().lower() in zones
        or (want_speed and r.kind == "MAX_SPEED")
    ]
    return tuple(sorted(picked, key=lambda r: r.rule_id))

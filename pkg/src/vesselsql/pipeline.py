"""One query episode: annotate, inject knowledge, draft, validate, rethink, run.

Every stage can be toggled off independently (the ablation axes are NER,
IR drafting, and rethink), and with a scripted backend the whole episode is
deterministic modulo wall-clock timings.
"""

from __future__ import annotations

import dataclasses
import json
import time
from dataclasses import dataclass, field
from datetime import datetime

from .knowledge import (
    ArgSchemaError,
    KnowledgeBase,
    UnknownToolError,
    UnknownZoneError,
    parse_tool_call,
    rule_to_predicate,
    rules_for_query,
)
from .llm import REPRESENTATIONS, PromptBundle, system_text
from .ner import (
    annotate,
    build_gazetteer,
    facts_prompt,
    needs_probe,
    verification_queries,
)
from .sair import (
    SairSchemaError,
    SairSyntaxError,
    compile_sair,
    parse_sair,
    print_sair,
)
from .schema import ResultSet, format_timestamp
from .sqlexec.errors import RuntimeExecError, SqlSchemaError, SqlSyntaxError
from .sqlexec.executor import run_query
from .sqlexec.parser import parse_sql
from .sqlexec.ast import shape_names_referenced
from .sqlexec.store import TableStore

MAX_TOOL_HOPS = 2


@dataclass(frozen=True)
class PipelineConfig:
    enable_ner: bool = True
    enable_sair: bool = True
    enable_rethink: bool = True
    representation: str = "BASIC"
    max_rethink_iterations: int = 3
    retrieval_k: int = 4
    now: datetime | None = None

    def __post_init__(self):
        if self.representation not in REPRESENTATIONS:
            raise ValueError(f"unknown representation {self.representation!r}")
        if self.enable_rethink and self.max_rethink_iterations < 1:
            raise ValueError("max_rethink_iterations must be >= 1")
        if self.retrieval_k < 0:
            raise ValueError("retrieval_k must be >= 0")

    def to_json_dict(self) -> dict:
        out = {
            "enable_ner": self.enable_ner,
            "enable_sair": self.enable_sair,
            "enable_rethink": self.enable_rethink,
            "representation": self.representation,
            "max_rethink_iterations": self.max_rethink_iterations,
            "retrieval_k": self.retrieval_k,
        }
        if self.now is not None:
            out["now"] = format_timestamp(self.now)
        return out

    @classmethod
    def from_json_dict(cls, raw: dict) -> "PipelineConfig":
        from .schema import parse_timestamp

        kwargs = dict(raw)
        if "now" in kwargs and isinstance(kwargs["now"], str):
            kwargs["now"] = parse_timestamp(kwargs["now"])
        return cls(**kwargs)


# The named ablation rows: which stages stay on in each configuration.
ABLATION_CONFIGS = (
    ("full", {"enable_ner": True, "enable_sair": True, "enable_rethink": True}),
    ("no_ner", {"enable_ner": False, "enable_sair": True, "enable_rethink": True}),
    ("no_sair", {"enable_ner": True, "enable_sair": False, "enable_rethink": True}),
    ("no_rethink", {"enable_ner": True, "enable_sair": True, "enable_rethink": False}),
)


@dataclass(frozen=True)
class Verdict:
    status: str  # PASS | SYNTAX | SCHEMA | RUNTIME
    message: str = ""
    advisory: str | None = None  # EMPTY_SUSPECT on a suspicious empty dry-run
    sql_text: str = ""
    ir_text: str = ""

    @property
    def ok(self) -> bool:
        return self.status == "PASS"

    def to_json_dict(self) -> dict:
        out: dict = {"status": self.status}
        if self.message:
            out["message"] = self.message
        if self.advisory:
            out["advisory"] = self.advisory
        if self.sql_text:
            out["sql_text"] = self.sql_text
        if self.ir_text:
            out["ir_text"] = self.ir_text
        return out


def _strip_fences(text: str) -> str:
    out = text.strip()
    if out.startswith("```"):
        lines = out.splitlines()
        if lines[-1].strip().startswith("```"):
            lines = lines[1:-1]
        else:
            lines = lines[1:]
        out = "\n".join(lines).strip()
    return out


def _empty_is_suspect(query, annotations, store: TableStore) -> bool:
    """Zero rows is only worth flagging when the query names something real."""
    for a in annotations:
        if getattr(a, "confidence", None) == "EXACT":
            return True
    for name in shape_names_referenced(query):
        if store.shape_by_name(name) is not None:
            return True
    return False


def validate_draft(draft: str, config: PipelineConfig, store: TableStore,
                   annotations=()) -> Verdict:
    """Parse, resolve, and dry-run a draft, reporting the first failure.

    The dry-run caps LIMIT at 5 so a bad draft cannot stall the episode on
    a large scan. An empty dry-run over a resolved entity is advisory only.
    """
    text = _strip_fences(draft)
    ir_text = ""
    if config.enable_sair:
        try:
            expr = parse_sair(text)
            ir_text = print_sair(expr)
            sql = compile_sair(expr)
        except SairSyntaxError as exc:
            return Verdict("SYNTAX", str(exc))
        except SairSchemaError as exc:
            return Verdict("SCHEMA", str(exc))
    else:
        sql = text

    try:
        query = parse_sql(sql)
    except SqlSyntaxError as exc:
        return Verdict("SYNTAX", str(exc), sql_text=sql, ir_text=ir_text)
    except SqlSchemaError as exc:
        return Verdict("SCHEMA", str(exc), sql_text=sql, ir_text=ir_text)

    capped = 5 if query.limit is None else min(5, query.limit)
    probe = dataclasses.replace(query, limit=capped)
    try:
        sample = run_query(probe, store, now=config.now)
    except RuntimeExecError as exc:
        return Verdict("RUNTIME", str(exc), sql_text=sql, ir_text=ir_text)

    advisory = None
    if len(sample) == 0 and _empty_is_suspect(query, annotations, store):
        advisory = "EMPTY_SUSPECT"
    return Verdict("PASS", advisory=advisory, sql_text=sql, ir_text=ir_text)


_FEEDBACK_HINTS = {
    "SYNTAX": "Fix the syntax and rewrite the complete query from scratch.",
    "SCHEMA": "Use only tables and columns that exist in the schema.",
    "RUNTIME": "Adjust the query so every comparison and lookup evaluates cleanly.",
}


def rethink_feedback(verdict: Verdict, draft: str) -> str:
    """Deterministic repair prompt quoting the failed draft and the error."""
    if verdict.ok and verdict.advisory == "EMPTY_SUSPECT":
        return (
            f"Your previous query was:\n{draft.strip()}\n\n"
            "It parsed and ran but returned no rows even though the question "
            "names a known entity. Re-check the predicates and comparison "
            "values, then respond with the corrected query only."
        )
    hint = _FEEDBACK_HINTS.get(verdict.status, "Correct the query.")
    return (
        f"Your previous draft was:\n{draft.strip()}\n\n"
        f"It failed validation ({verdict.status}): {verdict.message}\n"
        f"{hint} Respond with the corrected "
        + ("expression only." if not verdict.sql_text and not verdict.ir_text else "query only.")
    )


def initial_user_text(question: str, *, facts: str = "", knowledge: str = "",
                      rules: str = "", tools: str = "", previous: str = "",
                      sair_mode: bool = True) -> str:
    """Compose the first user turn. Exposed so tests can derive fingerprints."""
    blocks: list[str] = []
    if facts:
        blocks.append(f"Entities found in the question:\n{facts}")
    if knowledge:
        blocks.append(f"Background knowledge:\n{knowledge}")
    if rules:
        blocks.append(f"Applicable traffic rules:\n{rules}")
    if tools:
        blocks.append(
            "Available tools:\n" + tools + "\nTo call one, reply with only a "
            'JSON object {"tool": <name>, "args": {...}}.'
        )
    if previous:
        blocks.append(f"Previous query in this session:\n{previous}")
    blocks.append(f"Question: {question}")
    blocks.append(
        "Respond with a single s-expression query."
        if sair_mode
        else "Respond with a single SQL query."
    )
    return "\n\n".join(blocks)


def followup_user_text(previous: str, feedback: str) -> str:
    return f"{previous}\n\n{feedback}"


def _knowledge_block(docs) -> str:
    lines = []
    for doc, _score in docs:
        body = " ".join(doc.body.split())
        lines.append(f"- {doc.title}: {body}")
    return "\n".join(lines)


def _rules_block(rules, store: TableStore) -> str:
    lines = []
    for rule in rules:
        line = f"- {rule.rule_id} ({rule.zone}): {rule.summary}"
        try:
            fragment = rule_to_predicate(rule, store).pred.render()
            line += f" Filter fragment: {fragment}"
        except UnknownZoneError:
            pass
        lines.append(line)
    return "\n".join(lines)


@dataclass(frozen=True)
class PromptContext:
    """Everything stages 1-2 contribute to the first prompt."""

    annotations: tuple
    probes: tuple
    probe_results: tuple
    facts: str
    docs: tuple  # (KnowledgeDoc, score)
    rules: tuple  # RuleRecord
    user_text: str


def compose_prompt(query: str, config: PipelineConfig, store: TableStore,
                   kb: KnowledgeBase, previous_sql: str = "") -> PromptContext:
    """Run the annotation and knowledge stages and build the first user turn.

    run_episode uses this internally; fixtures call it to compute the
    fingerprints their scripted replies must answer to.
    """
    annotations: tuple = ()
    probes: list[str] = []
    probe_payloads: list[dict] = []
    raw_results: list = []
    facts = ""
    if config.enable_ner:
        gaz = build_gazetteer(store)
        annotations = tuple(annotate(query, gaz))
        probes = verification_queries(list(annotations))
        for probe_sql in probes:
            try:
                rs = run_query(parse_sql(probe_sql), store, now=config.now)
                raw_results.append(rs)
                probe_payloads.append(rs.to_json_dict())
            except (SqlSyntaxError, SqlSchemaError, RuntimeExecError) as exc:
                raw_results.append(str(exc))
                probe_payloads.append({"error": str(exc)})
        facts = facts_prompt(list(annotations), raw_results)

    docs = kb.retrieve(query, config.retrieval_k, now=config.now)
    rules = rules_for_query(kb, annotations)
    user_text = initial_user_text(
        query,
        facts=facts,
        knowledge=_knowledge_block(docs),
        rules=_rules_block(rules, store),
        tools=kb.tool_help(),
        previous=previous_sql,
        sair_mode=config.enable_sair,
    )
    return PromptContext(
        annotations=annotations,
        probes=tuple(probes),
        probe_results=tuple(probe_payloads),
        facts=facts,
        docs=tuple(docs),
        rules=tuple(rules),
        user_text=user_text,
    )


@dataclass(frozen=True)
class Iteration:
    fingerprint: str
    reply: str
    verdict: Verdict
    feedback: str = ""

    def to_json_dict(self) -> dict:
        out = {
            "fingerprint": self.fingerprint,
            "reply": self.reply,
            "verdict": self.verdict.to_json_dict(),
        }
        if self.feedback:
            out["feedback"] = self.feedback
        return out


@dataclass
class EpisodeTrace:
    query: str
    style: str | None
    config: PipelineConfig
    annotations: tuple = ()
    probes: tuple = ()
    probe_results: tuple = ()  # per probe: {"columns": [...], "rows": [...]} or {"error": ...}
    docs: tuple = ()  # (doc_id, score)
    rules: tuple = ()  # rule_id
    facts: str = ""
    bundle: PromptBundle | None = None
    tool_calls: tuple = ()
    iterations: tuple[Iteration, ...] = ()
    ir_text: str = ""
    sql: str = ""
    result: ResultSet | None = None
    failure: dict | None = None
    status: str = "FAILED"  # RESULT | FAILED
    timings: dict = field(default_factory=dict)

    def to_json_dict(self) -> dict:
        out: dict = {
            "query": self.query,
            "style": self.style,
            "config": self.config.to_json_dict(),
            "annotations": [a.to_json_dict() for a in self.annotations],
            "probes": list(self.probes),
            "probe_results": [dict(r) for r in self.probe_results],
            "docs": [{"doc_id": d, "score": s} for d, s in self.docs],
            "rules": list(self.rules),
            "facts": self.facts,
            "prompt": self.bundle.to_json_dict() if self.bundle else None,
            "tool_calls": [dict(t) for t in self.tool_calls],
            "iterations": [it.to_json_dict() for it in self.iterations],
            "ir_text": self.ir_text,
            "sql": self.sql,
            "status": self.status,
            "timings": dict(self.timings),
        }
        if self.result is not None:
            out["result"] = self.result.to_json_dict()
        if self.failure is not None:
            out["failure"] = dict(self.failure)
        return out


def run_episode(query: str, config: PipelineConfig, store: TableStore,
                kb: KnowledgeBase, backend, *, style: str | None = None,
                previous_sql: str = "") -> EpisodeTrace:
    """Drive one question through the full agent loop.

    A reply that is a tool call gets the tool result appended to the prompt
    and another completion, without spending the rethink budget (at most
    MAX_TOOL_HOPS such hops). Draft replies are validated; failures re-prompt
    with deterministic feedback until the iteration budget runs out.
    """
    trace = EpisodeTrace(query=query, style=style, config=config)
    timings: dict[str, float] = {}
    t0 = time.perf_counter()

    ctx = compose_prompt(query, config, store, kb, previous_sql=previous_sql)
    timings["prompt"] = time.perf_counter() - t0

    bundle = PromptBundle(
        representation=config.representation,
        system_text=system_text(config.representation),
        user_text=ctx.user_text,
        facts=ctx.facts,
        knowledge=_knowledge_block(ctx.docs),
        rules=_rules_block(ctx.rules, store),
    )

    trace.annotations = ctx.annotations
    trace.probes = ctx.probes
    trace.probe_results = ctx.probe_results
    trace.docs = tuple((d.doc_id, round(s, 6)) for d, s in ctx.docs)
    trace.rules = tuple(r.rule_id for r in ctx.rules)
    trace.facts = ctx.facts
    trace.bundle = bundle

    attempts = config.max_rethink_iterations if config.enable_rethink else 1
    iterations: list[Iteration] = []
    tool_calls: list[dict] = []
    verdict = Verdict("SYNTAX", "no reply produced")
    t2 = time.perf_counter()
    current = bundle
    while True:
        reply = backend.complete(current)
        call = parse_tool_call(reply)
        if call is not None and len(tool_calls) < MAX_TOOL_HOPS:
            name, args = call
            try:
                payload = kb.call_tool(name, args, store=store, now=config.now)
                result_text = json.dumps(payload, sort_keys=True)
            except (UnknownToolError, ArgSchemaError) as exc:
                result_text = json.dumps({"error": str(exc)})
            tool_calls.append({"tool": name, "args": args, "result": result_text})
            current = dataclasses.replace(
                current,
                user_text=(
                    f"{current.user_text}\n\nResult of {name}: {result_text}\n"
                    "Now respond with the final query."
                ),
            )
            continue
        verdict = validate_draft(reply, config, store, ctx.annotations)
        iterations.append(Iteration(current.fingerprint(), reply, verdict))
        if verdict.ok or len(iterations) >= attempts:
            break
        feedback = rethink_feedback(verdict, reply)
        iterations[-1] = dataclasses.replace(iterations[-1], feedback=feedback)
        current = dataclasses.replace(
            current, user_text=followup_user_text(current.user_text, feedback)
        )
    timings["draft"] = time.perf_counter() - t2

    trace.iterations = tuple(iterations)
    trace.tool_calls = tuple(tool_calls)
    trace.ir_text = verdict.ir_text
    trace.sql = verdict.sql_text

    t3 = time.perf_counter()
    if verdict.ok:
        try:
            trace.result = run_query(parse_sql(verdict.sql_text), store, now=config.now)
            trace.status = "RESULT"
        except RuntimeExecError as exc:
            trace.failure = {"status": "RUNTIME", "message": str(exc)}
            trace.status = "FAILED"
    else:
        trace.failure = {"status": verdict.status, "message": verdict.message}
        trace.status = "FAILED"
    timings["execute"] = time.perf_counter() - t3
    timings["total"] = time.perf_counter() - t0
    trace.timings = timings
    return trace

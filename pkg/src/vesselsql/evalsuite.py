"""Penalty-based Match Score and the styled benchmark harness.

The metric grades a predicted result set against the gold set with a
penalty for over-selection, so returning everything cannot game the score.
Reports aggregate by backend, schema representation, and linguistic style,
and contain no timestamps, so two runs over the same inputs are
byte-identical.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path

from .pipeline import PipelineConfig, run_episode
from .schema import ResultSet
from .sqlexec.executor import run_query
from .sqlexec.parser import parse_sql

STYLES = ("COMMAND", "OPERATIONAL", "FORMAL")


class _Failure:
    """Sentinel for a prediction that never produced a result set."""

    __slots__ = ()

    def __repr__(self) -> str:
        return "FAILURE"


FAILURE = _Failure()


class GuardViolationError(ValueError):
    """penalty_factor called outside its |pred| > |gold| > 0 guard."""


class TestSetError(ValueError):
    """A test set line is malformed."""


def base_score(gold: ResultSet, pred: ResultSet) -> float:
    """Fraction of gold rows the prediction recovered (set semantics)."""
    g = gold.canonical_rows()
    if not g:
        raise GuardViolationError("base_score needs a non-empty gold set")
    return len(g & pred.canonical_rows()) / len(g)


def penalty_factor(gold_count: int, pred_count: int) -> float:
    """Over-selection discount 1 / (1 + (|pred| - |gold|) / |gold|)."""
    if not (pred_count > gold_count > 0):
        raise GuardViolationError(
            f"penalty requires pred_count > gold_count > 0, "
            f"got gold={gold_count} pred={pred_count}"
        )
    return 1.0 / (1.0 + (pred_count - gold_count) / gold_count)


def match_score(gold: ResultSet, pred) -> float:
    """Score a prediction in [0, 100].

    FAILURE (or None) scores 0. An empty gold set scores 100 only against
    an empty prediction. Over-selection multiplies in the penalty factor;
    under-selection is already paid for by the base score.
    """
    if pred is FAILURE or pred is None:
        return 0.0
    g = gold.canonical_rows()
    p = pred.canonical_rows()
    if not g:
        return 100.0 if not p else 0.0
    bs = len(g & p) / len(g)
    if len(p) > len(g):
        return 100.0 * bs * penalty_factor(len(g), len(p))
    return 100.0 * bs


@dataclass(frozen=True)
class TestItem:
    id: str
    style: str
    question: str
    gold_sql: str

    def to_json_dict(self) -> dict:
        return {
            "id": self.id,
            "style": self.style,
            "question": self.question,
            "gold_sql": self.gold_sql,
        }


def parse_test_item(raw: dict, source: str = "<item>") -> TestItem:
    for key in ("id", "style", "question", "gold_sql"):
        if not isinstance(raw.get(key), str) or not raw[key].strip():
            raise TestSetError(f"{source}: field {key!r} must be a non-empty string")
    if raw["style"] not in STYLES:
        raise TestSetError(
            f"{source}: style must be one of {', '.join(STYLES)}, got {raw['style']!r}"
        )
    return TestItem(raw["id"], raw["style"], raw["question"], raw["gold_sql"])


def load_testset(path) -> tuple[TestItem, ...]:
    items: list[TestItem] = []
    seen: set[str] = set()
    text = Path(path).read_text(encoding="utf-8")
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            raw = json.loads(line)
        except json.JSONDecodeError as exc:
            raise TestSetError(f"line {lineno}: bad JSON: {exc}") from exc
        item = parse_test_item(raw, source=f"line {lineno}")
        if item.id in seen:
            raise TestSetError(f"line {lineno}: duplicate item id {item.id!r}")
        seen.add(item.id)
        items.append(item)
    return tuple(items)


@dataclass(frozen=True)
class ItemScore:
    backend: str
    representation: str
    item_id: str
    style: str
    score: float
    status: str  # RESULT | FAILED
    sql: str

    def to_json_dict(self) -> dict:
        return {
            "backend": self.backend,
            "representation": self.representation,
            "item_id": self.item_id,
            "style": self.style,
            "score": self.score,
            "status": self.status,
            "sql": self.sql,
        }


@dataclass
class ScoreReport:
    backends: tuple[str, ...]
    representations: tuple[str, ...]
    items: tuple[ItemScore, ...]
    failures: tuple[dict, ...]

    def _mean(self, scores) -> float:
        scores = list(scores)
        return sum(scores) / len(scores) if scores else 0.0

    def cell(self, backend: str, representation: str) -> float:
        return self._mean(
            s.score for s in self.items
            if s.backend == backend and s.representation == representation
        )

    def style_cell(self, backend: str, representation: str, style: str) -> float:
        return self._mean(
            s.score for s in self.items
            if s.backend == backend
            and s.representation == representation
            and s.style == style
        )

    def backend_mean(self, backend: str) -> float:
        return self._mean(s.score for s in self.items if s.backend == backend)

    @property
    def overall(self) -> float:
        return self._mean(s.score for s in self.items)

    def styles_present(self) -> tuple[str, ...]:
        present = {s.style for s in self.items}
        return tuple(st for st in STYLES if st in present)

    def to_json_dict(self) -> dict:
        return {
            "backends": list(self.backends),
            "representations": list(self.representations),
            "items": [s.to_json_dict() for s in self.items],
            "per_representation": {
                b: {r: self.cell(b, r) for r in self.representations}
                for b in self.backends
            },
            "per_style": {
                b: {
                    r: {
                        st: self.style_cell(b, r, st)
                        for st in self.styles_present()
                    }
                    for r in self.representations
                }
                for b in self.backends
            },
            "overall": self.overall,
            "failures": [dict(f) for f in self.failures],
        }

    def format_table(self) -> str:
        """Aligned text report: one row per backend, one column per
        representation, trailing average; then a per-style breakdown."""
        lines: list[str] = []

        def render(header: list[str], rows: list[list[str]]) -> list[str]:
            widths = [
                max(len(header[i]), *(len(r[i]) for r in rows)) if rows else len(header[i])
                for i in range(len(header))
            ]
            out = ["  ".join(h.ljust(widths[i]) if i == 0 else h.rjust(widths[i])
                             for i, h in enumerate(header))]
            for r in rows:
                out.append("  ".join(c.ljust(widths[i]) if i == 0 else c.rjust(widths[i])
                                     for i, c in enumerate(r)))
            return out

        header = ["backend"] + list(self.representations) + ["average"]
        rows = [
            [b]
            + [f"{self.cell(b, r):.2f}" for r in self.representations]
            + [f"{self.backend_mean(b):.2f}"]
            for b in self.backends
        ]
        lines.append("Match Score by representation")
        lines.extend(render(header, rows))

        styles = self.styles_present()
        if styles:
            lines.append("")
            lines.append("Match Score by style")
            header2 = ["backend", "representation"] + list(styles)
            rows2 = []
            for b in self.backends:
                for r in self.representations:
                    rows2.append(
                        [b, r] + [f"{self.style_cell(b, r, st):.2f}" for st in styles]
                    )
            # first column left-aligned, second too; widths handled per column
            widths = [
                max(len(header2[i]), *(len(row[i]) for row in rows2))
                for i in range(len(header2))
            ]
            lines.append("  ".join(
                h.ljust(widths[i]) if i < 2 else h.rjust(widths[i])
                for i, h in enumerate(header2)
            ))
            for row in rows2:
                lines.append("  ".join(
                    c.ljust(widths[i]) if i < 2 else c.rjust(widths[i])
                    for i, c in enumerate(row)
                ))

        if self.failures:
            lines.append("")
            lines.append("Failures")
            for f in self.failures:
                lines.append(
                    f"- {f['backend']}/{f['representation']}/{f['item_id']}: "
                    f"{f['status']}: {f['message']}"
                )
        lines.append("")
        lines.append(f"overall: {self.overall:.2f}")
        return "\n".join(lines) + "\n"


def load_default_testset() -> tuple[TestItem, ...]:
    from importlib import resources

    path = resources.files("vesselsql.data") / "testset.jsonl"
    items: list[TestItem] = []
    for lineno, line in enumerate(path.read_text(encoding="utf-8").splitlines(), 1):
        if line.strip():
            items.append(parse_test_item(json.loads(line), source=f"line {lineno}"))
    return tuple(items)


def load_default_replies() -> dict:
    from importlib import resources

    path = resources.files("vesselsql.data") / "scripted_replies.json"
    return json.loads(path.read_text(encoding="utf-8"))


def build_script(items, replies_by_id, representations, store, kb,
                 base_config: PipelineConfig) -> dict:
    """Key canned replies by the prompt fingerprints a benchmark will emit.

    The user text is representation-independent, so each item contributes
    one reply under len(representations) fingerprints.
    """
    from .llm import fingerprint
    from .pipeline import compose_prompt

    script: dict[str, str] = {}
    for item in items:
        reply = replies_by_id.get(item.id)
        if reply is None:
            continue
        ctx = compose_prompt(item.question, base_config, store, kb)
        for representation in representations:
            script[fingerprint(representation, ctx.user_text)] = reply
    return script


def run_benchmark(items, representations, store, kb, backends,
                  base_config: PipelineConfig = None, style: str = None) -> ScoreReport:
    """Run every (backend, representation, item) episode and score it.

    Gold SQL executes once per item with the benchmark clock. Episode
    failures score 0 and land in the failure log; they never abort the run.
    """
    if base_config is None:
        base_config = PipelineConfig()
    if not isinstance(backends, (list, tuple)):
        backends = [backends]
    if style is not None:
        if style not in STYLES:
            raise TestSetError(f"unknown style filter {style!r}")
        items = [i for i in items if i.style == style]
    items = list(items)

    gold_results: dict[str, ResultSet] = {}
    for item in items:
        gold_results[item.id] = run_query(
            parse_sql(item.gold_sql), store, now=base_config.now
        )

    scores: list[ItemScore] = []
    failures: list[dict] = []
    for backend in backends:
        for representation in representations:
            config = PipelineConfig(
                enable_ner=base_config.enable_ner,
                enable_sair=base_config.enable_sair,
                enable_rethink=base_config.enable_rethink,
                representation=representation,
                max_rethink_iterations=base_config.max_rethink_iterations,
                retrieval_k=base_config.retrieval_k,
                now=base_config.now,
            )
            for item in items:
                trace = run_episode(
                    item.question, config, store, kb, backend, style=item.style
                )
                pred = trace.result if trace.status == "RESULT" else FAILURE
                score = match_score(gold_results[item.id], pred)
                scores.append(
                    ItemScore(
                        backend=backend.name,
                        representation=representation,
                        item_id=item.id,
                        style=item.style,
                        score=score,
                        status=trace.status,
                        sql=trace.sql,
                    )
                )
                if trace.status != "RESULT":
                    failures.append({
                        "backend": backend.name,
                        "representation": representation,
                        "item_id": item.id,
                        "status": trace.failure["status"] if trace.failure else "FAILED",
                        "message": trace.failure["message"] if trace.failure else "",
                    })

    return ScoreReport(
        backends=tuple(b.name for b in backends),
        representations=tuple(representations),
        items=tuple(scores),
        failures=tuple(failures),
    )

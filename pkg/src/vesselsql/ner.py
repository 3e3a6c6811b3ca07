"""Gazetteer-based maritime NER with database verification probes.

The entity inventory is exactly what the database and a small type lexicon
know about: zone and facility names from shp_data, vessel names from
ship_ais, vessel-type and rule vocabulary from a JSON lexicon, plus regex
temporal windows. Matching is longest-span-first over normalized tokens;
vessel names additionally match by Soundex with FUZZY confidence.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

from .schema import GeoShape, VesselSqlError
from .soundex import sounds_like
from .sqlexec import TableStore

TAG_ROOTS = ("REGION", "FACILITY", "VESSEL_TYPE", "VESSEL_NAME", "TEMPORAL", "RULE")

EXACT = "EXACT"
FUZZY = "FUZZY"
UNRESOLVED = "UNRESOLVED"

_CONF_RANK = {EXACT: 0, FUZZY: 1, UNRESOLVED: 2}

# words never treated as fuzzy vessel-name candidates
_FUZZY_STOPWORDS = frozenset(
    "the and of in on at to for all that this those these which what where when who whom "
    "is are was were be been being may might can could shall should will would show give "
    "list find tell me them they their there here with without into onto about enter "
    "against next last current currently hour hours minute minutes vessel vessels ship "
    "ships name names information speed location position draft type chart sounds like "
    "violate requirements".split()
)


class LexiconError(VesselSqlError):
    """Malformed type-lexicon file."""


@dataclass(frozen=True)
class EntityAnnotation:
    """One tagged span of the operator's query."""

    span: tuple[int, int]
    surface: str
    tag_path: str
    resolution: tuple[str, int | str] | None
    confidence: str
    canonical: str | None = None

    def __post_init__(self) -> None:
        parts = self.tag_path.split("/")
        if parts[0] not in TAG_ROOTS or len(parts) > 2:
            raise VesselSqlError(f"bad tag path: {self.tag_path}")
        if self.confidence not in _CONF_RANK:
            raise VesselSqlError(f"bad confidence: {self.confidence}")

    @property
    def root(self) -> str:
        return self.tag_path.split("/")[0]

    def to_json_dict(self) -> dict:
        return {
            "span": list(self.span),
            "surface": self.surface,
            "tag_path": self.tag_path,
            "resolution": list(self.resolution) if self.resolution else None,
            "confidence": self.confidence,
            "canonical": self.canonical,
        }


@dataclass(frozen=True)
class GazEntry:
    tokens: tuple[str, ...]
    tag_path: str
    resolution: tuple[str, int | str] | None
    confidence: str
    canonical: str | None


@dataclass(frozen=True)
class Gazetteer:
    """Immutable matching tables for one store snapshot."""

    entries: tuple[GazEntry, ...]
    vessel_names: tuple[tuple[str, int], ...]  # (name, mmsi), for Soundex matching
    store_version: int
    max_term_tokens: int


_TOKEN_RE = re.compile(r"[a-z0-9]+")


def _tokens_with_spans(text: str) -> list[tuple[str, int, int]]:
    return [(m.group(), m.start(), m.end()) for m in _TOKEN_RE.finditer(text.lower())]


def _norm_tokens(text: str) -> tuple[str, ...]:
    return tuple(m.group() for m in _TOKEN_RE.finditer(text.lower()))


def _load_lexicon(path: str | Path | None) -> list[dict]:
    if path is None:
        raw = resources.files("vesselsql").joinpath("data/type_lexicon.json").read_text("utf-8")
    else:
        raw = Path(path).read_text("utf-8")
    doc = json.loads(raw)
    if not isinstance(doc, dict) or "terms" not in doc:
        raise LexiconError("lexicon must be an object with a 'terms' list")
    for item in doc["terms"]:
        tag = item.get("tag", "")
        parts = tag.split("/")
        if not item.get("term") or parts[0] not in TAG_ROOTS or len(parts) > 2:
            raise LexiconError(f"bad lexicon entry: {item!r}")
    return doc["terms"]


def build_gazetteer(store: TableStore, lexicon_path: str | Path | None = None) -> Gazetteer:
    """Snapshot the store's names plus the lexicon into matching tables."""
    entries: list[GazEntry] = []

    zone_by_name: dict[str, GeoShape] = {}
    for shape in store.shapes():
        zone_by_name[shape.name.strip().lower()] = shape
        root = "REGION" if shape.obj_type == "POLYGON" else "FACILITY"
        sub = shape.region_code.strip().upper() or shape.name.strip().upper().replace(" ", "_")
        entries.append(
            GazEntry(
                tokens=_norm_tokens(shape.name),
                tag_path=f"{root}/{sub}",
                resolution=("shp_data", shape.id),
                confidence=EXACT,
                canonical=shape.name,
            )
        )

    names: list[tuple[str, int]] = []
    ais_def = store.registry.table("ship_ais")
    assert ais_def is not None
    cols = ais_def.column_names
    mmsi_i, name_i = cols.index("mmsi"), cols.index("ship_name")
    for row in store.rows("ship_ais"):
        name, mmsi = str(row[name_i]), int(row[mmsi_i])
        names.append((name, mmsi))
        entries.append(
            GazEntry(
                tokens=_norm_tokens(name),
                tag_path="VESSEL_NAME",
                resolution=("ship_ais", mmsi),
                confidence=EXACT,
                canonical=name,
            )
        )

    for item in _load_lexicon(lexicon_path):
        tag = item["tag"]
        canonical = item.get("canonical")
        resolution: tuple[str, int | str] | None = None
        confidence = EXACT
        root = tag.split("/")[0]
        if root in ("REGION", "FACILITY"):
            zone = zone_by_name.get((canonical or item["term"]).strip().lower())
            if zone is not None:
                resolution = ("shp_data", zone.id)
            else:
                confidence = UNRESOLVED
        entries.append(
            GazEntry(
                tokens=_norm_tokens(item["term"]),
                tag_path=tag,
                resolution=resolution,
                confidence=confidence,
                canonical=canonical,
            )
        )

    entries = [e for e in entries if e.tokens]
    max_len = max((len(e.tokens) for e in entries), default=1)
    names.sort(key=lambda p: p[1])
    return Gazetteer(
        entries=tuple(entries),
        vessel_names=tuple(names),
        store_version=store.version,
        max_term_tokens=max_len,
    )


_TEMPORAL_PATTERNS: tuple[tuple[re.Pattern, object], ...] = (
    (re.compile(r"next\s+half\s+(?:an\s+)?hour"), 30),
    (re.compile(r"next\s+(?:an\s+|one\s+)?hour"), 60),
    (re.compile(r"next\s+(\d+)\s*(?:hours|hour|hrs|hr)"), "hours"),
    (re.compile(r"next\s+(\d+)\s*(?:minutes|minute|mins|min)"), "minutes"),
)


def _temporal_candidates(text: str) -> list[EntityAnnotation]:
    out: list[EntityAnnotation] = []
    lower = text.lower()
    taken: list[tuple[int, int]] = []
    for pattern, kind in _TEMPORAL_PATTERNS:
        for m in pattern.finditer(lower):
            span = (m.start(), m.end())
            if any(span[0] < e and s < span[1] for s, e in taken):
                continue
            taken.append(span)
            if kind == "hours":
                minutes = int(m.group(1)) * 60
            elif kind == "minutes":
                minutes = int(m.group(1))
            else:
                minutes = int(kind)  # type: ignore[arg-type]
            out.append(
                EntityAnnotation(
                    span=span,
                    surface=text[span[0] : span[1]],
                    tag_path="TEMPORAL/WINDOW",
                    resolution=None,
                    confidence=EXACT,
                    canonical=str(minutes),
                )
            )
    return out


def _tag_depth(tag_path: str) -> int:
    return len(tag_path.split("/"))


def annotate(text: str, gazetteer: Gazetteer) -> list[EntityAnnotation]:
    """Non-overlapping annotations in ascending span order."""
    if not text.strip():
        return []
    toks = _tokens_with_spans(text)
    candidates: list[EntityAnnotation] = []

    by_tokens: dict[tuple[str, ...], list[GazEntry]] = {}
    for entry in gazetteer.entries:
        by_tokens.setdefault(entry.tokens, []).append(entry)

    n = len(toks)
    for i in range(n):
        for width in range(min(gazetteer.max_term_tokens, n - i), 0, -1):
            window = tuple(t[0] for t in toks[i : i + width])
            for entry in by_tokens.get(window, ()):
                start, end = toks[i][1], toks[i + width - 1][2]
                candidates.append(
                    EntityAnnotation(
                        span=(start, end),
                        surface=text[start:end],
                        tag_path=entry.tag_path,
                        resolution=entry.resolution,
                        confidence=entry.confidence,
                        canonical=entry.canonical,
                    )
                )

    candidates.extend(_temporal_candidates(text))
    candidates.extend(_fuzzy_name_candidates(text, toks, gazetteer))

    # longest span first, then deeper tag, then better confidence, then leftmost
    candidates.sort(
        key=lambda a: (
            -(a.span[1] - a.span[0]),
            -_tag_depth(a.tag_path),
            _CONF_RANK[a.confidence],
            a.span[0],
            a.tag_path,
        )
    )
    chosen: list[EntityAnnotation] = []
    for cand in candidates:
        if any(cand.span[0] < c.span[1] and c.span[0] < cand.span[1] for c in chosen):
            continue
        chosen.append(cand)
    chosen.sort(key=lambda a: a.span)
    return chosen


def _fuzzy_name_candidates(
    text: str, toks: list[tuple[str, int, int]], gazetteer: Gazetteer
) -> list[EntityAnnotation]:
    exact_names = {tuple(_norm_tokens(name)) for name, _ in gazetteer.vessel_names}
    out: list[EntityAnnotation] = []
    spans: list[tuple[tuple[str, ...], int, int]] = []
    for i, (tok, start, end) in enumerate(toks):
        if len(tok) >= 4 and tok not in _FUZZY_STOPWORDS:
            spans.append(((tok,), start, end))
        if i + 1 < len(toks):
            nxt = toks[i + 1]
            if (
                len(tok) >= 3
                and len(nxt[0]) >= 3
                and tok not in _FUZZY_STOPWORDS
                and nxt[0] not in _FUZZY_STOPWORDS
            ):
                spans.append(((tok, nxt[0]), start, nxt[2]))
    for window, start, end in spans:
        if window in exact_names:
            continue  # the exact gazetteer candidate already covers it
        surface = text[start:end]
        for name, mmsi in gazetteer.vessel_names:
            if sounds_like(surface, name):
                out.append(
                    EntityAnnotation(
                        span=(start, end),
                        surface=surface,
                        tag_path="VESSEL_NAME",
                        resolution=("ship_ais", mmsi),
                        confidence=FUZZY,
                        canonical=name,
                    )
                )
                break
    return out


def needs_probe(annotation: EntityAnnotation) -> bool:
    if annotation.tag_path == "VESSEL_NAME" and annotation.confidence in (FUZZY, UNRESOLVED):
        return True
    return annotation.root in ("REGION", "FACILITY") and annotation.confidence == UNRESOLVED


def _quote(text: str) -> str:
    return "'" + text.replace("'", "''") + "'"


def verification_queries(annotations: list[EntityAnnotation]) -> list[str]:
    """One existence probe per entity that is not an exact database match."""
    probes: list[str] = []
    for a in annotations:
        if not needs_probe(a):
            continue
        if a.tag_path == "VESSEL_NAME":
            probes.append(
                "SELECT mmsi, ship_name FROM ship_ais "
                f"WHERE SOUNDS_LIKE(ship_name, {_quote(a.surface)})"
            )
        else:
            needle = (a.canonical or a.surface).replace("'", "''")
            probes.append(
                f"SELECT name, obj_type FROM shp_data WHERE name LIKE '%{needle}%'"
            )
    return probes


def facts_prompt(annotations: list[EntityAnnotation], probe_results: list) -> str:
    """Deterministic bullet list of entities and their database resolutions.

    `probe_results` aligns with the annotations that `needs_probe` selects;
    each item is a ResultSet or an error string.
    """
    if not annotations:
        return ""
    probed = [a for a in annotations if needs_probe(a)]
    result_for = {id(a): r for a, r in zip(probed, probe_results)}
    lines: list[str] = []
    for a in annotations:
        line = f"- {a.surface!r} -> {a.tag_path}"
        if a.tag_path == "TEMPORAL/WINDOW":
            line += f" ({a.canonical} minutes)"
        elif a.resolution is not None and a.confidence == EXACT:
            table, key = a.resolution
            line += f"; matches {table} key={key}"
            if a.canonical:
                line += f" ({a.canonical})"
        elif id(a) in result_for:
            result = result_for[id(a)]
            rows = getattr(result, "rows", None)
            if rows:
                shown = "; ".join(
                    ", ".join(f"{c}={v}" for c, v in zip(result.columns, row))
                    for row in rows[:3]
                )
                line += f"; probe matched: {shown}"
            else:
                line += "; not found in database"
        elif a.canonical:
            line += f" ({a.canonical})"
        lines.append(line)
    return "\n".join(lines)

"""Seeded synthetic traffic scenarios with ground-truth labels.

A scenario spec pins a handful of scripted vessels (rule violators, a
close-approach pair, imminent arrivals) and fills the remainder with
background traffic drawn from a seeded RNG. The same seed always yields
byte-identical tables. Ground truth is computed on an independent path:
zone membership uses the winding-number test rather than the query
engine's ray casting, so the two can be compared against each other.
"""

from __future__ import annotations

import json
import random
from dataclasses import dataclass
from datetime import datetime, timedelta
from importlib import resources

from . import geo
from .knowledge import RuleRecord, load_rules
from .schema import AisRecord, GeoShape, WarnRecord, format_timestamp, parse_timestamp
from .sqlexec.store import TableStore

SHIP_TYPES = ("CARGO", "TANKER", "VLCC", "TUG", "PASSENGER")

# (draft, length, width, tonnage) sampling ranges per type; every VLCC is a
# deep-draught vessel (draft >= 15) and nothing else is.
_TYPE_RANGES = {
    "CARGO": ((8.0, 13.0), (150.0, 220.0), (20.0, 32.0), (20000.0, 60000.0)),
    "TANKER": ((9.0, 14.5), (180.0, 250.0), (28.0, 42.0), (40000.0, 90000.0)),
    "VLCC": ((17.0, 21.0), (300.0, 340.0), (55.0, 62.0), (150000.0, 300000.0)),
    "TUG": ((3.0, 5.0), (25.0, 35.0), (8.0, 12.0), (200.0, 500.0)),
    "PASSENGER": ((6.0, 8.0), (120.0, 180.0), (20.0, 28.0), (15000.0, 40000.0)),
}

MMSI_BASE = 412000000
IMO_BASE = 9100000

CPA_WARN_NM = 0.5
CPA_SEVERE_NM = 0.25
TCPA_WARN_MIN = 30.0


class ScenarioError(Exception):
    """The scenario spec fails validation."""


@dataclass(frozen=True)
class Vessel:
    index: int
    name: str
    ship_type: str
    callsign: str
    start: tuple[float, float]
    cog: float
    sog: float
    heading: float
    draft: float
    length: float
    width: float
    tonnage: float
    nav_status: str
    eta: datetime

    @property
    def mmsi(self) -> int:
        return MMSI_BASE + self.index + 1

    @property
    def imo(self) -> int:
        return IMO_BASE + self.index

    def position_at(self, minutes: float) -> tuple[float, float]:
        if self.sog == 0.0:
            return self.start
        lat, lon = geo.destination_point(self.start, self.cog, self.sog * minutes / 60.0)
        return (round(lat, 6), round(lon, 6))

    def record_at(self, ts: datetime, minutes: float) -> AisRecord:
        lat, lon = self.position_at(minutes)
        return AisRecord(
            mmsi=self.mmsi,
            ship_name=self.name,
            callsign=self.callsign,
            imo=self.imo,
            ship_type=self.ship_type,
            length=self.length,
            width=self.width,
            tonnage=self.tonnage,
            draft=self.draft,
            lat=lat,
            lon=lon,
            sog=self.sog,
            cog=self.cog,
            heading=self.heading,
            nav_status=self.nav_status,
            eta=self.eta,
            ts=ts,
        )


@dataclass(frozen=True)
class GroundTruth:
    """Labels computed outside the query engine, for cross-checking it."""

    base_time: datetime
    final_time: datetime
    zone_members: dict  # zone name -> tuple of mmsi at final_time
    memberships: tuple  # (zone, ts, mmsi) over every quarter sample
    speed_violations: tuple  # mmsi over the fairway limit at final_time
    entry_violations: tuple  # mmsi in breach of the anchorage rule at final_time
    window_violations: tuple  # (mmsi, ts) port entries inside the closed window
    eta_within: dict  # minutes -> tuple of mmsi with eta in (final, final+m]
    warning_pairs: tuple  # (mmsi_a, mmsi_b, ts)

    def to_json_dict(self) -> dict:
        return {
            "base_time": format_timestamp(self.base_time),
            "final_time": format_timestamp(self.final_time),
            "zone_members": {z: list(m) for z, m in self.zone_members.items()},
            "memberships": [
                {"zone": z, "ts": format_timestamp(ts), "mmsi": m}
                for z, ts, m in self.memberships
            ],
            "speed_violations": list(self.speed_violations),
            "entry_violations": list(self.entry_violations),
            "window_violations": [
                {"mmsi": m, "ts": format_timestamp(ts)} for m, ts in self.window_violations
            ],
            "eta_within": {str(k): list(v) for k, v in self.eta_within.items()},
            "warning_pairs": [
                {"mmsi_a": a, "mmsi_b": b, "ts": format_timestamp(ts)}
                for a, b, ts in self.warning_pairs
            ],
        }


def load_scenario(path=None) -> dict:
    if path is None:
        path = resources.files("vesselsql.data") / "scenario_default.json"
    spec = json.loads(path.read_text(encoding="utf-8"))
    validate_scenario(spec)
    return spec


def _require(cond: bool, message: str) -> None:
    if not cond:
        raise ScenarioError(message)


def validate_scenario(spec: dict) -> None:
    _require(isinstance(spec, dict), "scenario spec must be a mapping")
    _require(isinstance(spec.get("seed"), int), "seed must be an integer")
    span = spec.get("span_minutes")
    step = spec.get("step_minutes")
    _require(isinstance(span, int) and span > 0, "span_minutes must be a positive integer")
    _require(isinstance(step, int) and step > 0, "step_minutes must be a positive integer")
    _require(span % step == 0, "step_minutes must divide span_minutes")
    try:
        parse_timestamp(spec.get("base_time", ""))
    except (ValueError, TypeError):
        raise ScenarioError("base_time must be an ISO timestamp") from None

    mix = spec.get("type_mix")
    _require(isinstance(mix, dict) and mix, "type_mix must be a non-empty mapping")
    for name, share in mix.items():
        _require(name in SHIP_TYPES, f"unknown ship type {name!r} in type_mix")
        _require(isinstance(share, (int, float)) and share >= 0, "type_mix shares must be >= 0")
    _require(abs(sum(mix.values()) - 1.0) < 1e-9, "type_mix shares must sum to 1")

    zones = spec.get("zones")
    _require(isinstance(zones, list) and zones, "zones must be a non-empty list")
    names = set()
    for z in zones:
        _require(z.get("obj_type") in ("POLYGON", "POINT"), "zone obj_type must be POLYGON or POINT")
        name = z.get("name")
        _require(isinstance(name, str) and name, "every zone needs a name")
        _require(name not in names, f"duplicate zone name {name!r}")
        names.add(name)
        verts = z.get("vertices")
        _require(isinstance(verts, list), "zone vertices must be a list")
        if z["obj_type"] == "POLYGON":
            _require(len(verts) >= 3, f"polygon zone {name!r} needs at least 3 vertices")
        else:
            _require(len(verts) == 1, f"point zone {name!r} needs exactly 1 vertex")

    scripted = spec.get("scripted", [])
    _require(isinstance(scripted, list), "scripted must be a list")
    count = spec.get("vessel_count")
    _require(isinstance(count, int) and count >= len(scripted),
             "vessel_count must cover the scripted vessels")
    vnames = set()
    for v in scripted:
        _require(v.get("ship_type") in SHIP_TYPES, "scripted vessel has unknown ship_type")
        name = v.get("name")
        _require(isinstance(name, str) and name, "scripted vessel needs a name")
        _require(name not in vnames, f"duplicate vessel name {name!r}")
        vnames.add(name)
        _require(isinstance(v.get("sog"), (int, float)) and v["sog"] >= 0, "sog must be >= 0")
        _require(isinstance(v.get("draft"), (int, float)) and v["draft"] > 0, "draft must be > 0")
        try:
            parse_timestamp(v.get("eta", ""))
        except (ValueError, TypeError):
            raise ScenarioError(f"vessel {name!r} has a bad eta") from None

    background = count - len(scripted)
    lanes = spec.get("background_lanes", [])
    _require(len(lanes) >= background, "background_lanes must cover the background count")
    pool = spec.get("name_pool", [])
    _require(len(pool) >= background, "name_pool must cover the background count")
    _require(len(set(pool)) == len(pool), "name_pool entries must be unique")
    _require(not (set(pool) & vnames), "name_pool must not repeat scripted names")


def _type_counts(mix: dict, total: int) -> dict:
    """Largest-remainder allocation of the type mix over the fleet size."""
    raw = {t: mix.get(t, 0.0) * total for t in SHIP_TYPES}
    counts = {t: int(raw[t]) for t in SHIP_TYPES}
    short = total - sum(counts.values())
    by_fraction = sorted(SHIP_TYPES, key=lambda t: (-(raw[t] - counts[t]), t))
    for t in by_fraction[:short]:
        counts[t] += 1
    return counts


def _background_types(spec: dict) -> list[str]:
    counts = _type_counts(spec["type_mix"], spec["vessel_count"])
    for v in spec.get("scripted", []):
        t = v["ship_type"]
        if counts.get(t, 0) <= 0:
            raise ScenarioError(f"type_mix leaves no room for scripted type {t}")
        counts[t] -= 1
    out: list[str] = []
    for t in SHIP_TYPES:
        out.extend([t] * counts[t])
    return out


def build_vessels(spec: dict) -> list[Vessel]:
    vessels: list[Vessel] = []
    for i, raw in enumerate(spec.get("scripted", [])):
        vessels.append(
            Vessel(
                index=i,
                name=raw["name"],
                ship_type=raw["ship_type"],
                callsign=raw["callsign"],
                start=(raw["start"][0], raw["start"][1]),
                cog=float(raw["cog"]),
                sog=float(raw["sog"]),
                heading=float(raw["heading"]),
                draft=float(raw["draft"]),
                length=float(raw["length"]),
                width=float(raw["width"]),
                tonnage=float(raw["tonnage"]),
                nav_status=raw["nav_status"],
                eta=parse_timestamp(raw["eta"]),
            )
        )

    rng = random.Random(spec["seed"])
    base = parse_timestamp(spec["base_time"])
    motion = spec.get("background_motion", {})
    east_lon = motion.get("eastbound_lon", [103.02, 103.06])
    west_lon = motion.get("westbound_lon", [103.44, 103.48])
    sog_range = motion.get("sog", [2.0, 4.0])
    lanes = spec.get("background_lanes", [])
    pool = spec.get("name_pool", [])

    for j, ship_type in enumerate(_background_types(spec)):
        idx = len(spec.get("scripted", [])) + j
        eastbound = j % 2 == 0
        sog = round(rng.uniform(*sog_range), 1)
        lon = round(rng.uniform(*(east_lon if eastbound else west_lon)), 6)
        dr, lr, wr, tr = _TYPE_RANGES[ship_type]
        draft = round(rng.uniform(*dr), 1)
        length = round(rng.uniform(*lr), 1)
        width = round(rng.uniform(*wr), 1)
        tonnage = float(int(rng.uniform(*tr)))
        cog = 90.0 if eastbound else 270.0
        heading = round((cog + rng.uniform(-3.0, 3.0)) % 360.0, 1)
        callsign = "9V" + "".join(rng.choice("ABCDEFGHJKLMNPRSTUVWXYZ") for _ in range(2))
        callsign += str(rng.randrange(10))
        eta = base + timedelta(minutes=480 + rng.randrange(0, 481))
        vessels.append(
            Vessel(
                index=idx,
                name=pool[j],
                ship_type=ship_type,
                callsign=callsign,
                start=(lanes[j], lon),
                cog=cog,
                sog=sog,
                heading=heading,
                draft=draft,
                length=length,
                width=width,
                tonnage=tonnage,
                nav_status="under way using engine",
                eta=eta,
            )
        )
    return vessels


def build_shapes(spec: dict) -> list[GeoShape]:
    shapes = []
    for i, z in enumerate(spec["zones"]):
        shapes.append(
            GeoShape(
                id=i + 1,
                obj_type=z["obj_type"],
                name=z["name"],
                geometry=tuple((v[0], v[1]) for v in z["vertices"]),
                region_code=z.get("region_code", ""),
                remark=z.get("remark", ""),
            )
        )
    return shapes


def sample_times(spec: dict) -> list[tuple[datetime, float]]:
    base = parse_timestamp(spec["base_time"])
    return [
        (base + timedelta(minutes=m), float(m))
        for m in range(0, spec["span_minutes"] + 1, spec["step_minutes"])
    ]


def generate_warnings(samples: dict) -> list[WarnRecord]:
    """Pairwise close-approach scan over per-timestamp position snapshots.

    samples maps a timestamp to that instant's AisRecord list. A pair warns
    when projected CPA is under 0.5 nm no more than 30 minutes ahead. The
    lower mmsi is always reported first.
    """
    warns: list[WarnRecord] = []
    next_id = 1
    for ts in sorted(samples):
        records = sorted(samples[ts], key=lambda r: r.mmsi)
        for i, a in enumerate(records):
            for b in records[i + 1:]:
                cpa, tcpa = geo.cpa_tcpa(
                    (a.lat, a.lon), a.sog, a.cog, (b.lat, b.lon), b.sog, b.cog
                )
                if cpa < CPA_WARN_NM and 0.0 <= tcpa <= TCPA_WARN_MIN:
                    warns.append(
                        WarnRecord(
                            id=next_id,
                            mmsi_a=a.mmsi,
                            name_a=a.ship_name,
                            mmsi_b=b.mmsi,
                            name_b=b.ship_name,
                            cpa_nm=round(cpa, 3),
                            tcpa_min=round(tcpa, 3),
                            warn_level=2 if cpa < CPA_SEVERE_NM else 1,
                            lat=round((a.lat + b.lat) / 2.0, 6),
                            lon=round((a.lon + b.lon) / 2.0, 6),
                            ts=ts,
                        )
                    )
                    next_id += 1
    return warns


def _polygon_shapes(shapes) -> list[GeoShape]:
    return [s for s in shapes if s.obj_type == "POLYGON"]


def _inside(shape: GeoShape, point: tuple[float, float]) -> bool:
    return geo.winding_number_contains(shape.ring, point)


def _eval_applies(node: dict | None, record: AisRecord) -> bool:
    if node is None:
        return True
    if "any_of" in node:
        return any(_eval_applies(b, record) for b in node["any_of"])
    if "all_of" in node:
        return all(_eval_applies(b, record) for b in node["all_of"])
    actual = getattr(record, node["column"])
    expected = node["value"]
    op = node["op"]
    if isinstance(actual, str) and isinstance(expected, str):
        actual = actual.strip().lower()
        expected = expected.strip().lower()
    if op == "=":
        return actual == expected
    if op == "<>":
        return actual != expected
    if op == "<":
        return actual < expected
    if op == "<=":
        return actual <= expected
    if op == ">":
        return actual > expected
    return actual >= expected


def build_ground_truth(
    spec: dict,
    current: list[AisRecord],
    quarter: list[AisRecord],
    shapes: list[GeoShape],
    warns: list[WarnRecord],
    rules: tuple[RuleRecord, ...] | None = None,
) -> GroundTruth:
    if rules is None:
        rules = load_rules()
    base = parse_timestamp(spec["base_time"])
    final = base + timedelta(minutes=spec["span_minutes"])
    polygons = _polygon_shapes(shapes)
    by_name = {s.name: s for s in polygons}

    zone_members = {
        s.name: tuple(r.mmsi for r in current if _inside(s, (r.lat, r.lon)))
        for s in polygons
    }
    memberships = tuple(
        (s.name, r.ts, r.mmsi)
        for r in quarter
        for s in polygons
        if _inside(s, (r.lat, r.lon))
    )

    speed: list[int] = []
    entry: list[int] = []
    window: list[tuple[int, datetime]] = []
    for rule in rules:
        zone = by_name.get(rule.zone)
        if zone is None:
            raise ScenarioError(f"rule {rule.rule_id} references zone {rule.zone!r} "
                                "that the scenario does not define")
        if rule.kind == "MAX_SPEED":
            speed.extend(
                r.mmsi for r in current
                if _inside(zone, (r.lat, r.lon))
                and r.sog > rule.limit_knots
                and _eval_applies(rule.applies_to, r)
            )
        elif rule.kind == "NO_ENTRY":
            entry.extend(
                r.mmsi for r in current
                if _inside(zone, (r.lat, r.lon)) and _eval_applies(rule.applies_to, r)
            )
        else:
            wfrom = parse_timestamp(rule.window_from)
            wto = parse_timestamp(rule.window_to)
            window.extend(
                (r.mmsi, r.ts) for r in quarter
                if wfrom <= r.ts <= wto
                and _inside(zone, (r.lat, r.lon))
                and _eval_applies(rule.applies_to, r)
            )

    eta_within = {
        minutes: tuple(
            sorted(r.mmsi for r in current
                   if final <= r.eta <= final + timedelta(minutes=minutes))
        )
        for minutes in (30, 60)
    }

    return GroundTruth(
        base_time=base,
        final_time=final,
        zone_members=zone_members,
        memberships=memberships,
        speed_violations=tuple(sorted(set(speed))),
        entry_violations=tuple(sorted(set(entry))),
        window_violations=tuple(sorted(set(window))),
        eta_within=eta_within,
        warning_pairs=tuple((w.mmsi_a, w.mmsi_b, w.ts) for w in warns),
    )


def generate(spec: dict) -> tuple[TableStore, GroundTruth]:
    validate_scenario(spec)
    vessels = build_vessels(spec)
    shapes = build_shapes(spec)
    times = sample_times(spec)

    quarter: list[AisRecord] = []
    samples: dict[datetime, list[AisRecord]] = {}
    for ts, minutes in times:
        snapshot = [v.record_at(ts, minutes) for v in vessels]
        samples[ts] = snapshot
        quarter.extend(sorted(snapshot, key=lambda r: r.mmsi))
    current = samples[times[-1][0]]
    current = sorted(current, key=lambda r: r.mmsi)

    warns = generate_warnings(samples)
    truth = build_ground_truth(spec, current, quarter, shapes, warns)

    store = TableStore()
    store.replace("ship_ais", [r.row() for r in current])
    store.replace("ship_ais_quarter", [r.row() for r in quarter])
    store.replace("shp_data", [
        (s.id, s.obj_type, s.name, s, s.region_code, s.remark) for s in shapes
    ])
    store.replace("warn_single", [w.row() for w in warns])
    return store, truth


def demo_now(spec: dict) -> datetime:
    """The clock a session over this scenario should run at: the final sample."""
    return parse_timestamp(spec["base_time"]) + timedelta(minutes=spec["span_minutes"])

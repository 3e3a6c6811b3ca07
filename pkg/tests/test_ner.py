"""Gazetteer annotation fixtures and verification-probe generation."""

import pytest

from vesselsql.ner import (
    annotate,
    build_gazetteer,
    facts_prompt,
    needs_probe,
    verification_queries,
)
from vesselsql.sqlexec.executor import run_query
from vesselsql.sqlexec.parser import parse_sql


@pytest.fixture(scope="module")
def gaz(store):
    return build_gazetteer(store)


def _tags(annotations):
    return [(a.tag_path, a.surface) for a in annotations]


def test_type_and_region_sentence(gaz):
    anns = annotate("List MMSI and name of VLCCs and DDVs in the Strait.", gaz)
    assert _tags(anns) == [
        ("VESSEL_TYPE/VLCC", "VLCCs"),
        ("VESSEL_TYPE/DDV", "DDVs"),
        ("REGION/STRAIT", "Strait"),
    ]
    strait = anns[2]
    assert strait.resolution == ("shp_data", 1)
    assert strait.canonical == "strait"


def test_vessel_name_lookup(gaz):
    anns = annotate("where is West Coast?", gaz)
    assert len(anns) == 1
    ann = anns[0]
    assert ann.tag_path == "VESSEL_NAME"
    assert ann.canonical == "WEST COAST"
    assert ann.resolution == ("ship_ais", 412000003)
    assert ann.confidence == "EXACT"


def test_empty_input(gaz):
    assert annotate("", gaz) == []


def test_longest_match_wins(gaz):
    # "deep-draught vessel" must come out as one DDV span, not fragments
    anns = annotate("deep-draught vessel in the strait", gaz)
    assert ("VESSEL_TYPE/DDV", "deep-draught vessel") in _tags(anns)


def test_fuzzy_name_resolves_by_soundex(gaz):
    anns = annotate("Is there a vessel that sounds like ALIBAMA?", gaz)
    assert len(anns) == 1
    ann = anns[0]
    assert ann.confidence == "FUZZY"
    assert ann.canonical == "ALABAMA"
    assert needs_probe(ann)


def test_synonyms_from_lexicon(gaz):
    for text, tag in [
        ("very large crude carriers in the area", "VESSEL_TYPE/VLCC"),
        ("any deep draught vessels nearby", "VESSEL_TYPE/DDV"),
        ("tankers holding in the anchorage", "VESSEL_TYPE/TANKER"),
    ]:
        anns = annotate(text, gaz)
        assert tag in [a.tag_path for a in anns], text


def test_temporal_spans(gaz):
    anns = annotate("Ships arriving in the next 30 minutes.", gaz)
    tags = [a.tag_path for a in anns]
    assert any(t.startswith("TEMPORAL") for t in tags)


def test_probes_parse_and_resolve(gaz, store, now):
    """Every emitted probe is valid SQL in the supported subset."""
    sentences = [
        "List MMSI and name of VLCCs and DDVs in the Strait.",
        "where is West Coast?",
        "Is there a vessel that sounds like ALIBAMA?",
        "Show speeders in the fairway near the pilot station.",
    ]
    count = 0
    for text in sentences:
        for probe in verification_queries(annotate(text, gaz)):
            query = parse_sql(probe)  # parses and schema-resolves
            run_query(query, store, now=now)
            count += 1
    assert count >= 1


def test_exact_entities_emit_no_probe(gaz):
    anns = annotate("List MMSI and name of VLCCs and DDVs in the Strait.", gaz)
    exact = [a for a in anns if a.confidence == "EXACT" and a.resolution is None]
    probes = verification_queries(exact)
    assert probes == []


def test_facts_prompt_bullets(gaz, store, now):
    anns = annotate("Is there a vessel that sounds like ALIBAMA?", gaz)
    probes = verification_queries(anns)
    results = [run_query(parse_sql(p), store, now=now) for p in probes]
    text = facts_prompt(anns, results)
    assert "ALIBAMA" in text
    assert "ALABAMA" in text
    assert text.strip().startswith("-")


def test_facts_prompt_empty():
    assert facts_prompt([], []) == ""


def test_unresolved_region_noted_as_missing(store, now):
    """A region term with no backing shape probes and reports 'not found'."""
    from vesselsql.sqlexec.store import TableStore

    bare = TableStore()
    bare.replace("ship_ais", store.rows("ship_ais"))
    # keep every zone except the fairway so the term stops grounding
    keep = [r for r in bare.registry.table("shp_data").column_names]
    assert keep
    rows = [r for r in store.rows("shp_data") if r[2] != "fairway"]
    bare.replace("shp_data", rows)

    gaz2 = build_gazetteer(bare)
    anns = annotate("speeding ships in the fairway", gaz2)
    fairway = [a for a in anns if a.tag_path.startswith("REGION")]
    assert fairway and fairway[0].confidence == "UNRESOLVED"
    probes = verification_queries(anns)
    assert any("shp_data" in p for p in probes)
    results = [run_query(parse_sql(p), bare, now=now) for p in probes]
    text = facts_prompt(anns, results)
    assert "not found in database" in text

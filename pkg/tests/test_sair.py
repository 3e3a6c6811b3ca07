"""S-expression IR: round trips, frozen compile output, execution parity."""

import json
from pathlib import Path

import pytest

from vesselsql.sair import (
    SairSchemaError,
    SairSyntaxError,
    compile_sair,
    explain,
    parse_sair,
    print_sair,
)
from vesselsql.sqlexec.executor import execute

GOLDEN = Path(__file__).parent / "golden"
CORPUS = json.loads((GOLDEN / "sair_corpus.json").read_text())


@pytest.mark.parametrize("entry", CORPUS, ids=[e["name"] for e in CORPUS])
def test_print_parse_round_trip(entry):
    tree = parse_sair(entry["ir"])
    assert parse_sair(print_sair(tree)) == tree


@pytest.mark.parametrize("entry", CORPUS, ids=[e["name"] for e in CORPUS])
def test_compiled_sql_is_frozen(entry):
    frozen = (GOLDEN / "sair_compiled.sql").read_text()
    block = f"-- {entry['name']}\n"
    assert block in frozen
    compiled = compile_sair(parse_sair(entry["ir"]))
    section = frozen.split(block, 1)[1].split("\n", 1)[0]
    assert compiled == section


@pytest.mark.parametrize("entry", CORPUS, ids=[e["name"] for e in CORPUS])
def test_compiled_matches_hand_written_gold(entry, store, now):
    compiled = compile_sair(parse_sair(entry["ir"]))
    assert execute(compiled, store, now=now) == execute(
        entry["gold_sql"], store, now=now)


def test_printer_canonicalizes_whitespace():
    messy = "(project   (mmsi)\n  (select (= ship_name 'A')   (rel ship_ais)))"
    tidy = "(project (mmsi) (select (= ship_name 'A') (rel ship_ais)))"
    assert print_sair(parse_sair(messy)) == tidy


def test_compile_is_deterministic():
    ir = CORPUS[2]["ir"]
    outs = {compile_sair(parse_sair(ir)) for _ in range(5)}
    assert len(outs) == 1


def test_syntax_errors():
    for bad in (
        "(project (mmsi) (rel ship_ais)",          # unbalanced
        "(select (= a 1) (rel ship_ais))",         # no project root
        "(project () (rel ship_ais))",             # no columns
        "(project (mmsi) (frobnicate (rel x)))",   # unknown head
        "(project (mmsi) (select (and (= sog 1)) (rel ship_ais)))",  # and arity
        "(project (mmsi) (select (st_contains (polygon (1 2) (3 4)) (lat lon)) (rel ship_ais)))",
    ):
        with pytest.raises(SairSyntaxError):
            parse_sair(bad)


def test_schema_errors_suggest():
    with pytest.raises(SairSchemaError) as err:
        parse_sair("(project (speed) (rel ship_ais))")
    assert "sog" in str(err.value)
    with pytest.raises(SairSchemaError):
        parse_sair("(project (mmsi) (rel vessels))")


def test_tool_calls_need_expander():
    ir = parse_sair("(project (mmsi) (select (call eta_window 30) (rel ship_ais)))")
    with pytest.raises(SairSchemaError):
        compile_sair(ir)

    def expander(name, args):
        assert name == "eta_window"
        assert args == (30,)
        wrapper = parse_sair("(project (mmsi) (select (between eta (now) "
                             "(now 30)) (rel ship_ais)))")
        return wrapper.child.pred

    expanded = compile_sair(ir, tool_expander=expander)
    assert "BETWEEN NOW() AND NOW() + INTERVAL 30 MINUTE" in expanded


def test_explain_lines():
    tree = parse_sair(CORPUS[2]["ir"])
    lines = explain(tree)
    assert lines[0].startswith("project ")
    assert any("strait" in line for line in lines)
    assert lines[-1] == "scan table ship_ais"

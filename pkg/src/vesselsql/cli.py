"""Command line front door: generate data, ask questions, run benchmarks.

Every verb exits 0 on success and 1 with a message on stderr otherwise, so
the tool composes in shell scripts without surprises.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import replace
from pathlib import Path

from .evalsuite import (load_default_testset, load_testset, run_benchmark)
from .knowledge import load_knowledge
from .llm import REPRESENTATIONS
from .pipeline import EpisodeTrace, run_episode
from .schema import normalize_value, parse_timestamp
from .service import (ServiceConfig, build_backend, create_app, default_state,
                      load_service_config)
from .sqlexec.store import TableStore, export_sql, load_dir, save_dir
from .trafficgen import demo_now, generate, load_scenario


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="vesselsql",
        description="Vessel traffic question answering over AIS snapshots.")
    sub = parser.add_subparsers(dest="verb", required=True)

    p = sub.add_parser("gen", help="generate a scenario into CSV files")
    p.add_argument("--spec", help="scenario JSON (default: packaged scenario)")
    p.add_argument("--out", required=True, help="output directory for CSVs")
    p.add_argument("--labels", help="also write ground-truth labels JSON here")

    p = sub.add_parser("load", help="validate a CSV directory by loading it")
    p.add_argument("--dir", required=True, help="directory of table CSVs")

    p = sub.add_parser("ask", help="answer one question and print the result")
    p.add_argument("question")
    p.add_argument("--data-dir", help="CSV directory (default: packaged scenario)")
    p.add_argument("--config", help="service config JSON")
    p.add_argument("--no-ner", action="store_true", help="skip entity annotation")
    p.add_argument("--no-sair", action="store_true",
                   help="treat the model reply as SQL, not an s-expression")
    p.add_argument("--no-rethink", action="store_true",
                   help="stop after the first draft")
    p.add_argument("--repr", dest="representation", choices=REPRESENTATIONS,
                   help="schema representation in the system prompt")
    p.add_argument("--style", help="style tag recorded in the trace")
    p.add_argument("--now", help="clock for NOW(), ISO-8601 UTC")

    p = sub.add_parser("bench", help="score the benchmark and print the table")
    p.add_argument("--testset", help="JSONL test set (default: packaged set)")
    p.add_argument("--repr", dest="representations", default="all",
                   help="'all' or comma-separated representation names")
    p.add_argument("--style", help="only score items with this style")
    p.add_argument("--data-dir", help="CSV directory (default: packaged scenario)")
    p.add_argument("--config", help="service config JSON")
    p.add_argument("--out", help="directory for report.json and report.txt")
    p.add_argument("--now", help="clock for NOW(), ISO-8601 UTC")

    p = sub.add_parser("export-sql", help="dump the store as executable SQL")
    p.add_argument("--data-dir", help="CSV directory (default: packaged scenario)")
    p.add_argument("--out", required=True, help="output .sql path, or - for stdout")

    p = sub.add_parser("serve", help="run the HTTP service")
    p.add_argument("--data-dir", help="CSV directory (default: packaged scenario)")
    p.add_argument("--config", help="service config JSON")
    p.add_argument("--host")
    p.add_argument("--port", type=int)

    return parser


def _load_store(data_dir: str | None, cfg: ServiceConfig, now_flag: str | None):
    """Store plus the effective clock. Generated data defaults to its end time."""
    text = now_flag or cfg.now
    now = parse_timestamp(text) if text is not None else None
    if data_dir is not None:
        store = TableStore()
        load_dir(store, data_dir)
        return store, now
    spec = load_scenario()
    store, _ = generate(spec)
    return store, (now if now is not None else demo_now(spec))


def _episode_context(args) -> tuple:
    cfg = load_service_config(getattr(args, "config", None))
    store, now = _load_store(getattr(args, "data_dir", None), cfg,
                             getattr(args, "now", None))
    pipeline = replace(cfg.pipeline, now=now)
    if getattr(args, "no_ner", False):
        pipeline = replace(pipeline, enable_ner=False)
    if getattr(args, "no_sair", False):
        pipeline = replace(pipeline, enable_sair=False)
    if getattr(args, "no_rethink", False):
        pipeline = replace(pipeline, enable_rethink=False)
    if getattr(args, "representation", None):
        pipeline = replace(pipeline, representation=args.representation)
    kb = load_knowledge()
    backend = build_backend(cfg.backend, store, kb, pipeline)
    return store, kb, pipeline, backend, cfg


def _print_result_table(columns, rows, out) -> None:
    cells = [[normalize_value(c) for c in row] for row in rows]
    widths = [max([len(name)] + [len(r[i]) for r in cells])
              for i, name in enumerate(columns)]
    header = "  ".join(n.ljust(w) for n, w in zip(columns, widths))
    print(header, file=out)
    print("  ".join("-" * w for w in widths), file=out)
    for r in cells:
        print("  ".join(c.ljust(w) for c, w in zip(r, widths)), file=out)


def _print_trace_summary(trace: EpisodeTrace, out) -> None:
    print("", file=out)
    print(f"annotations: {len(trace.annotations)}", file=out)
    for ann in trace.annotations:
        print(f"  {ann.tag_path} {ann.surface!r} -> {ann.canonical}", file=out)
    if trace.docs:
        print("knowledge: " + ", ".join(d for d, _ in trace.docs), file=out)
    if trace.rules:
        print("rules: " + ", ".join(trace.rules), file=out)
    for call in trace.tool_calls:
        print(f"tool: {call['tool']}({call['args']})", file=out)
    verdicts = [it.verdict.status for it in trace.iterations]
    print(f"iterations: {len(trace.iterations)} ({', '.join(verdicts)})",
          file=out)


def _cmd_gen(args, out) -> int:
    spec = load_scenario(args.spec)
    store, truth = generate(spec)
    files = save_dir(store, args.out)
    for name in files:
        table = Path(name).stem
        print(f"{name}: {store.row_count(table)} rows", file=out)
    if args.labels:
        Path(args.labels).write_text(
            json.dumps(truth.to_json_dict(), indent=2) + "\n",
            encoding="utf-8")
        print(f"labels: {args.labels}", file=out)
    return 0


def _cmd_load(args, out) -> int:
    store = TableStore()
    counts = load_dir(store, args.dir)
    if not counts:
        raise FileNotFoundError(f"no table CSVs found in {args.dir}")
    for table in sorted(counts):
        print(f"{table}: {counts[table]} rows", file=out)
    return 0


def _cmd_ask(args, out) -> int:
    store, kb, pipeline, backend, _ = _episode_context(args)
    trace = run_episode(args.question, pipeline, store, kb, backend,
                        style=args.style)
    if trace.ir_text:
        print(f"IR:  {trace.ir_text}", file=out)
    print(f"SQL: {trace.sql}", file=out)
    print("", file=out)
    if trace.status == "RESULT":
        _print_result_table(trace.result.columns, trace.result.rows, out)
        print(f"({len(trace.result.rows)} rows)", file=out)
        _print_trace_summary(trace, out)
        return 0
    failure = trace.failure or {}
    print(f"failed: {failure.get('status', 'UNKNOWN')}: "
          f"{failure.get('message', '')}", file=out)
    _print_trace_summary(trace, out)
    return 1


def _cmd_bench(args, out) -> int:
    store, kb, pipeline, backend, _ = _episode_context(args)
    items = (load_testset(args.testset) if args.testset
             else load_default_testset())
    if args.representations == "all":
        reps = list(REPRESENTATIONS)
    else:
        reps = [r.strip() for r in args.representations.split(",") if r.strip()]
        bad = [r for r in reps if r not in REPRESENTATIONS]
        if bad:
            raise ValueError(f"unknown representations: {bad}")
    report = run_benchmark(items, reps, store, kb, backend,
                           base_config=pipeline, style=args.style)
    text = report.format_table()
    print(text, end="", file=out)
    if args.out:
        directory = Path(args.out)
        directory.mkdir(parents=True, exist_ok=True)
        (directory / "report.json").write_text(
            json.dumps(report.to_json_dict(), indent=2) + "\n",
            encoding="utf-8")
        (directory / "report.txt").write_text(text, encoding="utf-8")
        print(f"wrote {directory / 'report.json'} and {directory / 'report.txt'}",
              file=out)
    return 0


def _cmd_export_sql(args, out) -> int:
    cfg = ServiceConfig()
    store, _ = _load_store(args.data_dir, cfg, None)
    text = export_sql(store)
    if args.out == "-":
        print(text, end="", file=out)
    else:
        Path(args.out).write_text(text, encoding="utf-8")
        print(f"wrote {args.out}", file=out)
    return 0


def _cmd_serve(args, out) -> int:
    import uvicorn

    cfg = load_service_config(args.config)
    state = default_state(args.data_dir, cfg)
    host = args.host or cfg.host
    port = args.port if args.port is not None else cfg.port
    print(f"serving on http://{host}:{port}", file=out)
    uvicorn.run(create_app(state), host=host, port=port, log_level="warning")
    return 0


_COMMANDS = {
    "gen": _cmd_gen,
    "load": _cmd_load,
    "ask": _cmd_ask,
    "bench": _cmd_bench,
    "export-sql": _cmd_export_sql,
    "serve": _cmd_serve,
}


def main(argv=None, out=sys.stdout) -> int:
    args = _build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.verb](args, out)
    except Exception as exc:  # surface one clean line, not a traceback
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

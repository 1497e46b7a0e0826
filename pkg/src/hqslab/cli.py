"""Command line entry point: ``hqslab check|graph|run|suite|replay``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .core import InvalidSystem
from .graph import build_graph, sink_component, to_dot
from .report import check_report
from .scenarios import InputError, canned_names, load_scenario, load_system_file, replay_trace, run
from .sim import ScriptError, SimulationFault, Trace
from .suite import SUITES

EXIT_OK, EXIT_FAIL, EXIT_INPUT = 0, 1, 2


def _verdict(ok: bool, expect_fail: bool) -> int:
    return EXIT_OK if ok != expect_fail else EXIT_FAIL


def cmd_check(args) -> int:
    ls = load_system_file(args.system)
    print("\n".join(check_report(ls)))
    return EXIT_OK


def cmd_graph(args) -> int:
    ls = load_system_file(args.system)
    g = build_graph(ls.qs)
    sink = sink_component(g)
    dot = to_dot(g, sink.members if not sink.multiple else frozenset())
    if args.out:
        Path(args.out).write_text(dot, encoding="utf-8")
    else:
        sys.stdout.write(dot)
    return EXIT_OK


def _print_run(res, indent: str = "") -> None:
    for c in res.checks:
        print(f"{indent}{'ok  ' if c.ok else 'FAIL'} {c.name}{': ' + c.detail if c.detail else ''}")
    for name, v in res.variants.items():
        print(f"{indent}variant {name}: {'ok' if v.ok else 'FAIL'}")
        _print_run(v, indent + "  ")


def cmd_run(args) -> int:
    sc = load_scenario(args.scenario)
    res = run(sc, seed=args.seed, max_steps=args.max_steps)
    print(f"scenario {sc.name} ({sc.protocol}): {len(res.trace.entries)} events, "
          f"{res.trace.steps} steps{', truncated' if res.trace.truncated else ''}")
    _print_run(res)
    if args.trace_out:
        Path(args.trace_out).write_text(res.trace.to_jsonl(), encoding="utf-8")
        for name, v in res.variants.items():
            p = Path(args.trace_out)
            p.with_name(f"{p.stem}.{name}{p.suffix}").write_text(v.trace.to_jsonl(), encoding="utf-8")
    print("PASS" if res.ok else "FAIL")
    return _verdict(res.ok, args.expect_fail)


def cmd_suite(args) -> int:
    names = args.only or list(SUITES)
    out_dir = Path(args.trace_out) if args.trace_out else None
    if out_dir is not None:
        out_dir.mkdir(parents=True, exist_ok=True)
    all_ok = True
    for name in names:
        fn = SUITES[name]
        kw = {"seed": args.seed}
        if args.count is not None:
            kw["count"] = args.count
        if out_dir is not None and name != "minimal-quorums":
            kw["keep_traces"] = lambda i, text, n=name: (out_dir / f"{n}-{i:05d}.jsonl").write_text(text, encoding="utf-8")
        rep = fn(**kw)
        print("\n".join(rep.lines()))
        if not rep.ok:
            all_ok = False
            v = rep.violations[0]
            print(f"  first counterexample: run {v.index}, {v.prop}: {v.detail}")
            print("  instance: " + json.dumps(v.instance, sort_keys=True))
            if v.trace:
                print("  trace:")
                sys.stdout.write("".join("    " + line + "\n" for line in v.trace.splitlines()))
    return _verdict(all_ok, args.expect_fail)


def cmd_replay(args) -> int:
    sc = load_scenario(args.scenario)
    try:
        text = Path(args.trace).read_text(encoding="utf-8")
    except OSError as exc:
        raise InputError(f"{args.trace}: cannot read: {exc.strerror}") from exc
    try:
        recorded = Trace.from_jsonl(text)
    except (ValueError, KeyError, TypeError) as exc:
        raise InputError(f"{args.trace}: not a trace file: {exc}") from exc
    try:
        again = replay_trace(sc, recorded).run_until_quiescent()
    except SimulationFault as exc:
        print(f"replay diverged: {exc}")
        return _verdict(False, args.expect_fail)
    same = again.to_jsonl() == recorded.to_jsonl()
    print("replay identical" if same else "replay differs from the recorded trace")
    return _verdict(same, args.expect_fail)


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="hqslab", description="Heterogeneous quorum system lab.")
    sub = ap.add_subparsers(dest="cmd", required=True)

    p = sub.add_parser("check", help="report properties of a system file")
    p.add_argument("system", help="system file path or canned system name")
    p.set_defaults(fn=cmd_check)

    p = sub.add_parser("graph", help="print the quorum graph as DOT")
    p.add_argument("system")
    p.add_argument("-o", "--out", help="write DOT to this file")
    p.set_defaults(fn=cmd_graph)

    p = sub.add_parser("run", help="run a scenario and check its expectations")
    p.add_argument("scenario", help="scenario path or canned name: " + ", ".join(canned_names()))
    p.add_argument("--seed", type=int)
    p.add_argument("--max-steps", type=int)
    p.add_argument("--trace-out", help="write the trace as JSON lines")
    p.add_argument("--expect-fail", action="store_true", help="succeed only if an expectation fails")
    p.set_defaults(fn=cmd_run)

    p = sub.add_parser("suite", help="run the randomized property suites")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--count", type=int, help="runs per suite (default depends on the suite)")
    p.add_argument("--only", action="append", choices=sorted(SUITES))
    p.add_argument("--trace-out", help="directory for one trace file per run")
    p.add_argument("--expect-fail", action="store_true")
    p.set_defaults(fn=cmd_suite)

    p = sub.add_parser("replay", help="re-run a scenario with the network taken from a trace")
    p.add_argument("scenario")
    p.add_argument("trace")
    p.add_argument("--expect-fail", action="store_true")
    p.set_defaults(fn=cmd_replay)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.fn(args)
    except (InputError, InvalidSystem, ScriptError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

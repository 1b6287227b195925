"""Command line: ``nbfeb run|explore|check|contend``.

Each command prints one JSON line per phase and exits nonzero when a check
fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from typing import Optional, Sequence

from .baseline import compare_contention
from .explore import ScriptError, explore, parse_script
from .history import MalformedHistory, brute_force_linearizable, check_linearizable, parse_history
from .workloads import WORKLOADS, RunConfig, run


def _bool(text: str) -> bool:
    lowered = text.lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise argparse.ArgumentTypeError(f"expected a boolean, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="nbfeb", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("run", help="run a workload and emit stats")
    p.add_argument("--workload", required=True, choices=sorted(WORKLOADS))
    p.add_argument("--threads", type=int, default=4)
    p.add_argument("--ops", type=int, default=100)
    p.add_argument("--payload", type=int, default=8, help="bytes per data version")
    p.add_argument("--cm", choices=["aggressive", "polite", "timid"], default="aggressive")
    p.add_argument("--strict", type=_bool, default=True)
    p.add_argument("--depth", type=int, default=0)
    p.add_argument("--arity", type=int, default=2)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out")
    p.add_argument("--real-threads", action="store_true", help="OS threads instead of the seeded scheduler")
    p.add_argument("--halt", type=int, help="freeze this thread before its first slot update")
    p.add_argument("--audit", action="store_true", help="audit reachable locators after every transaction")
    p.add_argument("--wall", action="store_true", help="include wall-clock time in the stats")

    p = sub.add_parser("explore", help="check a small script under all bounded schedules")
    p.add_argument("--script", required=True)
    p.add_argument("--bound", type=int, default=2, help="maximum preemptions per schedule")
    p.add_argument("--strict", type=_bool, default=True)

    p = sub.add_parser("check", help="decide linearizability of an FEB history")
    p.add_argument("--history", required=True)
    p.add_argument("--brute", action="store_true", help="also run the permutation search")

    p = sub.add_parser("contend", help="compare contention against the CAS baseline")
    p.add_argument("--m", type=int, required=True)
    p.add_argument("--depth", type=int, required=True)
    p.add_argument("--arity", type=int, default=2)
    return parser


def _emit(rec: dict) -> None:
    print(json.dumps(rec, sort_keys=True))


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            cfg = RunConfig(
                workload=args.workload,
                threads=args.threads,
                ops=args.ops,
                payload=args.payload,
                cm=args.cm,
                strict=args.strict,
                depth=args.depth,
                arity=args.arity,
                seed=args.seed,
                out=args.out,
                real_threads=args.real_threads,
                halt=args.halt,
                audit=args.audit,
                wall=args.wall,
            )
            rec = run(cfg)
            _emit(rec)
            return 1 if rec.get("violations") else 0
        if args.command == "explore":
            with open(args.script, encoding="utf-8") as fh:
                script = parse_script(fh)
            verdict = explore(script, args.bound, strict=args.strict)
            _emit(verdict.record())
            for cex in verdict.counterexamples[:5]:
                _emit({"phase": "counterexample", "schedule": cex.schedule, "problems": cex.problems})
            return 0 if verdict.ok else 1
        if args.command == "check":
            with open(args.history, encoding="utf-8") as fh:
                events, init = parse_history(fh)
            verdict = check_linearizable(events, init)
            rec = {"phase": "check", "linearizable": verdict.ok, "witness": verdict.witness}
            if args.brute:
                rec["brute_force"] = brute_force_linearizable(events, init)
            _emit(rec)
            return 0 if verdict.ok else 1
        if args.command == "contend":
            _emit(compare_contention(args.m, args.depth, args.arity).record())
            return 0
    except (ScriptError, MalformedHistory, ValueError, OSError) as exc:
        print(f"nbfeb: error: {exc}", file=sys.stderr)
        return 2
    return 2  # pragma: no cover

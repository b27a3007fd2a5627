"""Command line: run, validate, compare and replay-check scenarios."""
from __future__ import annotations

import argparse
import copy
import json
import sys
from concurrent.futures import ProcessPoolExecutor

from .itm import Scheme
from .output import emit, file_digest, read_trace
from .runner import RunFault, run_scenario
from .scenario import ScenarioError, load_scenario

EXIT_OK, EXIT_INVALID, EXIT_FAULT = 0, 1, 2

COMPARE_ROWS = ("detection_latency", "false_positive_rate", "blocked_attack_fraction",
                "victim_denial_fraction", "time_to_intel", "time_to_takedown")


def _load(path: str):
    try:
        return load_scenario(path)
    except ScenarioError as exc:
        for p in exc.problems:
            print(f"{path}: {p}", file=sys.stderr)
        return None
    except OSError as exc:
        print(f"{path}: {exc}", file=sys.stderr)
        return None


def _fmt(v) -> str:
    if v is None:
        return "n/a"
    if isinstance(v, float):
        return f"{v:.4g}"
    return str(v)


def cmd_run(args) -> int:
    cfg = _load(args.scenario)
    if cfg is None:
        return EXIT_INVALID
    try:
        res = run_scenario(cfg, args.seed)
    except RunFault as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        if args.out or cfg.output.dir:
            try:
                emit(exc.partial, {"fault": str(exc)}, cfg, args.out)
            except OSError:
                pass
        return EXIT_FAULT
    try:
        paths = emit(res.trace, res.metrics, cfg, args.out)
    except OSError as exc:
        print(f"cannot write artifacts: {exc}", file=sys.stderr)
        return EXIT_FAULT
    s = res.metrics["summary"]
    for key in COMPARE_ROWS:
        print(f"{key:26s} {_fmt(s[key])}")
    print(f"{'ledger':26s} {json.dumps(res.metrics['ledger'], sort_keys=True)}")
    print(f"digest {paths['digest']}")
    return EXIT_OK


def cmd_validate(args) -> int:
    cfg = _load(args.scenario)
    if cfg is None:
        return EXIT_INVALID
    print(f"{args.scenario}: ok ({cfg.name})")
    return EXIT_OK


def _one(job):
    cfg, scheme, seed = job
    res = run_scenario(cfg, seed)
    return scheme, seed, res.metrics["summary"], res.digest


def cmd_compare(args) -> int:
    base = _load(args.scenario)
    if base is None:
        return EXIT_INVALID
    try:
        schemes = [Scheme(s.strip()) for s in args.schemes.split(",") if s.strip()]
    except ValueError:
        print(f"unknown scheme in {args.schemes!r}", file=sys.stderr)
        return EXIT_INVALID
    if Scheme.CENTRALIZED in schemes and base.defense.global_threshold is None:
        print("centralized comparison needs defense.global_threshold", file=sys.stderr)
        return EXIT_INVALID
    jobs = []
    for sc in schemes:
        cfg = copy.deepcopy(base)
        cfg.defense.detection = sc
        if cfg.defense.honeypot is not None:
            cfg.defense.honeypot = sc
        for i in range(args.seeds):
            jobs.append((cfg, sc.value, base.seed + i))
    try:
        if args.jobs > 1:
            with ProcessPoolExecutor(args.jobs) as pool:
                results = list(pool.map(_one, jobs))
        else:
            results = [_one(j) for j in jobs]
    except RunFault as exc:
        print(f"runtime fault: {exc}", file=sys.stderr)
        return EXIT_FAULT
    results.sort(key=lambda r: (r[0], r[1]))
    names = [s.value for s in schemes]
    print(f"{'metric (mean over ' + str(args.seeds) + ' seeds)':34s}" +
          "".join(f"{n:>16s}" for n in names))
    for key in COMPARE_ROWS:
        row = []
        for n in names:
            vals = [r[2][key] for r in results if r[0] == n and r[2][key] is not None]
            row.append(_fmt(sum(vals) / len(vals)) if vals else "n/a")
        print(f"{key:34s}" + "".join(f"{v:>16s}" for v in row))
    return EXIT_OK


def cmd_replay_check(args) -> int:
    try:
        digest = file_digest(args.trace)
    except (OSError, ValueError) as exc:
        print(f"{args.trace}: {exc}", file=sys.stderr)
        return EXIT_INVALID
    print(f"digest {digest}")
    if args.scenario:
        cfg = _load(args.scenario)
        if cfg is None:
            return EXIT_INVALID
        seed = read_trace(args.trace).header.get("master_seed", cfg.seed)
        again = run_scenario(cfg, seed).digest
        if again != digest:
            print(f"replay differs: {again}", file=sys.stderr)
            return EXIT_INVALID
        print("replay matches")
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="itmsim", description=__doc__)
    sub = ap.add_subparsers(dest="command", required=True)
    p = sub.add_parser("run", help="run one scenario and write artifacts")
    p.add_argument("--scenario", required=True)
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--out", default=None)
    p.set_defaults(func=cmd_run)
    p = sub.add_parser("validate", help="check a scenario file")
    p.add_argument("--scenario", required=True)
    p.set_defaults(func=cmd_validate)
    p = sub.add_parser("compare", help="run several defense schemes side by side")
    p.add_argument("--scenario", required=True)
    p.add_argument("--schemes", default="centralized,distributed")
    p.add_argument("--seeds", type=int, default=5)
    p.add_argument("--jobs", type=int, default=1)
    p.set_defaults(func=cmd_compare)
    p = sub.add_parser("replay-check", help="recompute a trace digest")
    p.add_argument("--trace", required=True)
    p.add_argument("--scenario", default=None,
                   help="also re-run this scenario and compare digests")
    p.set_defaults(func=cmd_replay_check)
    return ap


def main(argv=None) -> int:
    try:
        args = build_parser().parse_args(argv)
    except SystemExit as exc:  # argparse usage errors count as invalid input
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    try:
        return args.func(args)
    except Exception as exc:  # anything unexpected is a runtime fault
        print(f"runtime fault: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAULT

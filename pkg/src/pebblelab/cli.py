"""``pebblelab`` command line: build, schedule, simulate, bound, verify, report.

Exit codes: 0 success, 1 verification or validation failure, 2 usage or
configuration error.
"""
from __future__ import annotations

import argparse
import json
import os
import sys

from . import __version__, bounds, lemmas, report
from .builders import BuildError, build_naive, build_strassen, build_strassen_like, load_spec, strassen_spec
from .cdag import CdagError, dump, load, to_dot
from .pebbles import (FREE, NO_RECOMPUTE, CacheTooSmall, ScheduleError, TraceError, generate_blocked_schedule,
                      generate_naive_schedule, read_trace, trace_line, validate_schedule, write_trace)

OK, FAILED, USAGE = 0, 1, 2
SEED_ENV = "MMIO_SEED"


class UsageError(Exception):
    pass


def resolve_seed(flag: int | None) -> int:
    """Flag, then the MMIO_SEED environment variable, then the default."""
    if flag is not None:
        return flag
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return int(env)
        except ValueError:
            raise UsageError(f"{SEED_ENV} must be an integer, got {env!r}") from None
    return lemmas.DEFAULT_SEED


def _emit(obj, path=None) -> None:
    text = json.dumps(obj, indent=2, sort_keys=True)
    if path:
        with open(path, "w") as fh:
            fh.write(text + "\n")
    else:
        print(text)


# -- build -------------------------------------------------------------------

def cmd_build(args) -> int:
    if args.algo == "strassen":
        g = build_strassen(args.n)[0]
    elif args.algo == "naive":
        g = build_naive(args.n)
    else:
        spec = load_spec(args.spec) if args.spec else strassen_spec()
        g = build_strassen_like(spec, args.n)[0]
    dump(g, args.out)
    if args.dot:
        with open(args.dot, "w") as fh:
            fh.write(to_dot(g))
    print(json.dumps({"out": args.out, "vertices": len(g), "edges": g.num_edges,
                      "inputs": len(g.inputs), "outputs": len(g.outputs)}, sort_keys=True))
    return OK


# -- schedule / simulate -----------------------------------------------------

def _schedule_for(g, strategy: str, M: int):
    n = g.meta.get("params", {}).get("n")
    builder = g.meta.get("builder")
    if strategy == "blocked":
        if builder != "strassen":
            raise UsageError("blocked strategy needs a CDAG built with --algo strassen")
        return generate_blocked_schedule(n, M, g)
    if builder != "naive":
        raise UsageError("naive strategy needs a CDAG built with --algo naive")
    return generate_naive_schedule(n, M, g)


def cmd_schedule(args) -> int:
    g = load(args.cdag)
    s = _schedule_for(g, args.strategy, args.cache)
    mode = NO_RECOMPUTE if args.no_recompute else FREE
    stats = validate_schedule(g, s, args.cache, mode)
    if args.out:
        write_trace(g, s, args.out)
    _emit({"strategy": args.strategy, "cache": args.cache, "mode": mode, "moves": len(s), **stats.to_dict()},
          args.stats)
    return OK


def cmd_simulate(args) -> int:
    g = load(args.cdag)
    s = read_trace(g, args.trace)
    M = args.cache if args.cache is not None else s.cache
    mode = NO_RECOMPUTE if args.no_recompute else FREE
    try:
        stats = validate_schedule(g, s, M, mode)
    except ScheduleError as exc:
        line = trace_line(s, exc.index)
        where = f"line {line}" if line is not None else "end of trace"
        print(f"error: {type(exc).__name__} at {where}: {exc}", file=sys.stderr)
        return FAILED
    _emit({"cache": M, "mode": mode, "moves": len(s), **stats.to_dict()}, args.stats)
    return OK


# -- bound -------------------------------------------------------------------

def cmd_bound(args) -> int:
    p = bounds.BoundParams(args.n, args.cache, args.procs, args.n0, args.m0, args.q)
    value = bounds.FORMULAS[args.formula](p)
    if args.json:
        _emit(value.to_dict(p))
    else:
        print(value.to_dict()["value"])
    return OK


# -- verify ------------------------------------------------------------------

def cmd_verify(args) -> int:
    seed = resolve_seed(args.seed)
    what = args.what
    if what == "table1":
        v = lemmas.verify_table1()
        headline = f"{v.details['matched']}/{v.details['rows']} match"
    elif what == "corollary-half":
        g = lemmas.two_disjoint_h2() if args.copies == 2 else build_strassen(args.n or 2)[0]
        v = lemmas.verify_corollary_half(g)
        headline = v.summary()
    elif what == "dominator-2m":
        v = lemmas.verify_dominator_2M(args.n or 4, args.cache or 1, seed=seed,
                                       samples=args.samples or lemmas.SAMPLES)
        headline = v.summary()
    elif what == "disjoint-paths":
        v = lemmas.verify_disjoint_paths(args.n or 4, args.cache or 1, samples=args.samples or 500, seed=seed)
        headline = v.summary()
    elif what == "families":
        spec = load_spec(args.spec) if args.spec else None
        v = lemmas.verify_family_disjointness(args.n or 8, args.level if args.level is not None else 1, spec)
        headline = v.summary()
    else:
        v = lemmas.verify_flow(args.n or 2, 2)
        headline = v.summary()
    print(headline)
    if args.json:
        _emit(v.to_dict(), args.json)
    elif v.violations:
        for item in v.violations[:10]:
            print(f"  violation: {json.dumps(item, sort_keys=True)}")
    return OK if v.passed else FAILED


# -- report ------------------------------------------------------------------

def cmd_report(args) -> int:
    seed = resolve_seed(args.seed)
    log = (lambda msg: print(msg, file=sys.stderr)) if not args.quiet else None
    rows, runtimes = report.desk_suite(seed, log=log)
    config = {"command": "report", "suite": args.suite, "seed": seed, "out": args.out}
    report.write_report(args.out, rows, runtimes, config, args.meta)
    passed = sum(r.passed for r in rows)
    print(f"{passed}/{len(rows)} rows pass; wrote {args.out}")
    return OK if passed == len(rows) else FAILED


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="pebblelab", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    b = sub.add_parser("build", help="build a CDAG and serialize it")
    b.add_argument("--algo", choices=["strassen", "naive", "like"], required=True)
    b.add_argument("--n", type=int, required=True)
    b.add_argument("--spec", help="Strassen-like coefficient file (default: bundled Strassen)")
    b.add_argument("--out", required=True)
    b.add_argument("--dot")
    b.set_defaults(func=cmd_build)

    for name, fn, help_ in (("schedule", cmd_schedule, "generate and validate a schedule"),
                            ("simulate", cmd_simulate, "replay a schedule trace")):
        s = sub.add_parser(name, help=help_)
        s.add_argument("--cdag", required=True)
        s.add_argument("--no-recompute", action="store_true")
        s.add_argument("--stats", help="write stats JSON here instead of stdout")
        if name == "schedule":
            s.add_argument("--strategy", choices=["blocked", "naive"], required=True)
            s.add_argument("--cache", type=int, required=True)
            s.add_argument("--out", help="trace output (JSON lines)")
        else:
            s.add_argument("--trace", required=True)
            s.add_argument("--cache", type=int, help="override the cache size in the trace header")
        s.set_defaults(func=fn)

    bd = sub.add_parser("bound", help="evaluate a closed-form lower bound")
    bd.add_argument("--formula", choices=sorted(bounds.FORMULAS), required=True)
    bd.add_argument("--n", type=int, required=True)
    bd.add_argument("--cache", type=int, required=True)
    bd.add_argument("--procs", type=int, default=1)
    bd.add_argument("--n0", type=int, default=2)
    bd.add_argument("--m0", type=int, default=7)
    bd.add_argument("--q", type=int)
    bd.add_argument("--json", action="store_true", help="print the full JSON record")
    bd.set_defaults(func=cmd_bound)

    v = sub.add_parser("verify", help="run a lemma verifier")
    v.add_argument("what", choices=["table1", "corollary-half", "dominator-2m", "disjoint-paths", "families", "flow"])
    v.add_argument("--n", type=int)
    v.add_argument("--cache", type=int)
    v.add_argument("--level", type=int)
    v.add_argument("--copies", type=int, choices=[1, 2], default=1)
    v.add_argument("--samples", type=int)
    v.add_argument("--spec")
    v.add_argument("--seed", type=int)
    v.add_argument("--json", help="write the verdict JSON to this path")
    v.set_defaults(func=cmd_verify)

    r = sub.add_parser("report", help="run the desk suite and write the CSV report")
    r.add_argument("--suite", choices=["desk"], default="desk")
    r.add_argument("--seed", type=int)
    r.add_argument("--out", default="report.csv")
    r.add_argument("--meta", help="sidecar JSON path (default: <out>.meta.json)")
    r.add_argument("--quiet", action="store_true")
    r.set_defaults(func=cmd_report)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (UsageError, BuildError, CdagError, CacheTooSmall, TraceError, bounds.BoundError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return USAGE
    except ScheduleError as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return FAILED


if __name__ == "__main__":
    sys.exit(main())

"""The desk suite: every acceptance experiment as one CSV row.

The CSV holds only deterministic values; wall-clock data and the
timestamp go to a JSON sidecar.
"""
from __future__ import annotations

import csv
import io
import json
import time
from dataclasses import dataclass
from datetime import datetime, timezone
from fractions import Fraction

import numpy as np

from . import __version__, lemmas
from .bounds import BoundParams, LOG2_7, strassen_seq_bound
from .builders import build_naive, build_strassen
from .pebbles import (NO_RECOMPUTE, CacheTooSmall, ScheduleError, generate_blocked_schedule,
                      generate_naive_schedule, validate_schedule)

HEADER = ["experiment", "n", "M", "measured", "bound", "ratio", "pass"]
SCHEDULE_CASES = [(8, 4), (16, 4), (16, 16), (32, 16)]
RATIO_LIMIT = 100
SCALING_SIZES = (8, 16, 32, 64)
SCALING_CACHE = 16
BLOCKED_TOL, NAIVE_TOL = 0.15, 0.2


@dataclass(frozen=True)
class Row:
    experiment: str
    n: object = ""
    M: object = ""
    measured: object = ""
    bound: object = ""
    ratio: object = ""
    passed: bool = False
    note: str = ""

    def cells(self) -> list[str]:
        return [self.experiment, fmt(self.n), fmt(self.M), fmt(self.measured), fmt(self.bound),
                fmt(self.ratio), "true" if self.passed else "false"]


def fmt(x) -> str:
    if x is None or x == "":
        return ""
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, Fraction):
        x = int(x) if x.denominator == 1 else float(x)
    if isinstance(x, int):
        return str(x)
    if isinstance(x, float):
        return f"{x:.6g}"
    return str(x)


def _verdict_row(name, v: lemmas.LemmaVerdict, n="", M="") -> Row:
    good = v.instances_checked - len(v.violations)
    return Row(name, n, M, good, v.instances_checked, good / max(v.instances_checked, 1), v.passed)


def _table1_rows(v: lemmas.LemmaVerdict) -> list[Row]:
    d = v.details
    return [Row("table1-rows", 2, "", d["matched"], d["rows"], d["matched"] / d["rows"], d["matched"] == d["rows"]),
            Row("table1-sandwich", 2, "", d["sandwich_ok"], 256, d["sandwich_ok"] / 256, d["sandwich_ok"] == 256),
            Row("table1-side-b", 2, "", d["isomorphic_ok"], 128, d["isomorphic_ok"] / 128, d["isomorphic_ok"] == 128)]


def schedule_row(n: int, M: int) -> Row:
    bound = strassen_seq_bound(BoundParams(n, M)).value
    try:
        g = build_strassen(n)[0]
        s = generate_blocked_schedule(n, M, g)
        stats = validate_schedule(g, s, M, NO_RECOMPUTE)
    except CacheTooSmall as exc:
        return Row("schedule-blocked", n, M, "NA", bound, "NA", False, str(exc))
    except ScheduleError as exc:
        return Row("schedule-blocked", n, M, "NA", bound, "NA", False, f"invalid: {exc}")
    ratio = stats.io_total / bound
    ok = stats.io_total >= bound and ratio < RATIO_LIMIT and stats.recomputed_vertices == 0
    return Row("schedule-blocked", n, M, stats.io_total, bound, float(ratio), ok)


def slope(sizes, values) -> float:
    return float(np.polyfit(np.log2(sizes), np.log2(values), 1)[0])


def scaling_ios(strategy: str, sizes=SCALING_SIZES, M: int = SCALING_CACHE) -> list[int]:
    out = []
    for n in sizes:
        if strategy == "blocked":
            g = build_strassen(n)[0]
            s = generate_blocked_schedule(n, M, g)
            out.append(validate_schedule(g, s, M, NO_RECOMPUTE).io_total)
        else:
            g = build_naive(n)
            s = generate_naive_schedule(n, M, g)
            out.append(validate_schedule(g, s, M, NO_RECOMPUTE).io_total)
        del g, s
    return out


def scaling_rows(sizes=SCALING_SIZES, M: int = SCALING_CACHE) -> list[Row]:
    span = f"{sizes[0]}-{sizes[-1]}"
    rows = []
    for strategy, target, tol in (("blocked", LOG2_7, BLOCKED_TOL), ("naive", 3.0, NAIVE_TOL)):
        k = slope(sizes, scaling_ios(strategy, sizes, M))
        rows.append(Row(f"scaling-{strategy}", span, M, k, target, k / target, abs(k - target) <= tol))
    return rows


def desk_suite(seed: int = lemmas.DEFAULT_SEED, log=None) -> tuple[list[Row], dict]:
    """Run every desk-scale experiment; returns rows and per-experiment runtimes."""
    rows: list[Row] = []
    runtimes: dict[str, float] = {}

    def step(name, fn):
        t0 = time.perf_counter()
        out = fn()
        runtimes[name] = round(time.perf_counter() - t0, 3)
        new = out if isinstance(out, list) else [out]
        rows.extend(new)
        if log:
            for r in new:
                log(f"{'PASS' if r.passed else 'FAIL'} {r.experiment} n={fmt(r.n)} M={fmt(r.M)} "
                    f"measured={fmt(r.measured)} bound={fmt(r.bound)}")

    step("table1", lambda: _table1_rows(lemmas.verify_table1()))
    step("cdag-product", lambda: [
        _verdict_row("cdag-product", lemmas.verify_cdag_product(sizes=(n,), seed=seed), n=n)
        for n in (1, 2, 4, 8, 16)])
    step("families", lambda: [
        _verdict_row(f"families-level{lv}", lemmas.verify_family_disjointness(8, lv), n=8) for lv in (1, 2)])
    step("corollary-half", lambda: [
        _verdict_row("corollary-half-h2", lemmas.verify_corollary_half(build_strassen(2)[0]), n=2),
        _verdict_row("corollary-half-2xh2", lemmas.verify_corollary_half(lemmas.two_disjoint_h2()), n=2)])
    step("dominator-2m", lambda: [
        _verdict_row("dominator-2m", lemmas.verify_dominator_2M(n, 1, seed=seed), n=n, M=1) for n in (4, 8)])
    step("disjoint-paths", lambda: _verdict_row(
        "disjoint-paths", lemmas.verify_disjoint_paths(4, 1, samples=500, seed=seed), n=4, M=1))
    step("flow", lambda: _verdict_row("flow-gf2", lemmas.verify_flow(2, 2), n=2))
    step("schedule", lambda: [schedule_row(n, M) for n, M in SCHEDULE_CASES])
    step("scaling", scaling_rows)
    step("oracle", lambda: _verdict_row("oracle-equivalence", lemmas.verify_oracle_equivalence(200, seed)))
    return rows, runtimes


def to_csv(rows: list[Row]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(HEADER)
    for r in rows:
        w.writerow(r.cells())
    return buf.getvalue()


def meta_record(rows: list[Row], runtimes: dict, config: dict) -> dict:
    return {
        "tool": "pebblelab",
        "version": __version__,
        "config": config,
        "seed": config.get("seed"),
        "timestamp": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "runtimes": runtimes,
        "all_pass": all(r.passed for r in rows),
        "notes": {r.experiment + (f"[n={fmt(r.n)},M={fmt(r.M)}]" if r.n != "" else ""): r.note
                  for r in rows if r.note},
    }


def write_report(path, rows: list[Row], runtimes: dict, config: dict, meta_path=None) -> None:
    with open(path, "w", newline="") as fh:
        fh.write(to_csv(rows))
    meta_path = meta_path or f"{path}.meta.json"
    with open(meta_path, "w") as fh:
        json.dump(meta_record(rows, runtimes, config), fh, indent=2, sort_keys=True)
        fh.write("\n")


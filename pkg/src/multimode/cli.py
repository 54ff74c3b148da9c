"""Command-line entry point: ``multimode <subcommand> ...``.

Exit codes: 0 success or valid, 1 invalid verdict, 2 usage or data error.
"""
from __future__ import annotations

import argparse
import csv
import io
import itertools
import json
import math
import statistics
import sys
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Sequence

from . import bounds, oracle, protocols, validity
from .model import (JobSet, Platform, PriorityAssignment, application_from_dict, as_time,
                    format_time, parse_times, render_time, validate_application)
from .simkernel import schedule
from .unsound import unif_fjp_ms0_naive

EXPERIMENT_JOBS = (3896, 3964, 878, 1378, 2228, 3612, 1230, 1232, 1668, 4672)
SUMMARY_STATS = ("min", "Q1", "median", "mean", "Q3", "max", "variance", "SD", "bias", "MSE")
ERROR_COLUMNS = ("E1", "E2", "E3", "Emin")


class UsageError(Exception):
    pass


class _Fmt:
    def __init__(self, places: int, exact: bool):
        self.places, self.exact = places, exact

    def __call__(self, v) -> str:
        if v is None:
            return ""
        if self.exact and isinstance(v, Fraction):
            return format_time(v)
        return render_time(v, self.places)


def _platform(args) -> Platform:
    if getattr(args, "speeds", None):
        return Platform(tuple(parse_times(args.speeds)))
    if getattr(args, "m", None):
        return Platform.identical(args.m)
    raise UsageError("give --speeds or --m")


def _jobs(text: str) -> JobSet:
    times = parse_times(text)
    if not times:
        raise UsageError("--jobs is empty")
    return JobSet.of(times)


# -- simulate -------------------------------------------------------------

def cmd_simulate(args, out) -> int:
    jobs = _jobs(args.jobs)
    plat = _platform(args)
    prio = (PriorityAssignment(tuple(int(x) for x in args.order.split(",")))
            if args.order else PriorityAssignment.identity(jobs))
    res = schedule(jobs, plat, prio)
    fmt = _Fmt(args.places, args.exact)
    print(f"makespan {fmt(res.makespan)}", file=out)
    for k, v in enumerate(res.idle_instants, 1):
        print(f"idle_{k} {fmt(v)}", file=out)
    if args.csv:
        with open(args.csv, "w", newline="") as fh:
            fh.write(res.to_csv())
    return 0


# -- bounds ---------------------------------------------------------------

FLAVOR_CHOICES = ("ident-fjp", "ident-fjp-legacy", "ident-ftp", "unif-fjp", "unif-ftp",
                  "unsound-ms0", "lambda")


def cmd_bounds(args, out) -> int:
    fmt = _Fmt(args.places, args.exact)
    plat = _platform(args)
    fl = args.flavor
    if fl == "lambda":
        print(f"lambda {fmt(bounds.lambda_pi(plat))}", file=out)
        return 0
    jobs = _jobs(args.jobs)
    asc = sorted(jobs.times)
    m = plat.m
    if fl.startswith("ident"):
        if not plat.is_identical:
            raise UsageError(f"{fl} needs identical CPUs")
        s = plat.speeds[0]
        if fl == "ident-ftp":
            vec = bounds.ident_ftp_idle_bounds([c / s for c in jobs.times], m)
        elif fl == "ident-fjp-legacy":
            vec = bounds.ident_fjp_idle_bounds_legacy([c / s for c in asc], m)
        else:
            vec = bounds.ident_fjp_idle_bounds([c / s for c in asc], m)
        _print_vector(vec.values, fmt, out)
        print(f"makespan {fmt(vec.makespan)}", file=out)
        return 0
    if fl == "unif-ftp":
        vec = bounds.unif_ftp_idle_table(jobs.times, plat).final
        _print_vector(vec.values, fmt, out)
        print(f"makespan {fmt(vec.makespan)}", file=out)
        return 0
    if fl == "unsound-ms0":
        print(f"ms0 {fmt(unif_fjp_ms0_naive(asc, plat))} (UNSOUND: not an upper bound)", file=out)
        return 0
    tr = bounds.unif_fjp_trace(asc, plat)
    for k, v in enumerate(tr.minidle, 1):
        print(f"minidle_{k} {fmt(v)}", file=out)
    _print_vector(bounds.unif_fjp_idle_upper(asc, plat).values, fmt, out)
    print(f"ms1 {fmt(tr.ms1)}", file=out)
    print(f"ms2 {fmt(tr.ms2)}", file=out)
    print(f"ms3 {fmt(tr.ms3)}", file=out)
    print(f"makespan {fmt(tr.ms_min)}", file=out)
    return 0


def _print_vector(values, fmt, out) -> None:
    for k, v in enumerate(values, 1):
        print(f"maxidle_{k} {fmt(v)}", file=out)


# -- validity -------------------------------------------------------------

def _load_doc(path: str) -> dict:
    with open(path) as fh:
        return json.load(fh)


def cmd_validity(args, out) -> int:
    app, plat = application_from_dict(_load_doc(args.app))
    problems = validate_application(app, plat)
    if problems:
        raise UsageError("; ".join(problems))
    fmt = _Fmt(args.places, args.exact)
    reports = []
    if args.protocol in ("sm", "both"):
        reports.append(validity.validity_smmso(app, plat))
    if args.protocol in ("am", "both"):
        reports.append(validity.validity_ammso(app, plat))
    w = csv.writer(out, lineterminator="\n")
    w.writerow(["protocol", "source", "target", "bound", "value", "binding_deadline",
                "binding_task", "slack", "verdict", "failing_task"])
    for rep in reports:
        for p in rep.pairs:
            w.writerow([rep.protocol, p.source, p.target, p.bound_name, fmt(p.bound_value),
                        fmt(p.binding_deadline), p.binding_task, fmt(p.slack), p.verdict,
                        "" if p.failing_task is None else p.failing_task])
    for rep in reports:
        print(f"# {rep.protocol}: {rep.verdict}", file=out)
    return 0 if all(r.valid for r in reports) else 1


# -- oracle ---------------------------------------------------------------

def cmd_oracle(args, out) -> int:
    jobs = _jobs(args.jobs)
    plat = _platform(args)
    fmt = _Fmt(args.places, args.exact)
    if args.samples is not None:
        res = oracle.sampled_max(jobs, plat, args.samples, args.seed)
    else:
        try:
            res = oracle.exact_max(jobs, plat, limit_n=args.limit_n, workers=args.workers)
        except oracle.OracleRefused as exc:
            raise UsageError(str(exc)) from exc
    tag = "exhaustive" if res.mode == oracle.EXHAUSTIVE else f"sampled(seed={res.seed}, count={res.samples}) lower bound"
    print(f"mode {tag}", file=out)
    print(f"assignments {res.assignments_evaluated}", file=out)
    print(f"max_makespan {fmt(res.exact_max_makespan)} via {'>'.join(map(str, res.argmax.order))}", file=out)
    for k, (v, a) in enumerate(zip(res.max_idle, res.argmax_idle), 1):
        print(f"max_idle_{k} {fmt(v)} via {'>'.join(map(str, a.order))}", file=out)
    if args.csv:
        if len(jobs) > args.limit_n:
            raise UsageError("per-assignment CSV needs n <= --limit-n")
        with open(args.csv, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["rank", "assignment", "makespan"])
            for rank, prio, ms in oracle.iter_makespans(jobs, plat):
                w.writerow([rank, ">".join(map(str, prio.order)), fmt(ms)])
    return 0


# -- transition -----------------------------------------------------------

def _rem_jobs(doc: dict) -> Optional[tuple]:
    if "rem_jobs" not in doc:
        return None
    return tuple(protocols.RemJob(int(r["task"]), as_time(r["remaining"]), as_time(r["deadline"]),
                                  as_time(r["release"]) if "release" in r else None)
                 for r in doc["rem_jobs"])


def cmd_transition(args, out) -> int:
    doc = _load_doc(args.scenario)
    app, plat = application_from_dict(doc)
    problems = validate_application(app, plat)
    if problems:
        raise UsageError("; ".join(problems))
    fmt = _Fmt(args.places, args.exact)
    proto = {"sm": protocols.SMMSO, "am": protocols.AMMSO}[args.protocol]
    if "mcr_schedule" in doc:
        sched = [(as_time(e["time"]), int(e["target"])) for e in doc["mcr_schedule"]]
        run = protocols.run_multimode(app, plat, sched, as_time(doc.get("horizon", args.horizon or 0)),
                                      protocol=proto, initial_mode=int(doc.get("initial_mode", 0)))
        reports = list(run.reports)
        segments = run.segments
        for msg in run.rejected:
            print(f"rejected {msg}", file=out)
        print(f"boundaries {' '.join(fmt(b) for b in run.boundaries())}", file=out)
        print(f"misses {len(run.misses)}", file=out)
    else:
        sc = protocols.TransitionScenario(app, plat, int(doc["source"]), int(doc["target"]),
                                          as_time(doc.get("mcr_time", 0)), _rem_jobs(doc))
        rep = protocols.run_smmso(sc) if proto == protocols.SMMSO else protocols.run_ammso(sc)
        reports = [rep]
        segments = rep.trace
    ok = True
    for rep in reports:
        print(f"protocol {rep.protocol} M{rep.source}->M{rep.target} request {fmt(rep.mcr_time)}", file=out)
        print(f"transition_end {fmt(rep.transition_end)}", file=out)
        for tid, t in sorted(rep.enable_times.items()):
            print(f"enable t{tid} {fmt(t)} (+{fmt(t - rep.mcr_time)})", file=out)
        print(f"remjob_misses {len(rep.remjob_deadline_misses)}", file=out)
        print(f"transition_deadline_misses {len(rep.transition_deadline_misses)}", file=out)
        print(f"newmode_job_misses {len(rep.newmode_job_deadline_misses)}", file=out)
        ok = ok and rep.ok
    if args.segments:
        with open(args.segments, "w", newline="") as fh:
            fh.write(protocols.trace_to_csv(segments))
    return 0 if ok else 1


# -- experiment -----------------------------------------------------------

@dataclass
class ExperimentConfig:
    jobs: tuple = EXPERIMENT_JOBS[:7]
    m: int = 3
    grid: tuple = (1, 101, 50)  # min, max, step per CPU
    limit_n: int = 8
    samples: Optional[int] = None
    seed: int = 0
    workers: int = 1
    platforms: Optional[list] = field(default=None)

    def speed_levels(self) -> list:
        lo, hi, step = (as_time(v) for v in self.grid)
        if step <= 0 or lo <= 0 or hi < lo:
            raise UsageError("speed grid must satisfy 0 < min <= max and step > 0")
        out, v = [], lo
        while v <= hi:
            out.append(v)
            v += step
        return out

    def platform_list(self) -> list:
        if self.platforms is not None:
            return [tuple(as_time(s) for s in p) for p in self.platforms]
        return list(itertools.product(self.speed_levels(), repeat=self.m))


@dataclass(frozen=True)
class ExperimentRow:
    speeds: tuple
    lam: Fraction
    exact: Fraction
    ms1: Fraction
    ms2: Fraction
    ms3: Fraction
    oracle_mode: str

    def error(self, value: Fraction) -> Fraction:
        return (value - self.exact) / self.exact * 100

    @property
    def E1(self):
        return self.error(self.ms1)

    @property
    def E2(self):
        return self.error(self.ms2)

    @property
    def E3(self):
        return self.error(self.ms3)

    @property
    def Emin(self):
        return self.error(min(self.ms1, self.ms2, self.ms3))


def _platform_row(args) -> tuple:
    speeds, jobs, limit_n, samples, seed = args
    plat = Platform(tuple(sorted(speeds)))
    js = JobSet.of(jobs)
    if samples is not None:
        res = oracle.sampled_max(js, plat, samples, seed)
        mode = f"sampled({samples},{seed})"
    else:
        res = oracle.exact_max(js, plat, limit_n=limit_n)
        mode = "exhaustive"
    tr = bounds.unif_fjp_trace(sorted(js.times), plat)
    return (res.exact_max_makespan, tr.ms1, tr.ms2, tr.ms3, mode)


def run_experiment(cfg: ExperimentConfig) -> list:
    jobs = tuple(as_time(c) for c in cfg.jobs)
    n = len(jobs)
    if cfg.samples is None and n > cfg.limit_n:
        est = math.factorial(n)
        raise UsageError(f"exhaustive oracle on {n} jobs needs {est} schedules per platform "
                         f"(limit {cfg.limit_n}); use --samples or fewer jobs")
    plats = cfg.platform_list()
    unique = sorted({tuple(sorted(p)) for p in plats})
    tasks = [(u, jobs, cfg.limit_n, cfg.samples, cfg.seed) for u in unique]
    if cfg.workers and cfg.workers > 1:
        with ProcessPoolExecutor(max_workers=cfg.workers) as pool:
            results = dict(zip(unique, pool.map(_platform_row, tasks)))
    else:
        results = {u: _platform_row(t) for u, t in zip(unique, tasks)}
    rows = []
    for p in plats:
        exact, ms1, ms2, ms3, mode = results[tuple(sorted(p))]
        lam = bounds.lambda_pi(Platform(tuple(sorted(p))))
        rows.append(ExperimentRow(tuple(p), lam, exact, ms1, ms2, ms3, mode))
    return rows


def summarize(values: Sequence[Fraction]) -> dict:
    """Table-style summary of percentage errors (population variance)."""
    xs = [float(v) for v in values]
    q1, med, q3 = statistics.quantiles(xs, n=4, method="inclusive") if len(xs) > 1 else (xs[0],) * 3
    mean = statistics.fmean(xs)
    var = statistics.pvariance(xs)
    return {
        "min": min(xs), "Q1": q1, "median": med, "mean": mean, "Q3": q3, "max": max(xs),
        "variance": var, "SD": math.sqrt(var), "bias": mean,
        "MSE": statistics.fmean(x * x for x in xs),
    }


def experiment_csv(rows: Sequence[ExperimentRow], fmt) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["speeds", "lambda", "E1", "E2", "E3", "Emin", "exact", "ms1", "ms2", "ms3", "oracle"])
    for r in rows:
        w.writerow([" ".join(format_time(s) for s in r.speeds), fmt(r.lam), fmt(r.E1), fmt(r.E2),
                    fmt(r.E3), fmt(r.Emin), fmt(r.exact), fmt(r.ms1), fmt(r.ms2), fmt(r.ms3),
                    r.oracle_mode])
    return buf.getvalue()


def summary_csv(rows: Sequence[ExperimentRow], places: int) -> str:
    stats = {c: summarize([getattr(r, c) for r in rows]) for c in ERROR_COLUMNS}
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["statistic", *ERROR_COLUMNS])
    for s in SUMMARY_STATS:
        w.writerow([s, *(f"{stats[c][s]:.{places}f}" for c in ERROR_COLUMNS)])
    return buf.getvalue()


def cmd_experiment(args, out) -> int:
    cfg = ExperimentConfig(
        jobs=tuple(parse_times(args.jobs)) if args.jobs else (EXPERIMENT_JOBS if args.full else EXPERIMENT_JOBS[:7]),
        m=args.m,
        grid=tuple(parse_times(args.grid)),
        limit_n=args.limit_n,
        samples=args.samples,
        seed=args.seed,
        workers=args.workers,
        platforms=[parse_times(p) for p in args.platform] if args.platform else None,
    )
    if len(cfg.grid) != 3:
        raise UsageError("--grid takes min,max,step")
    fmt = _Fmt(args.places, args.exact)
    rows = run_experiment(cfg)
    table = experiment_csv(rows, fmt)
    summary = summary_csv(rows, args.places)
    if args.out:
        with open(args.out, "w", newline="") as fh:
            fh.write(table)
    else:
        out.write(table)
        out.write("\n")
    if args.summary:
        with open(args.summary, "w", newline="") as fh:
            fh.write(summary)
    out.write(summary)
    return 0


# -- parser ---------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="multimode", description=__doc__.splitlines()[0])
    sub = p.add_subparsers(dest="command", required=True)

    def common(sp):
        sp.add_argument("--places", type=int, default=6, help="decimal places (default 6)")
        sp.add_argument("--exact", action="store_true", help="print exact fractions")

    def platform(sp):
        g = sp.add_mutually_exclusive_group()
        g.add_argument("--speeds", help="comma-separated CPU speeds, slowest first")
        g.add_argument("--m", type=int, help="number of unit-speed identical CPUs")

    s = sub.add_parser("simulate", help="schedule a synchronous job set")
    s.add_argument("--jobs", required=True)
    platform(s)
    s.add_argument("--order", help="job ids by decreasing priority (default 1,2,...)")
    s.add_argument("--csv", help="write segments to this CSV file")
    common(s)
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("bounds", help="closed-form idle-instant and makespan bounds")
    s.add_argument("--flavor", choices=FLAVOR_CHOICES, required=True)
    s.add_argument("--jobs", help="processing times (priority order for FTP flavors)")
    platform(s)
    common(s)
    s.set_defaults(func=cmd_bounds)

    s = sub.add_parser("validity", help="design-time validity tests")
    s.add_argument("--app", required=True, help="application JSON")
    s.add_argument("--protocol", choices=("sm", "am", "both"), default="both")
    common(s)
    s.set_defaults(func=cmd_validity)

    s = sub.add_parser("oracle", help="maximum makespan over priority assignments")
    s.add_argument("--jobs", required=True)
    platform(s)
    g = s.add_mutually_exclusive_group()
    g.add_argument("--exhaustive", action="store_true", help="enumerate every assignment (default)")
    g.add_argument("--samples", type=int, help="number of random assignments")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--limit-n", type=int, default=8)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--csv", help="write (rank, assignment, makespan) rows here")
    common(s)
    s.set_defaults(func=cmd_oracle)

    s = sub.add_parser("transition", help="simulate a mode transition or a multi-mode run")
    s.add_argument("--scenario", required=True)
    s.add_argument("--protocol", choices=("sm", "am"), default="sm")
    s.add_argument("--horizon", help="end of a multi-mode run (if absent from the file)")
    s.add_argument("--segments", help="write execution segments to this CSV file")
    common(s)
    s.set_defaults(func=cmd_transition)

    s = sub.add_parser("experiment", help="bound accuracy against the exact maximum makespan")
    s.add_argument("--jobs", help="processing times (default: first 7 of the 10 built-in jobs)")
    s.add_argument("--full", action="store_true", help="use all 10 default jobs")
    s.add_argument("--m", type=int, default=3)
    s.add_argument("--grid", default="1,101,50", help="min,max,step of each CPU speed")
    s.add_argument("--platform", action="append", help="explicit speeds; repeatable, overrides --grid")
    s.add_argument("--limit-n", type=int, default=8)
    s.add_argument("--samples", type=int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--workers", type=int, default=1)
    s.add_argument("--out", help="CSV file for the per-platform rows")
    s.add_argument("--summary", help="CSV file for the summary block")
    common(s)
    s.set_defaults(func=cmd_experiment)
    return p


def main(argv: Optional[Sequence[str]] = None, out=None) -> int:
    out = out or sys.stdout
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        return args.func(args, out)
    except (UsageError, ValueError, KeyError, OSError, json.JSONDecodeError,
            oracle.OracleRefused) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

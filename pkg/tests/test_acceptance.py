"""Acceptance suite: one PASS/FAIL line per criterion.

Run under pytest (lines are printed in the terminal summary) or directly with
``python3 tests/test_acceptance.py``.
"""
import functools
import random
import sys
from fractions import Fraction as F
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from multimode import bounds, cli, oracle
from multimode.model import Application, JobSet, Mode, Platform, PriorityAssignment, Scheduler, Task
from multimode.protocols import (AMMSO, SMMSO, RemJob, TransitionScenario, run_ammso,
                                 run_multimode, run_smmso)
from multimode.simkernel import identical_idle_vector, schedule, uniform_idle_vector
from multimode.unsound import unif_fjp_ms0_naive
from multimode.validity import default_sched_test, validity_ammso, validity_smmso

from conftest import FJP_REFERENCE_JOBS, FTP_REFERENCE_JOBS, random_jobs, random_speeds, two_mode_app

CRITERIA = []
RESULTS = {}


def criterion(name):
    def wrap(fn):
        CRITERIA.append((name, fn))
        return fn
    return wrap


def order(*ids):
    return PriorityAssignment(tuple(ids))


# -- golden examples ------------------------------------------------------

@criterion("golden: uniform simulator makespans")
def golden_simulator():
    p12 = Platform((1, 2))
    assert schedule(JobSet.of([4, 6]), p12, order(1, 2)).makespan == 4
    assert schedule(JobSet.of([4, 6]), p12, order(2, 1)).makespan == F(7, 2)
    j4 = JobSet.of([4, 4, 16, 22])
    assert schedule(j4, p12, order(1, 2, 3, 4)).makespan == F(71, 4)
    assert schedule(j4, p12, order(3, 1, 2, 4)).makespan == 19
    assert schedule(JobSet.of([50, 80, 99]), Platform((1, 2, 10)), order(1, 2, 3)).makespan == 20


@criterion("golden: identical FJP idle bounds and their attainment")
def golden_identical_fjp():
    assert bounds.ident_fjp_idle_bounds(FJP_REFERENCE_JOBS, 3).values == (15, 18, 23)
    assert bounds.ident_fjp_idle_bounds_legacy(FJP_REFERENCE_JOBS, 3).values == (15, F(37, 2), 23)
    witnesses = {1: (7, 9, 10, 12, 11, 8, 1, 2, 3, 4, 5, 6),
                 2: (10, 9, 1, 2, 3, 4, 5, 6, 12, 7, 8, 11),
                 3: (7, 11, 10, 1, 2, 9, 8, 3, 5, 4, 6, 12)}
    for k, prio in witnesses.items():
        res = schedule(JobSet.of(FJP_REFERENCE_JOBS), Platform.identical(3), PriorityAssignment(prio))
        assert res.idle_instants[k - 1] == (15, 18, 23)[k - 1]


@criterion("golden: identical FTP processed work")
def golden_identical_ftp():
    mat = bounds.ident_ftp_processed_work(FTP_REFERENCE_JOBS, 4)
    assert mat.at(3, 5) == 8
    assert mat.column(3) == (0, 5, 2, 7)
    assert list(bounds.ident_ftp_idle_bounds(FTP_REFERENCE_JOBS, 4)) == identical_idle_vector(FTP_REFERENCE_JOBS, 4)


@criterion("golden: uniform FJP bounds and the unsound naive formula")
def golden_uniform_fjp():
    plat = Platform((1, 2, 10))
    assert unif_fjp_ms0_naive([50, 80, 99], plat) == F(199, 10) < 20
    assert bounds.unif_fjp_ms1([50, 80, 99], plat) == F(2667, 130)
    assert bounds.unif_fjp_ms_min([50, 80, 99], plat) >= 20


@criterion("golden: uniform FTP idle table")
def golden_uniform_ftp():
    final = bounds.unif_ftp_idle_table([4, 6], Platform((1, 2))).final.values
    assert final == (2, 4) == tuple(uniform_idle_vector([4, 6], [1, 2]))


@criterion("golden: lambda platform parameter")
def golden_lambda():
    assert bounds.lambda_pi(Platform((1, 500, 1000))) == F(501, 1000)
    assert bounds.lambda_pi(Platform((500, 500, 600))) == F(5, 3)
    assert bounds.lambda_pi(Platform.identical(4)) == 3


@criterion("golden: SM-MSO and AM-MSO example transition")
def golden_protocols():
    rem = tuple(RemJob(t, r, 240, 120) for t, r in zip((1, 2, 3, 4), (30, 10, 40, 60)))
    sc = TransitionScenario(two_mode_app(), Platform.identical(2), 0, 1, 130, rem)
    sm = run_smmso(sc)
    assert sm.transition_end == 220 and sm.transition_length == 90
    am = run_ammso(sc)
    assert min(am.enable_times.values()) == 180
    assert max(am.enable_times.values()) == 220 and am.transition_end == 220


# -- property suites ------------------------------------------------------

@functools.lru_cache(maxsize=1)
def dominance_corpus():
    """300 instances with n <= 7, m <= 4 and their exhaustive oracle results."""
    rng = random.Random(2024)
    out = []
    for _ in range(300):
        m = rng.randint(1, 4)
        n = rng.randint(1, 7)
        plat = random_speeds(rng, m, identical=rng.random() < 0.25)
        jobs = JobSet.of(random_jobs(rng, n))
        out.append((jobs, plat, oracle.exact_max(jobs, plat, limit_n=7)))
    return tuple(out)


def _le(a, b):
    return all(x <= y for x, y in zip(a, b))


@criterion("property: every bound dominates the exhaustive oracle")
def dominance():
    for jobs, plat, res in dominance_corpus():
        cs = sorted(jobs.times)
        tr = bounds.unif_fjp_trace(cs, plat)
        assert _le(res.max_idle, bounds.unif_fjp_idle_upper(cs, plat).values)
        assert _le(tr.minidle, res.min_idle)
        for ms in (tr.ms1, tr.ms2, tr.ms3, tr.ms_min):
            assert ms >= res.exact_max_makespan
        if plat.is_identical:
            s = plat.speeds[0]
            scaled = [c / s for c in cs]
            assert _le(res.max_idle, bounds.ident_fjp_idle_bounds(scaled, plat.m).values)
            assert _le(res.max_idle, bounds.ident_fjp_idle_bounds_legacy(scaled, plat.m).values)
            assert bounds.ident_fjp_makespan(scaled, plat.m) >= res.exact_max_makespan
        for prio in {res.argmax, *res.argmax_idle}:
            ordered = prio.ordered(jobs)
            sim = schedule(jobs, plat, prio).idle_instants
            assert _le(sim, bounds.unif_ftp_idle_table(ordered, plat).final.values)
            if plat.is_identical:
                scaled = [c / plat.speeds[0] for c in ordered]
                assert _le(sim, bounds.ident_ftp_idle_bounds(scaled, plat.m).values)


@criterion("property: competitive ratios of the makespan bounds")
def competitiveness():
    for jobs, plat, res in dominance_corpus():
        cs = sorted(jobs.times)
        exact = res.exact_max_makespan
        if plat.is_identical:
            scaled = [c / plat.speeds[0] for c in cs]
            assert bounds.ident_fjp_makespan(scaled, plat.m) <= 2 * exact
        ratio = sum(plat.speeds) / plat.speeds[-1]
        assert bounds.unif_fjp_ms1(cs, plat) <= ratio * exact


def _shrink(rng, times):
    return [c * F(rng.randint(0, 8), 8) for c in times]


def _random_transition(rng):
    m = rng.randint(1, 3)
    n = rng.randint(m, m + 3)
    plat = random_speeds(rng, m, identical=rng.random() < 0.3)
    sch = (Scheduler("FTP", tuple(rng.sample(range(1, n + 1), n))) if rng.random() < 0.5
           else Scheduler("FJP", rule="EDF"))
    old = Mode(tuple(Task(rng.randint(1, 10), 40, 40, k) for k in range(1, n + 1)), sch)
    newn = rng.randint(1, 4)
    new = Mode(tuple(Task(rng.randint(1, 6), 30, 30, k) for k in range(1, newn + 1)),
               Scheduler("FJP", rule="EDF"))
    app = Application((old, new), {(0, 1): (60,) * newn, (1, 0): (60,) * n})
    critical = TransitionScenario(app, plat, 0, 1, 0)
    rem = tuple(RemJob(t.id, t.wcet * F(rng.randint(0, 8), 8), 40, 0) for t in old.tasks)
    return critical, TransitionScenario(app, plat, 0, 1, 0, rem)


@criterion("property: predictability and critical rem-job set dominance")
def predictability():
    rng = random.Random(77)
    for _ in range(300):
        m = rng.randint(1, 4)
        plat = random_speeds(rng, m, identical=rng.random() < 0.3)
        full = random_jobs(rng, rng.randint(1, 8))
        small = _shrink(rng, full)
        prio = PriorityAssignment(tuple(rng.sample(range(1, len(full) + 1), len(full))))
        a = schedule(JobSet.of(full), plat, prio)
        b = schedule(JobSet.of(small), plat, prio)
        assert all(b.start[j] <= a.start[j] and b.completion[j] <= a.completion[j] for j in a.start)
        assert _le(b.idle_instants, a.idle_instants)
        assert _le(b.idle_instants, bounds.unif_fjp_idle_upper(sorted(full), plat).values)
        assert _le(b.idle_instants, bounds.unif_ftp_idle_table(prio.ordered(JobSet.of(full)), plat).final.values)

        critical, partial = _random_transition(rng)
        for run in (run_smmso, run_ammso):
            c, p = run(critical), run(partial)
            assert p.transition_end <= c.transition_end
            assert all(p.enable_times[k] <= c.enable_times[k] for k in c.enable_times)


@criterion("property: uniform CPUs idle from slowest to fastest")
def staircase():
    rng = random.Random(91)
    for _ in range(500):
        m = rng.randint(1, 5)
        plat = random_speeds(rng, m)
        jobs = JobSet.of(random_jobs(rng, rng.randint(1, 9)))
        prio = PriorityAssignment(tuple(rng.sample(jobs.ids, len(jobs))))
        rel = schedule(jobs, plat, prio).cpu_release_times()
        assert rel == sorted(rel)


PERIODS = (10, 20, 40)


def _dm_density_test(m, tasks):
    dens = [t.density for t in tasks]
    return max(dens) <= 1 and sum(dens) <= F(m, 2) * (1 - max(dens)) + max(dens)


def _random_mode(rng, plat, kind):
    for _ in range(200):
        n = rng.randint(plat.m, plat.m + 3)
        tasks = []
        for k in range(1, n + 1):
            period = rng.choice(PERIODS)
            deadline = rng.choice([period, period * 3 // 4, period // 2])
            wcet = min(F(rng.randint(1, 8 * deadline), 16) * plat.speeds[0],
                       deadline * plat.speeds[-1])
            tasks.append(Task(wcet, deadline, period, k))
        tasks = tuple(tasks)
        if kind == "EDF":
            sch = Scheduler("FJP", rule="EDF")
            ok = default_sched_test(plat, sch, tasks)
        else:
            s = plat.speeds[0]
            ok = _dm_density_test(plat.m, [Task(t.wcet / s, t.deadline, t.period, t.id) for t in tasks])
            sch = Scheduler("FTP", tuple(t.id for t in sorted(tasks, key=lambda t: (t.deadline, t.id))))
        if ok:
            return Mode(tasks, sch)
    return None


def _random_valid_app(rng, protocol):
    while True:
        m = rng.randint(1, 4)
        identical = rng.random() < 0.4
        kinds = ["EDF", "EDF"]
        if protocol == SMMSO and identical:
            kinds = [rng.choice(["EDF", "FTP"]) for _ in kinds]
        plat = (Platform.identical(m, F(rng.randint(2, 8), 2)) if identical
                else Platform(tuple(sorted(F(rng.randint(2, 20), 2) for _ in range(m)))))
        modes = [_random_mode(rng, plat, k) for k in kinds]
        if None in modes:
            continue
        tds = {(0, 1): tuple(rng.randint(10, 80) for _ in modes[1].tasks),
               (1, 0): tuple(rng.randint(10, 80) for _ in modes[0].tasks)}
        app = Application(tuple(modes), tds)
        check = validity_smmso if protocol == SMMSO else validity_ammso
        if check(app, plat).valid:
            return app, plat


def _random_requests(rng, app):
    t, cur, sched = F(0), 0, []
    for _ in range(rng.randint(1, 2)):
        t += F(rng.randint(1, 160), 4)
        cur = 1 - cur
        sched.append((t, cur))
        t += 80  # past the largest transition deadline
    salt = rng.getrandbits(32)

    def exec_time(mode, task, seq):
        r = random.Random(hash((salt, mode, task, seq)))
        return app.modes[mode].task(task).wcet * F(r.randint(0, 8), 8)
    return sched, t, exec_time


def _soundness(protocol, seed):
    rng = random.Random(seed)
    for _ in range(100):
        app, plat = _random_valid_app(rng, protocol)
        for _ in range(50):
            sched, horizon, exec_time = _random_requests(rng, app)
            run = run_multimode(app, plat, sched, horizon, protocol=protocol, exec_scale=exec_time)
            assert run.misses == ()
            assert all(r.transition_deadline_misses == () for r in run.reports)


@criterion("property: SM-MSO validity is sound")
def soundness_smmso():
    _soundness(SMMSO, 1)


@criterion("property: AM-MSO validity is sound")
def soundness_ammso():
    _soundness(AMMSO, 2)


# -- scaled replication ---------------------------------------------------

@criterion("replication: 7 jobs on 27 three-CPU platforms")
def replication():
    rows = cli.run_experiment(cli.ExperimentConfig())
    assert len(rows) == 27
    assert all(r.oracle_mode == "exhaustive" for r in rows)
    for r in rows:
        assert min(r.E1, r.E2, r.E3) >= 0
        assert r.Emin == min(r.E1, r.E2, r.E3)
    text = cli.summary_csv(rows, 6)
    assert [line.split(",")[0] for line in text.splitlines()[1:]] == list(cli.SUMMARY_STATS)
    mean = cli.summarize([r.Emin for r in rows])["mean"]
    assert 0 <= mean <= 60


def _run(fn):
    try:
        fn()
    except AssertionError as exc:
        return False, str(exc) or "assertion failed"
    return True, ""


@pytest.mark.parametrize("name, fn", CRITERIA, ids=[c[0] for c in CRITERIA])
def test_criterion(name, fn):
    ok, detail = _run(fn)
    RESULTS[name] = (ok, detail)
    assert ok, detail


if __name__ == "__main__":
    failed = 0
    for name, fn in CRITERIA:
        ok, detail = _run(fn)
        failed += not ok
        print(f"{'PASS' if ok else 'FAIL'}  {name}" + (f"  ({detail})" if detail else ""))
    sys.exit(1 if failed else 0)

"""Design-time validity checks for the two mode-change protocols.

SM-MSO is valid when, for every source mode, an upper bound on the time needed
to drain its worst-case rem-jobs never exceeds the smallest transition deadline
into any other mode. AM-MSO replays its enablement rule at upper bounds on the
successive idle instants of those rem-jobs.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional, Protocol, Sequence

from . import bounds
from .model import FJP, FJP_RULES, FTP, Application, Mode, Platform, Scheduler, Task

PASS = "pass"
FAIL = "fail"
UNSUPPORTED = "unsupported"


class SchedTest(Protocol):
    """Sufficient schedulability test: True must imply the tasks meet all deadlines
    when scheduled by ``scheduler`` on CPUs with the given speeds."""

    def __call__(self, cpus: Sequence[Fraction], scheduler: Scheduler,
                 tasks: Sequence[Task]) -> bool: ...


def default_sched_test(cpus, scheduler: Scheduler, tasks: Sequence[Task]) -> bool:
    """Density test for global scheduling on (possibly uniform) CPUs.

    Accepts iff total density <= total speed - lambda * max density and no
    task is denser than the fastest CPU. ``cpus`` is a sequence of speeds or a
    :class:`Platform`.
    """
    speeds = sorted(cpus.speeds if isinstance(cpus, Platform) else cpus)
    if not speeds:
        return False
    if not tasks:
        return True
    dens = [t.density for t in tasks]
    dmax = max(dens)
    lam = bounds.lambda_pi(Platform(tuple(speeds)))
    return sum(dens) <= sum(speeds) - lam * dmax and dmax <= speeds[-1]


@dataclass(frozen=True)
class PairResult:
    source: int
    target: int
    bound_name: str
    bound_value: Optional[Fraction]
    binding_deadline: Fraction
    binding_task: int
    verdict: str
    failing_task: Optional[int] = None
    enable_bounds: dict = field(default_factory=dict)

    @property
    def slack(self) -> Optional[Fraction]:
        if self.bound_value is None:
            return None
        return self.binding_deadline - self.bound_value


@dataclass(frozen=True)
class ValidityReport:
    protocol: str
    pairs: tuple

    @property
    def verdict(self) -> str:
        kinds = {p.verdict for p in self.pairs}
        if FAIL in kinds:
            return "invalid"
        if UNSUPPORTED in kinds:
            return UNSUPPORTED
        return "valid"

    @property
    def valid(self) -> bool:
        return self.verdict == "valid"


def _supported(mode: Mode) -> bool:
    sch = mode.scheduler
    return sch.kind == FTP or (sch.kind == FJP and sch.rule in FJP_RULES)


def _crit(mode: Mode, platform: Platform):
    """Critical rem-job times in the order the mode's bound expects.

    On identical CPUs of speed s the times are divided by s so the unit-speed
    formulas apply.
    """
    jobs = bounds.critical_rem_job_set(mode)
    if mode.scheduler.kind == FTP:
        jobs = bounds.critical_ftp_order(mode)
        cs = jobs.times
    else:
        cs = sorted(jobs.times)
    if platform.is_identical:
        s = platform.speeds[0]
        cs = [c / s for c in cs]
    return cs


def makespan_bound(mode: Mode, platform: Platform, uniform_fjp: str = "min") -> tuple:
    """(name, value) of the makespan bound used for rem-jobs of ``mode``."""
    cs = _crit(mode, platform)
    m = platform.m
    if platform.is_identical:
        if mode.scheduler.kind == FTP:
            return "identical-FTP", bounds.ident_ftp_idle_bounds(cs, m).makespan
        return "identical-FJP", bounds.ident_fjp_makespan(cs, m)
    if mode.scheduler.kind == FTP:
        return "uniform-FTP", bounds.unif_ftp_idle_table(cs, platform).makespan
    trace = bounds.unif_fjp_trace(cs, platform)
    if uniform_fjp == "ms1":
        return "uniform-FJP-ms1", trace.ms1
    if uniform_fjp != "min":
        raise ValueError(f"unknown uniform FJP bound {uniform_fjp!r}")
    return "uniform-FJP-min", trace.ms_min


def idle_bounds(mode: Mode, platform: Platform) -> bounds.IdleBoundVector:
    """Upper bounds on the successive idle instants of the critical rem-jobs."""
    cs = _crit(mode, platform)
    m = platform.m
    if platform.is_identical:
        if mode.scheduler.kind == FTP:
            return bounds.ident_ftp_idle_bounds(cs, m)
        return bounds.ident_fjp_idle_bounds(cs, m)
    if mode.scheduler.kind == FTP:
        return bounds.unif_ftp_idle_table(cs, platform).final
    return bounds.unif_fjp_idle_upper(cs, platform)


def validity_smmso(app: Application, platform: Platform, uniform_fjp: str = "min") -> ValidityReport:
    pairs = []
    for i, j in app.pairs():
        mode = app.modes[i]
        dmin, tid = app.min_transition_deadline(i, j)
        if not _supported(mode):
            pairs.append(PairResult(i, j, "none", None, dmin, tid, UNSUPPORTED))
            continue
        name, value = makespan_bound(mode, platform, uniform_fjp)
        ok = value <= dmin
        pairs.append(PairResult(i, j, name, value, dmin, tid, PASS if ok else FAIL,
                                None if ok else tid))
    return ValidityReport("SM-MSO", tuple(pairs))


def _ammso_pair(app: Application, platform: Platform, i: int, j: int,
                sched_test: SchedTest) -> PairResult:
    src, dst = app.modes[i], app.modes[j]
    dmin, tid_min = app.min_transition_deadline(i, j)
    if not _supported(src):
        return PairResult(i, j, "none", None, dmin, tid_min, UNSUPPORTED)
    vec = idle_bounds(src, platform)
    name = f"{vec.flavor} idle"
    deadlines = app.transition_deadlines[(i, j)]
    order = sorted(range(dst.n), key=lambda p: (deadlines[p], p))
    disabled = [dst.tasks[p] for p in order]
    dl = {dst.tasks[p].id: deadlines[p] for p in range(dst.n)}
    enabled: list[Task] = []
    when: dict = {}
    speeds = list(platform.speeds)
    for k in range(1, platform.m + 1):
        avl = speeds[:k]
        bound_k = vec.at(k)
        for task in list(disabled):
            if dl[task.id] < bound_k:
                return PairResult(i, j, name, bound_k, dl[task.id], task.id, FAIL, task.id, when)
            if sched_test(avl, dst.scheduler, enabled + [task]):
                enabled.append(task)
                disabled.remove(task)
                when[task.id] = bound_k
    for task in disabled:
        when[task.id] = vec.makespan
    return PairResult(i, j, name, vec.makespan, dmin, tid_min, PASS, None, when)


def validity_ammso(app: Application, platform: Platform,
                   sched_test: Optional[SchedTest] = None) -> ValidityReport:
    test = sched_test or default_sched_test
    pairs = tuple(_ammso_pair(app, platform, i, j, test) for i, j in app.pairs())
    return ValidityReport("AM-MSO", pairs)

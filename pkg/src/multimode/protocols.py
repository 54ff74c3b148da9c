"""Run-time behaviour of the synchronous (SM-MSO) and asynchronous (AM-MSO)
mode-change protocols.

A single event-driven engine executes periodic steady-mode jobs, turns the
active jobs into rem-jobs when a mode change is requested, and enables the
tasks of the target mode according to the chosen protocol. Rem-jobs always
outrank new-mode jobs; inside each layer the owning mode's scheduler decides.
Identical platforms use weakly work-conserving dispatch (a job keeps its CPU
until preempted), uniform platforms the strongly work-conserving rule (k-th
priority job on the k-th fastest CPU).
"""
from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Optional, Sequence, Union

from .model import FJP, FTP, Application, Mode, Platform, Task, as_time, format_time
from .validity import SchedTest, default_sched_test

SMMSO = "SM-MSO"
AMMSO = "AM-MSO"
PROTOCOLS = (SMMSO, AMMSO)

ZERO = Fraction(0)

ScanOrder = Union[Sequence[int], Callable[[Mode, tuple], Sequence[int]], None]
ExecTime = Union[Fraction, int, str, Callable[[int, int, int], Fraction], None]


@dataclass(frozen=True)
class RemJob:
    """A job still pending when a mode change is requested."""

    task: int
    remaining: Fraction
    deadline: Fraction
    release: Optional[Fraction] = None

    def __post_init__(self):
        object.__setattr__(self, "remaining", as_time(self.remaining))
        object.__setattr__(self, "deadline", as_time(self.deadline))
        if self.release is not None:
            object.__setattr__(self, "release", as_time(self.release))


@dataclass(frozen=True)
class TransitionScenario:
    app: Application
    platform: Platform
    source: int
    target: int
    mcr_time: Fraction = ZERO
    rem_jobs: Optional[tuple] = None

    def __post_init__(self):
        object.__setattr__(self, "mcr_time", as_time(self.mcr_time))
        if self.rem_jobs is not None:
            object.__setattr__(self, "rem_jobs", tuple(self.rem_jobs))

    def effective_rem_jobs(self) -> tuple:
        """The explicit rem-jobs, or one full-WCET job per source task released at the request."""
        if self.rem_jobs is not None:
            return self.rem_jobs
        mode = self.app.modes[self.source]
        return tuple(RemJob(t.id, t.wcet, self.mcr_time + t.deadline, self.mcr_time)
                     for t in mode.tasks)

    def violations(self) -> list[str]:
        out = []
        mode = self.app.modes[self.source]
        for rj in self.effective_rem_jobs():
            try:
                task = mode.task(rj.task)
            except KeyError:
                out.append(f"rem-job of unknown task {rj.task}")
                continue
            if rj.remaining < 0 or rj.remaining > task.wcet:
                out.append(f"rem-job of task {rj.task}: remaining time outside [0, C]")
            if rj.deadline < self.mcr_time:
                out.append(f"rem-job of task {rj.task}: deadline before the request")
        if self.source == self.target:
            out.append("source and target modes coincide")
        return out


@dataclass(frozen=True)
class Miss:
    job: str
    deadline: Fraction
    finish: Optional[Fraction]  # None: still unfinished when the run stopped


@dataclass(frozen=True)
class TraceSegment:
    job: str
    cpu: int
    start: Fraction
    end: Fraction


def trace_to_csv(segments: Sequence[TraceSegment]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["job", "cpu", "start", "end"])
    for s in segments:
        w.writerow([s.job, s.cpu, format_time(s.start), format_time(s.end)])
    return buf.getvalue()


@dataclass(frozen=True)
class TransitionReport:
    """Outcome of one mode transition. All instants are absolute."""

    protocol: str
    source: int
    target: int
    mcr_time: Fraction
    enable_times: dict
    transition_end: Optional[Fraction]
    remjob_deadline_misses: tuple
    transition_deadline_misses: tuple
    newmode_job_deadline_misses: tuple
    trace: tuple = ()

    @property
    def enable_offsets(self) -> dict:
        """Enable instants measured from the mode-change request."""
        return {k: v - self.mcr_time for k, v in self.enable_times.items()}

    @property
    def transition_length(self) -> Optional[Fraction]:
        if self.transition_end is None:
            return None
        return self.transition_end - self.mcr_time

    @property
    def ok(self) -> bool:
        return not (self.remjob_deadline_misses or self.transition_deadline_misses
                    or self.newmode_job_deadline_misses)


@dataclass(frozen=True)
class Event:
    time: Fraction
    kind: str  # release | mcr | rejected | enable | enter | complete
    detail: str


@dataclass(frozen=True)
class MultimodeRun:
    segments: tuple
    events: tuple
    reports: tuple
    misses: tuple
    rejected: tuple
    final_mode: int

    def boundaries(self, until: Optional[Fraction] = None) -> list:
        """Instants at which jobs are released, changes are requested or modes entered."""
        kinds = {"release", "mcr", "enable", "enter"}
        return sorted({e.time for e in self.events
                       if e.kind in kinds and (until is None or e.time <= until)})


def _job_name(mode: int, task: int, seq: int) -> str:
    if seq < 0:
        return f"M{mode}.t{task}.rem{-seq}"
    return f"M{mode}.t{task}.{seq}"


class _Job:
    __slots__ = ("mode", "task", "seq", "release", "deadline", "remaining", "key", "rem", "name")

    def __init__(self, mode, task, seq, release, deadline, remaining, key):
        self.mode, self.task, self.seq = mode, task, seq
        self.release, self.deadline, self.remaining = release, deadline, remaining
        self.key = key
        self.rem = False
        self.name = _job_name(mode, task, seq)

    def sort_key(self):
        return (0 if self.rem else 1,) + self.key


def _priority_key(mode: Mode, task: int, release: Fraction, deadline: Fraction, seq: int) -> tuple:
    sch = mode.scheduler
    if sch.kind == FTP:
        return (mode.ftp_rank()[task], release, seq)
    if sch.kind == FJP and sch.rule == "EDF":
        return (deadline, task, seq)
    if sch.kind == FJP and sch.rule == "FIFO":
        return (release, task, seq)
    raise ValueError(f"no run-time semantics for scheduler {sch.kind}/{sch.rule}")


def default_scan_order(mode: Mode, deadlines: tuple) -> list:
    """Tasks by non-decreasing transition deadline, ties by position in the mode."""
    pos = sorted(range(mode.n), key=lambda p: (deadlines[p], p))
    return [mode.tasks[p].id for p in pos]


@dataclass
class _Transition:
    protocol: str
    source: int
    target: int
    mcr_time: Fraction
    order: list
    disabled: list
    enabled: list = field(default_factory=list)
    enable_times: dict = field(default_factory=dict)
    avl: int = 0
    rem_misses: list = field(default_factory=list)
    new_misses: list = field(default_factory=list)
    end: Optional[Fraction] = None


class _Engine:
    def __init__(self, app: Application, platform: Platform, protocol: str,
                 sched_test: Optional[SchedTest] = None, scan_order: ScanOrder = None,
                 exec_time: ExecTime = None):
        if protocol not in PROTOCOLS:
            raise ValueError(f"unknown protocol {protocol!r}")
        speeds = list(platform.speeds)
        if speeds != sorted(speeds):
            raise ValueError("platform speeds must be non-decreasing")
        for mode in app.modes:
            if mode.n:
                t = mode.tasks[0]
                _priority_key(mode, t.id, ZERO, t.deadline, 0)
        self.app = app
        self.speeds = speeds
        self.m = len(speeds)
        self.identical = platform.is_identical
        self.protocol = protocol
        self.sched_test = sched_test or default_sched_test
        self.scan_order = scan_order
        self.exec_time = exec_time
        self.t = ZERO
        self.mode: Optional[int] = None
        self.active: list[_Job] = []
        self.cpu_of: dict = {}
        self.open_seg: dict = {}
        self.segments: list[TraceSegment] = []
        self.events: list[Event] = []
        self.misses: list[Miss] = []
        self.rejected: list[str] = []
        self.releases: dict = {}  # task id -> [next release, next seq]; tasks of self.release_mode
        self.release_mode: Optional[int] = None
        self.release_until: Optional[Fraction] = None
        self.until: Optional[Fraction] = None
        self.pending_mcr: list = []
        self.trans: Optional[_Transition] = None
        self.reports: list[TransitionReport] = []
        self.stop_at_transition_end = False
        self.post_window: Optional[Fraction] = None

    # -- job bookkeeping --------------------------------------------------

    def _exec(self, mode: int, task: Task, seq: int) -> Fraction:
        e = self.exec_time
        if e is None:
            return task.wcet
        if callable(e):
            val = as_time(e(mode, task.id, seq))
        else:
            val = as_time(e) * task.wcet
        if val < 0 or val > task.wcet:
            raise ValueError(f"execution time {val} of task {task.id} outside [0, C]")
        return val

    def _enable(self, task_id: int) -> None:
        self.releases[task_id] = [self.t, 1]

    def _release_due(self) -> bool:
        if self.release_mode is None:
            return False
        if self.release_until is not None and self.t > self.release_until:
            return False
        mode = self.app.modes[self.release_mode]
        changed = False
        for tid, slot in self.releases.items():
            if slot[0] == self.t:
                task = mode.task(tid)
                seq = slot[1]
                d = self.t + task.deadline
                job = _Job(self.release_mode, tid, seq, self.t, d,
                           self._exec(self.release_mode, task, seq),
                           _priority_key(mode, tid, self.t, d, seq))
                self.active.append(job)
                self.events.append(Event(self.t, "release", job.name))
                slot[0] = self.t + task.period
                slot[1] = seq + 1
                changed = True
        return changed

    def _record_finish(self, job: _Job) -> None:
        self.events.append(Event(self.t, "complete", job.name))
        if self.t > job.deadline:
            miss = Miss(job.name, job.deadline, self.t)
            self._file_miss(job, miss)

    def _file_miss(self, job: _Job, miss: Miss) -> None:
        self.misses.append(miss)
        tr = self.trans
        if tr is not None:
            if job.rem:
                tr.rem_misses.append(miss)
            elif job.mode == tr.target:
                tr.new_misses.append(miss)

    # -- protocol hooks ---------------------------------------------------

    def _rem_count(self) -> int:
        return sum(1 for j in self.active if j.rem)

    def _start_transition(self, target: int) -> None:
        source = self.mode
        for j in self.active:
            j.rem = True
        self.releases = {}
        self.release_mode = None
        mode = self.app.modes[target]
        deadlines = self.app.transition_deadlines[(source, target)]
        order = self._order(mode, deadlines)
        self.trans = _Transition(self.protocol, source, target, self.t, order, list(order))
        self.events.append(Event(self.t, "mcr", f"M{source}->M{target}"))
        # CPUs already idle at the request count as freed at that instant
        if self._rem_count() < self.m:
            self._on_rem_completion()

    def _order(self, mode: Mode, deadlines: tuple) -> list:
        so = self.scan_order
        if so is None:
            order = default_scan_order(mode, deadlines)
        elif callable(so):
            order = list(so(mode, deadlines))
        else:
            order = list(so)
        if sorted(order) != sorted(t.id for t in mode.tasks):
            raise ValueError("scan order must list every target task exactly once")
        return order

    def _mcr(self, target: int) -> None:
        tr = self.trans
        if tr is None:
            if target == self.mode:
                self.rejected.append(f"t={format_time(self.t)}: already in mode {target}")
                self.events.append(Event(self.t, "rejected", f"M{target}"))
                return
            self._start_transition(target)
            return
        if self.protocol == AMMSO and tr.enabled:
            self.rejected.append(
                f"t={format_time(self.t)}: request for mode {target} during an AM-MSO "
                f"transition after tasks of mode {tr.target} were enabled")
            self.events.append(Event(self.t, "rejected", f"M{target}"))
            return
        # retarget the pending enablement
        mode = self.app.modes[target]
        deadlines = self.app.transition_deadlines[(tr.source, target)]
        tr.target = target
        tr.order = self._order(mode, deadlines)
        tr.disabled = list(tr.order)
        self.events.append(Event(self.t, "mcr", f"M{tr.source}->M{target}"))

    def _on_rem_completion(self) -> None:
        tr = self.trans
        r = self._rem_count()
        if r == 0:
            self._finish_transition()
            return
        if self.protocol != AMMSO:
            return
        if r < self.m:
            tr.avl = max(tr.avl, self.m - r)
        if tr.avl == 0:
            return
        cpus = tuple(self.speeds[: tr.avl])
        mode = self.app.modes[tr.target]
        sch = mode.scheduler
        for tid in list(tr.disabled):
            trial = tuple(mode.task(x) for x in tr.enabled + [tid])
            if self.sched_test(cpus, sch, trial):
                self._enable_new(tid)

    def _enable_new(self, tid: int) -> None:
        tr = self.trans
        tr.disabled.remove(tid)
        tr.enabled.append(tid)
        tr.enable_times[tid] = self.t
        if self.release_mode != tr.target:
            self.release_mode = tr.target
            self.releases = {}
        self._enable(tid)
        self.events.append(Event(self.t, "enable", f"M{tr.target}.t{tid}"))

    def _finish_transition(self) -> None:
        tr = self.trans
        for tid in list(tr.disabled):
            self._enable_new(tid)
        tr.end = self.t
        self.mode = tr.target
        self.events.append(Event(self.t, "enter", f"M{tr.target}"))
        if self.stop_at_transition_end:
            self.until = self.t
        elif self.post_window is not None:
            self.release_until = self.t + self.post_window

    def _close_report(self) -> None:
        tr = self.trans
        if tr is None:
            return
        trans_miss = []
        for tid in tr.order:
            when = tr.enable_times.get(tid)
            limit = tr.mcr_time + self.app.transition_deadline(tr.source, tr.target, tid)
            if when is None:
                if self.t > limit:
                    trans_miss.append(Miss(f"M{tr.target}.t{tid}", limit, None))
            elif when > limit:
                trans_miss.append(Miss(f"M{tr.target}.t{tid}", limit, when))
        self.reports.append(TransitionReport(
            protocol=tr.protocol, source=tr.source, target=tr.target, mcr_time=tr.mcr_time,
            enable_times=dict(tr.enable_times), transition_end=tr.end,
            remjob_deadline_misses=tuple(tr.rem_misses),
            transition_deadline_misses=tuple(trans_miss),
            newmode_job_deadline_misses=tuple(tr.new_misses) if tr.protocol == AMMSO else (),
            trace=tuple(s for s in self.segments if s.end > tr.mcr_time),
        ))
        self.trans = None

    # -- time advance -----------------------------------------------------

    def _settle(self) -> None:
        while True:
            changed = False
            done = [j for j in self.active if j.remaining == 0]
            if done:
                changed = True
                rem_done = False
                for j in done:
                    self.active.remove(j)
                    self._record_finish(j)
                    rem_done = rem_done or j.rem
                if rem_done and self.trans is not None and self.trans.end is None:
                    self._on_rem_completion()
            if self._release_due():
                changed = True
            while self.pending_mcr and self.pending_mcr[0][0] == self.t:
                _, target = self.pending_mcr.pop(0)
                if self.trans is not None and self.trans.end is not None:
                    self._close_report()
                self._mcr(target)
                changed = True
            if not changed:
                break
        self._dispatch()

    def _dispatch(self) -> None:
        ready = sorted(self.active, key=_Job.sort_key)[: self.m]
        if self.identical:
            assign = {}
            taken = set()
            for j in ready:
                cpu = self.cpu_of.get(j.name)
                if cpu is not None:
                    assign[j.name] = cpu
                    taken.add(cpu)
            free = [c for c in range(self.m, 0, -1) if c not in taken]
            for j in ready:
                if j.name not in assign:
                    assign[j.name] = free.pop(0)
        else:
            assign = {j.name: self.m - r for r, j in enumerate(ready)}
        for name, (cpu, start) in list(self.open_seg.items()):
            if assign.get(name) != cpu:
                if self.t > start:
                    self.segments.append(TraceSegment(name, cpu, start, self.t))
                del self.open_seg[name]
        for name, cpu in assign.items():
            if name not in self.open_seg:
                self.open_seg[name] = (cpu, self.t)
        self.cpu_of = assign
        self.running = ready

    def _next_time(self) -> Optional[Fraction]:
        cands = []
        for j in self.running:
            cands.append(self.t + j.remaining / self.speeds[self.cpu_of[j.name] - 1])
        if self.release_mode is not None and self.releases:
            nr = min(slot[0] for slot in self.releases.values())
            if self.release_until is None or nr <= self.release_until:
                cands.append(nr)
        if self.pending_mcr:
            cands.append(self.pending_mcr[0][0])
        if self.until is not None:
            cands = [c for c in cands if c <= self.until]
            if self.until > self.t:
                cands.append(self.until)
        return min(cands) if cands else None

    def run(self) -> None:
        self.running = []
        while True:
            self._settle()
            if self.until is not None and self.t >= self.until:
                break
            nxt = self._next_time()
            if nxt is None:
                break
            dt = nxt - self.t
            for j in self.running:
                j.remaining -= self.speeds[self.cpu_of[j.name] - 1] * dt
            self.t = nxt
        for name, (cpu, start) in self.open_seg.items():
            if self.t > start:
                self.segments.append(TraceSegment(name, cpu, start, self.t))
        self.open_seg = {}
        for j in self.active:
            if j.deadline <= self.t:
                self._file_miss(j, Miss(j.name, j.deadline, None))
        self._close_report()


def _scenario_engine(sc: TransitionScenario, protocol: str, sched_test, scan_order,
                     post_window) -> _Engine:
    bad = sc.violations()
    if bad:
        raise ValueError("; ".join(bad))
    eng = _Engine(sc.app, sc.platform, protocol, sched_test, scan_order)
    eng.t = sc.mcr_time
    eng.mode = sc.source
    src = sc.app.modes[sc.source]
    for k, rj in enumerate(sc.effective_rem_jobs(), start=1):
        release = rj.release if rj.release is not None else rj.deadline - src.task(rj.task).deadline
        job = _Job(sc.source, rj.task, -k, release, rj.deadline, rj.remaining,
                   _priority_key(src, rj.task, release, rj.deadline, -k))
        eng.active.append(job)
    eng.pending_mcr = [(sc.mcr_time, sc.target)]
    if post_window is None:
        eng.stop_at_transition_end = True
    else:
        eng.post_window = as_time(post_window)
    return eng


def run_smmso(sc: TransitionScenario) -> TransitionReport:
    """Drain the rem-jobs with the old scheduler, then enable every target task at once."""
    eng = _scenario_engine(sc, SMMSO, None, None, None)
    eng.run()
    return eng.reports[-1]


def run_ammso(sc: TransitionScenario, sched_test: Optional[SchedTest] = None,
              scan_order: ScanOrder = None, post_window=None) -> TransitionReport:
    """Enable target tasks as CPUs free up, as long as ``sched_test`` accepts them.

    New-mode jobs keep being released for ``post_window`` after the transition
    (default: the largest target period) so that their deadlines are checked.
    """
    if post_window is None:
        post_window = max(t.period for t in sc.app.modes[sc.target].tasks)
    eng = _scenario_engine(sc, AMMSO, sched_test, scan_order, post_window)
    eng.run()
    return eng.reports[-1]


def run_multimode(app: Application, platform: Platform, mcr_schedule: Sequence,
                  horizon, protocol: str = SMMSO, sched_test: Optional[SchedTest] = None,
                  exec_scale: ExecTime = None, initial_mode: int = 0,
                  scan_order: ScanOrder = None) -> MultimodeRun:
    """Execute the application from ``initial_mode`` at time 0 up to ``horizon``.

    ``mcr_schedule`` lists (time, target mode) pairs. ``exec_scale`` is either a
    factor in [0, 1] applied to every WCET or a callable (mode, task id, job
    number) returning the execution time of that job.
    """
    horizon = as_time(horizon)
    eng = _Engine(app, platform, protocol, sched_test, scan_order, exec_scale)
    eng.mode = initial_mode
    eng.release_mode = initial_mode
    for t in app.modes[initial_mode].tasks:
        eng._enable(t.id)
    eng.events.append(Event(ZERO, "enter", f"M{initial_mode}"))
    eng.pending_mcr = sorted(((as_time(t), int(j)) for t, j in mcr_schedule), key=lambda p: p[0])
    eng.until = horizon
    eng.release_until = horizon
    eng.run()
    return MultimodeRun(
        segments=tuple(sorted(eng.segments, key=lambda s: (s.start, -s.cpu))),
        events=tuple(eng.events),
        reports=tuple(eng.reports),
        misses=tuple(eng.misses),
        rejected=tuple(eng.rejected),
        final_mode=eng.mode,
    )

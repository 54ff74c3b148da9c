"""Schedules of synchronous job sets under global fixed-job-priority scheduling.

Two kernels are provided:

* :func:`schedule_identical` - weakly work-conserving dispatch on ``m`` unit-speed
  CPUs: whenever CPUs are free, the highest-priority waiting job goes to the free
  CPU with the highest index. Synchronous jobs never migrate.
* :func:`schedule_uniform` - strongly work-conserving dispatch on a uniform
  platform: at every instant the k-th highest-priority active job runs on the
  k-th fastest CPU. Jobs migrate upward when faster CPUs free up.

Both are event driven; all arithmetic is exact.
"""
from __future__ import annotations

import csv
import heapq
import io
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from .model import JobSet, Platform, PriorityAssignment, format_time

ZERO = Fraction(0)


@dataclass(frozen=True)
class Segment:
    job: int
    cpu: int  # 1-based, CPU 1 is the slowest
    start: Fraction
    end: Fraction


@dataclass(frozen=True)
class ScheduleResult:
    completion: dict
    start: dict
    idle_instants: tuple
    makespan: Fraction
    segments: tuple
    speeds: tuple

    def cpu_release_times(self) -> list[Fraction]:
        """Per CPU (1..m): the instant after which the CPU never runs again."""
        last = [ZERO] * len(self.speeds)
        for seg in self.segments:
            if seg.end > last[seg.cpu - 1]:
                last[seg.cpu - 1] = seg.end
        return last

    def executed_work(self) -> Fraction:
        return sum(((s.end - s.start) * self.speeds[s.cpu - 1] for s in self.segments), ZERO)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["job", "cpu", "start", "end"])
        for s in self.segments:
            w.writerow([s.job, s.cpu, format_time(s.start), format_time(s.end)])
        return buf.getvalue()


def idle_instants(result: ScheduleResult) -> tuple:
    """k-th entry: earliest instant from which at least k CPUs stay idle."""
    return tuple(sorted(result.cpu_release_times()))


def _identical_core(cs: Sequence, m: int):
    """Event-driven weakly work-conserving dispatch of jobs listed by priority.

    Returns (starts, finishes, cpus, busy_until) indexed like ``cs``.
    """
    n = len(cs)
    starts = [None] * n
    finishes = [None] * n
    cpus = [0] * n
    busy = [0] * m
    free = list(range(m, 0, -1))  # kept sorted descending; free[0] is the highest index
    running: list = []
    t = 0
    q = 0
    while q < n:
        while q < n and free:
            cpu = free[0]
            c = cs[q]
            starts[q] = t
            cpus[q] = cpu
            if c == 0:
                finishes[q] = t
            else:
                del free[0]
                f = t + c
                finishes[q] = f
                busy[cpu - 1] = f
                heapq.heappush(running, (f, -cpu))
            q += 1
        if q == n:
            break
        f, negcpu = heapq.heappop(running)
        t = f
        freed = [-negcpu]
        while running and running[0][0] == t:
            freed.append(-heapq.heappop(running)[1])
        free = sorted(free + freed, reverse=True)
    return starts, finishes, cpus, busy


def identical_idle_vector(cs: Sequence, m: int) -> list:
    """Sorted idle instants only (fast path used by the oracle)."""
    return sorted(_identical_core(cs, m)[3])


def schedule_identical(jobs: JobSet, m: int, prio: PriorityAssignment) -> ScheduleResult:
    if m < 1:
        raise ValueError("need at least one CPU")
    order = prio.order
    cs = prio.ordered(jobs)
    starts, finishes, cpus, busy = _identical_core(cs, m)
    segs = tuple(
        Segment(order[q], cpus[q], Fraction(starts[q]), Fraction(finishes[q]))
        for q in range(len(cs)) if cs[q] > 0
    )
    segs = tuple(sorted(segs, key=lambda s: (s.start, -s.cpu)))
    idle = tuple(sorted(Fraction(b) for b in busy))
    return ScheduleResult(
        completion={order[q]: Fraction(finishes[q]) for q in range(len(cs))},
        start={order[q]: Fraction(starts[q]) for q in range(len(cs))},
        idle_instants=idle,
        makespan=idle[-1],
        segments=segs,
        speeds=(Fraction(1),) * m,
    )


def _uniform_core(cs: Sequence, speeds: Sequence, trace: bool = False):
    """Strongly work-conserving schedule of jobs listed by priority.

    Returns (starts, finishes, idle, segments). ``idle[k-1]`` is the instant CPU
    k (slowest first) becomes idle for good.
    """
    speeds = [Fraction(s) for s in speeds]
    m = len(speeds)
    n = len(cs)
    starts = [None] * n
    finishes = [None] * n
    t = ZERO
    active = []
    for q, c in enumerate(cs):
        if c == 0:
            starts[q] = finishes[q] = ZERO
        else:
            active.append([q, c])
    # CPUs m-len(active)+1.. are busy; slower ones idle from 0
    idle = [ZERO] * m
    segs = []
    open_seg = {}  # job -> [cpu, start]
    for rank, item in enumerate(active[:m]):
        starts[item[0]] = ZERO
    while active:
        k = min(m, len(active))
        dt = None
        for rank in range(k):
            q, rem = active[rank]
            d = rem / speeds[m - 1 - rank]
            if dt is None or d < dt:
                dt = d
        if trace:
            for rank in range(k):
                q = active[rank][0]
                cpu = m - rank
                cur = open_seg.get(q)
                if cur is None or cur[0] != cpu:
                    if cur is not None:
                        segs.append((q, cur[0], cur[1], t))
                    open_seg[q] = [cpu, t]
        t = t + dt
        done = []
        for rank in range(k):
            item = active[rank]
            item[1] = item[1] - speeds[m - 1 - rank] * dt
            if item[1] == 0:
                done.append(rank)
        for rank in reversed(done):
            q = active[rank][0]
            finishes[q] = t
            if trace:
                cur = open_seg.pop(q)
                segs.append((q, cur[0], cur[1], t))
            del active[rank]
        # CPUs that just lost their job: with j active jobs left, CPUs 1..m-j are idle
        left = len(active)
        for cpu in range(m - min(m, left + len(done)) + 1, m - min(m, left) + 1):
            idle[cpu - 1] = t
        for rank in range(min(m, left)):
            q = active[rank][0]
            if starts[q] is None:
                starts[q] = t
    return starts, finishes, idle, segs


def uniform_idle_vector(cs: Sequence, speeds: Sequence) -> list:
    """Idle instants only (fast path used by the oracle)."""
    return _uniform_core(cs, speeds)[2]


def schedule_uniform(jobs: JobSet, platform: Platform, prio: PriorityAssignment) -> ScheduleResult:
    speeds = platform.speeds
    if list(speeds) != sorted(speeds):
        raise ValueError("platform speeds must be non-decreasing")
    order = prio.order
    cs = prio.ordered(jobs)
    starts, finishes, idle, raw = _uniform_core(cs, speeds, trace=True)
    segs = tuple(sorted((Segment(order[q], cpu, a, b) for q, cpu, a, b in raw if b > a),
                        key=lambda s: (s.start, -s.cpu)))
    return ScheduleResult(
        completion={order[q]: finishes[q] for q in range(len(cs))},
        start={order[q]: starts[q] for q in range(len(cs))},
        idle_instants=tuple(idle),
        makespan=idle[-1] if idle else ZERO,
        segments=segs,
        speeds=tuple(speeds),
    )


def schedule(jobs: JobSet, platform: Platform, prio: PriorityAssignment) -> ScheduleResult:
    """Dispatch on platform type: identical CPUs use the weakly work-conserving kernel."""
    if platform.is_identical:
        s = platform.speeds[0]
        if s == 1:
            return schedule_identical(jobs, platform.m, prio)
        scaled = JobSet(tuple(type(j)(j.id, j.c / s) for j in jobs))
        res = schedule_identical(scaled, platform.m, prio)
        return ScheduleResult(res.completion, res.start, res.idle_instants, res.makespan,
                              res.segments, tuple(platform.speeds))
    return schedule_uniform(jobs, platform, prio)

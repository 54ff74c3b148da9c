"""Closed-form idle-instant and makespan bounds for synchronous job sets.

Job sets handed to the FJP bounds must be sorted by non-decreasing processing
time; the FTP recursions take jobs in decreasing priority order. Every bound is
computed with exact rationals.
"""
from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence, Union

from .model import Job, JobSet, Mode, Platform, as_time

ZERO = Fraction(0)

IDENT_FJP_LEGACY = "identical-FJP-legacy"
IDENT_FJP = "identical-FJP"
IDENT_FTP = "identical-FTP"
UNIF_FJP = "uniform-FJP"
UNIF_FTP = "uniform-FTP"
FLAVORS = (IDENT_FJP_LEGACY, IDENT_FJP, IDENT_FTP, UNIF_FJP, UNIF_FTP)

JobsLike = Union[JobSet, Iterable]


@dataclass(frozen=True)
class IdleBoundVector:
    """Per-k upper bounds on the idle instants; ``at(k)`` is 1-based."""

    values: tuple
    flavor: str

    def __post_init__(self):
        if self.flavor not in FLAVORS:
            raise ValueError(f"unknown flavor {self.flavor!r}")

    def __len__(self):
        return len(self.values)

    def __iter__(self):
        return iter(self.values)

    def at(self, k: int) -> Fraction:
        if not 1 <= k <= len(self.values):
            raise IndexError(k)
        return self.values[k - 1]

    @property
    def makespan(self) -> Fraction:
        return self.values[-1]


class _Unbounded:
    """The +infinity sentinel of the uniform FTP table. Only comparisons work."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNBOUNDED"

    def __eq__(self, other):
        return other is self

    def __hash__(self):
        return hash("UNBOUNDED")

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return other is self

    def __gt__(self, other):
        return other is not self

    def __ge__(self, other):
        return True


UNBOUNDED = _Unbounded()


def _times(jobs: JobsLike) -> list:
    if isinstance(jobs, JobSet):
        return jobs.times
    return [as_time(c) for c in jobs]


def _ascending(jobs: JobsLike) -> list:
    cs = _times(jobs)
    if any(a > b for a, b in zip(cs, cs[1:])):
        raise ValueError("jobs must be sorted by non-decreasing processing time")
    return cs


def _pad(cs: list, m: int) -> list:
    # zero-length jobs go first so the list stays sorted
    return [ZERO] * max(0, m - len(cs)) + cs


def _check_m(m: int) -> None:
    if m < 1:
        raise ValueError("need at least one CPU")


def _speeds(platform: Platform) -> list:
    speeds = list(platform.speeds)
    if speeds != sorted(speeds):
        raise ValueError("platform speeds must be non-decreasing")
    return speeds


# --- identical platforms, FJP ------------------------------------------------

def ident_fjp_idle_bounds(jobs: JobsLike, m: int) -> IdleBoundVector:
    """Upper bound on every idle instant, valid for any job-level priority rule.

    >>> ident_fjp_idle_bounds([2, 5, 9], 3).values
    (Fraction(2, 1), Fraction(5, 1), Fraction(9, 1))
    """
    _check_m(m)
    cs = _pad(_ascending(jobs), m)
    n = len(cs)
    if n == m:
        return IdleBoundVector(tuple(cs), IDENT_FJP)
    total = sum(cs, ZERO)
    vals = tuple((total + (k - 1) * cs[n - m + k - 1]) / m for k in range(1, m + 1))
    return IdleBoundVector(vals, IDENT_FJP)


def ident_fjp_idle_bounds_legacy(jobs: JobsLike, m: int) -> IdleBoundVector:
    """Older, looser per-k bound: the m-k+1 largest jobs are spread over the
    last m-k+1 CPUs, everything else over all m."""
    _check_m(m)
    cs = _pad(_ascending(jobs), m)
    n = len(cs)
    if n == m:
        return IdleBoundVector(tuple(cs), IDENT_FJP_LEGACY)
    total = sum(cs, ZERO)
    vals = []
    for k in range(1, m + 1):
        tail = sum(cs[n - m + k - 1:], ZERO)
        vals.append((total - tail) / m + tail / (m - k + 1))
    return IdleBoundVector(tuple(vals), IDENT_FJP_LEGACY)


def ident_fjp_makespan(jobs: JobsLike, m: int) -> Fraction:
    """All but the longest job spread evenly, then the longest job alone."""
    _check_m(m)
    cs = _pad(_ascending(jobs), m)
    if len(cs) == m:
        return cs[-1]
    return sum(cs[:-1], ZERO) / m + cs[-1]


# --- identical platforms, FTP ------------------------------------------------

@dataclass(frozen=True)
class ProcessedWorkMatrix:
    """``W[k-1][i]``: work CPU k has executed once the first i jobs are placed."""

    W: tuple

    @property
    def m(self) -> int:
        return len(self.W)

    @property
    def n(self) -> int:
        return len(self.W[0]) - 1

    def at(self, k: int, i: int) -> Fraction:
        return self.W[k - 1][i]

    def column(self, i: int) -> tuple:
        return tuple(row[i] for row in self.W)


def ident_ftp_processed_work(jobs: JobsLike, m: int) -> ProcessedWorkMatrix:
    """Each job in priority order lands on the least-loaded CPU (highest index on ties)."""
    _check_m(m)
    cs = _times(jobs)
    load = [ZERO] * m
    rows = [[ZERO] for _ in range(m)]
    for c in cs:
        low = min(load)
        k = max(idx for idx in range(m) if load[idx] == low)
        load[k] += c
        for idx in range(m):
            rows[idx].append(load[idx])
    return ProcessedWorkMatrix(tuple(tuple(r) for r in rows))


def ident_ftp_idle_bounds(jobs: JobsLike, m: int) -> IdleBoundVector:
    """Exact idle instants of a fixed-task-priority schedule on identical CPUs."""
    mat = ident_ftp_processed_work(jobs, m)
    return IdleBoundVector(tuple(sorted(mat.column(mat.n))), IDENT_FTP)


# --- uniform platforms, FJP --------------------------------------------------

@dataclass(frozen=True)
class UniformBoundTrace:
    minidle: tuple
    K: tuple      # K[j] for j = 0..n-1
    H: tuple      # H[j] for j = 0..n-1
    x: int        # 1-based CPU index used by ms3
    ms1: Fraction
    ms2: Fraction
    ms3: Fraction

    @property
    def ms_min(self) -> Fraction:
        return min(self.ms1, self.ms2, self.ms3)


def unif_fjp_idle_lower(jobs: JobsLike, platform: Platform) -> tuple:
    """Lower bound on each idle instant: the n-m+k shortest jobs on the whole platform."""
    speeds = _speeds(platform)
    m = len(speeds)
    cs = _pad(_ascending(jobs), m)
    n = len(cs)
    total_speed = sum(speeds, ZERO)
    out = []
    acc = sum(cs[: n - m], ZERO)
    for k in range(1, m + 1):
        acc += cs[n - m + k - 1]
        out.append(acc / total_speed)
    return tuple(out)


def unif_fjp_idle_upper(jobs: JobsLike, platform: Platform) -> IdleBoundVector:
    """Upper bound on each idle instant; the last entry bounds the makespan."""
    speeds = _speeds(platform)
    m = len(speeds)
    cs = _pad(_ascending(jobs), m)
    low = unif_fjp_idle_lower(cs, platform)
    total = sum(cs, ZERO)
    vals = []
    done = ZERO
    for k in range(1, m + 1):
        vals.append((total - done) / platform.cumulative_speed(k))
        done += low[k - 1] * speeds[k - 1]
    return IdleBoundVector(tuple(vals), UNIF_FJP)


def _k_factors(speeds: list, count: int) -> tuple:
    s1, sm = speeds[0], speeds[-1]
    if s1 == sm:
        return tuple(Fraction(1) if j == 0 else ZERO for j in range(count))
    base = 1 - s1 / sm
    return tuple(base ** j for j in range(count))


def _slowest_share_index(speeds: list) -> int:
    best, best_ratio, acc = 1, None, ZERO
    for i, s in enumerate(speeds, start=1):
        acc += s
        ratio = s / acc
        if best_ratio is None or ratio < best_ratio:
            best, best_ratio = i, ratio
    return best


def _h_factors(speeds: list, x: int, count: int) -> tuple:
    sx = speeds[x - 1]
    prefix = sum(speeds[:x], ZERO)
    if sx == prefix:
        return tuple(Fraction(1) if j == 0 else ZERO for j in range(count))
    base = 1 - sx / prefix
    return tuple(base ** j for j in range(count))


def unif_fjp_trace(jobs: JobsLike, platform: Platform) -> UniformBoundTrace:
    """All uniform FJP makespan bounds together with their intermediate factors."""
    speeds = _speeds(platform)
    m = len(speeds)
    cs = _pad(_ascending(jobs), m)
    n = len(cs)
    total_speed = sum(speeds, ZERO)
    s1, sm = speeds[0], speeds[-1]
    upper = unif_fjp_idle_upper(cs, platform)
    K = _k_factors(speeds, n)
    x = _slowest_share_index(speeds)
    H = _h_factors(speeds, x, n)
    coef3 = speeds[x - 1] * sm / (total_speed * sum(speeds[:x], ZERO))
    ms2 = ms3 = ZERO
    before = ZERO
    for i, c in enumerate(cs, start=1):
        ms2 += (c + s1 * before / total_speed) * K[n - i]
        ms3 += (c + coef3 * before) * H[n - i]
        before += c
    return UniformBoundTrace(
        minidle=unif_fjp_idle_lower(cs, platform),
        K=K, H=H, x=x,
        ms1=upper.makespan, ms2=ms2 / sm, ms3=ms3 / sm,
    )


def unif_fjp_ms1(jobs: JobsLike, platform: Platform) -> Fraction:
    return unif_fjp_idle_upper(jobs, platform).makespan


def unif_fjp_ms2(jobs: JobsLike, platform: Platform) -> Fraction:
    return unif_fjp_trace(jobs, platform).ms2


def unif_fjp_ms3(jobs: JobsLike, platform: Platform) -> Fraction:
    return unif_fjp_trace(jobs, platform).ms3


def unif_fjp_ms_min(jobs: JobsLike, platform: Platform) -> Fraction:
    return unif_fjp_trace(jobs, platform).ms_min


def lambda_pi(platform: Platform) -> Fraction:
    """Heterogeneity of a platform: max over CPUs of (slower capacity) / own speed.

    >>> lambda_pi(Platform.identical(4))
    Fraction(3, 1)
    """
    speeds = _speeds(platform)
    best, acc = ZERO, ZERO
    for s in speeds:
        best = max(best, acc / s)
        acc += s
    return best


# --- uniform platforms, FTP --------------------------------------------------

@dataclass(frozen=True)
class IdleTable:
    """``rows[j-1][i]`` is the j-th idle instant once jobs 1..i are scheduled.

    Row m+1 holds the :data:`UNBOUNDED` sentinel for i >= 1.
    """

    rows: tuple

    @property
    def m(self) -> int:
        return len(self.rows) - 1

    @property
    def n(self) -> int:
        return len(self.rows[0]) - 1

    def at(self, j: int, i: int):
        return self.rows[j - 1][i]

    def column(self, i: int) -> tuple:
        return tuple(self.rows[j][i] for j in range(self.m))

    @property
    def final(self) -> IdleBoundVector:
        return IdleBoundVector(self.column(self.n), UNIF_FTP)

    @property
    def makespan(self) -> Fraction:
        return self.rows[self.m - 1][self.n]


def unif_ftp_idle_table(jobs: JobsLike, platform: Platform, literal: bool = False) -> IdleTable:
    """Staircase recursion for fixed-task-priority jobs on a uniform platform.

    Job i only runs once some CPU idles: on CPU j during [idle_j, idle_{j+1}).
    If it has already finished before idle_j, CPU j is untouched; the default
    therefore never lets an entry move below its previous value. ``literal=True``
    drops that guard and can report idle instants earlier than the schedule's.
    """
    speeds = _speeds(platform)
    m = len(speeds)
    cs = _times(jobs)
    n = len(cs)
    prev = [ZERO] * m + [UNBOUNDED]
    cols = [list(prev)]
    for c in cs:
        cur = list(prev)
        for j in range(m, 0, -1):
            lo, hi = prev[j - 1], prev[j]
            if lo == hi:
                cur[j - 1] = lo
                continue
            before = sum(((prev[k] - prev[k - 1]) * speeds[k - 1] for k in range(1, j)), ZERO)
            if hi is not UNBOUNDED and c >= before + (hi - lo) * speeds[j - 1]:
                cur[j - 1] = hi
                continue
            val = lo + (c - before) / speeds[j - 1]
            cur[j - 1] = val if literal else max(val, lo)
        prev = cur
        cols.append(cur)
    rows = tuple(tuple(col[j] for col in cols) for j in range(m + 1))
    return IdleTable(rows)


def unif_ftp_idle_bounds(jobs: JobsLike, platform: Platform) -> IdleBoundVector:
    return unif_ftp_idle_table(jobs, platform).final


# --- rem-job sets ------------------------------------------------------------

def critical_rem_job_set(mode: Mode) -> JobSet:
    """One job per task of the mode, each running for the task's WCET.

    Jobs keep task ids and task order; callers sort as their bound requires.
    """
    if not mode.tasks:
        raise ValueError("a mode must contain at least one task")
    return JobSet(tuple(Job(t.id, t.wcet) for t in mode.tasks))


def critical_ftp_order(mode: Mode) -> JobSet:
    """Critical rem-job set in decreasing fixed-task-priority order."""
    jobs = critical_rem_job_set(mode)
    rank = mode.ftp_rank()
    return JobSet(tuple(sorted(jobs, key=lambda j: rank[j.id])))

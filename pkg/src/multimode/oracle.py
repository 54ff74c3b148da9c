"""Brute-force maxima of the makespan and idle instants over priority assignments.

The exhaustive mode walks all n! assignments in lexicographic order (as
permutations of job positions) and can split the walk by first element over a
process pool. Ties keep the lexicographically first assignment, so results do
not depend on the number of workers.
"""
from __future__ import annotations

import itertools
import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterator, Optional

from .model import JobSet, Platform, PriorityAssignment
from .simkernel import _identical_core, _uniform_core

EXHAUSTIVE = "exhaustive"
SAMPLED = "sampled"


class OracleRefused(ValueError):
    """Exhaustive enumeration would be too large."""


@dataclass(frozen=True)
class OracleResult:
    exact_max_makespan: Fraction
    argmax: PriorityAssignment
    max_idle: tuple
    argmax_idle: tuple  # per k; min_idle holds the per-k minima
    assignments_evaluated: int
    mode: str
    min_idle: tuple = ()
    seed: Optional[int] = None
    samples: Optional[int] = None

    @property
    def is_lower_bound(self) -> bool:
        """Sampled maxima only bound the true maxima from below."""
        return self.mode == SAMPLED


def _evaluator(jobs: JobSet, platform: Platform):
    """Return f(perm) -> sorted idle vector, where perm lists job positions."""
    cs = jobs.times
    m = platform.m
    if platform.is_identical:
        s = platform.speeds[0]
        if all(c.denominator == 1 for c in cs):
            ints = [int(c) for c in cs]
            if s == 1:
                return lambda perm: [Fraction(b) for b in sorted(_identical_core([ints[q] for q in perm], m)[3])]
            return lambda perm: [Fraction(b) / s for b in sorted(_identical_core([ints[q] for q in perm], m)[3])]
        scaled = [c / s for c in cs]
        return lambda perm: sorted(_identical_core([scaled[q] for q in perm], m)[3])
    speeds = list(platform.speeds)
    if speeds != sorted(speeds):
        raise ValueError("platform speeds must be non-decreasing")
    return lambda perm: _uniform_core([cs[q] for q in perm], speeds)[2]


class _Best:
    __slots__ = ("idle", "arg", "low")

    def __init__(self, m: int):
        self.idle = [None] * m
        self.arg = [None] * m
        self.low = [None] * m

    def offer(self, vec, perm) -> None:
        for k, v in enumerate(vec):
            cur = self.idle[k]
            if cur is None or v > cur:
                self.idle[k] = v
                self.arg[k] = perm
            low = self.low[k]
            if low is None or v < low:
                self.low[k] = v

    def merge(self, other: "_Best") -> None:
        # ``other`` covers later permutations: it only wins on strict improvement
        for k in range(len(self.idle)):
            if other.idle[k] is not None and (self.idle[k] is None or other.idle[k] > self.idle[k]):
                self.idle[k] = other.idle[k]
                self.arg[k] = other.arg[k]
            if other.low[k] is not None and (self.low[k] is None or other.low[k] < self.low[k]):
                self.low[k] = other.low[k]


def _scan_chunk(args) -> tuple:
    jobs, platform, first = args
    n = len(jobs)
    f = _evaluator(jobs, platform)
    best = _Best(platform.m)
    rest = [q for q in range(n) if q != first]
    count = 0
    for tail in itertools.permutations(rest):
        perm = (first,) + tail
        best.offer(f(perm), perm)
        count += 1
    return best.idle, best.arg, best.low, count


def _result(jobs: JobSet, best: _Best, count: int, mode: str, **extra) -> OracleResult:
    ids = jobs.ids

    def assignment(perm):
        return PriorityAssignment(tuple(ids[q] for q in perm))

    return OracleResult(
        exact_max_makespan=best.idle[-1],
        argmax=assignment(best.arg[-1]),
        max_idle=tuple(best.idle),
        argmax_idle=tuple(assignment(p) for p in best.arg),
        assignments_evaluated=count,
        mode=mode,
        min_idle=tuple(best.low),
        **extra,
    )


def exact_max(jobs: JobSet, platform: Platform, limit_n: int = 8,
              workers: Optional[int] = None) -> OracleResult:
    """Maximum makespan and per-k maximum idle instant over all n! assignments.

    ``workers`` > 1 evaluates first-element chunks in a process pool.
    """
    n = len(jobs)
    if n == 0:
        raise ValueError("empty job set")
    if n > limit_n:
        raise OracleRefused(
            f"{n} jobs means {math.factorial(n)} schedules (limit_n={limit_n}); "
            "raise the limit or use sampled mode")
    tasks = [(jobs, platform, first) for first in range(n)]
    if workers and workers > 1 and n > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_scan_chunk, tasks))
    else:
        parts = [_scan_chunk(t) for t in tasks]
    best = _Best(platform.m)
    total = 0
    for idle, arg, low, count in parts:
        part = _Best(platform.m)
        part.idle, part.arg, part.low = list(idle), list(arg), list(low)
        best.merge(part)
        total += count
    return _result(jobs, best, total, EXHAUSTIVE)


def sampled_max(jobs: JobSet, platform: Platform, samples: int, seed: int) -> OracleResult:
    """Maxima over ``samples`` seeded random assignments (identity when samples == 0)."""
    n = len(jobs)
    if n == 0:
        raise ValueError("empty job set")
    if samples < 0:
        raise ValueError("samples must be non-negative")
    f = _evaluator(jobs, platform)
    best = _Best(platform.m)
    if samples == 0:
        perm = tuple(range(n))
        best.offer(f(perm), perm)
        count = 1
    else:
        rng = random.Random(seed)
        perm = list(range(n))
        for _ in range(samples):
            rng.shuffle(perm)
            t = tuple(perm)
            best.offer(f(t), t)
        count = samples
    return _result(jobs, best, count, SAMPLED, seed=seed, samples=samples)


def iter_makespans(jobs: JobSet, platform: Platform) -> Iterator[tuple]:
    """Yield (rank, assignment, makespan) for every assignment in lexicographic order."""
    f = _evaluator(jobs, platform)
    ids = jobs.ids
    for rank, perm in enumerate(itertools.permutations(range(len(jobs)))):
        yield rank, PriorityAssignment(tuple(ids[q] for q in perm)), f(perm)[-1]

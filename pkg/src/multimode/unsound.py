"""Formulas kept for demonstration only. They are NOT upper bounds.

Nothing in :mod:`multimode.validity` uses this module.
"""
from __future__ import annotations

from fractions import Fraction

from .bounds import JobsLike, _ascending, _pad, _speeds
from .model import Platform

ZERO = Fraction(0)


def unif_fjp_ms0_naive(jobs: JobsLike, platform: Platform) -> Fraction:
    """Identical-platform makespan formula transplanted to uniform CPUs.

    Spreads all but the longest job over the whole capacity, then runs the
    longest job on the fastest CPU. Underestimates the maximum makespan on
    some instances, e.g. 19.9 for jobs {50, 80, 99} on speeds [1, 2, 10]
    where a schedule reaching 20 exists.
    """
    speeds = _speeds(platform)
    cs = _pad(_ascending(jobs), len(speeds))
    return sum(cs[:-1], ZERO) / sum(speeds, ZERO) + cs[-1] / speeds[-1]

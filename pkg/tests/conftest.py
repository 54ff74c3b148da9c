import random
from fractions import Fraction as F

import pytest

from multimode.model import Application, Mode, Platform, Scheduler, Task

FJP_REFERENCE_JOBS = [1, 1, 1, 1, 1, 1, 3, 3, 6, 6, 9, 12]
FTP_REFERENCE_JOBS = [7, 2, 5, 16, 6, 5, 5]


def two_mode_app(target_deadlines=(100, 100, 100), old_kind="FTP"):
    """Old mode: C = 40, 20, 40, 60 with D = T = 120. New mode: C = 100, 40, 40, D = T = 150."""
    old_sched = Scheduler("FTP", (1, 2, 3, 4)) if old_kind == "FTP" else Scheduler("FJP", rule="EDF")
    old = Mode(tuple(Task(c, 120, 120, k) for k, c in enumerate([40, 20, 40, 60], 1)), old_sched, "old")
    new = Mode(tuple(Task(c, 150, 150, k) for k, c in enumerate([100, 40, 40], 1)),
               Scheduler("FTP", (1, 2, 3)), "new")
    return Application((old, new), {(0, 1): tuple(target_deadlines), (1, 0): (200, 200, 200, 200)})


@pytest.fixture
def example_app():
    return two_mode_app()


@pytest.fixture
def two_cpus():
    return Platform.identical(2)


def random_speeds(rng: random.Random, m: int, identical: bool = False):
    if identical:
        s = F(rng.randint(1, 40), rng.choice([1, 2, 4]))
        s = min(max(s, F(1)), F(10))
        return Platform((s,) * m)
    return Platform(tuple(sorted(F(rng.randint(4, 40), 4) for _ in range(m))))


def random_jobs(rng: random.Random, n: int):
    return [F(rng.randint(1, 40), rng.choice([1, 1, 2, 3])) for _ in range(n)]


def pytest_terminal_summary(terminalreporter):
    import test_acceptance
    if not test_acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for name, _ in test_acceptance.CRITERIA:
        if name in test_acceptance.RESULTS:
            ok, detail = test_acceptance.RESULTS[name]
            terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {name}"
                                        + (f"  ({detail})" if detail and not ok else ""))

import random
from fractions import Fraction as F

from multimode.model import Application, Mode, Platform, Scheduler, Task
from multimode.validity import (FAIL, PASS, UNSUPPORTED, default_sched_test, makespan_bound,
                                validity_ammso, validity_smmso)

from conftest import random_speeds, two_mode_app

TWO = Platform.identical(2)


def test_example_ftp_bound_passes_at_100_and_fails_at_80():
    rep = validity_smmso(two_mode_app(), TWO)
    first = rep.pairs[0]
    assert (first.bound_name, first.bound_value, first.verdict) == ("identical-FTP", 100, PASS)
    assert first.slack == 0 and rep.valid
    bad = validity_smmso(two_mode_app((80, 100, 100)), TWO)
    assert bad.verdict == "invalid" and bad.pairs[0].failing_task == 1


def test_example_as_fjp_uses_the_looser_bound():
    assert validity_smmso(two_mode_app((110, 110, 110), "EDF"), TWO).valid
    rep = validity_smmso(two_mode_app((109, 110, 110), "EDF"), TWO)
    assert rep.pairs[0].bound_value == 110 and rep.pairs[0].verdict == FAIL


def test_single_mode_is_vacuously_valid():
    app = Application((Mode((Task(1, 10, 10, 1),), Scheduler("FJP", rule="EDF")),), {})
    assert validity_smmso(app, TWO).valid and validity_smmso(app, TWO).pairs == ()
    assert validity_ammso(app, TWO).valid


def test_unsupported_scheduler_is_reported():
    base = two_mode_app()
    odd = Mode(base.modes[0].tasks, Scheduler("FJP", rule="LLF"))
    app = Application((odd, base.modes[1]), base.transition_deadlines)
    assert validity_smmso(app, TWO).verdict == UNSUPPORTED
    assert validity_ammso(app, TWO).pairs[0].verdict == UNSUPPORTED


def test_identical_speed_scales_the_bound():
    name, value = makespan_bound(two_mode_app().modes[0], Platform.identical(2, 4))
    assert value == 25


def test_ammso_enable_bounds_for_the_example():
    pair = validity_ammso(two_mode_app(), TWO).pairs[0]
    assert pair.verdict == PASS
    assert pair.enable_bounds == {1: 60, 2: 60, 3: 100}


def test_ammso_failure_names_the_task():
    pair = validity_ammso(two_mode_app((50, 100, 100)), TWO).pairs[0]
    assert pair.verdict == FAIL and pair.failing_task == 1 and pair.bound_value == 60


def _random_app(rng):
    m = rng.randint(1, 4)
    plat = random_speeds(rng, m, identical=rng.random() < 0.3)
    modes = []
    for _ in range(2):
        n = rng.randint(m, m + 3)
        tasks = tuple(Task(rng.randint(1, 20), 100, 100, k) for k in range(1, n + 1))
        sch = (Scheduler("FTP", tuple(rng.sample(range(1, n + 1), n))) if rng.random() < 0.5
               else Scheduler("FJP", rule="EDF"))
        modes.append(Mode(tasks, sch))
    tds = {(0, 1): tuple(rng.randint(1, 60) for _ in modes[1].tasks),
           (1, 0): tuple(rng.randint(1, 60) for _ in modes[0].tasks)}
    return Application(tuple(modes), tds), plat


def test_ammso_never_stricter_than_smmso():
    rng = random.Random(41)
    for _ in range(200):
        app, plat = _random_app(rng)
        if validity_smmso(app, plat, uniform_fjp="ms1").valid:
            assert validity_ammso(app, plat).valid


def test_longer_deadlines_never_break_validity():
    rng = random.Random(43)
    for _ in range(200):
        app, plat = _random_app(rng)
        looser = Application(app.modes, {k: tuple(d * 2 for d in v)
                                         for k, v in app.transition_deadlines.items()})
        if validity_smmso(app, plat).valid:
            assert validity_smmso(looser, plat).valid
        if validity_ammso(app, plat).valid:
            assert validity_ammso(looser, plat).valid


def test_density_test_boundaries():
    edf = Scheduler("FJP", rule="EDF")
    assert default_sched_test([F(1)], edf, [Task(5, 10, 10, 1)])
    assert default_sched_test([1, 1, 1], edf, [Task(10, 10, 10, k) for k in (1, 2, 3)]) is False
    assert default_sched_test([1, 1], edf, [Task(10, 10, 10, 1)])
    assert default_sched_test([], edf, [Task(1, 10, 10, 1)]) is False
    assert default_sched_test([1], edf, [])
    # one task denser than the fastest CPU is rejected however many CPUs exist
    assert not default_sched_test([1, 1, 1, 1], edf, [Task(3, 2, 2, 1)])
    assert default_sched_test(Platform((1, 2)), edf, [Task(2, 1, 1, 1)])

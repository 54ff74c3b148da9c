import json
from fractions import Fraction as F

import pytest

from multimode.model import (Application, JobSet, Mode, Platform, PriorityAssignment, Scheduler,
                             Task, application_from_dict, application_to_dict, as_time,
                             format_time, parse_times, render_time, validate_application)

from conftest import two_mode_app


def test_time_parsing_is_exact():
    assert as_time("7/2") == F(7, 2)
    assert as_time(0.1) == F(1, 10)
    assert parse_times("4, 6,7/2") == [4, 6, F(7, 2)]
    with pytest.raises(TypeError):
        as_time(True)


def test_rendering():
    assert format_time(F(7, 2)) == "7/2"
    assert format_time(F(110)) == "110"
    assert render_time(F(2667, 130)) == "20.515385"
    assert render_time(F(1, 3), 2) == "0.33"


def test_cumulative_speed_decreases():
    p = Platform((1, 2, 10))
    assert [p.cumulative_speed(k) for k in (1, 2, 3)] == [13, 12, 10]
    assert p.total_speed == 13
    assert Platform.identical(3, 2).is_identical


def test_jobset_padding_keeps_order():
    js = JobSet.of([3, 5]).padded(4)
    assert js.times == [0, 0, 3, 5]
    assert len(set(js.ids)) == 4


def test_priority_assignment_rejects_ties_and_foreign_ids():
    with pytest.raises(ValueError):
        PriorityAssignment((1, 1))
    with pytest.raises(ValueError):
        PriorityAssignment((1, 3)).ordered(JobSet.of([1, 2]))


def test_density_uses_min_of_deadline_and_period():
    assert Task(2, 4, 8).density == F(1, 2)


def test_validation_reports_structural_problems():
    bad = Mode((Task(5, 4, 10, 1),), Scheduler("FTP", (1,)))
    app = Application((bad, bad), {(0, 1): (3,)})
    problems = validate_application(app, Platform.identical(2))
    assert any("C ≤ D" in p for p in problems)
    assert any("fewer tasks than CPUs" in p for p in problems)
    assert any("missing transition deadlines 1->0" in p for p in problems)


def test_unknown_scheduler_kind_is_flagged():
    mode = Mode((Task(1, 2, 2, 1), Task(1, 2, 2, 2)), Scheduler("LLF"))
    app = Application((mode,), {})
    assert any("unknown scheduler kind" in p for p in validate_application(app, Platform.identical(2)))


def test_example_app_is_well_formed(two_cpus):
    assert validate_application(two_mode_app(), two_cpus) == []


def test_json_round_trip_is_lossless(tmp_path):
    app = two_mode_app(target_deadlines=("201/2", 100, 100))
    plat = Platform((F(1, 3), 2))
    doc = application_to_dict(app, plat)
    text = json.dumps(doc)
    app2, plat2 = application_from_dict(json.loads(text))
    assert app2 == app and plat2 == plat
    assert application_to_dict(app2, plat2) == doc


def test_min_transition_deadline_names_the_task():
    app = two_mode_app(target_deadlines=(120, 90, 90))
    assert app.min_transition_deadline(0, 1) == (90, 2)
    assert app.transition_deadline(0, 1, 1) == 120

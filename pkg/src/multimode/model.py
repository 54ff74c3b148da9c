"""Domain types for multi-mode sporadic applications on multiprocessor platforms.

All instants and durations are exact rationals (:class:`fractions.Fraction`);
decimal rendering only happens at the reporting boundary.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Sequence, Union

TimeValue = Fraction
TimeLike = Union[int, str, Fraction]

FTP = "FTP"
FJP = "FJP"
KNOWN_KINDS = (FTP, FJP)
FJP_RULES = ("EDF", "FIFO")


def as_time(value: TimeLike) -> Fraction:
    """Parse an integer, a ``"num/den"`` string or a Fraction into an exact time.

    >>> as_time("7/2")
    Fraction(7, 2)
    >>> as_time(3)
    Fraction(3, 1)
    """
    if isinstance(value, Fraction):
        return value
    if isinstance(value, bool):
        raise TypeError("booleans are not times")
    if isinstance(value, int):
        return Fraction(value)
    if isinstance(value, str):
        return Fraction(value.strip())
    if isinstance(value, float):
        # floats are accepted only when they are exactly representable decimals
        return Fraction(str(value))
    raise TypeError(f"cannot interpret {value!r} as a time value")


def format_time(value: Fraction) -> str:
    """Lossless textual form: ``"7/2"`` or ``"4"``."""
    if value.denominator == 1:
        return str(value.numerator)
    return f"{value.numerator}/{value.denominator}"


def render_time(value, places: int = 6) -> str:
    """Decimal rendering of an exact value, rounded half-even to ``places``."""
    if isinstance(value, Fraction):
        q = round(value, places)
        return f"{float(q):.{places}f}" if places else str(int(q))
    return f"{value:.{places}f}"


@dataclass(frozen=True)
class Task:
    wcet: Fraction
    deadline: Fraction
    period: Fraction
    id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "wcet", as_time(self.wcet))
        object.__setattr__(self, "deadline", as_time(self.deadline))
        object.__setattr__(self, "period", as_time(self.period))

    @property
    def density(self) -> Fraction:
        return self.wcet / min(self.deadline, self.period)

    def violations(self) -> list[str]:
        out = []
        if not self.wcet > 0:
            out.append(f"task {self.id}: C > 0 fails")
        if self.wcet > self.deadline:
            out.append(f"task {self.id}: C ≤ D fails")
        if self.deadline > self.period:
            out.append(f"task {self.id}: D ≤ T fails")
        return out


@dataclass(frozen=True)
class Scheduler:
    """Mode scheduler.

    ``kind`` is ``"FTP"`` (``order`` lists task ids, highest priority first) or
    ``"FJP"`` (``rule`` names the job-priority rule, EDF by default). Any other
    kind is carried through so that analyses can report it as unsupported.
    """

    kind: str = FJP
    order: tuple[int, ...] | None = None
    rule: str = "EDF"

    def __post_init__(self):
        if self.order is not None:
            object.__setattr__(self, "order", tuple(self.order))


@dataclass(frozen=True)
class Mode:
    tasks: tuple[Task, ...]
    scheduler: Scheduler = field(default_factory=Scheduler)
    name: str = ""

    def __post_init__(self):
        object.__setattr__(self, "tasks", tuple(self.tasks))

    @property
    def n(self) -> int:
        return len(self.tasks)

    def task(self, tid: int) -> Task:
        for t in self.tasks:
            if t.id == tid:
                return t
        raise KeyError(tid)

    def ftp_rank(self) -> dict[int, int]:
        """Task id -> rank (0 = highest priority) for FTP modes."""
        if self.scheduler.order is None:
            raise ValueError("mode has no FTP priority order")
        return {tid: r for r, tid in enumerate(self.scheduler.order)}


@dataclass(frozen=True)
class Platform:
    speeds: tuple[Fraction, ...]

    def __post_init__(self):
        object.__setattr__(self, "speeds", tuple(as_time(s) for s in self.speeds))

    @classmethod
    def identical(cls, m: int, speed: TimeLike = 1) -> "Platform":
        return cls((as_time(speed),) * m)

    @property
    def m(self) -> int:
        return len(self.speeds)

    @property
    def is_identical(self) -> bool:
        return len(set(self.speeds)) <= 1

    def cumulative_speed(self, k: int) -> Fraction:
        """Total speed of CPUs k..m (1-based)."""
        return sum(self.speeds[k - 1:], Fraction(0))

    @property
    def total_speed(self) -> Fraction:
        return self.cumulative_speed(1)

    def violations(self) -> list[str]:
        out = []
        if not self.speeds:
            out.append("platform has no CPU")
        for i, s in enumerate(self.speeds):
            if s <= 0:
                out.append(f"speed s_{i + 1} must be positive")
        for i in range(1, len(self.speeds)):
            if self.speeds[i] < self.speeds[i - 1]:
                out.append(f"speeds not non-decreasing at s_{i + 1}")
        return out


@dataclass(frozen=True)
class Job:
    id: int
    c: Fraction

    def __post_init__(self):
        object.__setattr__(self, "c", as_time(self.c))


@dataclass(frozen=True)
class JobSet:
    """Synchronous jobs, all released at 0."""

    jobs: tuple[Job, ...]

    def __post_init__(self):
        object.__setattr__(self, "jobs", tuple(self.jobs))
        ids = [j.id for j in self.jobs]
        if len(set(ids)) != len(ids):
            raise ValueError("duplicate job ids")
        if any(j.c < 0 for j in self.jobs):
            raise ValueError("negative processing time")

    @classmethod
    def of(cls, times: Iterable[TimeLike], start: int = 1) -> "JobSet":
        return cls(tuple(Job(i, as_time(c)) for i, c in enumerate(times, start)))

    def __len__(self):
        return len(self.jobs)

    def __iter__(self):
        return iter(self.jobs)

    @property
    def ids(self) -> list[int]:
        return [j.id for j in self.jobs]

    @property
    def times(self) -> list[Fraction]:
        return [j.c for j in self.jobs]

    def by_id(self) -> dict[int, Fraction]:
        return {j.id: j.c for j in self.jobs}

    def ascending(self) -> "JobSet":
        return JobSet(tuple(sorted(self.jobs, key=lambda j: (j.c, j.id))))

    def padded(self, m: int) -> "JobSet":
        """Prepend zero-length jobs until there are at least ``m`` jobs."""
        missing = m - len(self.jobs)
        if missing <= 0:
            return self
        top = max(self.ids, default=0)
        extra = tuple(Job(top + 1 + k, Fraction(0)) for k in range(missing))
        return JobSet(extra + self.jobs)


@dataclass(frozen=True)
class PriorityAssignment:
    """Strict total order over job ids, highest priority first."""

    order: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "order", tuple(self.order))
        if len(set(self.order)) != len(self.order):
            raise ValueError("priority assignment has ties")

    @classmethod
    def identity(cls, jobs: JobSet) -> "PriorityAssignment":
        return cls(tuple(jobs.ids))

    def check(self, jobs: JobSet) -> None:
        if sorted(self.order) != sorted(jobs.ids):
            raise ValueError("priority assignment is not a permutation of the job ids")

    def ordered(self, jobs: JobSet) -> list[Fraction]:
        """Processing times listed by decreasing priority."""
        self.check(jobs)
        c = jobs.by_id()
        return [c[i] for i in self.order]


@dataclass(frozen=True)
class Application:
    modes: tuple[Mode, ...]
    transition_deadlines: Mapping[tuple[int, int], tuple[Fraction, ...]]

    def __post_init__(self):
        object.__setattr__(self, "modes", tuple(self.modes))
        tds = {}
        for (i, j), vals in dict(self.transition_deadlines).items():
            tds[(i, j)] = tuple(as_time(v) for v in vals)
        object.__setattr__(self, "transition_deadlines", tds)

    @property
    def x(self) -> int:
        return len(self.modes)

    def transition_deadline(self, i: int, j: int, task_id: int) -> Fraction:
        """Relative deadline for enabling task ``task_id`` of mode ``j`` when leaving ``i``."""
        pos = [t.id for t in self.modes[j].tasks].index(task_id)
        return self.transition_deadlines[(i, j)][pos]

    def min_transition_deadline(self, i: int, j: int) -> tuple[Fraction, int]:
        """Smallest transition deadline from ``i`` into ``j`` and the task it belongs to."""
        vals = self.transition_deadlines[(i, j)]
        pos = min(range(len(vals)), key=lambda p: (vals[p], p))
        return vals[pos], self.modes[j].tasks[pos].id

    def pairs(self) -> list[tuple[int, int]]:
        return [(i, j) for i in range(self.x) for j in range(self.x) if i != j]


def validate_application(app: Application, platform: Platform) -> list[str]:
    """Return the list of structural violations (empty when the inputs are well formed)."""
    out = list(platform.violations())
    m = platform.m
    for k, mode in enumerate(app.modes):
        tag = f"mode {k}"
        ids = [t.id for t in mode.tasks]
        if len(set(ids)) != len(ids):
            out.append(f"{tag}: task ids not unique")
        for t in mode.tasks:
            out.extend(f"{tag}: {v}" for v in t.violations())
        sch = mode.scheduler
        if sch.kind == FTP:
            if sch.order is None or sorted(sch.order) != sorted(ids):
                out.append(f"{tag}: FTP order is not a strict total order over the tasks")
        elif sch.kind == FJP:
            if sch.rule not in FJP_RULES:
                out.append(f"{tag}: unknown FJP rule {sch.rule!r}")
        else:
            out.append(f"{tag}: unknown scheduler kind {sch.kind!r}")
        if m > mode.n:
            out.append(f"{tag}: fewer tasks than CPUs ({mode.n} < {m})")
    for i, j in app.pairs():
        vals = app.transition_deadlines.get((i, j))
        if vals is None:
            out.append(f"missing transition deadlines {i}->{j}")
        elif len(vals) != app.modes[j].n:
            out.append(f"transition deadlines {i}->{j}: expected {app.modes[j].n} values")
        elif any(v < 0 for v in vals):
            out.append(f"transition deadlines {i}->{j}: negative value")
    return out


# -- JSON document ----------------------------------------------------------

def _mode_from_dict(doc: Mapping, name: str) -> Mode:
    tasks = tuple(
        Task(as_time(t["C"]), as_time(t["D"]), as_time(t["T"]), int(t.get("id", k)))
        for k, t in enumerate(doc["tasks"], 1)
    )
    sch = doc.get("scheduler", {}) or {}
    kind = str(sch.get("kind", FJP)).upper()
    order = sch.get("order")
    scheduler = Scheduler(kind, tuple(int(o) for o in order) if order is not None else None,
                          str(sch.get("rule", "EDF")).upper())
    return Mode(tasks, scheduler, str(doc.get("name", name)))


def _mode_to_dict(mode: Mode) -> dict:
    sch: dict = {"kind": mode.scheduler.kind}
    if mode.scheduler.order is not None:
        sch["order"] = list(mode.scheduler.order)
    if mode.scheduler.kind == FJP:
        sch["rule"] = mode.scheduler.rule
    doc = {
        "tasks": [{"id": t.id, "C": format_time(t.wcet), "D": format_time(t.deadline),
                   "T": format_time(t.period)} for t in mode.tasks],
        "scheduler": sch,
    }
    if mode.name:
        doc["name"] = mode.name
    return doc


def application_from_dict(doc: Mapping) -> tuple[Application, Platform]:
    modes = tuple(_mode_from_dict(md, f"M{k}") for k, md in enumerate(doc["modes"]))
    tds = {}
    for key, vals in (doc.get("transition_deadlines") or {}).items():
        i, j = (int(p) for p in key.split("->"))
        tds[(i, j)] = tuple(as_time(v) for v in vals)
    platform = Platform(tuple(as_time(s) for s in doc["platform"]["speeds"]))
    return Application(modes, tds), platform


def application_to_dict(app: Application, platform: Platform) -> dict:
    return {
        "modes": [_mode_to_dict(md) for md in app.modes],
        "transition_deadlines": {
            f"{i}->{j}": [format_time(v) for v in vals]
            for (i, j), vals in sorted(app.transition_deadlines.items())
        },
        "platform": {"speeds": [format_time(s) for s in platform.speeds]},
    }


def load_application(path) -> tuple[Application, Platform]:
    with open(path) as fh:
        return application_from_dict(json.load(fh))


def dump_application(app: Application, platform: Platform, path) -> None:
    with open(path, "w") as fh:
        json.dump(application_to_dict(app, platform), fh, indent=2)
        fh.write("\n")


def parse_times(text: str | Sequence) -> list[Fraction]:
    """Parse ``"4,6,7/2"`` (or an already split sequence) into exact times."""
    if isinstance(text, str):
        parts = [p for p in text.replace(" ", "").split(",") if p]
    else:
        parts = list(text)
    return [as_time(p) for p in parts]

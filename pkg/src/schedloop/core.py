"""RCPSP domain types and the deterministic ground-truth schedule verifier.

A problem instance fixes jobs (integer durations, per-resource demands), a
precedence DAG, renewable resource capacities, an optional global deadline,
and a horizon. A schedule maps job ids to integer start times. `verify`
reports every violated constraint with enough diagnostic payload to render
feedback text, and is a pure function: the same inputs always produce the
same verdict, violations included, in a fixed sort order.

Time is discrete. Resources are renewable: full capacity is available at
every time step and jobs consume units only while running.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional, Sequence, Union


class InvalidInstanceError(ValueError):
    """An instance failed its construction invariants."""


class ScheduleCoverageError(ValueError):
    """A schedule does not cover exactly the instance's job set."""


@dataclass(frozen=True)
class Job:
    id: str
    duration: int
    demand: tuple[int, ...] = ()

    def __post_init__(self) -> None:
        if self.duration < 1:
            raise InvalidInstanceError(f"job {self.id}: duration must be >= 1")
        if any(d < 0 for d in self.demand):
            raise InvalidInstanceError(f"job {self.id}: negative demand")


@dataclass(frozen=True)
class ProblemInstance:
    instance_id: str
    tier: int
    jobs: tuple[Job, ...]
    precedence: tuple[tuple[str, str], ...] = ()
    capacities: tuple[int, ...] = ()
    deadline: Optional[int] = None
    horizon: int = 0
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 <= self.tier <= 5:
            raise InvalidInstanceError(f"tier {self.tier} outside 0..5")
        ids = [j.id for j in self.jobs]
        if len(set(ids)) != len(ids):
            raise InvalidInstanceError("duplicate job ids")
        id_set = set(ids)
        for pred, succ in self.precedence:
            if pred not in id_set or succ not in id_set:
                raise InvalidInstanceError(f"edge ({pred}, {succ}) names unknown job")
        if _has_cycle(ids, self.precedence):
            raise InvalidInstanceError("precedence graph has a cycle")
        if any(c < 1 for c in self.capacities):
            raise InvalidInstanceError("capacities must be positive")
        for job in self.jobs:
            if len(job.demand) != len(self.capacities):
                raise InvalidInstanceError(
                    f"job {job.id}: demand length {len(job.demand)} != "
                    f"resource count {len(self.capacities)}"
                )
            for r, (d, c) in enumerate(zip(job.demand, self.capacities)):
                if d > c:
                    raise InvalidInstanceError(
                        f"job {job.id}: demand {d} exceeds capacity {c} of resource {r}"
                    )
        if self.deadline is not None and self.deadline < 1:
            raise InvalidInstanceError("deadline must be positive")
        if self.horizon < sum(j.duration for j in self.jobs):
            raise InvalidInstanceError("horizon must fit a serial schedule")

    @property
    def job_ids(self) -> tuple[str, ...]:
        return tuple(j.id for j in self.jobs)

    def job(self, job_id: str) -> Job:
        for j in self.jobs:
            if j.id == job_id:
                return j
        raise KeyError(job_id)


def _has_cycle(ids: Sequence[str], edges: Sequence[tuple[str, str]]) -> bool:
    indeg = {i: 0 for i in ids}
    succs: dict[str, list[str]] = {i: [] for i in ids}
    for pred, succ in edges:
        indeg[succ] += 1
        succs[pred].append(succ)
    ready = [i for i in ids if indeg[i] == 0]
    seen = 0
    while ready:
        node = ready.pop()
        seen += 1
        for nxt in succs[node]:
            indeg[nxt] -= 1
            if indeg[nxt] == 0:
                ready.append(nxt)
    return seen != len(ids)


@dataclass(frozen=True)
class Schedule:
    starts: Mapping[str, int]

    def makespan(self, instance: ProblemInstance) -> int:
        return max(self.starts[j.id] + j.duration for j in instance.jobs)


# Violations. Sort rank fixes the deterministic verdict order: placement
# problems first, then timing, then resources, then the deadline.

@dataclass(frozen=True)
class MissingJob:
    job: str
    _rank = 0

    def _key(self):
        return (self.job,)


@dataclass(frozen=True)
class UnknownJob:
    job: str
    _rank = 1

    def _key(self):
        return (self.job,)


@dataclass(frozen=True)
class NegativeStart:
    job: str
    _rank = 2

    def _key(self):
        return (self.job,)


@dataclass(frozen=True)
class HorizonExceeded:
    job: str
    _rank = 3

    def _key(self):
        return (self.job,)


@dataclass(frozen=True)
class PrecedenceViolation:
    pred: str
    succ: str
    _rank = 4

    def _key(self):
        return (self.pred, self.succ)


@dataclass(frozen=True)
class CapacityViolation:
    resource: int
    time: int
    usage: int
    capacity: int
    _rank = 5

    def _key(self):
        return (self.resource, self.time)


@dataclass(frozen=True)
class DeadlineViolation:
    completion: int
    deadline: int
    _rank = 6

    def _key(self):
        return (self.completion,)


Violation = Union[
    MissingJob,
    UnknownJob,
    NegativeStart,
    HorizonExceeded,
    PrecedenceViolation,
    CapacityViolation,
    DeadlineViolation,
]


@dataclass(frozen=True)
class Verdict:
    feasible: bool
    violations: tuple[Violation, ...] = ()
    makespan: Optional[int] = None
    optimal: Optional[bool] = None


def resource_profile(instance: ProblemInstance, schedule: Schedule) -> list[list[int]]:
    """Per-resource usage at every time step in [0, horizon).

    Strict: the schedule must cover exactly the instance's jobs with
    non-negative starts (use `verify` for lenient handling).
    """
    ids = set(instance.job_ids)
    keys = set(schedule.starts)
    if keys != ids:
        raise ScheduleCoverageError(
            f"schedule covers {sorted(keys)}, instance has {sorted(ids)}"
        )
    if any(s < 0 for s in schedule.starts.values()):
        raise ScheduleCoverageError("negative start time")
    usage = [[0] * instance.horizon for _ in instance.capacities]
    for job in instance.jobs:
        start = schedule.starts[job.id]
        for r, d in enumerate(job.demand):
            for t in range(start, min(start + job.duration, instance.horizon)):
                usage[r][t] += d
    return usage


def verify(
    instance: ProblemInstance,
    schedule: Schedule,
    oracle_makespan: Optional[int] = None,
) -> Verdict:
    """Check a candidate schedule against every instance constraint.

    Never raises on malformed schedules: coverage problems become
    MissingJob/UnknownJob/NegativeStart violations. All violations are
    reported, sorted by kind then diagnostic payload.
    """
    violations: list[Violation] = []
    ids = set(instance.job_ids)
    starts = dict(schedule.starts)

    for job_id in ids - set(starts):
        violations.append(MissingJob(job_id))
    for job_id in set(starts) - ids:
        violations.append(UnknownJob(job_id))

    placed: dict[str, int] = {}
    for job in instance.jobs:
        if job.id not in starts:
            continue
        start = starts[job.id]
        if start < 0:
            violations.append(NegativeStart(job.id))
            continue
        placed[job.id] = start
        if start + job.duration > instance.horizon:
            violations.append(HorizonExceeded(job.id))

    durations = {j.id: j.duration for j in instance.jobs}
    for pred, succ in instance.precedence:
        if pred in placed and succ in placed:
            if placed[succ] < placed[pred] + durations[pred]:
                violations.append(PrecedenceViolation(pred, succ))

    if instance.capacities:
        usage = [[0] * instance.horizon for _ in instance.capacities]
        for job in instance.jobs:
            if job.id not in placed:
                continue
            start = placed[job.id]
            for r, d in enumerate(job.demand):
                for t in range(start, min(start + job.duration, instance.horizon)):
                    usage[r][t] += d
        for r, cap in enumerate(instance.capacities):
            for t in range(instance.horizon):
                if usage[r][t] > cap:
                    violations.append(CapacityViolation(r, t, usage[r][t], cap))

    if instance.deadline is not None and placed:
        completion = max(placed[j] + durations[j] for j in placed)
        if completion > instance.deadline:
            violations.append(DeadlineViolation(completion, instance.deadline))

    makespan: Optional[int] = None
    if ids <= set(starts):
        makespan = max(starts[j.id] + j.duration for j in instance.jobs)

    violations.sort(key=lambda v: (v._rank, v._key()))
    feasible = not violations
    optimal: Optional[bool] = None
    if oracle_makespan is not None and makespan is not None:
        optimal = feasible and makespan == oracle_makespan
    return Verdict(
        feasible=feasible,
        violations=tuple(violations),
        makespan=makespan,
        optimal=optimal,
    )

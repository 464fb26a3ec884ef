import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from schedloop.core import (
    CapacityViolation,
    DeadlineViolation,
    InvalidInstanceError,
    Job,
    MissingJob,
    NegativeStart,
    PrecedenceViolation,
    ProblemInstance,
    Schedule,
    ScheduleCoverageError,
    UnknownJob,
    resource_profile,
    verify,
)

from brute import brute_feasible


def test_chain_feasible(chain_instance):
    verdict = verify(chain_instance, Schedule({"A": 0, "B": 3}))
    assert verdict.feasible
    assert verdict.violations == ()
    assert verdict.makespan == 5


def test_chain_precedence_violation(chain_instance):
    verdict = verify(chain_instance, Schedule({"A": 0, "B": 2}))
    assert not verdict.feasible
    assert verdict.violations == (PrecedenceViolation("A", "B"),)
    # makespan is max completion over the (fully placed) jobs
    assert verdict.makespan == 4


def test_capacity_overlap(capacity_instance):
    verdict = verify(capacity_instance, Schedule({"A": 0, "B": 1}))
    assert not verdict.feasible
    assert verdict.violations == (CapacityViolation(0, 1, 2, 1),)


def test_capacity_serial_optimal(capacity_instance):
    verdict = verify(
        capacity_instance, Schedule({"A": 0, "B": 2}), oracle_makespan=4
    )
    assert verdict.feasible
    assert verdict.makespan == 4
    assert verdict.optimal is True


def test_suboptimal_flag(chain_instance):
    verdict = verify(chain_instance, Schedule({"A": 0, "B": 3}), oracle_makespan=4)
    assert verdict.feasible
    assert verdict.optimal is False


def test_missing_and_unknown_jobs(chain_instance):
    verdict = verify(chain_instance, Schedule({"A": 0, "C": 1}))
    assert not verdict.feasible
    assert MissingJob("B") in verdict.violations
    assert UnknownJob("C") in verdict.violations
    assert verdict.makespan is None  # B was never placed


def test_negative_start(chain_instance):
    verdict = verify(chain_instance, Schedule({"A": -1, "B": 3}))
    assert NegativeStart("A") in verdict.violations


def test_deadline_violation(deadline_instance):
    verdict = verify(deadline_instance, Schedule({"A": 0, "B": 2}))
    assert verdict.violations == (DeadlineViolation(4, 3),)


def test_deadline_relaxation_monotone(deadline_instance):
    schedule = Schedule({"A": 0, "B": 2})
    relaxed = ProblemInstance(
        instance_id="capdl-relaxed",
        tier=3,
        jobs=deadline_instance.jobs,
        capacities=deadline_instance.capacities,
        deadline=None,
        horizon=deadline_instance.horizon,
    )
    assert not verify(deadline_instance, schedule).feasible
    assert verify(relaxed, schedule).feasible


def test_violations_sorted_deterministically(capacity_instance):
    verdict1 = verify(capacity_instance, Schedule({"A": 0, "B": 0}))
    verdict2 = verify(capacity_instance, Schedule({"B": 0, "A": 0}))
    assert verdict1 == verdict2
    assert [v.time for v in verdict1.violations] == [0, 1]


def test_resource_profile_examples(capacity_instance, chain_instance):
    assert resource_profile(capacity_instance, Schedule({"A": 0, "B": 2})) == [
        [1, 1, 1, 1]
    ]
    assert resource_profile(capacity_instance, Schedule({"A": 0, "B": 1})) == [
        [1, 2, 1, 0]
    ]
    assert resource_profile(chain_instance, Schedule({"A": 0, "B": 3})) == []


def test_resource_profile_rejects_bad_coverage(capacity_instance):
    with pytest.raises(ScheduleCoverageError):
        resource_profile(capacity_instance, Schedule({"A": 0}))
    with pytest.raises(ScheduleCoverageError):
        resource_profile(capacity_instance, Schedule({"A": 0, "B": -1}))


def test_capacity_violations_match_profile(capacity_instance):
    schedule = Schedule({"A": 0, "B": 1})
    verdict = verify(capacity_instance, schedule)
    usage = resource_profile(capacity_instance, schedule)
    for v in verdict.violations:
        assert isinstance(v, CapacityViolation)
        assert usage[v.resource][v.time] == v.usage
        assert v.usage > v.capacity


def test_instance_invariants_rejected():
    with pytest.raises(InvalidInstanceError):
        Job("A", 0)
    with pytest.raises(InvalidInstanceError):
        ProblemInstance("x", 0, (Job("A", 1), Job("A", 2)), horizon=3)
    with pytest.raises(InvalidInstanceError):
        ProblemInstance("x", 0, (Job("A", 1),), (("A", "B"),), horizon=1)
    with pytest.raises(InvalidInstanceError):
        ProblemInstance(
            "x", 0, (Job("A", 1), Job("B", 1)),
            (("A", "B"), ("B", "A")), horizon=2,
        )
    with pytest.raises(InvalidInstanceError):
        # demand exceeds capacity: trivially infeasible, rejected up front
        ProblemInstance("x", 2, (Job("A", 1, (2,)),), capacities=(1,), horizon=1)
    with pytest.raises(InvalidInstanceError):
        ProblemInstance("x", 0, (Job("A", 3),), horizon=2)


@st.composite
def small_instance_and_schedule(draw):
    n = draw(st.integers(1, 4))
    ids = [chr(ord("A") + i) for i in range(n)]
    durations = [draw(st.integers(1, 3)) for _ in ids]
    n_res = draw(st.integers(0, 2))
    capacities = tuple(draw(st.integers(1, 3)) for _ in range(n_res))
    jobs = tuple(
        Job(i, d, tuple(draw(st.integers(0, c)) for c in capacities))
        for i, d in zip(ids, durations)
    )
    edges = []
    for a in range(n):
        for b in range(a + 1, n):
            if draw(st.booleans()):
                edges.append((ids[a], ids[b]))
    horizon = sum(durations)
    deadline = draw(st.one_of(st.none(), st.integers(1, horizon)))
    instance = ProblemInstance(
        instance_id="prop",
        tier=0,
        jobs=jobs,
        precedence=tuple(edges),
        capacities=capacities,
        deadline=deadline,
        horizon=horizon,
    )
    starts = {i: draw(st.integers(-1, horizon)) for i in ids}
    return instance, Schedule(starts)


@given(small_instance_and_schedule())
@settings(max_examples=300, deadline=None)
def test_verify_matches_brute_force(case):
    instance, schedule = case
    verdict = verify(instance, schedule)
    assert verdict.feasible == brute_feasible(instance, schedule)
    # pure function: same inputs, structurally equal verdicts
    assert verify(instance, schedule) == verdict

import numpy as np
import pytest
from conftest import make_instance, random_instance, random_plan
from hypothesis import given, settings
from hypothesis import strategies as st

from wtsched.core import (
    Instance,
    InvalidInstanceError,
    InvalidPlanError,
    SequencePlan,
    TimedSchedule,
    evaluate_sequential,
    max_concurrent_setups,
    validate,
    weighted_tardiness,
)
from wtsched.resalloc import allocate_exact


@pytest.mark.parametrize("c,d,w,expected", [(10, 10, 7, 0), (12, 10, 3, 6), (4, 10, 5, 0)])
def test_weighted_tardiness(c, d, w, expected):
    assert weighted_tardiness(c, d, w) == expected


def two_job_single_machine():
    # a = 0, b = 1; s_ab = 4
    return make_instance(p=[[3], [2]], d=[3, 5], w=[1, 1], WR=1, setups={(0, 1, 0): 4})


def test_evaluate_sequential_hand_timeline():
    inst = two_job_single_machine()
    sched = evaluate_sequential(inst, SequencePlan.from_lists([[0, 1]]))
    assert sched.completion == (3, 9)
    assert sched.setup_start == (0, 3)
    assert sched.setup_end == (0, 7)
    assert sched.objective == 4
    assert sched.proven_optimal_allocation  # WR == |M|


def test_empty_machine_contributes_nothing():
    inst = make_instance(p=[[3, 3], [2, 2]], d=[3, 5], w=[1, 1], WR=1, setups={(0, 1, 0): 4, (0, 1, 1): 4})
    a = evaluate_sequential(inst, SequencePlan.from_lists([[0, 1], []]))
    b = evaluate_sequential(inst, SequencePlan.from_lists([[], [0, 1]]))
    assert a.objective == b.objective == 4
    assert not a.proven_optimal_allocation


def test_sequential_equals_exact_when_workers_unlimited():
    rng = np.random.default_rng(3)
    for _ in range(30):
        inst = random_instance(rng, 6, 3, WR=3)
        plan = random_plan(rng, 6, 3)
        assert evaluate_sequential(inst, plan).objective == allocate_exact(inst, plan).objective


def test_plan_must_be_partition():
    inst = two_job_single_machine()
    with pytest.raises(InvalidPlanError):
        evaluate_sequential(inst, SequencePlan.from_lists([[0]]))
    with pytest.raises(InvalidPlanError):
        evaluate_sequential(inst, SequencePlan.from_lists([[0, 1, 1]]))


@pytest.mark.parametrize(
    "change",
    [
        {"WR": 0},
        {"WR": 3},
        {"w": [0, 1]},
        {"d": [-1, 5]},
        {"s0": -2},
        {"p": [[3], [-2]]},
    ],
)
def test_instance_invariants(change):
    inst = two_job_single_machine()
    with pytest.raises(InvalidInstanceError):
        inst.replace(**change)


def test_instance_arrays_are_read_only():
    inst = two_job_single_machine()
    with pytest.raises(ValueError):
        inst.p[0, 0] = 9


def test_instance_dict_round_trip():
    inst = two_job_single_machine()
    back = Instance.from_dict(inst.to_dict())
    assert back.to_dict() == inst.to_dict()


def test_validate_accepts_sequential_full_workers():
    rng = np.random.default_rng(5)
    for _ in range(20):
        inst = random_instance(rng, 5, 2, WR=2)
        sched = evaluate_sequential(inst, random_plan(rng, 5, 2))
        assert validate(inst, sched).feasible


def test_validate_flags_resource_overlap(contention):
    inst, plan = contention
    # both setups 4..9 on distinct machines with a single worker
    sched = TimedSchedule.from_times(inst, [0, 1, 0, 1], [0, 0, 4, 4], [0, 0, 9, 9], [4, 4, 12, 12])
    report = validate(inst, sched)
    assert not report.feasible
    assert "resource-capacity" in report.kinds()


def test_validate_flags_tampered_objective(contention):
    inst, plan = contention
    sched = allocate_exact(inst, plan)
    bad = TimedSchedule(sched.machine, sched.setup_start, sched.setup_end, sched.completion, sched.objective + 1)
    assert validate(inst, bad).kinds() == {"objective-mismatch"}


def test_validate_flags_wrong_durations_and_precedence(contention):
    inst, plan = contention
    s = allocate_exact(inst, plan)
    short = TimedSchedule.from_times(
        inst, s.machine, s.setup_start, [s.setup_end[0], s.setup_end[1], s.setup_end[2] - 1, s.setup_end[3]],
        [s.completion[0], s.completion[1], s.completion[2] - 1, s.completion[3]],
    )
    assert "setup-duration" in validate(inst, short).kinds()
    early = TimedSchedule.from_times(
        inst, s.machine, [0, 0, 3, s.setup_start[3]], [0, 0, 8, s.setup_end[3]], [4, 4, 11, s.completion[3]]
    )
    assert "precedence" in validate(inst, early).kinds()


def test_max_concurrent_setups_half_open():
    assert max_concurrent_setups([(0, 5), (5, 9)])[0] == 1
    assert max_concurrent_setups([(0, 5), (4, 9), (4, 6)]) == (3, 4)
    assert max_concurrent_setups([(3, 3), (3, 3)])[0] == 0


def test_plan_recovered_from_schedule(contention):
    inst, plan = contention
    assert allocate_exact(inst, plan).plan(2) == plan


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10_000))
def test_sequential_is_lower_bound_and_integral(seed):
    rng = np.random.default_rng(seed)
    inst = random_instance(rng, 5, 3)
    plan = random_plan(rng, 5, 3)
    seq = evaluate_sequential(inst, plan)
    exact = allocate_exact(inst, plan)
    assert 0 <= seq.objective <= exact.objective
    assert isinstance(seq.objective, int)

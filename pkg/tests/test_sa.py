import math

import pytest
from conftest import BIG, make_instance

from wtsched.core import SequencePlan, evaluate_sequential, validate
from wtsched.heuristics.atcs import atcs_run
from wtsched.heuristics.sa import (
    SaLog,
    SaParams,
    acceptance_probability,
    expected_evaluations,
    sa_external_swap,
    sa_internal_swap,
    sa_run,
)
from wtsched.instgen import GenConfig, generate


def test_acceptance_probability():
    assert acceptance_probability(10, 500) == pytest.approx(math.exp(-0.02))
    assert acceptance_probability(10, 500) == pytest.approx(0.9802, abs=1e-4)
    assert acceptance_probability(-3, 1) == 1.0


def test_external_noop_when_all_zero():
    plan = SequencePlan.from_lists([[0, 1], [2, 3]])
    new, changed = sa_external_swap(plan, [0, 0, 0, 0])
    assert not changed and new == plan


def test_external_moves_tardy_job():
    # m1 holds the only tardy job (2); m0's least tardy job is 0
    plan = SequencePlan.from_lists([[0, 1], [2, 3]])
    new, changed = sa_external_swap(plan, [0, 1, 9, 0])
    assert changed
    assert new.to_lists() == [[2, 1], [3, 0]]


def test_external_empty_machine_is_noop():
    plan = SequencePlan.from_lists([[], [0, 1]])
    assert sa_external_swap(plan, [3, 4]) == (plan, False)


def test_internal_two_jobs_reverse():
    plan = SequencePlan.from_lists([[0], [1, 2]])
    new, changed = sa_internal_swap(plan, [0, 1, 5])
    assert changed and new.to_lists() == [[0], [2, 1]]


def test_internal_all_equal_swaps_smallest_and_largest():
    plan = SequencePlan.from_lists([[3, 0, 2, 1], []])
    new, changed = sa_internal_swap(plan, [1, 1, 1, 1])
    assert changed and new.to_lists() == [[0, 3, 2, 1], []]


def test_internal_touches_only_costliest_machine():
    plan = SequencePlan.from_lists([[0, 1, 2], [3, 4, 5]])
    new, _ = sa_internal_swap(plan, [0, 1, 0, 7, 2, 9])
    assert new.seq[0] == plan.seq[0]
    assert sorted(new.seq[1]) == sorted(plan.seq[1])
    assert new.seq[1] == (3, 5, 4)


def test_internal_single_job_noop():
    plan = SequencePlan.from_lists([[0], [1]])
    assert sa_internal_swap(plan, [5, 1]) == (plan, False)


def test_evaluation_count_formula():
    params = SaParams()
    levels = math.ceil(math.log(params.T_cry / params.T0) / math.log(params.q))
    assert expected_evaluations(params) == params.IT * levels == 2950
    inst = generate(GenConfig(machines=2, jobs_multiplier=5, seed=1))
    log = SaLog()
    sa_run(inst, atcs_run(inst), params, log=log)
    assert log.evaluations == 2950
    assert log.temperatures == levels


def test_start_equals_stop_returns_initial():
    inst = generate(GenConfig(machines=2, jobs_multiplier=5, seed=1))
    start = atcs_run(inst)
    log = SaLog()
    assert sa_run(inst, start, SaParams(T0=1, T_cry=1), log=log) == start
    assert log.evaluations == 0


def test_zero_initial_stays_zero():
    inst = make_instance(p=[[1, 1], [1, 1], [1, 1]], d=[BIG] * 3, w=[1] * 3, WR=1)
    start = evaluate_sequential(inst, SequencePlan.from_lists([[0, 1], [2]]))
    assert sa_run(inst, start, SaParams(T0=20, q=0.5, IT=5)).objective == 0


def test_best_monotone_and_valid():
    inst = generate(GenConfig(machines=3, jobs_multiplier=5, seed=4))
    start = atcs_run(inst)
    log = SaLog()
    best = sa_run(inst, start, SaParams(seed=3), log=log)
    hist = log.best_history
    assert hist[0] == start.objective and hist[-1] == best.objective
    assert all(a >= b for a, b in zip(hist, hist[1:]))
    assert validate(inst, best).feasible


def test_params_validation():
    with pytest.raises(ValueError):
        SaParams(q=1.0)
    with pytest.raises(ValueError):
        SaParams(IT=0)

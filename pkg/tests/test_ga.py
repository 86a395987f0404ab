import itertools

import numpy as np
import pytest
from conftest import BIG, make_instance

from wtsched.core import SchedulingError, SequencePlan, evaluate_sequential, validate
from wtsched.heuristics.ga import GaLog, GaParams, ga_crossover, ga_decode, ga_mutate, ga_run
from wtsched.instgen import GenConfig, generate
from wtsched.resalloc import allocate_exact


def test_crossover_reference_case():
    o1, o2 = ga_crossover([1, 2, 3, 4, 5], [3, 1, 5, 2, 4], 2)
    assert o1 == (1, 3, 5, 2, 4)
    assert o2 == (1, 2, 3, 4, 5)  # 3 dropped from the head, 2 inserted at the cut


def test_crossover_identical_parents():
    p = (4, 0, 2, 1, 3)
    for k in range(1, 5):
        assert ga_crossover(p, p, k) == (p, p)


def test_crossover_last_split():
    o1, o2 = ga_crossover([0, 1, 2, 3], [3, 2, 1, 0], 3)
    assert o1 == (1, 2, 3, 0)
    assert o2 == (2, 1, 0, 3)


def test_crossover_rejects_bad_split():
    with pytest.raises(ValueError):
        ga_crossover([0, 1, 2], [2, 1, 0], 0)
    with pytest.raises(ValueError):
        ga_crossover([0, 1, 2], [2, 1, 0], 3)


@pytest.mark.parametrize("n", [2, 3, 4, 5, 6])
def test_crossover_total_exhaustive(n):
    perms = list(itertools.permutations(range(n)))
    target = list(range(n))
    for a in perms:
        for b in perms:
            for k in range(1, n):
                for child in ga_crossover(a, b, k):
                    assert sorted(child) == target


def test_mutation_pair_reverses():
    rng = np.random.default_rng(0)
    assert ga_mutate((0, 1), rng) == (1, 0)


def test_mutation_always_changes_and_preserves():
    for seed in range(1000):
        rng = np.random.default_rng(seed)
        genes = tuple(range(7))
        out = ga_mutate(genes, rng)
        assert out != genes and sorted(out) == list(genes)
        assert sum(a != b for a, b in zip(out, genes)) == 2


def test_decode_single_machine_keeps_order():
    inst = generate(GenConfig(machines=2, jobs_multiplier=3, seed=1))
    one = inst.replace(p=inst.p[:, :1], s=inst.s[:, :, :1], WR=1)
    genes = [3, 1, 5, 0, 2, 4]
    res = ga_decode(genes, one, None)
    assert res.plan == SequencePlan.from_lists([genes])
    assert res.fitness == evaluate_sequential(one, res.plan).objective


def test_decode_full_workers_is_sequential():
    inst = generate(GenConfig(machines=3, jobs_multiplier=3, wr_mode="full", seed=2))
    res = ga_decode(list(range(9)), inst, cutoff=1)
    assert not res.pruned
    assert res.fitness == evaluate_sequential(inst, res.plan).objective


def test_decode_tie_breaks_by_completion_then_machine():
    inst = make_instance(p=[[5, 3, 3]], d=[BIG], w=[1], WR=1)
    assert ga_decode([0], inst, None).plan.to_lists() == [[], [0], []]


def test_decode_contention(contention):
    inst, _ = contention
    genes = [0, 1, 2, 3]
    res = ga_decode(genes, inst, cutoff=1)
    # contention-free value 0 is below the cutoff, so the exact value is computed
    assert not res.pruned
    assert res.fitness == 5 == allocate_exact(inst, res.plan).objective
    pruned = ga_decode(genes, inst, cutoff=0)
    assert pruned.pruned and pruned.fitness == 0


def test_decode_rejects_non_permutation():
    inst = generate(GenConfig(machines=2, jobs_multiplier=2, seed=1))
    with pytest.raises(SchedulingError):
        ga_decode([0, 1, 1, 2], inst, None)


def test_zero_generations_returns_initial_best():
    inst = generate(GenConfig(machines=2, jobs_multiplier=5, seed=3))
    log = GaLog()
    sched = ga_run(inst, GaParams(population=12, generations=0, seed=5), log=log)
    assert log.generations == 0
    assert sched.objective == log.best_history[0]


def test_best_never_worsens_and_schedule_valid():
    inst = generate(GenConfig(machines=3, jobs_multiplier=5, seed=6))
    log = GaLog()
    sched = ga_run(inst, GaParams(population=20, generations=15, seed=2), log=log)
    hist = log.best_history
    assert all(a >= b for a, b in zip(hist, hist[1:]))
    assert sched.objective == hist[-1]
    assert validate(inst, sched).feasible


def test_same_seed_same_result():
    inst = generate(GenConfig(machines=2, jobs_multiplier=5, seed=3))
    params = GaParams(population=16, generations=8, seed=9)
    assert ga_run(inst, params) == ga_run(inst, params)


def test_pruning_audit_sound():
    inst = generate(GenConfig(machines=5, jobs_multiplier=5, seed=1))
    log = GaLog(audit=True)
    ga_run(inst, GaParams(population=20, generations=10, seed=1), log=log)
    assert log.pruned == len(log.audit_pairs) > 0
    assert all(exact >= cutoff for cutoff, exact in log.audit_pairs)


@pytest.mark.parametrize("seed", range(8))
def test_reaches_best_decodable_plan_on_tiny(seed):
    inst = generate(GenConfig(machines=2 + seed % 2, jobs_multiplier=2, seed=seed))
    best = min(ga_decode(p, inst, None).fitness for p in itertools.permutations(inst.jobs))
    assert ga_run(inst, GaParams(population=40, generations=40, seed=seed)).objective == best

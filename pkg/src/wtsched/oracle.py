"""Exhaustive reference solver for very small instances.

Every plan (assignment plus per-machine order) is visited in lexicographic
order of its sequences and timed by enumerating all worker acquisition
orders. The only shortcut is skipping a plan whose contention-free value
already reaches the incumbent, which is sound because contention can only
delay setups.
"""

from __future__ import annotations

import itertools
from collections.abc import Iterator

from wtsched.core import Instance, SchedulingError, SequencePlan, TimedSchedule, evaluate_sequential
from wtsched.resalloc import allocate_bruteforce

ORACLE_MAX_JOBS = 6
ORACLE_MAX_MACHINES = 3


class OracleSizeError(SchedulingError, ValueError):
    pass


def all_plans(n_jobs: int, n_machines: int) -> Iterator[SequencePlan]:
    """All plans, ordered lexicographically by their sequence tuples."""
    plans = []
    for assign in itertools.product(range(n_machines), repeat=n_jobs):
        groups = [[j for j in range(n_jobs) if assign[j] == m] for m in range(n_machines)]
        for orders in itertools.product(*(itertools.permutations(g) for g in groups)):
            plans.append(tuple(orders))
    plans.sort()
    for seq in plans:
        yield SequencePlan(seq)


def solve_exact_tiny(
    instance: Instance,
    max_jobs: int = ORACLE_MAX_JOBS,
    max_machines: int = ORACLE_MAX_MACHINES,
) -> TimedSchedule:
    n, k = instance.n_jobs, instance.n_machines
    if n > max_jobs or k > max_machines:
        raise OracleSizeError(
            f"instance {n}x{k} exceeds the oracle cap of {max_jobs} jobs, {max_machines} machines"
        )
    unlimited = instance.WR >= k
    best: TimedSchedule | None = None
    for plan in all_plans(n, k):
        seq = evaluate_sequential(instance, plan)
        if best is not None and seq.objective >= best.objective:
            continue
        sched = seq if unlimited else allocate_bruteforce(instance, plan)
        if best is None or sched.objective < best.objective:
            best = sched
    assert best is not None
    return TimedSchedule(
        best.machine, best.setup_start, best.setup_end, best.completion, best.objective, True
    )

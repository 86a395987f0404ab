"""Simulated annealing over machine sequences.

Two moves alternate, starting with the external one:

* external: the least-tardy job of the cheapest machine trades places with
  the most-tardy job of the costliest machine (the latter goes to the front
  of the cheapest machine, the former to the back of the costliest);
* internal: on the costliest machine, the most- and least-tardy jobs swap
  positions.

Tardiness here means weighted tardiness, read from the schedule of the
current solution.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from wtsched.core import Instance, SequencePlan, TimedSchedule
from wtsched.relaxation import mip_primal
from wtsched.resalloc import DEFAULT_LIMITS, AllocLimits


@dataclass(frozen=True)
class SaParams:
    T0: float = 500.0
    T_cry: float = 1.0
    q: float = 0.9
    IT: int = 50
    seed: int = 0

    def __post_init__(self) -> None:
        if not 0 < self.q < 1:
            raise ValueError("cooling factor q must lie in (0, 1)")
        if self.IT < 1:
            raise ValueError("IT must be >= 1")
        if self.T_cry <= 0 or self.T0 <= 0:
            raise ValueError("temperatures must be positive")


@dataclass
class SaLog:
    evaluations: int = 0
    accepted: int = 0
    improved: int = 0
    noops: int = 0
    temperatures: int = 0
    best_history: list[int] = field(default_factory=list)


def expected_evaluations(params: SaParams) -> int:
    """Candidate count of a full run: IT per temperature level."""
    levels, t = 0, params.T0
    while t > params.T_cry:
        t *= params.q
        levels += 1
    return levels * params.IT


def acceptance_probability(delta: float, temperature: float) -> float:
    if delta <= 0:
        return 1.0
    return math.exp(-delta / temperature)


def _machine_costs(plan: SequencePlan, costs: list[int]) -> list[int]:
    return [sum(costs[j] for j in jobs) for jobs in plan.seq]


def _argmin(values, keys):
    return min(keys, key=lambda x: (values[x], x))


def _argmax(values, keys):
    return min(keys, key=lambda x: (-values[x], x))


def sa_external_swap(plan: SequencePlan, costs: list[int]) -> tuple[SequencePlan, bool]:
    """Return ``(new plan, changed)``; ``costs`` are per-job weighted tardiness."""
    per_machine = _machine_costs(plan, costs)
    machines = range(len(plan.seq))
    hi = _argmax(per_machine, machines)
    lo = _argmin(per_machine, machines)
    if hi == lo or not plan.seq[hi] or not plan.seq[lo]:
        return plan, False
    j = _argmax(costs, plan.seq[hi])
    i = _argmin(costs, plan.seq[lo])
    seq = plan.to_lists()
    seq[hi].remove(j)
    seq[lo].remove(i)
    seq[lo].insert(0, j)
    seq[hi].append(i)
    return SequencePlan.from_lists(seq), True


def sa_internal_swap(plan: SequencePlan, costs: list[int]) -> tuple[SequencePlan, bool]:
    per_machine = _machine_costs(plan, costs)
    m = _argmax(per_machine, range(len(plan.seq)))
    jobs = plan.seq[m]
    if len(jobs) < 2:
        return plan, False
    z = _argmax(costs, jobs)
    k = _argmin(costs, jobs)
    if z == k:
        # All costs equal: pair the smallest id with the largest.
        k = max(jobs)
    seq = plan.to_lists()
    a, b = seq[m].index(z), seq[m].index(k)
    seq[m][a], seq[m][b] = seq[m][b], seq[m][a]
    return SequencePlan.from_lists(seq), True


def sa_run(
    instance: Instance,
    initial: TimedSchedule,
    params: SaParams = SaParams(),
    limits: AllocLimits = DEFAULT_LIMITS,
    log: SaLog | None = None,
) -> TimedSchedule:
    log = log if log is not None else SaLog()
    rng = np.random.default_rng(params.seed)
    k = instance.n_machines
    cache: dict[tuple, TimedSchedule] = {}

    def evaluate(plan: SequencePlan) -> TimedSchedule:
        # Every candidate counts as an evaluation; repeats are served from cache.
        log.evaluations += 1
        sched = cache.get(plan.seq)
        if sched is None:
            sched = mip_primal(instance, plan, limits)
            cache[plan.seq] = sched
        return sched

    cur_plan = initial.plan(k)
    cur = initial
    best = initial
    cur_costs = cur.job_costs(instance)
    log.best_history.append(best.objective)

    t_c = params.T0
    external = True
    while t_c > params.T_cry:
        for _ in range(params.IT):
            move = sa_external_swap if external else sa_internal_swap
            external = not external
            cand_plan, changed = move(cur_plan, cur_costs)
            if not changed:
                log.noops += 1
            cand = evaluate(cand_plan)
            r = rng.random()
            if cand.objective < best.objective:
                best = cur = cand
                cur_plan = cand_plan
                log.improved += 1
            elif r < acceptance_probability(cand.objective - cur.objective, t_c):
                cur = cand
                cur_plan = cand_plan
                log.accepted += 1
            cur_costs = cur.job_costs(instance)
            log.best_history.append(best.objective)
        t_c *= params.q
        log.temperatures += 1
    return best

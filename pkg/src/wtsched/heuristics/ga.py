"""Permutation-coded genetic algorithm.

A chromosome is a job permutation. Decoding walks it left to right and puts
each job on the machine where its weighted tardiness, timed without worker
contention, grows least. That contention-free total never exceeds the true
value, so when it already reaches the population's worst exact fitness the
worker allocation is skipped and the chromosome is marked as pruned.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

import numpy as np

from wtsched.core import Instance, SchedulingError, SequencePlan, TimedSchedule
from wtsched.relaxation import mip_primal
from wtsched.resalloc import DEFAULT_LIMITS, AllocLimits, allocate_exact


@dataclass(frozen=True)
class GaParams:
    population: int = 100
    generations: int = 150
    p_crossover: float = 0.5
    p_mutation: float = 0.1
    time_limit: float = 3600.0
    seed: int = 0


@dataclass
class Chromosome:
    genes: tuple[int, ...]
    fitness: int | None = None
    pruned: bool = False
    plan: SequencePlan | None = None


@dataclass
class GaLog:
    """Counters filled in by :func:`ga_run`.

    With ``audit`` on, pruned chromosomes are also allocated exactly and
    ``(cutoff, exact fitness)`` pairs are collected in ``audit_pairs``.
    """

    audit: bool = False
    cp_calls: int = 0
    pruned: int = 0
    decoded: int = 0
    generations: int = 0
    best_history: list[int] = field(default_factory=list)
    audit_pairs: list[tuple[int, int]] = field(default_factory=list)


@dataclass(frozen=True)
class Decoded:
    fitness: int
    plan: SequencePlan
    pruned: bool
    schedule: TimedSchedule | None = None


def ga_decode(
    genes,
    instance: Instance,
    cutoff: int | None,
    limits: AllocLimits = DEFAULT_LIMITS,
) -> Decoded:
    n, k = instance.n_jobs, instance.n_machines
    genes = tuple(int(g) for g in genes)
    if sorted(genes) != list(range(n)):
        raise SchedulingError("chromosome is not a permutation of the jobs")
    p, s, d, w = instance.p_list, instance.s_list, instance.d_list, instance.w_list
    loads = [0] * k
    last: list[int | None] = [None] * k
    seq: list[list[int]] = [[] for _ in range(k)]
    total = 0
    for j in genes:
        best = None
        for m in range(k):
            c = loads[m] + p[j][m] + (instance.s0 if last[m] is None else s[last[m]][j][m])
            key = (w[j] * max(0, c - d[j]), c, m)
            if best is None or key < best:
                best = key
        cost, c, m = best
        seq[m].append(j)
        loads[m] = c
        last[m] = j
        total += cost
    plan = SequencePlan.from_lists(seq)
    if instance.WR >= k:
        return Decoded(total, plan, False)
    if cutoff is not None and total >= cutoff:
        return Decoded(total, plan, True)
    sched = allocate_exact(instance, plan, limits)
    return Decoded(sched.objective, plan, False, sched)


def _repair(left: list[int], right: list[int], donor: list[int]) -> list[int]:
    in_right = set(right)
    kept = [g for g in left if g not in in_right]
    present = set(kept) | in_right
    rank = {g: i for i, g in enumerate(donor)}
    missing = sorted((g for g in donor if g not in present), key=rank.__getitem__)
    return kept + missing + right


def ga_crossover(p1, p2, k: int) -> tuple[tuple[int, ...], tuple[int, ...]]:
    """One-point crossover exchanging tails, then repair.

    Genes of the kept head that reappear in the received tail are dropped;
    genes now absent are inserted at the cut, in the order they appear in
    the head's parent.
    """
    p1, p2 = list(p1), list(p2)
    if len(p1) != len(p2) or len(p1) < 2:
        raise ValueError("parents must have equal length >= 2")
    if not 1 <= k <= len(p1) - 1:
        raise ValueError(f"split point must lie in [1, {len(p1) - 1}]")
    o1 = _repair(p1[:k], p2[k:], p1)
    o2 = _repair(p2[:k], p1[k:], p2)
    return tuple(o1), tuple(o2)


def ga_mutate(genes, rng: np.random.Generator) -> tuple[int, ...]:
    """Swap two distinct, uniformly drawn positions."""
    genes = list(genes)
    if len(genes) < 2:
        raise ValueError("mutation needs at least two genes")
    a, b = rng.choice(len(genes), size=2, replace=False)
    genes[a], genes[b] = genes[b], genes[a]
    return tuple(genes)


def _rank_key(ch: Chromosome, order: int):
    return (ch.fitness, ch.pruned, order)


def ga_run(
    instance: Instance,
    params: GaParams = GaParams(),
    limits: AllocLimits = DEFAULT_LIMITS,
    log: GaLog | None = None,
) -> TimedSchedule:
    log = log if log is not None else GaLog()
    rng = np.random.default_rng(params.seed)
    n = instance.n_jobs
    t_end = time.perf_counter() + params.time_limit

    def decode(genes, cutoff) -> Chromosome:
        res = ga_decode(genes, instance, cutoff, limits)
        log.decoded += 1
        if res.pruned:
            log.pruned += 1
            if log.audit:
                exact = allocate_exact(instance, res.plan, limits).objective
                log.cp_calls += 1
                log.audit_pairs.append((cutoff, exact))
        elif instance.WR < instance.n_machines:
            log.cp_calls += 1
        return Chromosome(tuple(genes), res.fitness, res.pruned, res.plan)

    population = [decode(rng.permutation(n), None) for _ in range(params.population)]
    population.sort(key=lambda ch: _rank_key(ch, 0))
    log.best_history.append(population[0].fitness)

    generation = 0
    while generation < params.generations and time.perf_counter() < t_end:
        exact = [ch.fitness for ch in population if not ch.pruned]
        cutoff = max(exact) if exact else None
        pool = list(range(len(population)))
        offspring: list[Chromosome] = []
        while len(pool) >= 2 and time.perf_counter() < t_end:
            a, b = rng.choice(len(pool), size=2, replace=False)
            x, y = population[pool[a]], population[pool[b]]
            r_c = rng.random()
            # Crossover fires when the draw exceeds the threshold.
            if r_c > params.p_crossover and n >= 2:
                split = int(rng.integers(1, n))
                for child in ga_crossover(x.genes, y.genes, split):
                    if rng.random() < params.p_mutation:
                        child = ga_mutate(child, rng)
                    offspring.append(decode(child, cutoff))
            for idx in sorted((a, b), reverse=True):
                pool.pop(idx)
        merged = population + offspring
        ranked = sorted(range(len(merged)), key=lambda i: _rank_key(merged[i], i))
        population = [merged[i] for i in ranked[: params.population]]
        generation += 1
        log.best_history.append(population[0].fitness)
    log.generations = generation

    best = population[0]
    return mip_primal(instance, best.plan, limits)

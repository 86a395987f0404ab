"""Optimal allocation of setup workers to fixed machine sequences.

Given one job sequence per machine, every positive-length setup must hold
one of ``WR`` identical workers for its whole duration, may not start
before its machine predecessor completes, and the goal is to minimise total
weighted tardiness.

Search space
------------
Call the order in which setups seize a worker an *acquisition order*.
Replaying an order by starting each setup at
``max(machine ready time, earliest free worker, start of the previous setup
in the order)`` always gives a feasible schedule. Conversely, take any
feasible schedule, list its setups by start time and replay that list: by
induction each replayed start is no later than the original one, because
at the original start at most ``WR - 1`` earlier setups are still running.
Weighted tardiness is regular, so some optimal schedule is the replay of an
acquisition order, and enumerating all orders (:func:`allocate_bruteforce`)
is exact.

:func:`allocate_exact` walks the same tree depth first but only extends a
partial order with setups that

* would start strictly before the earliest possible end among all
  candidates (anything later can be moved in front without delaying the
  others, the classical active-schedule argument), and
* do not start at the same instant as the previous setup on a lower
  machine index (equal-time starts commute; machine index breaks the tie).

A left-shifted optimal schedule satisfies both rules when its setups are
listed by ``(start, machine)``, so the restricted tree still contains an
optimum. Branches are cut with a bound that times each machine's remaining
chain without contention, starting no earlier than the current worker
release time, which can never decrease along a branch.

Zero-length setups never hold a worker and are started as soon as their
machine is ready.
"""

from __future__ import annotations

import heapq
import time
from dataclasses import dataclass

from wtsched.core import Instance, SequencePlan, TimedSchedule, evaluate_sequential


@dataclass(frozen=True)
class AllocLimits:
    node_cap: int = 5_000_000
    time_cap: float = 10.0

    def __post_init__(self) -> None:
        if self.node_cap <= 0 or self.time_cap <= 0:
            raise ValueError("allocation limits must be positive")


DEFAULT_LIMITS = AllocLimits()


class _Chains:
    """Per-machine flattened sequence data for the allocation routines."""

    __slots__ = ("jobs", "sizes", "procs", "dues", "weights", "k", "n")

    def __init__(self, instance: Instance, plan: SequencePlan):
        plan.check(instance)
        p, s, d, w = instance.p_list, instance.s_list, instance.d_list, instance.w_list
        self.k = instance.n_machines
        self.n = instance.n_jobs
        self.jobs = [list(seq) for seq in plan.seq]
        self.sizes = []
        self.procs = []
        self.dues = []
        self.weights = []
        for m, seq in enumerate(plan.seq):
            self.sizes.append(
                [instance.s0 if i == 0 else s[seq[i - 1]][j][m] for i, j in enumerate(seq)]
            )
            self.procs.append([p[j][m] for j in seq])
            self.dues.append([d[j] for j in seq])
            self.weights.append([w[j] for j in seq])

    def positive_counts(self) -> list[int]:
        return [sum(1 for size in sizes if size > 0) for sizes in self.sizes]


def _to_schedule(
    instance: Instance, chains: _Chains, starts: list[list[int]], proven: bool
) -> TimedSchedule:
    n = instance.n_jobs
    machine = [0] * n
    start = [0] * n
    end = [0] * n
    completion = [0] * n
    for m in range(chains.k):
        for i, j in enumerate(chains.jobs[m]):
            machine[j] = m
            start[j] = starts[m][i]
            end[j] = start[j] + chains.sizes[m][i]
            completion[j] = end[j] + chains.procs[m][i]
    return TimedSchedule.from_times(instance, machine, start, end, completion, proven)


def replay_order(instance: Instance, plan: SequencePlan, order: list[int]) -> TimedSchedule:
    """Time ``plan`` with workers seized in ``order``.

    ``order`` lists a machine index once per positive-length setup on that
    machine, in the order the setups acquire a worker.
    """
    chains = _Chains(instance, plan)
    k = chains.k
    if sorted(order) != sorted(m for m, c in enumerate(chains.positive_counts()) for _ in range(c)):
        raise ValueError("order does not match the positive setups of the plan")
    ptr = [0] * k
    ready = [0] * k
    starts = [[0] * len(chains.jobs[m]) for m in range(k)]
    workers = [0] * instance.WR
    last = 0

    def flush(m: int) -> None:
        sizes = chains.sizes[m]
        while ptr[m] < len(sizes) and sizes[ptr[m]] == 0:
            starts[m][ptr[m]] = ready[m]
            ready[m] += chains.procs[m][ptr[m]]
            ptr[m] += 1

    for m in range(k):
        flush(m)
    for m in order:
        i = ptr[m]
        free = heapq.heappop(workers)
        start = max(ready[m], free, last)
        heapq.heappush(workers, start + chains.sizes[m][i])
        last = start
        starts[m][i] = start
        ready[m] = start + chains.sizes[m][i] + chains.procs[m][i]
        ptr[m] += 1
        flush(m)
    return _to_schedule(instance, chains, starts, proven=False)


def acquisition_orders(counts: list[int]):
    """Yield every distinct interleaving of ``counts[m]`` copies of each ``m``."""
    total = sum(counts)
    left = list(counts)
    order: list[int] = []

    def rec():
        if len(order) == total:
            yield list(order)
            return
        for m in range(len(left)):
            if left[m]:
                left[m] -= 1
                order.append(m)
                yield from rec()
                order.pop()
                left[m] += 1

    yield from rec()


def allocate_bruteforce(instance: Instance, plan: SequencePlan) -> TimedSchedule:
    """Exhaustive minimum over all acquisition orders. Exponential; tests only."""
    counts = _Chains(instance, plan).positive_counts()
    best: TimedSchedule | None = None
    for order in acquisition_orders(counts):
        sched = replay_order(instance, plan, order)
        if best is None or sched.objective < best.objective:
            best = sched
    assert best is not None
    return TimedSchedule(
        best.machine, best.setup_start, best.setup_end, best.completion, best.objective, True
    )


def allocate_greedy(instance: Instance, plan: SequencePlan) -> TimedSchedule:
    """Event-driven dispatching of setups to free workers.

    Whenever a worker is free and setups are ready, the ready setup whose job
    has the largest ``w / (slack + 1)`` starts, with
    ``slack = max(0, d - now - setup - processing)``; ties go to the lower
    job index.
    """
    chains = _Chains(instance, plan)
    k = chains.k
    ptr = [0] * k
    ready = [0] * k
    starts = [[0] * len(chains.jobs[m]) for m in range(k)]
    workers = [0] * instance.WR

    def flush(m: int) -> None:
        sizes = chains.sizes[m]
        while ptr[m] < len(sizes) and sizes[ptr[m]] == 0:
            starts[m][ptr[m]] = ready[m]
            ready[m] += chains.procs[m][ptr[m]]
            ptr[m] += 1

    for m in range(k):
        flush(m)
    while True:
        active = [m for m in range(k) if ptr[m] < len(chains.jobs[m])]
        if not active:
            break
        now = max(workers[0], min(ready[m] for m in active))
        best_m, best_key = -1, None
        for m in active:
            if ready[m] > now:
                continue
            i = ptr[m]
            slack = max(0, chains.dues[m][i] - now - chains.sizes[m][i] - chains.procs[m][i])
            key = (-chains.weights[m][i] / (slack + 1), chains.jobs[m][i])
            if best_key is None or key < best_key:
                best_m, best_key = m, key
        m, i = best_m, ptr[best_m]
        heapq.heapreplace(workers, now + chains.sizes[m][i])
        starts[m][i] = now
        ready[m] = now + chains.sizes[m][i] + chains.procs[m][i]
        ptr[m] += 1
        flush(m)
    sched = _to_schedule(instance, chains, starts, proven=False)
    if instance.WR >= k:
        return TimedSchedule(
            sched.machine, sched.setup_start, sched.setup_end, sched.completion, sched.objective, True
        )
    return sched


class _LimitReached(Exception):
    pass


class _BranchAndBound:
    def __init__(self, instance: Instance, chains: _Chains, limits: AllocLimits):
        self.instance = instance
        self.c = chains
        self.limits = limits
        self.nodes = 0
        self.deadline = time.perf_counter() + limits.time_cap
        k = chains.k
        self.starts = [[0] * len(chains.jobs[m]) for m in range(k)]
        self.best_cost: int | None = None
        self.best_starts: list[list[int]] | None = None

    def tail(self, m: int, i: int, ready: int, floor: int) -> int:
        """Contention-free cost of machine ``m`` from position ``i`` on."""
        sizes, procs = self.c.sizes[m], self.c.procs[m]
        dues, weights = self.c.dues[m], self.c.weights[m]
        t = ready
        cost = 0
        for q in range(i, len(sizes)):
            size = sizes[q]
            if size and t < floor:
                t = floor
            t += size + procs[q]
            if t > dues[q]:
                cost += weights[q] * (t - dues[q])
        return cost

    def advance(self, m: int, i: int, start: int, ready_m: int) -> tuple[int, int, int]:
        """Start setup ``i`` of ``m`` at ``start`` and run through zero setups.

        Returns ``(next pointer, machine ready time, cost of fixed jobs)``.
        """
        sizes, procs = self.c.sizes[m], self.c.procs[m]
        dues, weights = self.c.dues[m], self.c.weights[m]
        starts = self.starts[m]
        cost = 0
        t = start
        while True:
            starts[i] = t
            t += sizes[i] + procs[i]
            if t > dues[i]:
                cost += weights[i] * (t - dues[i])
            i += 1
            if i >= len(sizes) or sizes[i]:
                return i, t, cost
            # Zero-length setup: starts as soon as the machine is free.

    def bound(self, ptr: list[int], ready: list[int], floor: int, fixed: int) -> int:
        total = fixed
        for m in range(self.c.k):
            if ptr[m] < len(self.c.sizes[m]):
                total += self.tail(m, ptr[m], ready[m], floor)
        return total

    def search(self, ptr, ready, workers, last, last_m, fixed, lb) -> None:
        self.nodes += 1
        if self.nodes >= self.limits.node_cap:
            raise _LimitReached
        if not self.nodes & 1023 and time.perf_counter() > self.deadline:
            raise _LimitReached
        c = self.c
        k = c.k
        free = workers[0]
        opts = []
        horizon = None
        for m in range(k):
            i = ptr[m]
            if i < len(c.sizes[m]):
                r = ready[m]
                s = r if r > free else free
                if s < last:
                    s = last
                e = s + c.sizes[m][i]
                opts.append((m, s))
                if horizon is None or e < horizon:
                    horizon = e
        if not opts:
            if self.best_cost is None or fixed < self.best_cost:
                self.best_cost = fixed
                self.best_starts = [list(row) for row in self.starts]
            return

        children = []
        for m, s in opts:
            if s >= horizon or (s == last and m < last_m):
                continue
            i = ptr[m]
            new_workers = list(workers)
            new_workers[0] = s + c.sizes[m][i]
            new_workers.sort()
            nptr, nready, cost = self.advance(m, i, s, ready[m])
            child_ptr = list(ptr)
            child_ptr[m] = nptr
            child_ready = list(ready)
            child_ready[m] = nready
            floor = new_workers[0] if new_workers[0] > s else s
            child_fixed = fixed + cost
            child_lb = self.bound(child_ptr, child_ready, floor, child_fixed)
            children.append((child_lb, m, s, child_ptr, child_ready, new_workers, child_fixed))
        children.sort(key=lambda ch: (ch[0], ch[2], ch[1]))
        for child_lb, m, s, child_ptr, child_ready, new_workers, child_fixed in children:
            if self.best_cost is not None and child_lb >= self.best_cost:
                break
            # advance() wrote start times for this child; redo it since siblings overwrite them.
            self.advance(m, ptr[m], s, ready[m])
            self.search(child_ptr, child_ready, new_workers, s, m, child_fixed, child_lb)


def allocate_exact(
    instance: Instance,
    plan: SequencePlan,
    limits: AllocLimits = DEFAULT_LIMITS,
    stats: dict | None = None,
) -> TimedSchedule:
    """Minimum weighted tardiness timing of ``plan`` under ``WR`` workers.

    The returned flag ``proven_optimal_allocation`` is False only when the
    node or time cap stopped the search; the schedule is then the best one
    found (never worse than :func:`allocate_greedy`). ``stats``, if given,
    receives ``nodes`` and ``proven``.
    """
    seq = evaluate_sequential(instance, plan)
    chains = _Chains(instance, plan)
    counts = chains.positive_counts()
    busy_machines = sum(1 for c in counts if c)
    if instance.WR >= busy_machines:
        # At most WR machines ever need a worker: capacity cannot bind.
        if stats is not None:
            stats.update(nodes=0, proven=True)
        return TimedSchedule(
            seq.machine, seq.setup_start, seq.setup_end, seq.completion, seq.objective, True
        )

    greedy = allocate_greedy(instance, plan)
    if greedy.objective == seq.objective:
        if stats is not None:
            stats.update(nodes=0, proven=True)
        return TimedSchedule(
            greedy.machine, greedy.setup_start, greedy.setup_end, greedy.completion,
            greedy.objective, True,
        )

    bb = _BranchAndBound(instance, chains, limits)
    bb.best_cost = greedy.objective
    k = chains.k
    ptr = [0] * k
    ready = [0] * k
    fixed = 0
    for m in range(k):
        if chains.sizes[m] and chains.sizes[m][0] == 0:
            ptr[m], ready[m], cost = bb.advance(m, 0, 0, 0)
            fixed += cost
    root_lb = bb.bound(ptr, ready, 0, fixed)
    proven = True
    if root_lb < bb.best_cost:
        try:
            bb.search(ptr, ready, [0] * instance.WR, 0, -1, fixed, root_lb)
        except _LimitReached:
            proven = False
    if stats is not None:
        stats.update(nodes=bb.nodes, proven=proven)
    if bb.best_starts is None:
        return TimedSchedule(
            greedy.machine, greedy.setup_start, greedy.setup_end, greedy.completion,
            greedy.objective, proven,
        )
    return _to_schedule(instance, chains, bb.best_starts, proven)

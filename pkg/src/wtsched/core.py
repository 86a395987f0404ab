"""Domain model, resource-free schedule evaluation and the feasibility checker.

Jobs and machines are identified by their 0-based index. All times are
non-negative integers; a setup of size 0 occupies no time instant and
therefore never holds a worker.
"""

from __future__ import annotations

from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from typing import Any

import numpy as np


class SchedulingError(Exception):
    """Base class for domain errors raised by this package."""


class InvalidInstanceError(SchedulingError, ValueError):
    pass


class InvalidPlanError(SchedulingError, ValueError):
    pass


def _frozen_int_array(values: Any, ndim: int, name: str) -> np.ndarray:
    arr = np.asarray(values)
    if arr.ndim != ndim:
        raise InvalidInstanceError(f"{name} must be {ndim}-dimensional, got shape {arr.shape}")
    if arr.size and not np.all(np.equal(np.mod(arr, 1), 0)):
        raise InvalidInstanceError(f"{name} must hold integer values")
    arr = arr.astype(np.int64, copy=True)
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Instance:
    """A scheduling instance.

    Attributes
    ----------
    p : ndarray, shape (n, k)
        Processing time of job ``j`` on machine ``m``.
    s : ndarray, shape (n, n, k)
        ``s[i, j, m]`` is the setup time of ``j`` when it directly follows
        ``i`` on ``m``. The diagonal is ignored.
    d, w : ndarray, shape (n,)
        Deadlines and (positive) weights.
    WR : int
        Number of setup workers; at most ``WR`` setups run at once.
    s0 : int
        Setup time of the first job on any machine.
    meta : mapping
        Free-form provenance (generator config, rounding rule, ...).
    """

    p: np.ndarray
    s: np.ndarray
    d: np.ndarray
    w: np.ndarray
    WR: int
    s0: int = 0
    meta: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        p = _frozen_int_array(self.p, 2, "p")
        n, k = p.shape
        s = _frozen_int_array(self.s, 3, "s") if n else np.zeros((0, 0, k), dtype=np.int64)
        d = _frozen_int_array(self.d, 1, "d")
        w = _frozen_int_array(self.w, 1, "w")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "s", s)
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "WR", int(self.WR))
        object.__setattr__(self, "s0", int(self.s0))
        object.__setattr__(self, "meta", dict(self.meta))

        if k < 1:
            raise InvalidInstanceError("an instance needs at least one machine")
        if s.shape != (n, n, k):
            raise InvalidInstanceError(f"s must have shape {(n, n, k)}, got {s.shape}")
        if d.shape != (n,) or w.shape != (n,):
            raise InvalidInstanceError("d and w must have one entry per job")
        if (p < 0).any() or (s < 0).any() or (d < 0).any() or self.s0 < 0:
            raise InvalidInstanceError("times must be non-negative")
        if (w < 1).any():
            raise InvalidInstanceError("weights must be >= 1")
        if not 1 <= self.WR <= k:
            raise InvalidInstanceError(f"WR must lie in [1, {k}], got {self.WR}")

    @property
    def n_jobs(self) -> int:
        return int(self.p.shape[0])

    @property
    def n_machines(self) -> int:
        return int(self.p.shape[1])

    @property
    def jobs(self) -> range:
        return range(self.n_jobs)

    @property
    def machines(self) -> range:
        return range(self.n_machines)

    # Plain-list views; inner loops index these far faster than numpy scalars.
    @cached_property
    def p_list(self) -> list[list[int]]:
        return self.p.tolist()

    @cached_property
    def s_list(self) -> list[list[list[int]]]:
        return self.s.tolist()

    @cached_property
    def d_list(self) -> list[int]:
        return self.d.tolist()

    @cached_property
    def w_list(self) -> list[int]:
        return self.w.tolist()

    def setup_time(self, prev: int | None, job: int, machine: int) -> int:
        """Setup duration of ``job`` on ``machine`` after ``prev`` (None = first)."""
        if prev is None:
            return self.s0
        return self.s_list[prev][job][machine]

    def replace(self, **changes: Any) -> Instance:
        fields = dict(p=self.p, s=self.s, d=self.d, w=self.w, WR=self.WR, s0=self.s0, meta=self.meta)
        fields.update(changes)
        return Instance(**fields)

    def to_dict(self) -> dict[str, Any]:
        return {
            "jobs": list(self.jobs),
            "machines": list(self.machines),
            "p": self.p.tolist(),
            "s": self.s.tolist(),
            "s0": self.s0,
            "d": self.d.tolist(),
            "w": self.w.tolist(),
            "WR": self.WR,
            "meta": dict(self.meta),
        }

    @classmethod
    def from_dict(cls, data: Mapping[str, Any]) -> Instance:
        try:
            p = data["p"]
            n = len(p)
            k = len(data["machines"])
            inst = cls(
                p=np.asarray(p, dtype=float).reshape(n, k) if n else np.zeros((0, k)),
                s=data["s"],
                d=data["d"],
                w=data["w"],
                WR=data["WR"],
                s0=data.get("s0", 0),
                meta=data.get("meta", {}),
            )
        except KeyError as exc:
            raise InvalidInstanceError(f"missing field {exc.args[0]!r}") from None
        if list(data["jobs"]) != list(inst.jobs):
            raise InvalidInstanceError("jobs must be listed as 0..n-1")
        if list(data["machines"]) != list(inst.machines):
            raise InvalidInstanceError("machines must be listed as 0..k-1")
        return inst


@dataclass(frozen=True)
class SequencePlan:
    """Ordered job list per machine."""

    seq: tuple[tuple[int, ...], ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "seq", tuple(tuple(int(j) for j in jobs) for jobs in self.seq))

    @classmethod
    def from_lists(cls, seq: Iterable[Iterable[int]]) -> SequencePlan:
        return cls(tuple(tuple(jobs) for jobs in seq))

    def check(self, instance: Instance) -> None:
        """Raise InvalidPlanError unless the plan partitions the job set."""
        if len(self.seq) != instance.n_machines:
            raise InvalidPlanError(
                f"plan has {len(self.seq)} machine lists, instance has {instance.n_machines}"
            )
        seen = [j for jobs in self.seq for j in jobs]
        if sorted(seen) != list(instance.jobs):
            raise InvalidPlanError("plan is not a partition of the job set")

    def machine_of(self) -> dict[int, int]:
        return {j: m for m, jobs in enumerate(self.seq) for j in jobs}

    def to_lists(self) -> list[list[int]]:
        return [list(jobs) for jobs in self.seq]


def weighted_tardiness(completion: int, deadline: int, weight: int) -> int:
    """``weight * max(0, completion - deadline)``."""
    return weight * max(0, completion - deadline)


@dataclass(frozen=True)
class TimedSchedule:
    """Per-job timing of a plan. Index ``j`` of every tuple refers to job ``j``."""

    machine: tuple[int, ...]
    setup_start: tuple[int, ...]
    setup_end: tuple[int, ...]
    completion: tuple[int, ...]
    objective: int
    proven_optimal_allocation: bool = False

    @property
    def n_jobs(self) -> int:
        return len(self.machine)

    def plan(self, n_machines: int) -> SequencePlan:
        """Recover machine sequences by ordering jobs on each machine by time."""
        seq: list[list[int]] = [[] for _ in range(n_machines)]
        order = sorted(
            range(self.n_jobs),
            key=lambda j: (self.setup_start[j], self.completion[j], j),
        )
        for j in order:
            seq[self.machine[j]].append(j)
        return SequencePlan.from_lists(seq)

    def job_costs(self, instance: Instance) -> list[int]:
        return [
            weighted_tardiness(self.completion[j], instance.d_list[j], instance.w_list[j])
            for j in range(self.n_jobs)
        ]

    @classmethod
    def from_times(
        cls,
        instance: Instance,
        machine: Sequence[int],
        setup_start: Sequence[int],
        setup_end: Sequence[int],
        completion: Sequence[int],
        proven_optimal_allocation: bool = False,
    ) -> TimedSchedule:
        d, w = instance.d_list, instance.w_list
        objective = sum(weighted_tardiness(completion[j], d[j], w[j]) for j in range(len(completion)))
        return cls(
            tuple(machine),
            tuple(setup_start),
            tuple(setup_end),
            tuple(completion),
            objective,
            proven_optimal_allocation,
        )


def evaluate_sequential(instance: Instance, plan: SequencePlan) -> TimedSchedule:
    """Time a plan with no worker contention.

    Every setup starts the moment its predecessor on the machine completes,
    so this equals the optimal allocation whenever ``WR == |M|`` and is a
    lower bound on it otherwise.
    """
    plan.check(instance)
    n = instance.n_jobs
    p, s = instance.p_list, instance.s_list
    machine = [0] * n
    start = [0] * n
    end = [0] * n
    completion = [0] * n
    for m, jobs in enumerate(plan.seq):
        t = 0
        prev = None
        for j in jobs:
            size = instance.s0 if prev is None else s[prev][j][m]
            machine[j] = m
            start[j] = t
            end[j] = t + size
            t = end[j] + p[j][m]
            completion[j] = t
            prev = j
    return TimedSchedule.from_times(
        instance,
        machine,
        start,
        end,
        completion,
        proven_optimal_allocation=instance.WR == instance.n_machines,
    )


@dataclass(frozen=True)
class ValidationReport:
    violations: tuple[tuple[str, str], ...] = ()

    @property
    def feasible(self) -> bool:
        return not self.violations

    def kinds(self) -> set[str]:
        return {kind for kind, _ in self.violations}


def max_concurrent_setups(intervals: Iterable[tuple[int, int]]) -> tuple[int, int]:
    """Peak number of half-open intervals ``[a, b)`` covering one instant.

    Returns ``(peak, first instant reaching the peak)``. Empty intervals are
    ignored.
    """
    events: list[tuple[int, int]] = []
    for a, b in intervals:
        if b > a:
            events.append((a, 1))
            events.append((b, -1))
    # Ends sort before starts at equal times: a unit freed at t is reusable at t.
    events.sort(key=lambda e: (e[0], e[1]))
    peak, at, cur = 0, 0, 0
    for t, delta in events:
        cur += delta
        if cur > peak:
            peak, at = cur, t
    return peak, at


def validate(instance: Instance, sched: TimedSchedule) -> ValidationReport:
    """Check every defining constraint of a timed schedule; never raises."""
    out: list[tuple[str, str]] = []
    n, k = instance.n_jobs, instance.n_machines
    if not (
        len(sched.machine) == len(sched.setup_start) == len(sched.setup_end) == len(sched.completion) == n
    ):
        return ValidationReport((("job-count", f"schedule does not list exactly {n} jobs"),))
    bad = [j for j in range(n) if not 0 <= sched.machine[j] < k]
    if bad:
        return ValidationReport(tuple(("assignment", f"job {j} on unknown machine") for j in bad))

    p, s = instance.p_list, instance.s_list
    plan = sched.plan(k)
    for m, jobs in enumerate(plan.seq):
        prev = None
        for j in jobs:
            if sched.setup_start[j] < 0:
                out.append(("negative-time", f"job {j} setup starts at {sched.setup_start[j]}"))
            size = instance.s0 if prev is None else s[prev][j][m]
            if sched.setup_end[j] - sched.setup_start[j] != size:
                out.append(
                    (
                        "setup-duration",
                        f"job {j} on machine {m}: setup lasts "
                        f"{sched.setup_end[j] - sched.setup_start[j]}, expected {size}",
                    )
                )
            if sched.completion[j] != sched.setup_end[j] + p[j][m]:
                out.append(("completion", f"job {j}: completion != setup end + processing"))
            if prev is not None and sched.setup_start[j] < sched.completion[prev]:
                out.append(
                    (
                        "precedence",
                        f"job {j} setup starts at {sched.setup_start[j]} before job {prev} "
                        f"completes at {sched.completion[prev]}",
                    )
                )
            prev = j

    peak, at = max_concurrent_setups(zip(sched.setup_start, sched.setup_end))
    if peak > instance.WR:
        out.append(("resource-capacity", f"{peak} setups run at t={at}, WR={instance.WR}"))

    recomputed = sum(sched.job_costs(instance))
    if recomputed != sched.objective:
        out.append(("objective-mismatch", f"stored {sched.objective}, recomputed {recomputed}"))
    return ValidationReport(tuple(out))

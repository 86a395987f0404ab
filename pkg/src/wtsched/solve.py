"""One entry point for every primal method."""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

from wtsched.core import Instance, SchedulingError, TimedSchedule
from wtsched.heuristics.atcs import atcs_run
from wtsched.heuristics.ga import GaLog, GaParams, ga_run
from wtsched.heuristics.sa import SaLog, SaParams, sa_run
from wtsched.relaxation import lower_bound, mip_primal
from wtsched.resalloc import DEFAULT_LIMITS, AllocLimits

ALGORITHMS = ("atcs", "ga", "sa-atcs", "sa-ga", "mip")


@dataclass(frozen=True)
class SolveOptions:
    ga: GaParams = GaParams()
    sa: SaParams = SaParams()
    limits: AllocLimits = DEFAULT_LIMITS
    solver_cmd: str | None = None
    time_limit: float | None = None


@dataclass
class SolveResult:
    algo: str
    seed: int
    schedule: TimedSchedule
    wall_time: float
    cp_calls: int = 0
    pruned: int = 0
    lower_bound: int | None = None
    extra: dict = field(default_factory=dict)


def solve(instance: Instance, algo: str, seed: int = 0, options: SolveOptions = SolveOptions()) -> SolveResult:
    """Run ``algo`` with ``seed``; ``options.time_limit`` caps GA when set."""
    if algo not in ALGORITHMS:
        raise ValueError(f"unknown algorithm {algo!r}; choose from {', '.join(ALGORITHMS)}")
    ga_params = replace(options.ga, seed=seed)
    if options.time_limit is not None:
        ga_params = replace(ga_params, time_limit=options.time_limit)
    sa_params = replace(options.sa, seed=seed)
    t0 = time.perf_counter()
    result_lb = None
    ga_log = GaLog()
    sa_log = SaLog()
    if algo == "atcs":
        sched = atcs_run(instance, options.limits)
    elif algo == "ga":
        sched = ga_run(instance, ga_params, options.limits, ga_log)
    elif algo == "sa-atcs":
        sched = sa_run(instance, atcs_run(instance, options.limits), sa_params, options.limits, sa_log)
    elif algo == "sa-ga":
        start = ga_run(instance, ga_params, options.limits, ga_log)
        sched = sa_run(instance, start, sa_params, options.limits, sa_log)
    else:
        warm = atcs_run(instance, options.limits)
        lb = lower_bound(instance, warm.objective, options.solver_cmd, options.time_limit)
        if lb.plan is None:
            raise SchedulingError("the relaxation returned no plan")
        sched = mip_primal(instance, lb.plan, options.limits)
        result_lb = lb.bound
    wall = time.perf_counter() - t0
    extra = {}
    if algo in ("ga", "sa-ga"):
        extra["ga_generations"] = ga_log.generations
    if algo.startswith("sa"):
        extra["sa_evaluations"] = sa_log.evaluations
    return SolveResult(
        algo=algo,
        seed=seed,
        schedule=sched,
        wall_time=wall,
        cp_calls=ga_log.cp_calls,
        pruned=ga_log.pruned,
        lower_bound=result_lb,
        extra=extra,
    )

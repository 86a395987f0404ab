"""Command line entry point: ``wtsched <command> ...``.

Exit codes: 0 success, 1 domain error (bad instance, size cap, infeasible
schedule, ...), 2 usage error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import os
import platform
import sys
import time
from dataclasses import asdict
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

import numpy as np

from wtsched import __version__
from wtsched import io as wio
from wtsched.bench import Suite, aggregates_csv, derive_seed, records_csv, render_summary, run_suite, whatif
from wtsched.core import SchedulingError, SequencePlan, evaluate_sequential, validate
from wtsched.heuristics.ga import GaParams
from wtsched.heuristics.sa import SaParams
from wtsched.instgen import SETUP_ALIASES, SETUP_MODES, GenConfig, generate, stats
from wtsched.oracle import solve_exact_tiny
from wtsched.relaxation import (
    SOLVER_ENV,
    build_relaxation,
    compute_tmax,
    export_model,
    import_solution,
    solve_external,
    solve_tiny_exact,
)
from wtsched.resalloc import AllocLimits, allocate_bruteforce, allocate_exact, allocate_greedy
from wtsched.solve import ALGORITHMS, SolveOptions, solve

log = logging.getLogger("wtsched")


class RunMeta:
    """Provenance written next to every output file as ``<file>.meta.json``."""

    def __init__(self, argv: list[str], args: argparse.Namespace):
        self.argv = argv
        self.args = args
        self.started = time.perf_counter()
        self.timestamp = datetime.now(timezone.utc).isoformat(timespec="seconds")

    def to_dict(self, **extra: Any) -> dict[str, Any]:
        config = {k: v for k, v in vars(self.args).items() if k != "handler"}
        return {
            "command_line": ["wtsched", *self.argv],
            "seed": getattr(self.args, "seed", None),
            "versions": {
                "wtsched": __version__,
                "numpy": np.__version__,
                "python": platform.python_version(),
            },
            "timestamp": self.timestamp,
            "wall_time_s": round(time.perf_counter() - self.started, 6),
            "config": config,
            **extra,
        }

    def write_for(self, path: str | Path, **extra: Any) -> None:
        Path(f"{path}.meta.json").write_text(wio.dumps(self.to_dict(**extra)) + "\n")


def _emit(fmt: str, data: dict[str, Any]) -> None:
    if fmt == "json":
        print(wio.dumps(data))
    elif fmt == "csv":
        buf = io.StringIO()
        writer = csv.writer(buf, lineterminator="\n")
        writer.writerow(list(data))
        writer.writerow([json.dumps(v) if isinstance(v, (list, dict)) else v for v in data.values()])
        print(buf.getvalue(), end="")
    else:
        for key, value in data.items():
            print(f"{key}: {value}")


def _limits(args) -> AllocLimits:
    if args.time_limit is None:
        return AllocLimits()
    return AllocLimits(time_cap=args.time_limit)


def _options(args) -> SolveOptions:
    ga = GaParams(
        population=args.ga_pop, generations=args.ga_gens, p_crossover=args.ga_pc, p_mutation=args.ga_pm
    )
    sa = SaParams(T0=args.sa_t0, T_cry=args.sa_tcry, q=args.sa_q, IT=args.sa_it)
    return SolveOptions(ga=ga, sa=sa, solver_cmd=os.environ.get(SOLVER_ENV), time_limit=args.time_limit)


# Commands ------------------------------------------------------------------------------


def cmd_gen(args, meta: RunMeta) -> int:
    cfg = GenConfig(
        machines=args.machines,
        jobs_multiplier=args.mult,
        setup_mode=args.setup,
        tau=args.tau,
        due_range=args.due_range,
        wr_mode=args.wr,
        seed=args.seed,
    )
    inst = generate(cfg)
    wio.write_instance(inst, args.out)
    meta.write_for(args.out)
    _emit(args.format, {"out": args.out, "jobs": inst.n_jobs, "machines": inst.n_machines, "WR": inst.WR})
    return 0


def cmd_stats(args, meta: RunMeta) -> int:
    st = stats(wio.read_instance(args.instance))
    _emit(args.format, asdict(st))
    return 0


def cmd_lb(args, meta: RunMeta) -> int:
    inst = wio.read_instance(args.instance)
    report: dict[str, Any] = {}
    if args.tiny:
        res = solve_tiny_exact(inst)
        report.update(bound=res.bound, status=res.status, plan=res.plan.to_lists())
    else:
        if args.ub is None:
            raise SchedulingError("--ub is required unless --tiny is given")
        t_max = compute_tmax(inst, args.ub)
        model = build_relaxation(inst, t_max)
        report.update(t_max=t_max, columns=len(model.columns), rows=len(model.rows))
        if args.export:
            Path(args.export).write_text(export_model(model))
            meta.write_for(args.export)
            report["export"] = args.export
        if args.import_file:
            res = import_solution(model, Path(args.import_file).read_text())
            report.update(bound=res.bound, status=res.status)
            if res.plan is not None:
                report["plan"] = res.plan.to_lists()
        elif args.solve:
            command = os.environ.get(SOLVER_ENV)
            if not command:
                raise SchedulingError(f"--solve needs a solver command template in ${SOLVER_ENV}")
            res = solve_external(inst, t_max, command, time_limit=args.time_limit)
            report.update(bound=res.bound, status=res.status)
    if args.plan_out and report.get("plan") is not None:
        wio.write_plan(SequencePlan.from_lists(report["plan"]), args.plan_out)
        meta.write_for(args.plan_out)
    _emit(args.format, report)
    return 0


def cmd_alloc(args, meta: RunMeta) -> int:
    inst = wio.read_instance(args.instance)
    plan = wio.read_plan(args.plan)
    plan.check(inst)
    method = {
        "exact": lambda: allocate_exact(inst, plan, _limits(args)),
        "greedy": lambda: allocate_greedy(inst, plan),
        "brute": lambda: allocate_bruteforce(inst, plan),
        "sequential": lambda: evaluate_sequential(inst, plan),
    }[args.method]
    sched = method()
    if args.out:
        wio.write_schedule(sched, args.out)
        meta.write_for(args.out)
    _emit(args.format, {"objective": sched.objective, "proven_optimal_allocation": sched.proven_optimal_allocation})
    return 0


def cmd_solve(args, meta: RunMeta) -> int:
    inst = wio.read_instance(args.instance)
    options = _options(args)
    best = None
    runs = []
    for r in range(args.runs):
        seed = args.seed if args.runs == 1 else derive_seed(args.seed, r)
        res = solve(inst, args.algo, seed, options)
        report = validate(inst, res.schedule)
        if not report.feasible:
            raise SchedulingError(f"solver produced an infeasible schedule: {sorted(report.kinds())}")
        runs.append({"run": r, "seed": seed, "objective": res.schedule.objective, "wall_time_s": res.wall_time})
        if best is None or res.schedule.objective < best.schedule.objective:
            best = res
    wio.write_schedule(best.schedule, args.out)
    meta.write_for(
        args.out,
        runs=runs,
        ga_params=asdict(options.ga),
        sa_params=asdict(options.sa),
    )
    summary = {"algo": args.algo, "objective": best.schedule.objective, "seed": best.seed}
    if best.lower_bound is not None:
        summary["lower_bound"] = best.lower_bound
    if args.runs > 1:
        summary["objectives"] = [row["objective"] for row in runs]
    _emit(args.format, summary)
    return 0


def cmd_oracle(args, meta: RunMeta) -> int:
    inst = wio.read_instance(args.instance)
    sched = solve_exact_tiny(inst, args.max_jobs, args.max_machines)
    wio.write_schedule(sched, args.out)
    meta.write_for(args.out)
    _emit(args.format, {"objective": sched.objective})
    return 0


def cmd_bench(args, meta: RunMeta) -> int:
    suite = Suite.load(args.suite)
    if args.reps is not None:
        suite.reps = args.reps
    if args.time_limit is not None:
        suite.time_limit = args.time_limit
    result = run_suite(suite, workers=args.workers)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    with_time = not args.no_timing
    (out / "runs.csv").write_text(records_csv(result.records, with_time))
    (out / "summary.csv").write_text(aggregates_csv(result.aggregates, with_time))
    (out / "summary.txt").write_text(render_summary(result.aggregates, with_time))
    times = [{"instance_id": r.instance_id, "algo": r.algo, "rep": r.rep, "time_s": r.time_s} for r in result.records]
    meta.write_for(out / "runs.csv", run_times=times)
    failed = sum(1 for r in result.records if r.error)
    _emit(args.format, {"out": str(out), "runs": len(result.records), "failed": failed})
    return 0


def cmd_whatif(args, meta: RunMeta) -> int:
    inst = wio.read_instance(args.instance)
    donor = None if args.draw else args.donor
    res = whatif(
        inst, args.algo, args.seed, wr=args.wr, extra_machines=args.add_machines or 0,
        donor=donor, options=_options(args),
    )
    if args.out:
        wio.write_instance(res.new_instance, args.out)
        meta.write_for(args.out)
    _emit(
        args.format,
        {
            "base_objective": res.base_objective,
            "new_objective": res.new_objective,
            "delta": res.delta,
            "pct_change": round(res.pct_change, 2),
        },
    )
    return 0


def cmd_validate(args, meta: RunMeta) -> int:
    inst = wio.read_instance(args.instance)
    sched = wio.read_schedule(args.schedule)
    report = validate(inst, sched)
    _emit(
        args.format,
        {"feasible": report.feasible, "objective": sched.objective, "violations": [str(v) for v in report.violations]},
    )
    return 0 if report.feasible else 1


# Parser --------------------------------------------------------------------------------


def _global_options(parser: argparse.ArgumentParser, suppress: bool) -> None:
    default = (lambda v: argparse.SUPPRESS) if suppress else (lambda v: v)
    parser.add_argument("--seed", type=int, default=default(0), help="random seed (default 0)")
    parser.add_argument("--time-limit", type=float, default=default(None), help="seconds")
    parser.add_argument("--format", choices=("text", "csv", "json"), default=default("text"))
    parser.add_argument(
        "--log-level", choices=("DEBUG", "INFO", "WARNING", "ERROR"), default=default("WARNING")
    )


def _solver_flags(p: argparse.ArgumentParser) -> None:
    g = p.add_argument_group("GA / SA parameters")
    g.add_argument("--ga-pop", type=int, default=GaParams.population)
    g.add_argument("--ga-gens", type=int, default=GaParams.generations)
    g.add_argument("--ga-pc", type=float, default=GaParams.p_crossover)
    g.add_argument("--ga-pm", type=float, default=GaParams.p_mutation)
    g.add_argument("--sa-t0", type=float, default=SaParams.T0)
    g.add_argument("--sa-tcry", type=float, default=SaParams.T_cry)
    g.add_argument("--sa-q", type=float, default=SaParams.q)
    g.add_argument("--sa-it", type=int, default=SaParams.IT)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="wtsched",
        description="Weighted-tardiness scheduling with setup workers.",
        epilog=f"External MILP solver command template: ${SOLVER_ENV} "
        "(placeholders {mps}, {sol}, {time_limit}).",
    )
    _global_options(parser, suppress=False)
    common = argparse.ArgumentParser(add_help=False)
    _global_options(common, suppress=True)
    sub = parser.add_subparsers(dest="command", metavar="COMMAND", required=True)

    def add(name: str, handler, help_text: str) -> argparse.ArgumentParser:
        p = sub.add_parser(name, parents=[common], help=help_text, description=help_text)
        p.set_defaults(handler=handler)
        return p

    setups = sorted(set(SETUP_ALIASES) | set(SETUP_MODES))
    p = add("gen", cmd_gen, "generate a random instance")
    p.add_argument("--machines", type=int, required=True)
    p.add_argument("--mult", type=int, required=True, help="jobs per machine")
    p.add_argument("--setup", choices=setups, default="alo")
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--due-range", type=float, default=0.8)
    p.add_argument("--wr", choices=("half", "full"), default="half")
    p.add_argument("--out", required=True)

    p = add("stats", cmd_stats, "due-date statistics of an instance")
    p.add_argument("--instance", required=True)

    p = add("lb", cmd_lb, "relaxation lower bound: export, import or tiny solve")
    p.add_argument("--instance", required=True)
    p.add_argument("--ub", type=int, help="primal objective used to size the tardiness range")
    mode = p.add_mutually_exclusive_group()
    mode.add_argument("--export", metavar="FILE", help="write the model as MPS")
    mode.add_argument("--tiny", action="store_true", help="solve in-process (small instances)")
    p.add_argument("--import", dest="import_file", metavar="FILE", help="read a solver solution")
    p.add_argument("--solve", action="store_true", help=f"run the solver in ${SOLVER_ENV}")
    p.add_argument("--plan-out", metavar="FILE", help="write the relaxation's plan")

    p = add("alloc", cmd_alloc, "time a fixed plan under the worker limit")
    p.add_argument("--instance", required=True)
    p.add_argument("--plan", required=True)
    p.add_argument("--method", choices=("exact", "greedy", "brute", "sequential"), default="exact")
    p.add_argument("--greedy", dest="method", action="store_const", const="greedy", help="same as --method greedy")
    p.add_argument("--out")

    p = add("solve", cmd_solve, "run a primal method")
    p.add_argument("--instance", required=True)
    p.add_argument("--algo", choices=ALGORITHMS, required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--runs", type=int, default=1)
    _solver_flags(p)

    p = add("oracle", cmd_oracle, "exhaustive optimum of a tiny instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--max-jobs", type=int, default=6)
    p.add_argument("--max-machines", type=int, default=3)

    p = add("bench", cmd_bench, "run an experiment suite")
    p.add_argument("--suite", required=True)
    p.add_argument("--reps", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument(
        "--no-timing", action="store_true",
        help="leave time columns empty (times still go to the meta file)",
    )

    p = add("whatif", cmd_whatif, "compare a resource or machine change")
    p.add_argument("--instance", required=True)
    change = p.add_mutually_exclusive_group(required=True)
    change.add_argument("--wr", type=int)
    change.add_argument("--add-machines", type=int)
    p.add_argument("--donor", type=int, default=0, help="machine copied by --add-machines")
    p.add_argument("--draw", action="store_true", help="draw new machines like the generator")
    p.add_argument("--algo", choices=ALGORITHMS, default="ga")
    p.add_argument("--out", help="write the modified instance")
    _solver_flags(p)

    p = add("validate", cmd_validate, "check a schedule against an instance")
    p.add_argument("--instance", required=True)
    p.add_argument("--schedule", required=True)
    return parser


def main(argv: list[str] | None = None) -> int:
    argv = list(sys.argv[1:] if argv is None else argv)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=args.log_level, format="%(levelname)s %(name)s: %(message)s")
    meta = RunMeta(argv, args)
    try:
        return args.handler(args, meta)
    except (SchedulingError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

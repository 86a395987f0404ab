"""Quality metrics, experiment suites and what-if comparisons.

A suite file is JSON::

    {
      "name": "smoke",
      "seed": 7,
      "reps": 5,
      "algos": ["atcs", "ga", "sa-atcs"],
      "grid": {"machines": [2], "jobs_multiplier": [5], "setup_mode": ["alpha_low"],
               "tau": [0.5], "due_range": [0.8], "wr_mode": ["half"]},
      "instances_per_cell": 1,
      "ga": {"population": 100, "generations": 150},
      "sa": {"T0": 500},
      "lower_bound": true
    }

``configs`` (a list of generator settings) may replace or extend ``grid``.
Instance and run seeds are derived from the master seed, so the same file
always yields the same tables.
"""

from __future__ import annotations

import csv
import io
import itertools
import json
import logging
import math
from collections import defaultdict
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from wtsched.core import Instance, SchedulingError
from wtsched.heuristics.ga import GaParams
from wtsched.heuristics.sa import SaParams
from wtsched.instgen import SETUP_MODES, GenConfig, generate
from wtsched.relaxation import SizeCapError, lower_bound
from wtsched.solve import ALGORITHMS, SolveOptions, solve

log = logging.getLogger(__name__)


class BoundViolationError(SchedulingError, ValueError):
    pass


def gap(alg_sol: int, lower_bound: int) -> float:
    if lower_bound < 0:
        raise ValueError("lower bound must be non-negative")
    if alg_sol < lower_bound:
        raise BoundViolationError(f"solution {alg_sol} is below the lower bound {lower_bound}")
    if alg_sol == 0:
        return 0.0
    return (alg_sol - lower_bound) / alg_sol


def err(alg_sol: int, best_sol: int) -> float:
    if alg_sol < 0:
        raise ValueError("solution value must be non-negative")
    if best_sol > alg_sol:
        raise BoundViolationError(f"best solution {best_sol} exceeds the solution {alg_sol}")
    if alg_sol == 0:
        return 0.0
    return (alg_sol - best_sol) / alg_sol


def derive_seed(*parts: int) -> int:
    return int(np.random.SeedSequence(list(parts)).generate_state(1)[0])


# Suite description ---------------------------------------------------------------------

GRID_KEYS = ("machines", "jobs_multiplier", "setup_mode", "tau", "due_range", "wr_mode")


@dataclass
class Suite:
    name: str = "suite"
    seed: int = 0
    reps: int = 5
    algos: list[str] = field(default_factory=lambda: ["atcs", "ga", "sa-atcs", "sa-ga"])
    configs: list[GenConfig] = field(default_factory=list)
    ga: GaParams = GaParams()
    sa: SaParams = SaParams()
    lower_bound: bool = True
    time_limit: float | None = None

    @classmethod
    def from_dict(cls, data: dict[str, Any]) -> Suite:
        unknown = set(data) - {
            "name", "seed", "reps", "algos", "grid", "configs", "instances_per_cell",
            "ga", "sa", "lower_bound", "time_limit",
        }
        if unknown:
            raise ValueError(f"unknown suite keys: {sorted(unknown)}")
        seed = int(data.get("seed", 0))
        per_cell = int(data.get("instances_per_cell", 1))
        raw: list[dict] = []
        grid = data.get("grid")
        if grid:
            bad = set(grid) - set(GRID_KEYS)
            if bad:
                raise ValueError(f"unknown grid keys: {sorted(bad)}")
            keys = [k for k in GRID_KEYS if k in grid]
            for combo in itertools.product(*(grid[k] for k in keys)):
                raw.append(dict(zip(keys, combo)))
        raw.extend(data.get("configs", []))
        if not raw:
            raise ValueError("suite declares no instances")
        configs = []
        for cell, cfg in enumerate(raw):
            for rep in range(per_cell):
                cfg = dict(cfg)
                cfg.setdefault("seed", derive_seed(seed, cell, rep))
                configs.append(GenConfig(**cfg))
        algos = list(data.get("algos", cls.__dataclass_fields__["algos"].default_factory()))
        for a in algos:
            if a not in ALGORITHMS:
                raise ValueError(f"unknown algorithm {a!r}")
        return cls(
            name=str(data.get("name", "suite")),
            seed=seed,
            reps=int(data.get("reps", 5)),
            algos=algos,
            configs=configs,
            ga=GaParams(**data.get("ga", {})),
            sa=SaParams(**data.get("sa", {})),
            lower_bound=bool(data.get("lower_bound", True)),
            time_limit=data.get("time_limit"),
        )

    @classmethod
    def load(cls, path: str | Path) -> Suite:
        return cls.from_dict(json.loads(Path(path).read_text()))


# Runs ----------------------------------------------------------------------------------


@dataclass
class RunRecord:
    instance_id: str
    jobs: int
    machines: int
    ratio: int
    setup_mode: str
    wr_mode: str
    tau: float
    due_range: float
    algo: str
    rep: int
    seed: int
    objective: int | None
    time_s: float | None
    lower_bound: int | None = None
    gap: float | None = None
    err: float | None = None
    optimal_alloc: bool | None = None
    cp_calls: int = 0
    pruned: int = 0
    error: str = ""


CSV_COLUMNS = [f.name for f in fields(RunRecord)]

FACETS = ("jobs", "machines", "ratio", "setup_mode", "wr_mode", "tau")


def instance_id(cfg: GenConfig) -> str:
    return (
        f"{cfg.jobs}x{cfg.machines}-{cfg.setup_mode}-{cfg.wr_mode}"
        f"-t{cfg.tau:g}-r{cfg.due_range:g}-s{cfg.seed}"
    )


def _run_instance(args) -> list[RunRecord]:
    """All (algo, rep) runs on one generated instance. Top level for pickling."""
    index, cfg, suite = args
    inst = generate(cfg)
    iid = instance_id(cfg)
    options = SolveOptions(ga=suite.ga, sa=suite.sa, time_limit=suite.time_limit)
    base = dict(
        instance_id=iid,
        jobs=cfg.jobs,
        machines=cfg.machines,
        ratio=cfg.jobs_multiplier,
        setup_mode=cfg.setup_mode,
        wr_mode=cfg.wr_mode,
        tau=cfg.tau,
        due_range=cfg.due_range,
    )
    records = []
    for algo in suite.algos:
        for rep in range(suite.reps):
            seed = derive_seed(suite.seed, index, rep)
            rec = RunRecord(**base, algo=algo, rep=rep, seed=seed, objective=None, time_s=None)
            try:
                res = solve(inst, algo, seed, options)
            except SchedulingError as exc:
                rec.error = f"{type(exc).__name__}: {exc}"
                log.warning("%s %s rep %d failed: %s", iid, algo, rep, exc)
            else:
                rec.objective = res.schedule.objective
                rec.time_s = res.wall_time
                rec.optimal_alloc = res.schedule.proven_optimal_allocation
                rec.cp_calls = res.cp_calls
                rec.pruned = res.pruned
                rec.lower_bound = res.lower_bound
            records.append(rec)

    solved = [r.objective for r in records if r.objective is not None]
    bound = None
    if suite.lower_bound and solved:
        try:
            bound = lower_bound(inst, min(solved)).bound
        except SizeCapError:
            bound = None
    for r in records:
        if r.lower_bound is None:
            r.lower_bound = bound
        elif bound is not None:
            r.lower_bound = max(r.lower_bound, bound)
    if solved:
        best = min(solved)
        for r in records:
            if r.objective is None:
                continue
            r.err = err(r.objective, best)
            if r.lower_bound is not None:
                r.gap = gap(r.objective, r.lower_bound)
    return records


@dataclass
class SuiteResult:
    records: list[RunRecord]
    aggregates: list[dict[str, Any]]


def aggregate(records: list[RunRecord]) -> list[dict[str, Any]]:
    """Mean gap, time and err per facet combination and algorithm."""
    groups: dict[tuple, list[RunRecord]] = defaultdict(list)
    for r in records:
        groups[tuple(getattr(r, f) for f in FACETS) + (r.algo,)].append(r)
    rows = []
    for key in sorted(groups):
        rs = groups[key]
        ok = [r for r in rs if r.objective is not None]

        def mean(values):
            values = [v for v in values if v is not None]
            return sum(values) / len(values) if values else None

        rows.append(
            dict(
                zip(FACETS + ("algo",), key),
                runs=len(rs),
                failed=len(rs) - len(ok),
                gap=mean(r.gap for r in ok),
                time_s=mean(r.time_s for r in ok),
                err=mean(r.err for r in ok),
                objective=mean(r.objective for r in ok),
            )
        )
    return rows


def run_suite(suite: Suite, workers: int = 1) -> SuiteResult:
    jobs = [(i, cfg, suite) for i, cfg in enumerate(suite.configs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            chunks = list(pool.map(_run_instance, jobs))
    else:
        chunks = [_run_instance(j) for j in jobs]
    records = [r for chunk in chunks for r in chunk]
    return SuiteResult(records, aggregate(records))


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "1" if value else "0"
    if isinstance(value, float):
        return f"{value:.6f}"
    return str(value)


def records_csv(records: list[RunRecord], with_time: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CSV_COLUMNS)
    for r in records:
        row = asdict(r)
        if not with_time:
            row["time_s"] = None
        writer.writerow([_cell(row[c]) for c in CSV_COLUMNS])
    return buf.getvalue()


AGG_COLUMNS = list(FACETS) + ["algo", "runs", "failed", "gap", "time_s", "err", "objective"]


def aggregates_csv(rows: list[dict[str, Any]], with_time: bool = True) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(AGG_COLUMNS)
    for row in rows:
        row = dict(row)
        if not with_time:
            row["time_s"] = None
        writer.writerow([_cell(row[c]) for c in AGG_COLUMNS])
    return buf.getvalue()


def _pct(v: float | None) -> str:
    return "-" if v is None else f"{100 * v:.2f}"


def render_summary(rows: list[dict[str, Any]], with_time: bool = True) -> str:
    header = f"{'JxM':>7} {'J/M':>4} {'setup':>10} {'WR':>5} {'tau':>4} {'algo':>8} {'Gap%':>7} {'Err%':>7}"
    if with_time:
        header += f" {'Time':>8}"
    lines = [header]
    for r in rows:
        line = (
            f"{str(r['jobs']) + 'x' + str(r['machines']):>7} {r['ratio']:>4} {r['setup_mode']:>10} "
            f"{r['wr_mode']:>5} {r['tau']:>4} {r['algo']:>8} {_pct(r['gap']):>7} {_pct(r['err']):>7}"
        )
        if with_time:
            line += f" {'-' if r['time_s'] is None else format(r['time_s'], '.2f'):>8}"
        lines.append(line)
    return "\n".join(lines) + "\n"


# What-if -------------------------------------------------------------------------------


@dataclass(frozen=True)
class WhatIfResult:
    base_objective: int
    new_objective: int
    delta: int
    pct_change: float
    base_instance: Instance
    new_instance: Instance


def _drawn_columns(instance: Instance, count: int, seed: int) -> tuple[np.ndarray, np.ndarray]:
    """Processing and setup columns for new machines, using the generator rule."""
    meta = instance.meta
    if "b" not in meta or "generator" not in meta:
        raise ValueError("drawing new machines needs generator metadata (meta.b, meta.generator)")
    n = instance.n_jobs
    b = np.asarray(meta["b"], dtype=float)
    rng = np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, 100])))
    a = rng.uniform(1, 10, size=(n, count))
    noise = rng.uniform(0, 10, size=(n, count))
    p = np.floor(b[:, None] * a + noise + 0.5).astype(np.int64)
    mode = meta["generator"]["setup_mode"]
    lo, hi = SETUP_MODES[mode]
    draws = rng.uniform(lo, hi, size=(n, n, count))
    if mode == "uniform":
        s = np.floor(draws + 0.5).astype(np.int64)
    else:
        s = np.floor(draws * p[None, :, :] + 0.5).astype(np.int64)
    s[np.arange(n), np.arange(n), :] = 0
    return p, s


def add_machines(
    instance: Instance, count: int, donor: int | None = 0, seed: int = 0
) -> Instance:
    """Instance with ``count`` extra machines.

    With ``donor`` set, new machines copy that machine's columns; with
    ``donor=None`` they are drawn like generated machines (needs metadata).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if donor is not None:
        if not 0 <= donor < instance.n_machines:
            raise ValueError(f"donor machine {donor} does not exist")
        p_new = np.repeat(instance.p[:, donor : donor + 1], count, axis=1)
        s_new = np.repeat(instance.s[:, :, donor : donor + 1], count, axis=2)
        how = {"mode": "clone", "donor": donor, "count": count}
    else:
        p_new, s_new = _drawn_columns(instance, count, seed)
        how = {"mode": "draw", "seed": seed, "count": count}
    meta = dict(instance.meta)
    meta["whatif"] = how
    return instance.replace(
        p=np.concatenate([instance.p, p_new], axis=1),
        s=np.concatenate([instance.s, s_new], axis=2),
        meta=meta,
    )


def whatif(
    instance: Instance,
    algo: str,
    seed: int = 0,
    wr: int | None = None,
    extra_machines: int = 0,
    donor: int | None = 0,
    options: SolveOptions = SolveOptions(),
) -> WhatIfResult:
    if wr is None and extra_machines == 0:
        raise ValueError("give a WR override or a number of machines to add")
    new = instance
    if extra_machines:
        new = add_machines(new, extra_machines, donor, seed)
    if wr is not None:
        if not 1 <= wr <= new.n_machines:
            raise ValueError(f"WR must lie in [1, {new.n_machines}], got {wr}")
        new = new.replace(WR=wr)
    base = solve(instance, algo, seed, options).schedule.objective
    after = solve(new, algo, seed, options).schedule.objective
    delta = after - base
    if base:
        pct = 100.0 * delta / base
    else:
        pct = 0.0 if after == 0 else math.inf
    return WhatIfResult(base, after, delta, pct, instance, new)

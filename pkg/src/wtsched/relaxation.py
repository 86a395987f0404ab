"""Time-indexed slot MILP giving dual bounds, plus its tooling.

The relaxation replaces every sequence-dependent setup ``s[i, j, m]`` by
``s_leq[j, m] = min_i s[i, j, m]``, drops the first setup on each machine
and lets every setup run in parallel. Any true schedule maps onto it, so
its optimum never exceeds the true optimum.

Each machine has ``|J|`` slots; occupied slots form a suffix of the slot
range and ``f`` marks the first occupied one. Variable names:

* ``x_i_j_m``   job ``j`` sits in slot ``i`` of machine ``m``
* ``y_j_m``     job ``j`` runs on machine ``m``
* ``f_i_m``     slot ``i`` is the first occupied slot of ``m``
* ``W_i_j_m_t`` job ``j`` in slot ``i`` of ``m`` is ``t`` units late
* ``P_i_m, S_i_m, D_i_m, C_i_m, T_i_m``  processing, setup, deadline,
  completion and tardiness of a slot (continuous, >= 0)

No MILP solver is linked. :func:`export_model` writes MPS text for any
external solver and :func:`import_solution` reads its answer back;
:func:`solve_tiny_exact` solves small instances in-process.
"""

from __future__ import annotations

import itertools
import math
import shlex
import subprocess
import tempfile
from collections.abc import Mapping
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from wtsched.core import Instance, SchedulingError, SequencePlan, TimedSchedule, evaluate_sequential
from wtsched.resalloc import DEFAULT_LIMITS, AllocLimits, allocate_exact

TINY_MAX_JOBS = 8
TINY_MAX_MACHINES = 3


class SizeCapError(SchedulingError, ValueError):
    pass


class MalformedSolutionError(SchedulingError, ValueError):
    pass


class SolutionParseError(SchedulingError, ValueError):
    pass


def compute_s_leq(instance: Instance) -> np.ndarray:
    """Cheapest setup of each job on each machine over all predecessors."""
    n, k = instance.n_jobs, instance.n_machines
    if n < 2:
        return np.zeros((n, k), dtype=np.int64)
    masked = np.where(np.eye(n, dtype=bool)[:, :, None], np.iinfo(np.int64).max, instance.s)
    return masked.min(axis=0)


def compute_tmax(instance: Instance, primal_ub: int) -> int:
    """Largest tardiness any job can have in a solution no worse than ``primal_ub``."""
    if primal_ub < 0:
        raise ValueError("primal bound must be non-negative")
    if instance.n_jobs == 0:
        return 0
    return max(primal_ub // w for w in instance.w_list)


@dataclass(frozen=True)
class Row:
    name: str
    coefs: tuple[tuple[int, float], ...]
    sense: str  # "E", "L" or "G"
    rhs: float


@dataclass
class RelaxedModel:
    n: int
    k: int
    s_leq: np.ndarray
    t_max: int
    V: int
    columns: list[str] = field(default_factory=list)
    integer: list[bool] = field(default_factory=list)
    objective: dict[int, float] = field(default_factory=dict)
    rows: list[Row] = field(default_factory=list)
    index: dict[str, int] = field(default_factory=dict)

    def add_column(self, name: str, binary: bool) -> int:
        self.index[name] = len(self.columns)
        self.columns.append(name)
        self.integer.append(binary)
        return self.index[name]

    def col(self, name: str) -> int:
        return self.index[name]

    def add_row(self, name: str, coefs: Mapping[str, float], sense: str, rhs: float) -> None:
        packed = tuple((self.index[v], float(c)) for v, c in coefs.items() if c != 0)
        self.rows.append(Row(name, packed, sense, float(rhs)))

    def check(self, values: Mapping[str, float], tol: float = 1e-6) -> list[str]:
        """Names of rows (and bounds) that ``values`` violates; absent names are 0."""
        vec = [0.0] * len(self.columns)
        for name, v in values.items():
            vec[self.index[name]] = float(v)
        bad = []
        for c, v in enumerate(vec):
            if v < -tol or (self.integer[c] and (v > 1 + tol or abs(v - round(v)) > tol)):
                bad.append(f"bound:{self.columns[c]}")
        for row in self.rows:
            lhs = sum(coef * vec[c] for c, coef in row.coefs)
            if (
                (row.sense == "E" and abs(lhs - row.rhs) > tol)
                or (row.sense == "L" and lhs > row.rhs + tol)
                or (row.sense == "G" and lhs < row.rhs - tol)
            ):
                bad.append(row.name)
        return bad

    def objective_value(self, values: Mapping[str, float]) -> float:
        return sum(self.objective.get(self.index[n], 0.0) * v for n, v in values.items())


def build_relaxation(instance: Instance, t_max: int) -> RelaxedModel:
    if t_max < 0:
        raise ValueError("t_max must be >= 0")
    n, k = instance.n_jobs, instance.n_machines
    s_leq = compute_s_leq(instance)
    V = int(s_leq.max()) if s_leq.size else 0
    model = RelaxedModel(n=n, k=k, s_leq=s_leq, t_max=t_max, V=V)
    J, M, Ts = range(n), range(k), range(t_max + 1)
    p, d, w = instance.p_list, instance.d_list, instance.w_list
    sl = s_leq.tolist()

    for i, j, m in itertools.product(J, J, M):
        model.add_column(f"x_{i}_{j}_{m}", True)
    for j, m in itertools.product(J, M):
        model.add_column(f"y_{j}_{m}", True)
    for i, m in itertools.product(J, M):
        model.add_column(f"f_{i}_{m}", True)
    for i, j, m, t in itertools.product(J, J, M, Ts):
        model.add_column(f"W_{i}_{j}_{m}_{t}", True)
    for prefix in "PSDCT":
        for i, m in itertools.product(J, M):
            model.add_column(f"{prefix}_{i}_{m}", False)

    for i, j, m, t in itertools.product(J, J, M, Ts):
        if t:
            model.objective[model.col(f"W_{i}_{j}_{m}_{t}")] = float(w[j] * t)

    for j in J:
        model.add_row(f"assign_{j}", {f"y_{j}_{m}": 1 for m in M}, "E", 1)
    for j, m in itertools.product(J, M):
        coefs = {f"x_{i}_{j}_{m}": 1 for i in J}
        coefs[f"y_{j}_{m}"] = -1
        model.add_row(f"slot_of_{j}_{m}", coefs, "E", 0)
    for i, m in itertools.product(J, M):
        model.add_row(f"slot_cap_{i}_{m}", {f"x_{i}_{j}_{m}": 1 for j in J}, "L", 1)
    for m in M:
        model.add_row(f"first_{m}", {f"f_{i}_{m}": 1 for i in J}, "E", 1)
    for i, m in itertools.product(J, M):
        if i == 0:
            continue
        coefs = {f"x_{i}_{j}_{m}": 1 for j in J}
        for j in J:
            coefs[f"x_{i - 1}_{j}_{m}"] = -1
        model.add_row(f"contiguous_{i}_{m}", coefs, "G", 0)
        coefs = {f"x_{i - 1}_{j}_{m}": 1 for j in J}
        coefs[f"f_{i}_{m}"] = 1
        model.add_row(f"first_after_free_{i}_{m}", coefs, "L", 1)
    for i, m in itertools.product(J, M):
        if i == 0:
            # Base case for the completion recursion: a true schedule satisfies it.
            model.add_row(f"completion_{i}_{m}", {f"C_0_{m}": 1, f"P_0_{m}": -1, f"S_0_{m}": -1}, "G", 0)
        else:
            model.add_row(
                f"completion_{i}_{m}",
                {f"C_{i}_{m}": 1, f"C_{i - 1}_{m}": -1, f"P_{i}_{m}": -1, f"S_{i}_{m}": -1},
                "E",
                0,
            )
    for i, m in itertools.product(J, M):
        coefs = {f"D_{i}_{m}": 1}
        coefs.update({f"x_{i}_{j}_{m}": -d[j] for j in J})
        model.add_row(f"deadline_{i}_{m}", coefs, "E", 0)
    for i, m in itertools.product(J, M):
        model.add_row(f"tardiness_{i}_{m}", {f"T_{i}_{m}": 1, f"C_{i}_{m}": -1, f"D_{i}_{m}": 1}, "G", 0)
    for i, m in itertools.product(J, M):
        coefs = {f"P_{i}_{m}": 1}
        coefs.update({f"x_{i}_{j}_{m}": -p[j][m] for j in J})
        model.add_row(f"processing_{i}_{m}", coefs, "E", 0)
    for i, m in itertools.product(J, M):
        # The source formula indexes x as x_{jim}; slot-job-machine order is the consistent reading.
        coefs = {f"S_{i}_{m}": 1}
        coefs.update({f"x_{i}_{j}_{m}": -sl[j][m] for j in J})
        coefs[f"f_{i}_{m}"] = V
        model.add_row(f"setup_{i}_{m}", coefs, "G", 0)
    for i, j, m in itertools.product(J, J, M):
        coefs = {f"W_{i}_{j}_{m}_{t}": 1 for t in Ts}
        coefs[f"x_{i}_{j}_{m}"] = -1
        model.add_row(f"late_pick_{i}_{j}_{m}", coefs, "E", 0)
    for i, m in itertools.product(J, M):
        coefs = {f"W_{i}_{j}_{m}_{t}": t for j in J for t in Ts if t}
        coefs[f"T_{i}_{m}"] = -1
        model.add_row(f"late_value_{i}_{m}", coefs, "G", 0)
    return model


def column_count(n: int, k: int, t_max: int) -> int:
    """Number of model columns for ``n`` jobs, ``k`` machines and ``t_max``."""
    return n * n * k + 2 * n * k + n * n * k * (t_max + 1) + 5 * n * k


def row_count(n: int, k: int) -> int:
    """Number of constraint rows (objective excluded)."""
    return n + 8 * n * k + k + 2 * (n - 1) * k + n * n * k


# MPS ---------------------------------------------------------------------------------


def _num(v: float) -> str:
    return str(int(v)) if float(v).is_integer() else repr(float(v))


def export_model(model: RelaxedModel) -> str:
    """Free-format MPS text. Rows and columns keep their build order."""
    lines = [f"NAME          WTRELAX_{model.n}x{model.k}_T{model.t_max}", "ROWS", " N  OBJ"]
    for row in model.rows:
        lines.append(f" {row.sense}  {row.name}")
    by_col: list[list[tuple[str, float]]] = [[] for _ in model.columns]
    for c, v in sorted(model.objective.items()):
        by_col[c].append(("OBJ", v))
    for row in model.rows:
        for c, v in row.coefs:
            by_col[c].append((row.name, v))
    lines.append("COLUMNS")
    in_int = False
    marker = 0
    for c, name in enumerate(model.columns):
        if model.integer[c] != in_int:
            tag = "INTORG" if model.integer[c] else "INTEND"
            lines.append(f"    MARKER{marker:04d}  'MARKER'  '{tag}'")
            marker += 1
            in_int = model.integer[c]
        entries = by_col[c] or [("OBJ", 0.0)]
        for rname, v in entries:
            lines.append(f"    {name}  {rname}  {_num(v)}")
    if in_int:
        lines.append(f"    MARKER{marker:04d}  'MARKER'  'INTEND'")
    lines.append("RHS")
    for row in model.rows:
        if row.rhs:
            lines.append(f"    RHS  {row.name}  {_num(row.rhs)}")
    lines.append("BOUNDS")
    for c, name in enumerate(model.columns):
        if model.integer[c]:
            lines.append(f" BV BND  {name}")
    lines.append("ENDATA")
    return "\n".join(lines) + "\n"


@dataclass
class ParsedMps:
    name: str
    rows: dict[str, str]
    columns: list[str]
    integer: dict[str, bool]
    coefs: dict[tuple[str, str], float]
    rhs: dict[str, float]
    binary: set[str]


def parse_mps(text: str) -> ParsedMps:
    """Read free-format MPS as written by :func:`export_model`."""
    name = ""
    rows: dict[str, str] = {}
    columns: list[str] = []
    integer: dict[str, bool] = {}
    coefs: dict[tuple[str, str], float] = {}
    rhs: dict[str, float] = {}
    binary: set[str] = set()
    section = None
    in_int = False
    for raw in text.splitlines():
        if not raw.strip() or raw.startswith("*"):
            continue
        if not raw.startswith(" "):
            parts = raw.split()
            section = parts[0]
            if section == "NAME":
                name = parts[1] if len(parts) > 1 else ""
            continue
        parts = raw.split()
        if section == "ROWS":
            rows[parts[1]] = parts[0]
        elif section == "COLUMNS":
            if len(parts) >= 3 and parts[1] == "'MARKER'":
                in_int = parts[2] == "'INTORG'"
                continue
            col = parts[0]
            if col not in integer:
                columns.append(col)
                integer[col] = in_int
            for r, v in zip(parts[1::2], parts[2::2]):
                coefs[(r, col)] = float(v)
        elif section == "RHS":
            for r, v in zip(parts[1::2], parts[2::2]):
                rhs[r] = float(v)
        elif section == "BOUNDS":
            if parts[0] == "BV":
                binary.add(parts[2])
    return ParsedMps(name, rows, columns, integer, coefs, rhs, binary)


# Solutions ---------------------------------------------------------------------------


@dataclass(frozen=True)
class LowerBoundResult:
    bound: int
    status: str  # "optimal", "bound_only" or "infeasible_model"
    plan: SequencePlan | None = None


def plan_to_solution(instance: Instance, model: RelaxedModel, plan: SequencePlan) -> dict[str, float]:
    """Nonzero variable values representing ``plan`` in the relaxation.

    Jobs of a machine fill its last slots in plan order.
    """
    plan.check(instance)
    n = model.n
    p, d = instance.p_list, instance.d_list
    sl = model.s_leq.tolist()
    vals: dict[str, float] = {}
    for m, seq in enumerate(plan.seq):
        first = n - len(seq)
        vals[f"f_{first if seq else 0}_{m}"] = 1
        t = 0
        for q, j in enumerate(seq):
            i = first + q
            setup = 0 if q == 0 else sl[j][m]
            t += setup + p[j][m]
            late = max(0, t - d[j])
            if late > model.t_max:
                raise MalformedSolutionError(
                    f"job {j} is {late} late, beyond t_max={model.t_max}"
                )
            vals[f"x_{i}_{j}_{m}"] = 1
            vals[f"y_{j}_{m}"] = 1
            vals[f"W_{i}_{j}_{m}_{late}"] = 1
            vals[f"P_{i}_{m}"] = p[j][m]
            vals[f"S_{i}_{m}"] = setup
            vals[f"D_{i}_{m}"] = d[j]
            vals[f"C_{i}_{m}"] = t
            vals[f"T_{i}_{m}"] = late
    return {k: v for k, v in vals.items() if v}


def format_solution(values: Mapping[str, float], objective: float, bound: float) -> str:
    lines = [f"OBJ {_num(objective)}", f"BOUND {_num(bound)}"]
    lines += [f"{name} {_num(v)}" for name, v in values.items() if v]
    return "\n".join(lines) + "\n"


def _parse_solution_text(model: RelaxedModel, text: str) -> tuple[dict[str, float], float | None, float | None]:
    values: dict[str, float] = {}
    obj = bound = None
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) != 2:
            raise SolutionParseError(f"line {lineno}: expected 'NAME VALUE', got {line!r}")
        name, value = parts
        try:
            v = float(value)
        except ValueError:
            raise SolutionParseError(f"line {lineno}: bad number {value!r}") from None
        if name == "OBJ":
            obj = v
        elif name == "BOUND":
            bound = v
        elif name in model.index:
            values[name] = v
        else:
            raise SolutionParseError(f"line {lineno}: unknown variable {name!r}")
    return values, obj, bound


def _plan_from_x(model: RelaxedModel, values: Mapping[str, float]) -> SequencePlan:
    n, k = model.n, model.k
    occupant: dict[tuple[int, int], int] = {}
    placed: dict[int, tuple[int, int]] = {}
    for name, v in values.items():
        if not name.startswith("x_") or round(v) == 0:
            continue
        if abs(v - 1) > 1e-6:
            raise MalformedSolutionError(f"{name} = {v} is not binary")
        i, j, m = map(int, name.split("_")[1:])
        if (i, m) in occupant:
            raise MalformedSolutionError(f"slot {i} of machine {m} holds two jobs")
        if j in placed:
            raise MalformedSolutionError(f"job {j} is placed twice")
        occupant[(i, m)] = j
        placed[j] = (i, m)
    missing = [j for j in range(n) if j not in placed]
    if missing:
        raise MalformedSolutionError(f"jobs {missing} are not placed")
    seq = []
    for m in range(k):
        slots = sorted(i for (i, mm) in occupant if mm == m)
        if slots and slots != list(range(n - len(slots), n)):
            raise MalformedSolutionError(f"occupied slots of machine {m} are not a suffix: {slots}")
        seq.append([occupant[(i, m)] for i in slots])
    for m in range(k):
        firsts = [i for i in range(n) if round(values.get(f"f_{i}_{m}", 0)) == 1]
        if any(name.startswith("f_") for name in values) and len(firsts) != 1:
            raise MalformedSolutionError(f"machine {m} has {len(firsts)} first slots")
        for i in firsts:
            if i > 0 and (i - 1, m) in occupant:
                raise MalformedSolutionError(f"first slot {i} of machine {m} follows an occupied slot")
    for j, (i, m) in placed.items():
        y = values.get(f"y_{j}_{m}")
        if y is not None and round(y) != 1:
            raise MalformedSolutionError(f"y_{j}_{m} disagrees with x")
    return SequencePlan.from_lists(seq)


def import_solution(model: RelaxedModel, sol_text: str) -> LowerBoundResult:
    """Read ``NAME VALUE`` lines plus ``OBJ``/``BOUND`` headers from a solver.

    The dual bound is rounded up to an integer (the objective is integral).
    """
    values, obj, bound = _parse_solution_text(model, sol_text)
    if bound is None:
        bound = obj
    if bound is None:
        raise SolutionParseError("solution has neither a BOUND nor an OBJ line")
    plan = _plan_from_x(model, values) if any(n.startswith("x_") for n in values) else None
    int_bound = max(0, math.ceil(bound - 1e-6))
    status = "optimal" if obj is not None and abs(obj - bound) <= 1e-6 else "bound_only"
    return LowerBoundResult(int_bound, status, plan)


# In-process solver ---------------------------------------------------------------------


def _best_orders(instance: Instance, s_leq: list[list[int]], m: int, t_max: int | None):
    """Minimum relaxed cost of every job subset on machine ``m``.

    Returns ``{mask: (cost, order)}``. For a fixed first job the remaining
    completion times only depend on which jobs precede, so a subset dynamic
    program over (first job, scheduled set) is exact. Orders that make a
    job later than ``t_max`` are excluded.
    """
    n = instance.n_jobs
    p, d, w = instance.p_list, instance.d_list, instance.w_list
    INF = math.inf
    length = [0] * (1 << n)
    for mask in range(1, 1 << n):
        low = (mask & -mask).bit_length() - 1
        length[mask] = length[mask & (mask - 1)] + p[low][m] + s_leq[low][m]
    best: dict[int, tuple[float, tuple[int, ...]]] = {0: (0, ())}
    for f in range(n):
        fbit = 1 << f
        late = max(0, p[f][m] - d[f])
        if t_max is not None and late > t_max:
            continue
        g: dict[int, tuple[float, tuple[int, ...]]] = {fbit: (w[f] * late, (f,))}
        # Masks containing f, in increasing popcount order via increasing integer value.
        for mask in range(1, 1 << n):
            if not mask & fbit or mask == fbit:
                continue
            finish = length[mask] - s_leq[f][m]
            cand: tuple[float, tuple[int, ...]] = (INF, ())
            rest = mask & ~fbit
            while rest:
                jbit = rest & -rest
                rest ^= jbit
                j = jbit.bit_length() - 1
                prev = g.get(mask ^ jbit)
                if prev is None or prev[0] == INF:
                    continue
                late = max(0, finish - d[j])
                if t_max is not None and late > t_max:
                    continue
                value = (prev[0] + w[j] * late, prev[1] + (j,))
                if value < cand:
                    cand = value
            g[mask] = cand
        for mask, value in g.items():
            if value[0] < INF and (mask not in best or value < best[mask]):
                best[mask] = value
    return best


def solve_tiny_exact(
    instance: Instance,
    t_max: int | None = None,
    max_jobs: int = TINY_MAX_JOBS,
    max_machines: int = TINY_MAX_MACHINES,
) -> LowerBoundResult:
    """Optimum of the relaxation for small instances, computed in-process.

    Every job-to-machine assignment vector is enumerated in lexicographic
    order; each machine's subset is sequenced optimally. ``t_max`` (None =
    unbounded) mirrors the range of the tardiness variables.
    """
    n, k = instance.n_jobs, instance.n_machines
    if n > max_jobs or k > max_machines:
        raise SizeCapError(
            f"instance {n}x{k} exceeds the exact-relaxation cap of {max_jobs} jobs, "
            f"{max_machines} machines"
        )
    s_leq = compute_s_leq(instance).tolist()
    tables = [_best_orders(instance, s_leq, m, t_max) for m in range(k)]
    best_cost = math.inf
    best_assign = None
    for assign in itertools.product(range(k), repeat=n):
        masks = [0] * k
        for j, m in enumerate(assign):
            masks[m] |= 1 << j
        cost = 0
        for m in range(k):
            entry = tables[m].get(masks[m])
            if entry is None:
                cost = math.inf
                break
            cost += entry[0]
        if cost < best_cost:
            best_cost, best_assign = cost, masks
    if best_assign is None:
        return LowerBoundResult(0, "infeasible_model", None)
    plan = SequencePlan.from_lists([tables[m][best_assign[m]][1] for m in range(k)])
    return LowerBoundResult(int(best_cost), "optimal", plan)


def mip_primal(
    instance: Instance, plan: SequencePlan, limits: AllocLimits = DEFAULT_LIMITS
) -> TimedSchedule:
    """Restore true setups on relaxation sequences and allocate workers."""
    if instance.WR == instance.n_machines:
        return evaluate_sequential(instance, plan)
    return allocate_exact(instance, plan, limits)


# Out-of-process solving ----------------------------------------------------------------

SOLVER_ENV = "WTSCHED_MILP_CMD"


class ExternalSolverError(SchedulingError):
    pass


def solve_external(
    instance: Instance,
    t_max: int,
    command: str,
    workdir: str | Path | None = None,
    time_limit: float | None = None,
) -> LowerBoundResult:
    """Export the model, run ``command`` and import its solution file.

    ``command`` is a template with ``{mps}``, ``{sol}`` and ``{time_limit}``
    placeholders; the solver must write the ``NAME VALUE`` format to
    ``{sol}``.
    """
    model = build_relaxation(instance, t_max)
    with tempfile.TemporaryDirectory(dir=workdir) as tmp:
        mps = Path(tmp) / "model.mps"
        sol = Path(tmp) / "model.sol"
        mps.write_text(export_model(model))
        argv = shlex.split(
            command.format(mps=mps, sol=sol, time_limit=time_limit if time_limit is not None else "")
        )
        try:
            subprocess.run(argv, check=True, capture_output=True, timeout=time_limit)
        except (OSError, subprocess.SubprocessError) as exc:
            raise ExternalSolverError(f"solver command failed: {exc}") from None
        if not sol.exists():
            raise ExternalSolverError(f"solver wrote no solution file at {sol}")
        return import_solution(model, sol.read_text())


def lower_bound(
    instance: Instance,
    upper_bound: int,
    command: str | None = None,
    time_limit: float | None = None,
) -> LowerBoundResult:
    """Tiny in-process solve when the instance fits, else the external solver."""
    n, k = instance.n_jobs, instance.n_machines
    if n <= TINY_MAX_JOBS and k <= TINY_MAX_MACHINES:
        return solve_tiny_exact(instance)
    if not command:
        raise SizeCapError(
            f"instance {n}x{k} is beyond the in-process solver and no external "
            f"solver is configured (set {SOLVER_ENV})"
        )
    return solve_external(instance, compute_tmax(instance, upper_bound), command, time_limit=time_limit)

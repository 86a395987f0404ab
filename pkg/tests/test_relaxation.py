import numpy as np
import pytest
from conftest import make_instance, random_instance
from reference import relaxed_optimum

from wtsched.core import SequencePlan, evaluate_sequential
from wtsched.instgen import GenConfig, generate
from wtsched.relaxation import (
    MalformedSolutionError,
    SizeCapError,
    SolutionParseError,
    build_relaxation,
    column_count,
    compute_s_leq,
    compute_tmax,
    export_model,
    format_solution,
    import_solution,
    mip_primal,
    parse_mps,
    plan_to_solution,
    row_count,
    solve_external,
    solve_tiny_exact,
)


@pytest.fixture
def small():
    return generate(GenConfig(machines=2, jobs_multiplier=3, seed=5))


def test_s_leq_is_min_over_predecessors():
    inst = make_instance(p=[[1], [1], [1]], d=[0] * 3, w=[1] * 3, WR=1, setups={(0, 2, 0): 2, (1, 2, 0): 7})
    assert compute_s_leq(inst)[:, 0].tolist() == [0, 0, 2]


def test_tmax_from_upper_bound():
    inst = make_instance(p=[[1], [1]], d=[0, 0], w=[3, 4], WR=1)
    assert compute_tmax(inst, 25) == 8
    with pytest.raises(ValueError):
        compute_tmax(inst, -1)


def test_census(small):
    t_max = 20
    model = build_relaxation(small, t_max)
    n, k = small.n_jobs, small.n_machines
    assert len(model.columns) == column_count(n, k, t_max)
    assert len(model.rows) == row_count(n, k)
    assert sum(1 for c in model.columns if c.startswith("W_")) == n * n * k * (t_max + 1)
    assert sum(1 for r in model.rows if r.name.startswith("assign")) == n
    assert model.V == int(compute_s_leq(small).max())


def test_census_10x2():
    inst = generate(GenConfig(machines=2, jobs_multiplier=5, seed=1))
    model = build_relaxation(inst, 20)
    assert len(model.columns) == column_count(10, 2, 20) == 200 + 40 + 200 * 21 + 100


def test_export_is_deterministic_and_round_trips(small):
    a = export_model(build_relaxation(small, 15))
    b = export_model(build_relaxation(small, 15))
    assert a == b
    parsed = parse_mps(a)
    model = build_relaxation(small, 15)
    assert len(parsed.columns) == len(model.columns)
    assert len(parsed.rows) - 1 == len(model.rows)  # plus the objective row
    assert parsed.binary == {c for c, b in zip(model.columns, model.integer) if b}


def test_plan_solution_satisfies_model(small):
    res = solve_tiny_exact(small)
    ub = mip_primal(small, res.plan).objective
    model = build_relaxation(small, compute_tmax(small, ub))
    values = plan_to_solution(small, model, res.plan)
    assert model.check(values) == []
    assert model.objective_value(values) == res.bound


def test_solution_import_round_trip(small):
    res = solve_tiny_exact(small)
    model = build_relaxation(small, compute_tmax(small, mip_primal(small, res.plan).objective))
    text = format_solution(plan_to_solution(small, model, res.plan), res.bound, res.bound)
    back = import_solution(model, text)
    assert back.plan == res.plan
    assert back.bound == res.bound
    assert back.status == "optimal"


def test_import_singletons_in_last_slot():
    inst = make_instance(p=[[2, 2], [3, 3]], d=[0, 0], w=[1, 1], WR=1)
    model = build_relaxation(inst, 5)
    res = import_solution(model, "OBJ 5\nBOUND 5\nx_1_0_0 1\nx_1_1_1 1\n")
    assert res.plan == SequencePlan.from_lists([[0], [1]])


def test_import_rejects_double_occupancy(small):
    model = build_relaxation(small, 5)
    n = small.n_jobs
    text = "OBJ 1\n" + "".join(f"x_{n - 1}_{j}_0 1\n" for j in range(n))
    with pytest.raises(MalformedSolutionError):
        import_solution(model, text)


def test_import_rejects_gap_in_slots():
    inst = make_instance(p=[[2], [3]], d=[0, 0], w=[1, 1], WR=1)
    model = build_relaxation(inst, 5)
    with pytest.raises(MalformedSolutionError):
        import_solution(model, "OBJ 1\nx_0_0_0 1\n")
    with pytest.raises(MalformedSolutionError):
        import_solution(model, "OBJ 1\nx_0_0_0 1\nx_0_1_0 0\n")


def test_import_rejects_unknown_names(small):
    model = build_relaxation(small, 5)
    with pytest.raises(SolutionParseError):
        import_solution(model, "OBJ 1\nbogus 1\n")
    with pytest.raises(SolutionParseError):
        import_solution(model, "x_0_0_0\n")


def test_bound_is_rounded_up_and_flagged(small):
    model = build_relaxation(small, 5)
    res = import_solution(model, "OBJ 120\nBOUND 100.2\n")
    assert res.bound == 101 and res.status == "bound_only" and res.plan is None


def test_tiny_single_job():
    inst = make_instance(p=[[7, 5]], d=[2], w=[3], WR=1)
    assert solve_tiny_exact(inst).bound == 3 * (5 - 2)


def test_tiny_two_jobs_one_machine():
    inst = make_instance(p=[[3], [2]], d=[3, 5], w=[1, 1], WR=1)
    res = solve_tiny_exact(inst)
    assert res.bound == 0
    assert res.plan == SequencePlan.from_lists([[0, 1]])


def test_tiny_matches_reference_enumeration():
    rng = np.random.default_rng(11)
    for _ in range(40):
        n, k = int(rng.integers(1, 6)), int(rng.integers(1, 4))
        inst = random_instance(rng, n, k, s0=0)
        assert solve_tiny_exact(inst).bound == relaxed_optimum(inst)


def test_tmax_never_changes_tiny_value(small):
    res = solve_tiny_exact(small)
    ub = mip_primal(small, res.plan).objective
    t0 = compute_tmax(small, ub)
    for t in (t0, t0 + 10, 10 * t0 + 1):
        assert solve_tiny_exact(small, t_max=t).bound == res.bound


def test_tiny_size_cap():
    inst = generate(GenConfig(machines=2, jobs_multiplier=6, seed=1))
    with pytest.raises(SizeCapError):
        solve_tiny_exact(inst)


def test_mip_primal_above_bound(small):
    res = solve_tiny_exact(small)
    assert mip_primal(small, res.plan).objective >= res.bound
    full = small.replace(WR=small.n_machines)
    assert mip_primal(full, res.plan) == evaluate_sequential(full, res.plan)


def test_mip_primal_on_contention(contention):
    inst, plan = contention
    assert mip_primal(inst, plan).objective == 5


def test_external_solver_hook(tmp_path, small):
    """A fake solver that answers with the in-process optimum."""
    res = solve_tiny_exact(small)
    t_max = compute_tmax(small, mip_primal(small, res.plan).objective)
    model = build_relaxation(small, t_max)
    answer = tmp_path / "answer.sol"
    answer.write_text(format_solution(plan_to_solution(small, model, res.plan), res.bound, res.bound))
    got = solve_external(small, t_max, f"cp {answer} {{sol}}")
    assert got.bound == res.bound and got.plan == res.plan

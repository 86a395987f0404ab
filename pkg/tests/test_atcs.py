import math
import time

import numpy as np
import pytest
from conftest import make_instance

from wtsched.core import validate
from wtsched.heuristics.atcs import (
    AtcsScaling,
    atcs_priority,
    atcs_run,
    atcs_scaling,
    atcs_sequence,
    scaling_from_values,
)
from wtsched.instgen import GenConfig, generate


def test_reference_scaling():
    sc = scaling_from_values(mu=5, eta=0.25, tau=0.5, due_range=0.8)
    assert sc.A2 == 1.8
    assert sc.k1 == pytest.approx(1.2 * math.log(5) - 0.8, abs=1e-12)
    assert sc.k1 == pytest.approx(1.1313, abs=1e-4)
    assert sc.k2 == pytest.approx(0.5 / (1.8 * 0.5), abs=1e-12)


def test_a2_switch():
    assert scaling_from_values(5, 0.25, 0.8 - 1e-12, 0.8).A2 == 1.8
    assert scaling_from_values(5, 0.25, 0.8, 0.8).A2 == 2.0


def test_tight_small_ratio_subtraction():
    sc = scaling_from_values(mu=math.e, eta=0.25, tau=0.4, due_range=0.0)
    assert sc.k1 == pytest.approx(0.7, abs=1e-12)


def test_second_subtraction_for_low_eta_high_mu():
    a = scaling_from_values(mu=10, eta=0.25, tau=0.5, due_range=0.8)
    b = scaling_from_values(mu=10, eta=0.6, tau=0.5, due_range=0.8)
    assert b.k1 - a.k1 == pytest.approx(0.5)


def test_clamps():
    sc = scaling_from_values(mu=1, eta=0.25, tau=-3.0, due_range=0.8)
    assert sc.k1 == 0.05 and sc.k2 == 0.05


def test_scaling_from_instance():
    # mu = 10/2; p all 4 and off-diagonal setups all 1 give eta = 0.25
    inst = make_instance(p=np.full((10, 2), 4), d=[0] * 10, w=[1] * 10, WR=1, default_setup=1)
    sc = atcs_scaling(inst, 0.5, 0.8)
    assert (sc.mu, sc.eta, sc.p_bar, sc.s_bar) == (5, 0.25, 4, 1)
    assert sc.k1 == pytest.approx(1.1313, abs=1e-4)
    assert sc.k2 == pytest.approx(0.5556, abs=1e-4)


def _fixed(k1p, k2s):
    return AtcsScaling(mu=1, eta=1, A2=1.8, k1=1.0, k2=1.0, p_bar=k1p, s_bar=k2s)


def test_priority_reference_value():
    inst = make_instance(p=[[9], [4]], d=[0, 10], w=[1, 2], WR=1, setups={(0, 1, 0): 3})
    value = atcs_priority(inst, 1, 0, 0, _fixed(12, 6))
    assert value == pytest.approx(0.5 * math.exp(-0.5) * math.exp(-0.5))
    assert value == pytest.approx(0.1839, abs=1e-4)


def test_priority_factors_collapse():
    inst = make_instance(p=[[9], [4]], d=[0, 3], w=[1, 2], WR=1)
    # already late and zero setup: only w / p remains
    assert atcs_priority(inst, 1, 0, 0, _fixed(12, 6)) == pytest.approx(0.5)
    assert atcs_priority(inst, 1, 0, None, _fixed(12, 6)) == pytest.approx(0.5)


def test_single_job_goes_to_fastest_machine():
    inst = make_instance(p=[[7, 5]], d=[0], w=[1], WR=1)
    sched = atcs_run(inst, tau=0.5, due_range=0.8)
    assert sched.machine == (1,)


def test_sequence_matches_scalar_priority():
    inst = generate(GenConfig(machines=3, jobs_multiplier=3, seed=8))
    sc = atcs_scaling(inst, 0.5, 0.8)
    plan = atcs_sequence(inst, sc)
    # replay with the scalar priority
    loads, last = [0, 0, 0], [None, None, None]
    left = set(inst.jobs)
    seq = [[], [], []]
    while left:
        m_star = min(range(3), key=lambda m: (loads[m], m))
        j = max(sorted(left), key=lambda j: atcs_priority(inst, j, m_star, last[m_star], sc))
        comps = [loads[m] + inst.p_list[j][m] + inst.setup_time(last[m], j, m) for m in range(3)]
        m = comps.index(min(comps))
        seq[m].append(j)
        loads[m], last[m] = comps[m], j
        left.remove(j)
    assert plan.to_lists() == seq


def test_equal_weights_zero_deadlines_feasible():
    inst = make_instance(
        p=[[3, 4], [2, 6], [5, 1]], d=[0, 0, 0], w=[1, 1, 1], WR=1,
        setups={(0, 1, 0): 2, (1, 0, 0): 2, (2, 0, 1): 3, (0, 2, 1): 1},
    )
    sched = atcs_run(inst, tau=0.5, due_range=0.8)
    assert validate(inst, sched).feasible


def test_weight_scaling_keeps_choices():
    inst = generate(GenConfig(machines=3, jobs_multiplier=5, seed=4))
    sc = atcs_scaling(inst, 0.5, 0.8)
    heavy = inst.replace(w=inst.w * 7)
    assert atcs_sequence(inst, sc) == atcs_sequence(heavy, sc)


def test_uses_generator_meta_by_default():
    inst = generate(GenConfig(machines=2, jobs_multiplier=5, tau=0.8, seed=4))
    assert atcs_run(inst) == atcs_run(inst, tau=0.8, due_range=0.8)


def test_large_instance_fast_and_deterministic():
    inst = generate(GenConfig(machines=20, jobs_multiplier=10, seed=1))
    sc = atcs_scaling(inst, 0.5, 0.8)
    t0 = time.perf_counter()
    first = atcs_sequence(inst, sc)
    assert time.perf_counter() - t0 < 1.0
    assert all(atcs_sequence(inst, sc) == first for _ in range(4))

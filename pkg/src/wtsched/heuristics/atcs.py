"""Apparent-tardiness-cost-with-setups dispatching."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from wtsched.core import Instance, SequencePlan, TimedSchedule
from wtsched.instgen import stats
from wtsched.relaxation import mip_primal
from wtsched.resalloc import DEFAULT_LIMITS, AllocLimits

K_FLOOR = 0.05


@dataclass(frozen=True)
class AtcsScaling:
    mu: float
    eta: float
    A2: float
    k1: float
    k2: float
    p_bar: float
    s_bar: float


def scaling_from_values(
    mu: float, eta: float, tau: float, due_range: float, p_bar: float = 1.0, s_bar: float = 1.0
) -> AtcsScaling:
    """k1/k2 look-ahead parameters from job/machine ratio and due-date factors.

    Both are clamped from below at ``K_FLOOR`` (k2 only for non-positive
    tightness) so the exponentials stay finite on instances whose measured
    tightness is negative.
    """
    A2 = 1.8 if tau < 0.8 else 2.0
    k1 = 1.2 * math.log(mu) - due_range if mu > 0 else -math.inf
    if tau < 0.5:
        k1 -= 0.5
    if eta < 0.5 and mu > 5:
        k1 -= 0.5
    k1 = max(k1, K_FLOOR)
    k2 = tau / (A2 * math.sqrt(eta)) if eta > 0 else math.inf
    if tau <= 0:
        k2 = max(k2, K_FLOOR)
    return AtcsScaling(mu=mu, eta=eta, A2=A2, k1=k1, k2=k2, p_bar=p_bar, s_bar=s_bar)


def due_factors(instance: Instance) -> tuple[float, float]:
    """Nominal (tau, R) from generator metadata, else measured ones."""
    meta = instance.meta
    if "tau" in meta and "due_range" in meta:
        return float(meta["tau"]), float(meta["due_range"])
    st = stats(instance)
    return st.tau_real, st.range_real


def atcs_scaling(instance: Instance, tau: float, due_range: float) -> AtcsScaling:
    n, k = instance.n_jobs, instance.n_machines
    p_bar = float(instance.p.mean())
    if n > 1:
        s_bar = float(instance.s[~np.eye(n, dtype=bool)].mean())
    else:
        s_bar = 0.0
    eta = s_bar / p_bar if p_bar > 0 else 0.0
    return scaling_from_values(n / k, eta, tau, due_range, p_bar, s_bar)


def _setup_factor(setup: float, sc: AtcsScaling) -> float:
    denom = sc.k2 * sc.s_bar
    if setup == 0 or math.isinf(denom):
        return 1.0
    if denom == 0:
        return 0.0
    return math.exp(-setup / denom)


def atcs_priority(
    instance: Instance, job: int, machine: int, last_job: int | None, scaling: AtcsScaling
) -> float:
    """Priority of ``job`` on ``machine`` right after ``last_job`` (None = empty)."""
    p = instance.p_list[job][machine]
    d = instance.d_list[job]
    w = instance.w_list[job]
    setup = instance.setup_time(last_job, job, machine)
    slack = math.exp(-max(d - p, 0) / (scaling.k1 * scaling.p_bar))
    return w / p * slack * _setup_factor(setup, scaling)


def atcs_sequence(instance: Instance, scaling: AtcsScaling) -> SequencePlan:
    """Dispatch all jobs; no worker limit is considered here."""
    n, k = instance.n_jobs, instance.n_machines
    p = instance.p.astype(float)
    d = instance.d.astype(float)
    w = instance.w.astype(float)
    s = instance.s
    with np.errstate(divide="ignore"):
        base = w[:, None] / p  # (n, k); p == 0 gives +inf, i.e. top priority
    slack = np.exp(-np.maximum(d[:, None] - p, 0) / (scaling.k1 * scaling.p_bar))
    static = base * slack
    denom = scaling.k2 * scaling.s_bar

    loads = [0] * k
    last: list[int | None] = [None] * k
    seq: list[list[int]] = [[] for _ in range(k)]
    unscheduled = np.ones(n, dtype=bool)
    p_list, s_list = instance.p_list, instance.s_list
    for _ in range(n):
        m_star = min(range(k), key=lambda m: (loads[m], m))
        cand = np.flatnonzero(unscheduled)
        lj = last[m_star]
        setups = np.full(cand.size, float(instance.s0)) if lj is None else s[lj, cand, m_star].astype(float)
        if denom == 0 or math.isinf(denom):
            factor = np.where(setups == 0, 1.0, 0.0 if denom == 0 else 1.0)
        else:
            factor = np.exp(-setups / denom)
        scores = static[cand, m_star] * factor
        j = int(cand[int(np.argmax(scores))])

        best_m, best_c = 0, None
        for m in range(k):
            setup = instance.s0 if last[m] is None else s_list[last[m]][j][m]
            c = loads[m] + p_list[j][m] + setup
            if best_c is None or c < best_c:
                best_m, best_c = m, c
        seq[best_m].append(j)
        loads[best_m] = best_c
        last[best_m] = j
        unscheduled[j] = False
    return SequencePlan.from_lists(seq)


def atcs_run(
    instance: Instance,
    limits: AllocLimits = DEFAULT_LIMITS,
    tau: float | None = None,
    due_range: float | None = None,
) -> TimedSchedule:
    """Dispatch with ATCS, then time the sequences with optimal worker allocation."""
    if tau is None or due_range is None:
        nominal_tau, nominal_r = due_factors(instance)
        tau = nominal_tau if tau is None else tau
        due_range = nominal_r if due_range is None else due_range
    plan = atcs_sequence(instance, atcs_scaling(instance, tau, due_range))
    return mip_primal(instance, plan, limits)

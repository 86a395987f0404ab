import sys
from pathlib import Path

import numpy as np
import pytest

from wtsched.core import Instance, SequencePlan

sys.path.insert(0, str(Path(__file__).parent))

BIG = 1000


def make_instance(p, d, w, WR, setups=None, s0=0, default_setup=0):
    """Instance from per-job data; ``setups`` maps (i, j, m) to a duration."""
    p = np.asarray(p)
    n, k = p.shape
    s = np.full((n, n, k), default_setup)
    for (i, j, m), v in (setups or {}).items():
        s[i, j, m] = v
    return Instance(p=p, s=s, d=d, w=w, WR=WR, s0=s0)


@pytest.fixture
def contention():
    """Two machines, one worker: a(0) then c(2) on m0, b(1) then d(3) on m1."""
    inst = make_instance(
        p=[[4, BIG], [BIG, 4], [3, BIG], [BIG, 3]],
        d=[BIG, BIG, 12, 12],
        w=[1, 1, 1, 2],
        WR=1,
        setups={(0, 2, 0): 5, (1, 3, 1): 5},
    )
    plan = SequencePlan.from_lists([[0, 2], [1, 3]])
    return inst, plan


def random_instance(rng, n, k, WR=None, s0=None, pmax=8, smax=8, dmax=30):
    return Instance(
        p=rng.integers(0, pmax, (n, k)),
        s=rng.integers(0, smax, (n, n, k)),
        d=rng.integers(0, dmax, n),
        w=rng.integers(1, 6, n),
        WR=int(rng.integers(1, k + 1)) if WR is None else WR,
        s0=int(rng.integers(0, 3)) if s0 is None else s0,
    )


def random_plan(rng, n, k):
    jobs = [int(j) for j in rng.permutation(n)]
    cuts = sorted(int(c) for c in rng.integers(0, n + 1, k - 1))
    return SequencePlan.from_lists([jobs[a:b] for a, b in zip([0] + cuts, cuts + [n])])


ACCEPTANCE_LINES: list[str] = []


def report(criterion: int, name: str, ok: bool, detail: str) -> None:
    line = f"[criterion {criterion:2d}] {'PASS' if ok else 'FAIL'} {name}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)

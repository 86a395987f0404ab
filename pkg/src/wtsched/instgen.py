"""Random benchmark instances and due-date statistics of given instances.

Randomness comes from numpy's PCG64 bit generator. Each drawn quantity has
its own stream, seeded by ``SeedSequence([seed, offset])`` with the fixed
offsets in ``_STREAMS``, so adding a new stream never perturbs old ones and
the same seed reproduces an instance on every platform numpy supports.

Real draws are rounded half-up to integers (``floor(x + 0.5)``).
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from typing import Literal

import numpy as np

from wtsched.core import Instance, SchedulingError

SetupMode = Literal["alpha_low", "alpha_high", "uniform"]
WRMode = Literal["half", "full"]

SETUP_MODES: dict[str, tuple[float, float]] = {
    "alpha_low": (0.1, 0.5),
    "alpha_high": (0.5, 1.0),
    "uniform": (5.0, 25.0),
}
SETUP_ALIASES = {"alo": "alpha_low", "ahi": "alpha_high", "u525": "uniform"}

_STREAMS = {"b": 1, "a": 2, "noise": 3, "setup": 4, "weight": 5, "deadline": 6}

ROUNDING_RULE = "half-up: floor(x + 0.5)"


class UndefinedStatsError(SchedulingError, ValueError):
    pass


@dataclass(frozen=True)
class GenConfig:
    machines: int = 2
    jobs_multiplier: int = 5
    setup_mode: SetupMode = "alpha_low"
    tau: float = 0.5
    due_range: float = 0.8
    wr_mode: WRMode = "half"
    seed: int = 0

    def __post_init__(self) -> None:
        mode = SETUP_ALIASES.get(self.setup_mode, self.setup_mode)
        object.__setattr__(self, "setup_mode", mode)
        if self.machines < 2:
            raise ValueError("machines must be >= 2")
        if self.jobs_multiplier < 1:
            raise ValueError("jobs_multiplier must be >= 1")
        if mode not in SETUP_MODES:
            raise ValueError(f"unknown setup mode {self.setup_mode!r}")
        if self.wr_mode not in ("half", "full"):
            raise ValueError(f"unknown WR mode {self.wr_mode!r}")

    @property
    def jobs(self) -> int:
        return self.jobs_multiplier * self.machines

    @property
    def WR(self) -> int:
        return math.ceil(self.machines / 2) if self.wr_mode == "half" else self.machines


@dataclass(frozen=True)
class InstanceStats:
    tau_real: float
    range_real: float
    cmax_estimate: int
    mean_p: float
    mean_s: float


def _round(x: np.ndarray | float) -> np.ndarray:
    return np.floor(np.asarray(x, dtype=float) + 0.5).astype(np.int64)


def _stream(seed: int, name: str) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence([seed, _STREAMS[name]])))


def _offdiag(s: np.ndarray) -> np.ndarray:
    n = s.shape[0]
    mask = ~np.eye(n, dtype=bool)
    return s[mask]  # shape (n*(n-1), k)


def estimate_cmax(instance: Instance) -> int:
    """Makespan estimate used to place deadlines.

    ``ceil((sum_j min_m p_jm + S1) / |M|)``, where ``S1`` sums the
    ``|J| - |M|`` smallest per-job minimum setups (the first job on each
    machine needs no setup).
    """
    return _cmax(instance.p, instance.s)


def _cmax(p: np.ndarray, s: np.ndarray) -> int:
    n, k = p.shape
    total = int(p.min(axis=1).sum()) if n else 0
    if n > k and n >= 2:
        masked = np.where(np.eye(n, dtype=bool)[:, :, None], np.iinfo(np.int64).max, s)
        per_job = masked.min(axis=(0, 2))
        total += int(np.sort(per_job)[: n - k].sum())
    return -(-total // k)


def generate(config: GenConfig) -> Instance:
    n, k, seed = config.jobs, config.machines, config.seed
    b = _stream(seed, "b").uniform(1, 10, size=n)
    a = _stream(seed, "a").uniform(1, 10, size=(n, k))
    noise = _stream(seed, "noise").uniform(0, 10, size=(n, k))
    p = _round(b[:, None] * a + noise)

    lo, hi = SETUP_MODES[config.setup_mode]
    draws = _stream(seed, "setup").uniform(lo, hi, size=(n, n, k))
    if config.setup_mode == "uniform":
        s = _round(draws)
    else:
        s = _round(draws * p[None, :, :])
    s[np.arange(n), np.arange(n), :] = 0

    w = _stream(seed, "weight").integers(1, 10, size=n, endpoint=True)
    cmax = _cmax(p, s)
    d_lo = cmax * (1 - config.tau - config.due_range / 2)
    d_hi = cmax * (1 - config.tau + config.due_range / 2)
    d = np.maximum(0, _round(_stream(seed, "deadline").uniform(d_lo, d_hi, size=n)))

    meta = {
        "generator": asdict(config),
        "tau": config.tau,
        "due_range": config.due_range,
        "cmax_estimate": cmax,
        "rounding": ROUNDING_RULE,
        "rng": "numpy PCG64, SeedSequence([seed, stream])",
        "b": [round(float(x), 12) for x in b],
    }
    return Instance(p=p, s=s, d=d, w=w, WR=config.WR, s0=0, meta=meta)


def stats(instance: Instance) -> InstanceStats:
    """Due-date tightness and range measured on an instance."""
    if instance.n_jobs == 0:
        raise UndefinedStatsError("instance has no jobs")
    cmax = estimate_cmax(instance)
    if cmax == 0:
        raise UndefinedStatsError("makespan estimate is 0")
    d = instance.d
    mean_s = float(_offdiag(instance.s).mean()) if instance.n_jobs > 1 else 0.0
    return InstanceStats(
        tau_real=1.0 - float(d.mean()) / cmax,
        range_real=float(d.max() - d.min()) / cmax,
        cmax_estimate=cmax,
        mean_p=float(instance.p.mean()),
        mean_s=mean_s,
    )

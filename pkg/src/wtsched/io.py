"""Line-oriented JSON documents for instances, plans and schedules.

Numeric rows are kept on one line each so files stay readable and diff
cleanly; everything else is ordinary JSON and loads with ``json.loads``.
"""

from __future__ import annotations

import json
from collections.abc import Mapping
from pathlib import Path
from typing import Any

from wtsched.core import Instance, SchedulingError, SequencePlan, TimedSchedule


class FormatError(SchedulingError, ValueError):
    pass


def _is_flat(value: Any) -> bool:
    return isinstance(value, list) and all(not isinstance(v, (list, dict)) for v in value)


def dumps(value: Any, indent: int = 0) -> str:
    """JSON text with scalar lists inlined and deterministic key order."""
    pad = "  " * indent
    inner = "  " * (indent + 1)
    if isinstance(value, Mapping):
        if not value:
            return "{}"
        items = [f"{inner}{json.dumps(str(k))}: {dumps(v, indent + 1)}" for k, v in value.items()]
        return "{\n" + ",\n".join(items) + "\n" + pad + "}"
    if isinstance(value, (list, tuple)):
        value = list(value)
        if _is_flat(value):
            return json.dumps(value)
        items = [f"{inner}{dumps(v, indent + 1)}" for v in value]
        return "[\n" + ",\n".join(items) + "\n" + pad + "]"
    return json.dumps(value)


def _load(path: str | Path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"{path}: not valid JSON ({exc})") from None


def instance_to_text(instance: Instance) -> str:
    return dumps(instance.to_dict()) + "\n"


def write_instance(instance: Instance, path: str | Path) -> None:
    Path(path).write_text(instance_to_text(instance))


def read_instance(path: str | Path) -> Instance:
    data = _load(path)
    if not isinstance(data, dict):
        raise FormatError(f"{path}: expected an object")
    return Instance.from_dict(data)


def plan_to_text(plan: SequencePlan) -> str:
    return dumps({"seq": plan.to_lists()}) + "\n"


def write_plan(plan: SequencePlan, path: str | Path) -> None:
    Path(path).write_text(plan_to_text(plan))


def read_plan(path: str | Path) -> SequencePlan:
    data = _load(path)
    try:
        return SequencePlan.from_lists(data["seq"])
    except (KeyError, TypeError):
        raise FormatError(f"{path}: expected an object with a 'seq' list of lists") from None


def schedule_to_dict(sched: TimedSchedule) -> dict[str, Any]:
    return {
        "columns": ["job", "machine", "setup_start", "setup_end", "completion"],
        "records": [
            [j, sched.machine[j], sched.setup_start[j], sched.setup_end[j], sched.completion[j]]
            for j in range(sched.n_jobs)
        ],
        "objective": sched.objective,
        "proven_optimal_allocation": sched.proven_optimal_allocation,
    }


def schedule_to_text(sched: TimedSchedule) -> str:
    return dumps(schedule_to_dict(sched)) + "\n"


def write_schedule(sched: TimedSchedule, path: str | Path) -> None:
    Path(path).write_text(schedule_to_text(sched))


def schedule_from_dict(data: Mapping[str, Any]) -> TimedSchedule:
    try:
        records = sorted(data["records"], key=lambda r: r[0])
        if [r[0] for r in records] != list(range(len(records))):
            raise FormatError("schedule records must cover jobs 0..n-1 exactly once")
        return TimedSchedule(
            machine=tuple(int(r[1]) for r in records),
            setup_start=tuple(int(r[2]) for r in records),
            setup_end=tuple(int(r[3]) for r in records),
            completion=tuple(int(r[4]) for r in records),
            objective=int(data["objective"]),
            proven_optimal_allocation=bool(data.get("proven_optimal_allocation", False)),
        )
    except (KeyError, IndexError, TypeError) as exc:
        raise FormatError(f"malformed schedule document: {exc}") from None


def read_schedule(path: str | Path) -> TimedSchedule:
    return schedule_from_dict(_load(path))

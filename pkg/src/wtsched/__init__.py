"""Weighted-tardiness scheduling on unrelated parallel machines with
sequence-dependent setups and a limited pool of setup workers."""

from wtsched.core import (
    Instance,
    InvalidPlanError,
    SchedulingError,
    SequencePlan,
    TimedSchedule,
    ValidationReport,
    evaluate_sequential,
    validate,
    weighted_tardiness,
)

__version__ = "0.1.0"

__all__ = [
    "Instance",
    "InvalidPlanError",
    "SchedulingError",
    "SequencePlan",
    "TimedSchedule",
    "ValidationReport",
    "evaluate_sequential",
    "validate",
    "weighted_tardiness",
    "__version__",
]

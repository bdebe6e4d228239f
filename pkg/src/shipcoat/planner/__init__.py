"""Inspection-plan optimization."""

from ..plans import (IntervalPolicy, PlanError, PlanningHorizon, SchedulePlan,
                     expand_interval_policy)
from .ga import GAConfig, GAResult, run_ga
from .optimize import (PRACTICE_INTERVALS, CompartmentGroups, PlanResult, brute_force_intervals,
                       brute_force_plan, group_compartments, optimize_intervals,
                       optimize_schedule, practice_plan, sensitivity_sweep)

__all__ = [
    "CompartmentGroups", "GAConfig", "GAResult", "IntervalPolicy", "PRACTICE_INTERVALS",
    "PlanError", "PlanResult", "PlanningHorizon", "SchedulePlan", "brute_force_intervals",
    "brute_force_plan", "expand_interval_policy", "group_compartments", "optimize_intervals",
    "optimize_schedule", "practice_plan", "run_ga", "sensitivity_sweep",
]

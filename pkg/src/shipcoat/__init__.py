"""Coating-defect modeling and inspection planning for ship compartments."""

__version__ = "0.1.0"

from .economics import CostConfig, CostModel, plan_total_cost
from .fleet import (CompartmentHistory, DataError, FleetDataset, InspectionRecord,
                    parse_inspection_csv, split_by_time, write_inspection_csv)
from .nhpp import (PowerLawParams, TimeInterval, count_pmf, cumulative_intensity,
                   expected_defect_age, intensity, kth_arrival_cdf)
from .plans import IntervalPolicy, PlanError, PlanningHorizon, SchedulePlan

__all__ = [
    "CompartmentHistory", "CostConfig", "CostModel", "DataError", "FleetDataset",
    "InspectionRecord", "IntervalPolicy", "PlanError", "PlanningHorizon", "PowerLawParams",
    "SchedulePlan", "TimeInterval", "__version__", "count_pmf", "cumulative_intensity",
    "expected_defect_age", "intensity", "kth_arrival_cdf", "parse_inspection_csv",
    "plan_total_cost", "split_by_time", "write_inspection_csv",
]

"""Expected cost of inspection plans.

Each inspection of a compartment costs ``c_ins`` plus the repair of every
defect found, priced at ``alpha * age^beta`` of its expected age.  Taking a
ship out of service for any inspection at a grid point costs ``c_s`` once.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass

import numpy as np

from .nhpp import MAX_AGE_TERMS, AgeTable, PowerLawParams, TruncationWarning, _cum
from .plans import PlanError, PlanningHorizon, SchedulePlan


@dataclass(frozen=True)
class CostConfig:
    ship_setup_cost: float = 500.0
    compartment_inspection_cost: float = 10.0
    repair_alpha: float = 1.0
    repair_beta: float = 1.25
    age_sum_tolerance: float = 1e-9
    max_age_terms: int = MAX_AGE_TERMS

    def __post_init__(self):
        if self.ship_setup_cost < 0 or self.compartment_inspection_cost < 0 or self.repair_alpha < 0:
            raise ValueError("costs must be nonnegative")
        if not self.repair_beta > 0:
            raise ValueError("repair_beta must be positive")
        if not self.age_sum_tolerance > 0:
            raise ValueError("age_sum_tolerance must be positive")
        if self.max_age_terms < 1:
            raise ValueError("max_age_terms must be >= 1")

    def repair_fn(self):
        alpha, beta = self.repair_alpha, self.repair_beta
        return lambda age: alpha * np.power(age, beta)

    def to_dict(self) -> dict:
        return asdict(self)


def repair_cost(age, config: CostConfig):
    """``alpha * age^beta``."""
    a = np.asarray(age, dtype=float)
    if np.any(a < 0):
        raise ValueError("age must be nonnegative")
    out = config.repair_alpha * np.power(a, config.repair_beta)
    return float(out) if out.ndim == 0 else out


def _as_draws(params) -> list:
    if isinstance(params, PowerLawParams):
        return [params]
    draws = list(params)
    if not draws:
        raise ValueError("empty parameter list")
    return draws


def _repair_sums(params, times, lo, hi, config: CostConfig) -> np.ndarray:
    """Expected repair cost of each interval, averaged over parameter draws."""
    draws = _as_draws(params)
    total = np.zeros(np.size(lo))
    for p in draws:
        if config.repair_alpha == 0:
            break
        table = AgeTable(p, times, lo, hi)
        sums, _, capped = table.repair_sums(config.repair_fn(), config.age_sum_tolerance,
                                            config.max_age_terms)
        if np.any(capped):
            warnings.warn(f"age-cost series capped at {config.max_age_terms} terms for "
                          f"{int(capped.sum())} interval(s)", TruncationWarning, stacklevel=3)
        total += sums
    return total / len(draws)


def expected_compartment_cost(params, prev_inspection: float, this_inspection: float,
                              config: CostConfig) -> float:
    """``c_ins`` plus expected repair cost of the defects that arrived since ``prev_inspection``."""
    if not 0 <= prev_inspection < this_inspection:
        raise ValueError("need 0 <= prev_inspection < this_inspection")
    rep = _repair_sums(params, [prev_inspection, this_inspection], [0], [1], config)[0]
    return float(config.compartment_inspection_cost + rep)


def expected_event_cost(selections, last_times: dict, params: dict, t_k: float,
                        config: CostConfig) -> float:
    """Cost of one ship's inspection event at ``t_k``.

    ``selections`` are the compartment keys inspected; an empty selection is no
    event and costs nothing.
    """
    selections = list(selections)
    if not selections:
        return 0.0
    total = config.ship_setup_cost
    for key in selections:
        total += expected_compartment_cost(params[key], last_times[key], t_k, config)
    return float(total)


def last_inspection_time(plan: SchedulePlan, compartment, k: int, floor: float | None = None) -> float:
    """Time of the latest inspection strictly before grid index ``k``.

    Falls back to ``floor`` (default: the grid origin ``t_now``) when there is
    none.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    row = plan.row(compartment)[: k - 1]
    idx = np.flatnonzero(row)
    if idx.size:
        return plan.horizon.time(int(idx[-1]) + 1)
    return plan.horizon.t_now if floor is None else float(floor)


@dataclass(frozen=True)
class CostBreakdown:
    total: float
    setup: float
    inspection: float
    repair: float
    n_events: int
    n_inspections: int

    def to_dict(self) -> dict:
        return asdict(self)


def plan_cost_breakdown(plan: SchedulePlan, fleet_params: dict, config: CostConfig,
                        floors: dict | None = None) -> CostBreakdown:
    """Reference evaluation: walk the grid, event by event, one interval at a time."""
    if not plan.feasible:
        raise PlanError("every compartment must be inspected at the final grid point")
    hz = plan.horizon
    last = {key: (hz.t_now if floors is None else floors.get(key, hz.t_now)) for key in plan.keys}
    setup = inspection = repair = 0.0
    n_events = 0
    by_ship: dict = {}
    for key in plan.keys:
        by_ship.setdefault(key[0], []).append(key)
    for k in range(1, hz.K + 1):
        t_k = hz.time(k)
        for ship in sorted(by_ship):
            sel = [key for key in by_ship[ship] if plan.row(key)[k - 1]]
            if not sel:
                continue
            n_events += 1
            setup += config.ship_setup_cost
            for key in sel:
                inspection += config.compartment_inspection_cost
                repair += expected_compartment_cost(fleet_params[key], last[key], t_k, config) \
                    - config.compartment_inspection_cost
                last[key] = t_k
    return CostBreakdown(setup + inspection + repair, setup, inspection, repair, n_events,
                         plan.n_inspections)


def plan_total_cost(plan: SchedulePlan, fleet_params: dict, config: CostConfig,
                    horizon: PlanningHorizon | None = None, floors: dict | None = None) -> float:
    """Expected total cost of ``plan`` over its horizon."""
    if horizon is not None and horizon != plan.horizon:
        raise PlanError("plan was built for a different horizon")
    return plan_cost_breakdown(plan, fleet_params, config, floors).total


def expected_horizon_defects(params: PowerLawParams, inspection_times, horizon: PlanningHorizon) -> float:
    """Expected defects found over the horizon by inspections at ``inspection_times``."""
    t = np.asarray(inspection_times, dtype=float)
    if t.size == 0:
        return 0.0
    if t[0] <= horizon.t_now or t[-1] > horizon.t_end + 1e-9 or np.any(np.diff(t) <= 0):
        raise ValueError("inspection times must be increasing within (t_now, t_end]")
    edges = np.concatenate([[horizon.t_now], t])
    return float(np.sum(_cum(params.a, params.b, edges[:-1], edges[1:])))


class CostModel:
    """Cached per-compartment interval costs on the planning grid.

    ``pair_cost(key, i, j)`` is the expected cost of inspecting compartment
    ``key`` at ``t_j`` when its previous inspection was at ``t_i`` (``i = 0``
    stands for the compartment's floor time, normally ``t_now``).
    """

    def __init__(self, fleet_params: dict, config: CostConfig, horizon: PlanningHorizon,
                 floors: dict | None = None, keys=None):
        self.fleet_params = fleet_params
        self.config = config
        self.horizon = horizon
        self.keys = tuple(sorted(fleet_params)) if keys is None else tuple(tuple(k) for k in keys)
        self.floors = {k: (horizon.t_now if floors is None else floors.get(k, horizon.t_now))
                       for k in self.keys}
        for k, f in self.floors.items():
            if f > horizon.time(1) - 1e-12 or f < 0:
                raise ValueError(f"floor time of {k} must lie in [0, t_1)")
        self._full: dict = {}
        self._pairs: dict = {}

    def _times(self, key) -> np.ndarray:
        t = self.horizon.times.copy()
        t[0] = self.floors[key]
        return t

    def cost_matrix(self, key) -> np.ndarray:
        """``(K+1, K+1)`` upper-triangular matrix of interval costs."""
        key = tuple(key)
        if key not in self._full:
            K = self.horizon.K
            lo, hi = np.triu_indices(K + 1, 1)
            known = self._pairs.setdefault(key, {})
            missing = [(i, j) for i, j in zip(lo.tolist(), hi.tolist()) if (i, j) not in known]
            if missing:
                self._fill(key, missing)
            R = np.full((K + 1, K + 1), np.nan)
            for (i, j), v in known.items():
                R[i, j] = v
            self._full[key] = R
        return self._full[key]

    def _fill(self, key, pairs) -> None:
        lo = np.array([p[0] for p in pairs], dtype=int)
        hi = np.array([p[1] for p in pairs], dtype=int)
        rep = _repair_sums(self.fleet_params[key], self._times(key), lo, hi, self.config)
        vals = self.config.compartment_inspection_cost + rep
        known = self._pairs.setdefault(key, {})
        for (i, j), v in zip(pairs, vals.tolist()):
            known[(i, j)] = v

    def pair_costs(self, key, lo, hi) -> np.ndarray:
        key = tuple(key)
        known = self._pairs.setdefault(key, {})
        wanted = list(zip(np.asarray(lo).tolist(), np.asarray(hi).tolist()))
        need = sorted({p for p in wanted if p not in known})
        if need:
            self._fill(key, need)
        return np.array([known[p] for p in wanted], dtype=float)

    def row_cost(self, key, row) -> float:
        """Inspection plus repair cost of one compartment's inspection row."""
        ks = np.flatnonzero(np.asarray(row, dtype=bool)) + 1
        if ks.size == 0:
            return 0.0
        prev = np.concatenate([[0], ks[:-1]])
        return float(np.sum(self.pair_costs(key, prev, ks)))

    def plan_cost(self, plan: SchedulePlan) -> float:
        return self.breakdown(plan).total

    def breakdown(self, plan: SchedulePlan) -> CostBreakdown:
        if not plan.feasible:
            raise PlanError("every compartment must be inspected at the final grid point")
        comp = math.fsum(self.row_cost(k, plan.row(k)) for k in plan.keys)
        n_ins = plan.n_inspections
        inspection = n_ins * self.config.compartment_inspection_cost
        n_events = plan.n_events
        setup = n_events * self.config.ship_setup_cost
        return CostBreakdown(setup + comp, setup, inspection, comp - inspection, n_events, n_ins)

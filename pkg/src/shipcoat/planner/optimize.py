"""Fixed-interval and free-schedule plan optimization."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field, replace

import numpy as np

from ..economics import CostConfig, CostModel
from ..nhpp import _cum
from ..plans import (IntervalPolicy, PlanError, PlanningHorizon, SchedulePlan,
                     expand_interval_policy, interval_row)
from .ga import GAConfig, GAResult, run_ga

BRUTE_FORCE_BITS = 24
BRUTE_FORCE_INTERVAL_LIMIT = 2_000_000


@dataclass(frozen=True)
class CompartmentGroups:
    """Partition of compartments into rate bands; ``G1`` holds the lowest rates."""

    groups: dict  # label -> tuple of keys
    rates: dict = field(default_factory=dict)  # key -> expected defects over the horizon

    def __post_init__(self):
        seen = [k for ms in self.groups.values() for k in ms]
        if len(seen) != len(set(seen)):
            raise ValueError("a compartment appears in more than one group")

    @property
    def labels(self) -> list:
        return list(self.groups)

    @property
    def keys(self) -> list:
        return sorted(k for ms in self.groups.values() for k in ms)

    def label_of(self, key) -> str:
        for label, ms in self.groups.items():
            if tuple(key) in ms:
                return label
        raise KeyError(key)

    @classmethod
    def singletons(cls, keys) -> "CompartmentGroups":
        return cls({"/".join(k): (tuple(k),) for k in sorted(keys)})

    def to_dict(self) -> dict:
        return {g: ["/".join(k) for k in ms] for g, ms in self.groups.items()}


def _point(params):
    if isinstance(params, (list, tuple)):
        ln = np.array([[p.ln_a, p.ln_b] for p in params]).mean(axis=0)
        return float(np.exp(ln[0])), float(np.exp(ln[1]))
    return params.a, params.b


def group_compartments(fleet_params: dict, horizon: PlanningHorizon, n_groups: int) -> CompartmentGroups:
    """Rank compartments by expected defects over the horizon; split into equal-count bands."""
    if n_groups < 1:
        raise ValueError("n_groups must be >= 1")
    keys = sorted(fleet_params)
    rates = {}
    for k in keys:
        a, b = _point(fleet_params[k])
        rates[k] = float(_cum(a, b, horizon.t_now, horizon.t_end))
    ranked = sorted(keys, key=lambda k: (rates[k], k))
    n = min(n_groups, len(ranked)) if ranked else 0
    bands = np.array_split(np.arange(len(ranked)), n) if n else []
    groups = {f"G{i + 1}": tuple(ranked[j] for j in band) for i, band in enumerate(bands)}
    return CompartmentGroups(groups, rates)


class _Problem:
    """Vectorized plan costs for group-level genomes."""

    def __init__(self, model: CostModel, groups: CompartmentGroups):
        self.model = model
        self.groups = groups
        self.labels = groups.labels
        self.K = model.horizon.K
        self.cfg = model.config
        ships = sorted({k[0] for ms in groups.groups.values() for k in ms})
        self.ship_groups = [np.array([g for g, lab in enumerate(self.labels)
                                      if any(k[0] == s for k in groups.groups[lab])]) for s in ships]

    # interval genomes -----------------------------------------------------
    def interval_table(self) -> np.ndarray:
        """``cost_by_y[g, y - 1]``: inspection and repair cost of group ``g`` at interval ``y``."""
        if hasattr(self, "_by_y"):
            return self._by_y
        K = self.K
        pairs = []
        for y in range(1, K + 1):
            ks = np.flatnonzero(interval_row(y, K)) + 1
            pairs.append((np.concatenate([[0], ks[:-1]]), ks))
        lo_all = np.concatenate([p[0] for p in pairs])
        hi_all = np.concatenate([p[1] for p in pairs])
        bounds = np.cumsum([0] + [p[0].size for p in pairs])
        table = np.zeros((len(self.labels), K))
        for g, lab in enumerate(self.labels):
            for key in self.groups.groups[lab]:
                costs = self.model.pair_costs(key, lo_all, hi_all)
                table[g] += np.add.reduceat(costs, bounds[:-1])
        self._by_y = table
        masks = np.stack([interval_row(y, K) for y in range(1, K + 1)])
        self._masks = np.packbits(masks, axis=1)  # (K, bytes)
        return table

    def interval_cost(self, Y: np.ndarray) -> np.ndarray:
        table = self.interval_table()
        Y = np.asarray(Y, dtype=int)
        g = np.arange(Y.shape[1])
        comp = table[g[None, :], Y - 1].sum(axis=1)
        events = np.zeros(Y.shape[0])
        for gs in self.ship_groups:
            merged = np.bitwise_or.reduce(self._masks[Y[:, gs] - 1], axis=1)
            events += np.bitwise_count(merged).sum(axis=1)
        return comp + self.cfg.ship_setup_cost * events

    # schedule genomes -----------------------------------------------------
    def schedule_tables(self) -> np.ndarray:
        if hasattr(self, "_R"):
            return self._R
        K = self.K
        R = np.zeros((len(self.labels), K + 1, K + 1))
        for g, lab in enumerate(self.labels):
            for key in self.groups.groups[lab]:
                R[g] += np.nan_to_num(self.model.cost_matrix(key), nan=0.0)
        self._R = R
        return R

    def schedule_matrix(self, X: np.ndarray) -> np.ndarray:
        """Genomes ``(P, G*(K-1))`` -> inspection tensor ``(P, G, K)`` with the final bit set."""
        P = X.shape[0]
        G = len(self.labels)
        body = np.asarray(X, dtype=bool).reshape(P, G, self.K - 1)
        return np.concatenate([body, np.ones((P, G, 1), dtype=bool)], axis=2)

    def schedule_cost(self, X: np.ndarray) -> np.ndarray:
        R = self.schedule_tables()
        x = self.schedule_matrix(X)
        P, G, K = x.shape
        k = np.arange(1, K + 1)
        last = np.maximum.accumulate(np.where(x, k, 0), axis=2)
        prev = np.concatenate([np.zeros((P, G, 1), dtype=int), last[:, :, :-1]], axis=2)
        gi = np.arange(G)[None, :, None]
        comp = np.where(x, R[gi, prev, k[None, None, :]], 0.0).sum(axis=(1, 2))
        events = np.zeros(P)
        for gs in self.ship_groups:
            events += x[:, gs, :].any(axis=1).sum(axis=1)
        return comp + self.cfg.ship_setup_cost * events

    def plan_from_rows(self, rows: dict) -> SchedulePlan:
        """Expand per-group rows of length K to a compartment-level plan."""
        keys = self.groups.keys
        x = np.stack([rows[self.groups.label_of(k)] for k in keys])
        return SchedulePlan(keys, x, self.model.horizon)


def _descend_intervals(cost_of_y, G: int, K: int, max_sweeps: int = 50) -> np.ndarray:
    """Coordinate descent over per-group intervals from the best common interval."""
    common = np.repeat(np.arange(1, K + 1)[:, None], G, axis=1)
    y = common[int(np.argmin(cost_of_y(common)))].copy()
    best = float(cost_of_y(y[None, :])[0])
    for _ in range(max_sweeps):
        improved = False
        for g in range(G):
            cand = np.repeat(y[None, :], K, axis=0)
            cand[:, g] = np.arange(1, K + 1)
            c = cost_of_y(cand)
            i = int(np.argmin(c))
            if c[i] < best - 1e-9 * max(1.0, abs(best)):
                best, y = float(c[i]), cand[i].copy()
                improved = True
        if not improved:
            break
    return y


@dataclass
class PlanResult:
    plan: SchedulePlan
    cost: float
    policy: IntervalPolicy | None = None
    ga: GAResult | None = None
    groups: CompartmentGroups | None = None

    def __iter__(self):
        yield self.policy if self.policy is not None else self.plan
        yield self.cost


def _model(fleet_params, config, horizon, model):
    if model is not None:
        return model
    return CostModel(fleet_params, config, horizon)


def optimize_intervals(fleet_params: dict, config: CostConfig, horizon: PlanningHorizon,
                       ga: GAConfig = GAConfig(), groups: CompartmentGroups | None = None,
                       threads: int = 1, model: CostModel | None = None) -> PlanResult:
    """GA over one inspection interval (in grid steps) per compartment or per group.

    Unpacks as ``(policy, cost)``.
    """
    model = _model(fleet_params, config, horizon, model)
    groups = groups or CompartmentGroups.singletons(fleet_params)
    prob = _Problem(model, groups)
    prob.interval_table()
    K = horizon.K
    G = len(prob.labels)
    seeds = np.repeat(np.arange(1, K + 1)[:, None], G, axis=1)
    res = run_ga(prob.interval_cost, G, 1, K, ga, seeds=seeds, threads=threads)
    y = {lab: int(v) for lab, v in zip(prob.labels, res.best)}
    policy = IntervalPolicy(y, horizon, dict(groups.groups))
    plan = expand_interval_policy(policy, groups.keys)
    cost = model.plan_cost(plan)
    return PlanResult(plan, cost, policy, res, groups)


def optimize_schedule(fleet_params: dict, config: CostConfig, horizon: PlanningHorizon,
                      ga: GAConfig = GAConfig(), groups: CompartmentGroups | None = None,
                      threads: int = 1, model: CostModel | None = None) -> PlanResult:
    """GA over one binary inspection row per group; members share their group's row.

    Unpacks as ``(plan, cost)``.
    """
    model = _model(fleet_params, config, horizon, model)
    groups = groups or CompartmentGroups.singletons(fleet_params)
    prob = _Problem(model, groups)
    prob.schedule_tables()
    K = horizon.K
    G = len(prob.labels)
    if K == 1:
        rows = {lab: np.ones(1, dtype=bool) for lab in prob.labels}
        plan = prob.plan_from_rows(rows)
        return PlanResult(plan, model.plan_cost(plan), None, None, groups)
    rows = np.stack([interval_row(y, K)[:-1] for y in range(1, K + 1)]).astype(int)

    def encode(Y):
        return rows[np.asarray(Y) - 1].reshape(len(Y), -1)
    local = _descend_intervals(lambda Y: prob.schedule_cost(encode(Y)), G, K)
    seeds = np.vstack([encode(local[None, :]), encode(np.repeat(np.arange(1, K + 1)[:, None], G, 1))])
    res = run_ga(prob.schedule_cost, G * (K - 1), 0, 1, ga, seeds=seeds, threads=threads)
    x = prob.schedule_matrix(res.best[None, :])[0]
    plan = prob.plan_from_rows({lab: x[g] for g, lab in enumerate(prob.labels)})
    return PlanResult(plan, model.plan_cost(plan), None, res, groups)


def brute_force_plan(fleet_params: dict, config: CostConfig, horizon: PlanningHorizon,
                     groups: CompartmentGroups | None = None, model: CostModel | None = None,
                     chunk: int = 1 << 15) -> PlanResult:
    """Exact optimum over every feasible group schedule (at most 2^24 of them)."""
    model = _model(fleet_params, config, horizon, model)
    groups = groups or CompartmentGroups.singletons(fleet_params)
    prob = _Problem(model, groups)
    n_bits = len(prob.labels) * (horizon.K - 1)
    if n_bits > BRUTE_FORCE_BITS:
        raise ValueError(f"{n_bits} free plan bits exceed the enumeration bound of {BRUTE_FORCE_BITS}")
    best_cost, best_code = np.inf, 0
    shifts = np.arange(n_bits, dtype=np.int64)
    for start in range(0, 1 << n_bits, chunk):
        codes = np.arange(start, min(start + chunk, 1 << n_bits), dtype=np.int64)
        X = ((codes[:, None] >> shifts) & 1).astype(np.int8)
        cost = prob.schedule_cost(X) if n_bits else prob.schedule_cost(np.zeros((codes.size, 0)))
        i = int(np.argmin(cost))
        if cost[i] < best_cost:
            best_cost, best_code = float(cost[i]), int(codes[i])
    X = ((np.array([best_code], dtype=np.int64)[:, None] >> shifts) & 1).astype(np.int8)
    x = prob.schedule_matrix(X)[0]
    plan = prob.plan_from_rows({lab: x[g] for g, lab in enumerate(prob.labels)})
    return PlanResult(plan, model.plan_cost(plan), None, None, groups)


def brute_force_intervals(fleet_params: dict, config: CostConfig, horizon: PlanningHorizon,
                          groups: CompartmentGroups | None = None, model: CostModel | None = None,
                          chunk: int = 1 << 15) -> PlanResult:
    """Exact optimum over every interval policy (``K^n_groups`` of them)."""
    model = _model(fleet_params, config, horizon, model)
    groups = groups or CompartmentGroups.singletons(fleet_params)
    prob = _Problem(model, groups)
    K, G = horizon.K, len(prob.labels)
    if K ** G > BRUTE_FORCE_INTERVAL_LIMIT:
        raise ValueError(f"{K}^{G} interval policies exceed the enumeration bound")
    best_cost, best = np.inf, None
    it = itertools.product(range(1, K + 1), repeat=G)
    while True:
        block = np.array(list(itertools.islice(it, chunk)), dtype=int)
        if block.size == 0:
            break
        cost = prob.interval_cost(block.reshape(-1, G))
        i = int(np.argmin(cost))
        if cost[i] < best_cost:
            best_cost, best = float(cost[i]), block[i].copy()
    policy = IntervalPolicy({lab: int(v) for lab, v in zip(prob.labels, best)}, horizon,
                            dict(groups.groups))
    plan = expand_interval_policy(policy, groups.keys)
    return PlanResult(plan, model.plan_cost(plan), policy, None, groups)


PRACTICE_INTERVALS = (12, 24, 30, 60)


def practice_plan(assignment: dict, horizon: PlanningHorizon) -> SchedulePlan:
    """Fixed-interval plan from intervals in months, each a multiple of ``delta_t``."""
    y = {}
    for key, months in assignment.items():
        steps = months / horizon.delta_t
        if months <= 0 or abs(steps - round(steps)) > 1e-9:
            raise PlanError(f"practice interval {months} months for {key} is not on the "
                            f"{horizon.delta_t}-month grid")
        y[tuple(key)] = min(int(round(steps)), horizon.K)
    return expand_interval_policy(IntervalPolicy(y, horizon))


SWEEP_AXES = {"beta": "repair_beta", "ship_setup": "ship_setup_cost"}


def sensitivity_sweep(axis: str, values, fleet_params: dict, config: CostConfig,
                      horizon: PlanningHorizon, ga: GAConfig, practice: dict | None = None,
                      n_groups: int = 10, interval_groups: CompartmentGroups | None = None,
                      threads: int = 1, floors: dict | None = None) -> list:
    """Re-optimize under each value of one cost setting.

    Returns one row per (value, planner) with total cost, event count,
    inspection count and per-event compartment counts.
    """
    if axis not in SWEEP_AXES:
        raise ValueError(f"axis must be one of {sorted(SWEEP_AXES)}")
    values = list(values)
    if not values:
        raise ValueError("values must be nonempty")
    sched_groups = group_compartments(fleet_params, horizon, n_groups)
    rows = []
    for v in values:
        cfg = replace(config, **{SWEEP_AXES[axis]: float(v)})
        model = CostModel(fleet_params, cfg, horizon, floors)
        plans = {}
        if practice is not None:
            p = practice_plan(practice, horizon)
            plans["practice"] = (p, model.plan_cost(p))
        r = optimize_intervals(fleet_params, cfg, horizon, ga, interval_groups, threads, model)
        plans["interval"] = (r.plan, r.cost)
        r = optimize_schedule(fleet_params, cfg, horizon, ga, sched_groups, threads, model)
        plans["schedule"] = (r.plan, r.cost)
        for name, (plan, cost) in plans.items():
            rows.append({
                "axis": axis, "value": float(v), "planner": name, "total_cost": cost,
                "n_events": plan.n_events, "n_inspections": plan.n_inspections,
                "event_sizes": [t["compartments"] for t in plan.timeline() if t["compartments"]],
                "plan": plan,
            })
    return rows

import numpy as np
import pytest

from shipcoat.economics import CostConfig, CostModel
from shipcoat.nhpp import PowerLawParams
from shipcoat.planner import (CompartmentGroups, GAConfig, brute_force_intervals, brute_force_plan,
                              group_compartments, optimize_intervals, optimize_schedule,
                              practice_plan, run_ga, sensitivity_sweep)
from shipcoat.plans import PlanError, PlanningHorizon

HZ = PlanningHorizon.from_span(0, 24, 3)
PARAMS = {("A", "1"): PowerLawParams(0.02, 1.5), ("A", "2"): PowerLawParams(0.3, 1.1),
          ("B", "1"): PowerLawParams(0.002, 2.0)}
CFG = CostConfig(ship_setup_cost=40.0, compartment_inspection_cost=5.0)
FAST = GAConfig(population_size=120, stagnation_limit=150, max_generations=2000, seed=3)


def test_ga_finds_onemax():
    res = run_ga(lambda pop: -pop.sum(axis=1), 40, 0, 1, GAConfig(population_size=60, stagnation_limit=60, seed=1))
    assert res.best_cost == -40
    assert all(np.diff(res.history) <= 0)


def test_ga_is_deterministic_and_thread_invariant():
    f = lambda pop: np.abs(pop - np.arange(30) % 7).sum(axis=1).astype(float)
    cfg = GAConfig(population_size=600, stagnation_limit=30, seed=9)
    a = run_ga(f, 30, 0, 8, cfg, threads=1)
    b = run_ga(f, 30, 0, 8, cfg, threads=4)
    assert np.array_equal(a.best, b.best) and a.history == b.history


def test_schedule_ga_matches_exhaustive_search():
    exact = brute_force_plan(PARAMS, CFG, HZ)
    ga = optimize_schedule(PARAMS, CFG, HZ, FAST)
    assert ga.cost == pytest.approx(exact.cost, rel=1e-12)
    assert ga.plan.feasible


def test_interval_ga_matches_exhaustive_search():
    exact = brute_force_intervals(PARAMS, CFG, HZ)
    ga = optimize_intervals(PARAMS, CFG, HZ, FAST)
    assert ga.cost == pytest.approx(exact.cost, rel=1e-12)
    policy, cost = ga
    assert cost == ga.cost and set(policy.y) == {"A/1", "A/2", "B/1"}


def test_schedule_never_worse_than_intervals_on_same_groups():
    model = CostModel(PARAMS, CFG, HZ)
    g = CompartmentGroups.singletons(PARAMS)
    s = optimize_schedule(PARAMS, CFG, HZ, FAST, g, model=model)
    i = optimize_intervals(PARAMS, CFG, HZ, FAST, g, model=model)
    assert s.cost <= i.cost + 1e-9


def test_reported_cost_matches_cost_model():
    r = optimize_schedule(PARAMS, CFG, HZ, FAST)
    assert r.cost == pytest.approx(CostModel(PARAMS, CFG, HZ).plan_cost(r.plan), rel=1e-12)


def test_grouping_by_expected_defects():
    g = group_compartments(PARAMS, HZ, 2)
    assert g.labels == ["G1", "G2"]
    assert g.groups["G1"] == (("B", "1"), ("A", "1"))
    assert g.label_of(("A", "2")) == "G2"
    assert len(group_compartments(PARAMS, HZ, 10).labels) == 3
    with pytest.raises(ValueError):
        group_compartments(PARAMS, HZ, 0)


def test_brute_force_refuses_large_instances():
    hz = PlanningHorizon.from_span(0, 60, 3)
    with pytest.raises(ValueError):
        brute_force_plan(PARAMS, CFG, hz)


def test_practice_plan():
    p = practice_plan({("A", "1"): 6, ("A", "2"): 12, ("B", "1"): 60}, HZ)
    assert p.inspection_indices(("A", "1")) == [2, 4, 6, 8]
    assert p.inspection_indices(("B", "1")) == [8]
    with pytest.raises(PlanError):
        practice_plan({("A", "1"): 7}, HZ)


def test_sweep_rows_and_monotone_cost():
    rows = sensitivity_sweep("beta", [1.0, 1.5], PARAMS, CFG, HZ, FAST, n_groups=3,
                             practice={k: 12 for k in PARAMS})
    assert [(r["value"], r["planner"]) for r in rows] == [
        (1.0, "practice"), (1.0, "interval"), (1.0, "schedule"),
        (1.5, "practice"), (1.5, "interval"), (1.5, "schedule")]
    by = {(r["value"], r["planner"]): r for r in rows}
    for planner in ("practice", "interval", "schedule"):
        assert by[(1.5, planner)]["total_cost"] >= by[(1.0, planner)]["total_cost"]
    assert sum(by[(1.0, "schedule")]["event_sizes"]) == by[(1.0, "schedule")]["n_inspections"]
    with pytest.raises(ValueError):
        sensitivity_sweep("gamma", [1], PARAMS, CFG, HZ, FAST)


def test_single_compartment_interval_ga_is_exact():
    one = {("A", "1"): PARAMS[("A", "1")]}
    for beta in (0.9, 1.25, 1.6):
        cfg = CostConfig(ship_setup_cost=20.0, repair_beta=beta)
        exact = brute_force_intervals(one, cfg, HZ)
        assert optimize_intervals(one, cfg, HZ, FAST).cost == exact.cost
        model = CostModel(one, cfg, HZ)
        costs = [model.plan_cost(practice_plan({("A", "1"): 3.0 * y}, HZ)) for y in range(1, 9)]
        assert exact.cost == min(costs)


def test_one_group_schedule_ga_is_exact():
    hz = PlanningHorizon.from_span(0, 18, 3)
    two = {k: PARAMS[k] for k in [("A", "1"), ("A", "2")]}
    groups = CompartmentGroups({"G1": tuple(sorted(two))})
    exact = brute_force_plan(two, CFG, hz, groups)
    assert optimize_schedule(two, CFG, hz, FAST, groups).cost == exact.cost


def test_exhaustive_optimum_is_no_worse_than_any_plan():
    from itertools import product
    from shipcoat.plans import SchedulePlan
    hz = PlanningHorizon.from_span(0, 12, 3)
    keys = sorted(PARAMS)
    model = CostModel(PARAMS, CFG, hz)
    best = brute_force_plan(PARAMS, CFG, hz, model=model).cost
    costs = []
    for bits in product([0, 1], repeat=3 * 3):
        x = np.ones((3, 4), bool)
        x[:, :3] = np.array(bits, bool).reshape(3, 3)
        costs.append(model.plan_cost(SchedulePlan(keys, x, hz)))
    assert best <= min(costs) + 1e-9 and best == pytest.approx(min(costs), rel=1e-12)

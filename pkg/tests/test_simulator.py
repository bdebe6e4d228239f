import math

import numpy as np
import pytest
from scipy import stats

from shipcoat.economics import CostConfig, plan_total_cost
from shipcoat.nhpp import PowerLawParams, cumulative_intensity, expected_defect_age
from shipcoat.plans import PlanningHorizon, SchedulePlan
from shipcoat.simulator import (Population, estimate_expected_age_mc, jensen_gap, sample_arrival_path,
                                simulate_plan, synthesize_fleet)

HZ = PlanningHorizon.from_span(0, 24, 3)
KEYS = [("A", "1"), ("A", "2"), ("B", "1")]
PARAMS = {KEYS[0]: PowerLawParams(0.05, 1.5), KEYS[1]: PowerLawParams(0.3, 1.1),
          KEYS[2]: PowerLawParams(0.01, 2.0)}


def plan():
    x = np.zeros((3, 8), bool)
    x[:, -1] = True
    x[0, 3] = x[1, 1] = x[1, 5] = True
    return SchedulePlan(KEYS, x, HZ)


def test_transformed_gaps_are_unit_exponential():
    p = PowerLawParams(0.3, 1.4)
    path = sample_arrival_path(p, (0, 300), seed=4)
    u = p.a * path.times ** p.b
    gaps = np.diff(np.concatenate([[0], u]))
    assert gaps.size > 500
    assert stats.kstest(gaps, "expon").pvalue > 0.01


def test_path_counts_average_to_cumulative_intensity():
    p = PowerLawParams(0.2, 1.3)
    n = np.array([len(sample_arrival_path(p, (5, 20), seed=s)) for s in range(3000)])
    lam = cumulative_intensity(p, (5, 20))
    assert abs(n.mean() - lam) < 4 * math.sqrt(lam / n.size)


def test_tiny_rate_gives_empty_path():
    path = sample_arrival_path(PowerLawParams(1e-300, 1.5), (0, 100), seed=0)
    assert len(path) == 0 and path.count(0, 100) == 0


def test_mc_age_agrees_with_closed_form():
    p = PowerLawParams(0.05, 1.5)
    for k in (1, 3):
        mean, se = estimate_expected_age_mc(p, (6, 30), k, 200_000, seed=k)
        assert abs(mean - expected_defect_age(p, (6, 30), k)) < 4 * se


def test_mc_age_is_thread_invariant():
    p = PowerLawParams(0.05, 1.5)
    assert estimate_expected_age_mc(p, (0, 24), 2, 20_000, 1, threads=1) == \
        estimate_expected_age_mc(p, (0, 24), 2, 20_000, 1, threads=3)


def test_no_repair_cost_matches_analytic_exactly():
    cfg = CostConfig(repair_alpha=0.0)
    sim = simulate_plan(plan(), PARAMS, cfg, 100, seed=1)
    assert np.all(sim.path_cost == plan_total_cost(plan(), PARAMS, cfg))
    assert sim.se == 0.0


def test_linear_repair_agrees_with_analytic():
    g = jensen_gap(plan(), PARAMS, CostConfig(repair_beta=1.0), 40_000, seed=2)
    assert abs(g["gap_in_se"]) < 3


def test_convex_repair_costs_more_than_expected_age_pricing():
    g = jensen_gap(plan(), PARAMS, CostConfig(repair_beta=1.5), 40_000, seed=2)
    assert g["gap"] > 0 and g["gap_in_se"] > 4


def test_simulated_counts_and_determinism():
    a = simulate_plan(plan(), PARAMS, CostConfig(), 6000, seed=7, threads=1)
    b = simulate_plan(plan(), PARAMS, CostConfig(), 6000, seed=7, threads=2)
    assert np.array_equal(a.path_cost, b.path_cost) and np.array_equal(a.counts, b.counts)
    found = a.counts.sum(axis=1).mean()
    total = sum(cumulative_intensity(p, (0, 24)) for p in PARAMS.values())
    assert abs(found - total) < 4 * math.sqrt(total / 6000)


def test_synthetic_fleet_is_reproducible():
    d1, t1 = synthesize_fleet(2, 3, seed=5, return_params=True)
    d2 = synthesize_fleet(2, 3, seed=5)
    assert d1 == d2
    assert sorted(t1) == [("S01", "C01"), ("S01", "C02"), ("S01", "C03"),
                          ("S02", "C01"), ("S02", "C02"), ("S02", "C03")]
    assert synthesize_fleet(2, 3, seed=6) != d1
    with pytest.raises(ValueError):
        Population(sd_ln_a=-1)


def test_homogeneous_gaps_fit_exponential_two():
    p = PowerLawParams(2.0, 1.0)
    gaps = np.concatenate([np.diff(np.concatenate([[0.0], sample_arrival_path(p, (0, 1000), seed=s).times]))
                           for s in range(5)])[:10_000]
    assert gaps.size == 10_000
    assert stats.kstest(gaps, "expon", args=(0, 0.5)).pvalue > 0.01


def test_count_mean_over_many_paths():
    p = PowerLawParams(0.2, 1.3)
    n = np.array([sample_arrival_path(p, (0, 20), seed=s).count(5, 20) for s in range(100_000)])
    lam = cumulative_intensity(p, (5, 20))
    assert abs(n.mean() - lam) < 3 * n.std(ddof=1) / math.sqrt(n.size)


def test_expected_ages_sum_to_mean_realized_total_age():
    from shipcoat.economics import CostConfig, expected_compartment_cost
    hz = PlanningHorizon.from_span(0, 1, 1)
    one = SchedulePlan([("S", "C")], [[True]], hz)
    p = {("S", "C"): PowerLawParams(1.0, 1.0)}
    cfg = CostConfig(ship_setup_cost=0.0, repair_beta=1.0)
    sim = simulate_plan(one, p, cfg, 1_000_000, seed=8)
    total_age = sim.age_sums[:, 0]
    se = total_age.std(ddof=1) / math.sqrt(total_age.size)
    analytic = expected_compartment_cost(p[("S", "C")], 0, 1, cfg)
    assert analytic - 10 == pytest.approx(sum(expected_defect_age(p[("S", "C")], (0, 1), k)
                                              for k in range(1, 40)), rel=1e-9)
    assert abs(10 + total_age.mean() - analytic) < 3 * se
    assert abs(sim.mean - analytic) < 3 * sim.se

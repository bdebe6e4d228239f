import io

import numpy as np
import pytest

from shipcoat.plans import (IntervalPolicy, PlanError, PlanningHorizon, SchedulePlan,
                            expand_interval_policy, interval_row)

HZ = PlanningHorizon.from_span(0, 24, 3)
KEYS = [("A", "1"), ("A", "2"), ("B", "1")]


def test_horizon_grid():
    assert HZ.K == 8
    assert HZ.times.tolist() == [0, 3, 6, 9, 12, 15, 18, 21, 24]
    with pytest.raises(ValueError):
        PlanningHorizon.from_span(0, 25, 3)
    with pytest.raises(ValueError):
        PlanningHorizon(0, 24, 3, 7)


def test_final_inspection_is_required():
    x = np.zeros((3, 8), bool)
    with pytest.raises(PlanError):
        SchedulePlan(KEYS, x, HZ)
    loose = SchedulePlan(KEYS, x, HZ, strict=False)
    assert not loose.feasible
    assert loose.with_final().n_inspections == 3


def test_events_count_ships_once():
    x = np.zeros((3, 8), bool)
    x[:, -1] = True
    x[0, 1] = x[1, 1] = True   # ship A, both compartments at k=2
    x[2, 3] = True
    p = SchedulePlan(KEYS, x, HZ)
    assert p.ship_events() == {"A": [2, 8], "B": [4, 8]}
    assert p.n_events == 4 and p.n_inspections == 6
    assert p.inspection_indices(("A", "1")) == [2, 8]
    tl = p.timeline()
    assert tl[1] == {"grid_index": 2, "time_months": 6.0, "compartments": 2, "ships": 1}


def test_interval_rows():
    assert np.flatnonzero(interval_row(3, 8)).tolist() == [2, 5, 7]
    assert interval_row(8, 8).sum() == 1
    assert interval_row(1, 8).all()


def test_grouped_policy_expands():
    pol = IntervalPolicy({"G1": 2, "G2": 8}, HZ, groups={"G1": [KEYS[0]], "G2": KEYS[1:]})
    p = expand_interval_policy(pol)
    assert p.keys == tuple(sorted(KEYS))
    assert p.inspection_indices(("A", "1")) == [2, 4, 6, 8]
    assert p.inspection_indices(("B", "1")) == [8]
    with pytest.raises(ValueError):
        IntervalPolicy({"G": 9}, HZ)


def test_csv_round_trip():
    x = np.zeros((3, 8), bool)
    x[:, -1] = True
    x[2, 0] = True
    p = SchedulePlan(KEYS, x, HZ)
    text = p.to_csv(comments=["seed: 1"])
    assert text.splitlines()[1] == "ship_id,compartment_id,grid_index,time_months"
    back = SchedulePlan.from_csv(io.StringIO(text), HZ, keys=KEYS)
    assert back == p
    with pytest.raises(PlanError):
        SchedulePlan.from_csv(io.StringIO("ship_id,compartment_id,grid_index,time_months\nA,1,9,27\n"), HZ)

import math

import numpy as np
import pytest

from shipcoat.fleet import CompartmentHistory, FleetDataset
from shipcoat.inference import fit_mle
from shipcoat.inference.mle import informative_intervals
from shipcoat.inference.likelihood import PackedIntervals
from shipcoat.nhpp import PowerLawParams
from shipcoat.simulator import Population, synthesize_fleet


def test_recovers_shared_parameters():
    pop = Population(math.log(0.002), math.log(1.5), 0.0, 0.0)
    ds = synthesize_fleet(2, 40, pop, regime=12, t_end=240, seed=3)
    fit = fit_mle(ds, seed=1)
    assert not fit.degenerate and fit.converged and not fit.at_bound
    assert fit.params.b == pytest.approx(1.5, rel=0.08)
    assert math.log(fit.params.a) == pytest.approx(math.log(0.002), abs=0.4)


def test_optimum_is_stationary():
    ds = synthesize_fleet(1, 20, regime=6, t_end=120, seed=9)
    fit = fit_mle(ds, seed=0)
    packed = PackedIntervals.from_histories(ds)
    best = packed.pooled(fit.params.ln_a, fit.params.ln_b)
    for da, db in [(1e-4, 0), (-1e-4, 0), (0, 1e-4), (0, -1e-4)]:
        assert packed.pooled(fit.params.ln_a + da, fit.params.ln_b + db) <= best + 1e-9


def test_single_interval_is_degenerate():
    fit = fit_mle(CompartmentHistory("S1", "C1", [24], [3]))
    assert fit.degenerate
    # with b fixed one interval suffices, and a has the closed form N / t^b
    fixed = fit_mle(CompartmentHistory("S1", "C1", [24], [3]), fixed_b=1.5)
    assert not fixed.degenerate
    assert fixed.params.a == pytest.approx(3 / 24 ** 1.5, rel=1e-9)


def test_informative_interval_count():
    hs = [CompartmentHistory("S1", "C1", [12, 24, 36], [0, 2, 1]),
          CompartmentHistory("S1", "C2", [12, 24], [1, 0])]
    assert informative_intervals(PackedIntervals.from_histories(hs)) == 3
    assert informative_intervals(PackedIntervals.from_histories(hs[1:])) == 1


def test_no_intervals_rejected():
    with pytest.raises(ValueError):
        fit_mle(FleetDataset(()))


def test_deterministic_for_seed():
    ds = synthesize_fleet(1, 5, seed=2)
    assert fit_mle(ds, seed=4) == fit_mle(ds, seed=4)


def test_homogeneous_closed_form():
    # b = 1 fixed: a = total count / total exposure
    hs = [CompartmentHistory("S1", "C1", [10, 30], [2, 5]), CompartmentHistory("S1", "C2", [40], [1])]
    fit = fit_mle(FleetDataset(tuple(hs)), fixed_b=1.0)
    assert fit.params.a == pytest.approx(8 / 70, rel=1e-10)
    assert isinstance(fit.params, PowerLawParams)
    assert np.isfinite(fit.log_likelihood)

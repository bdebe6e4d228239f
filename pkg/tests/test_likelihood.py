import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy import stats

from shipcoat.fleet import CompartmentHistory, FleetDataset
from shipcoat.inference import PackedIntervals, log_likelihood, pooled_log_likelihood
from shipcoat.nhpp import PowerLawParams


def direct(params, h):
    edges = np.concatenate([[h.start], h.times])
    lam = params.a * (edges[1:] ** params.b - edges[:-1] ** params.b)
    return float(np.sum(stats.poisson.logpmf(h.counts, lam)))


@st.composite
def histories(draw, ship="S1", comp="C1"):
    n = draw(st.integers(1, 12))
    gaps = draw(st.lists(st.floats(0.5, 40), min_size=n, max_size=n))
    counts = draw(st.lists(st.integers(0, 25), min_size=n, max_size=n))
    return CompartmentHistory(ship, comp, np.cumsum(gaps), counts)


@given(histories(), st.floats(1e-4, 2), st.floats(0.3, 3))
def test_matches_composed_poisson_terms(h, a, b):
    p = PowerLawParams(a, b)
    assert log_likelihood(p, h) == pytest.approx(direct(p, h), rel=1e-12, abs=1e-12)


def test_zero_expected_count_with_defects():
    h = CompartmentHistory("S1", "C1", [1e-300], [2])
    assert log_likelihood(PowerLawParams(1e-10, 3.0), h) == -math.inf


def test_empty_history():
    assert log_likelihood(PowerLawParams(1, 1), CompartmentHistory("S", "C", [], [])) == 0.0


@given(st.lists(histories(), min_size=1, max_size=5), st.floats(1e-3, 1), st.floats(0.5, 2))
def test_pooled_is_sum_of_compartments(hs, a, b):
    hs = [CompartmentHistory("S1", f"C{i}", h.times, h.counts) for i, h in enumerate(hs)]
    ds = FleetDataset(tuple(hs))
    p = PowerLawParams(a, b)
    total = sum(log_likelihood(p, h) for h in ds)
    assert pooled_log_likelihood(p, ds) == pytest.approx(total, rel=1e-12)
    packed = PackedIntervals.from_histories(ds)
    assert packed.pooled(p.ln_a, p.ln_b) == pytest.approx(total, rel=1e-12)
    per = packed.per_compartment(np.full(len(hs), p.ln_a), np.full(len(hs), p.ln_b))
    np.testing.assert_allclose(per, [log_likelihood(p, h) for h in ds], rtol=1e-12)


def test_packed_broadcasting(rng):
    hs = [CompartmentHistory("S1", f"C{i}", [10, 20, 35], rng.integers(0, 5, 3)) for i in range(4)]
    packed = PackedIntervals.from_histories(hs)
    ln_a = rng.normal(-3, 0.5, size=(3, 4))
    ln_b = rng.normal(0.2, 0.1, size=(3, 4))
    out = packed.per_compartment(ln_a, ln_b)
    for r in range(3):
        for c in range(4):
            p = PowerLawParams.from_log(ln_a[r, c], ln_b[r, c])
            assert out[r, c] == pytest.approx(direct(p, hs[c]), rel=1e-11)
    grid = packed.pooled(np.array([-3.0, -2.0]), np.array([0.1, 0.2]))
    assert grid.shape == (2,)

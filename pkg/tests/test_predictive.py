import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import poisson

from shipcoat.inference.predictive import (expected_count_curve, mixture_count_quantiles,
                                           predictive_from_draws)
from shipcoat.nhpp import PowerLawParams, cumulative_intensity


def test_single_draw_has_zero_width_expected_band():
    s = predictive_from_draws([[np.log(0.01), np.log(1.3)]], (0, 60))
    lam = cumulative_intensity(PowerLawParams(0.01, 1.3), (0, 60))
    assert np.allclose(s.lam_quantiles, lam, rtol=1e-13)
    assert s.count_quantiles.tolist() == poisson.ppf([0.05, 0.5, 0.95], lam).tolist()


def test_mixture_quantiles_match_brute_force(rng):
    lam = rng.gamma(2.0, 3.0, size=40)
    q = [0.05, 0.25, 0.5, 0.9, 0.99]
    n = np.arange(400)
    cdf = np.mean([poisson.cdf(n, x) for x in lam], axis=0)
    want = [n[np.argmax(cdf >= qq)] for qq in q]
    assert mixture_count_quantiles(lam, q).tolist() == want


@given(st.lists(st.floats(-6, -1), min_size=1, max_size=8), st.lists(st.floats(-0.5, 0.8), min_size=1, max_size=8),
       st.integers(2, 4))
def test_duplicating_draws_changes_nothing(ln_a, ln_b, times):
    n = min(len(ln_a), len(ln_b))
    d = np.column_stack([ln_a[:n], ln_b[:n]])
    one = predictive_from_draws(d, (10, 70))
    many = predictive_from_draws(np.tile(d, (times, 1)), (10, 70))
    assert np.array_equal(one.lam_quantiles, many.lam_quantiles)
    assert np.array_equal(one.count_quantiles, many.count_quantiles)


def test_curve_is_monotone_in_time(rng):
    d = np.column_stack([rng.normal(-5, 0.5, 300), rng.normal(0.3, 0.1, 300)])
    t = np.linspace(12, 120, 10)
    c = expected_count_curve(d, 12, t)
    assert c.shape == (10, 3)
    assert np.all(c[0] == 0)
    assert np.all(np.diff(c, axis=0) >= 0)
    assert np.all(c[:, 0] <= c[:, 1]) and np.all(c[:, 1] <= c[:, 2])


def test_count_draws_are_seeded():
    d = [[-3.0, 0.2]] * 50
    a = predictive_from_draws(d, (0, 24), seed=3).count_draws
    b = predictive_from_draws(d, (0, 24), seed=3).count_draws
    assert np.array_equal(a, b)


def test_mixture_quantiles_with_enormous_rates():
    q = mixture_count_quantiles([0.5, 1e15], [0.25, 0.75])
    assert q[0] <= 1
    assert q[1] == pytest.approx(1e15, rel=1e-6)

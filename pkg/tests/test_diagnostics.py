import math

import numpy as np
import pytest

from shipcoat.inference.diagnostics import converged, effective_sample_size, split_rhat, summarize


def ar1(rng, phi, shape):
    x = np.empty(shape)
    x[:, 0] = rng.standard_normal(shape[0]) / math.sqrt(1 - phi ** 2)
    for t in range(1, shape[1]):
        x[:, t] = phi * x[:, t - 1] + rng.standard_normal(shape[0])
    return x


def test_iid_chains(rng):
    x = rng.standard_normal((4, 2000))
    assert split_rhat(x) == pytest.approx(1.0, abs=0.01)
    assert effective_sample_size(x) == pytest.approx(8000, rel=0.15)
    assert converged(summarize(x))


def test_autocorrelated_ess_matches_theory(rng):
    phi = 0.9
    x = ar1(rng, phi, (4, 20000))
    # integrated autocorrelation time (1 + phi) / (1 - phi) = 19
    assert effective_sample_size(x) == pytest.approx(80000 / 19, rel=0.15)


def test_disagreeing_chains_flagged(rng):
    x = rng.standard_normal((4, 500))
    x[0] += 3.0
    assert split_rhat(x) > 1.05
    assert not converged(summarize(x))


def test_trend_within_chain_flagged(rng):
    x = rng.standard_normal((2, 1000)) + np.linspace(0, 4, 1000)
    assert split_rhat(x) > 1.05


def test_constant_draws_are_degenerate():
    x = np.full((2, 50), 3.0)
    s = summarize(x)
    assert s["degenerate"] and math.isnan(s["rhat"]) and math.isnan(s["ess"])
    assert not converged(s)


def test_too_short():
    with pytest.raises(ValueError):
        split_rhat(np.zeros((2, 3)))


def test_two_iid_chains(rng):
    x = rng.standard_normal((2, 5000))
    assert 0.99 <= split_rhat(x) <= 1.01

"""Posterior-predictive expected and realized counts."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.stats import poisson

from ..nhpp import _as_interval, _cum
from .samples import PosteriorSamples


@dataclass(frozen=True)
class PredictiveSummary:
    quantiles: tuple
    lam_quantiles: np.ndarray
    count_quantiles: np.ndarray
    lam_mean: float
    lam_draws: np.ndarray
    count_draws: np.ndarray

    def to_dict(self) -> dict:
        return {
            "quantiles": list(self.quantiles),
            "expected_count": self.lam_quantiles.tolist(),
            "count": self.count_quantiles.tolist(),
            "expected_count_mean": self.lam_mean,
        }


def exact_mean(x) -> float:
    """Correctly rounded mean; invariant to order and to duplicating every value."""
    x = np.asarray(x, dtype=float).reshape(-1)
    return math.fsum(x.tolist()) / x.size


def mixture_count_quantiles(lam, quantiles) -> np.ndarray:
    """Exact quantiles of the Poisson mixture over the draws ``lam``.

    The smallest ``n`` whose mixture CDF reaches each level, found by integer
    bisection between the per-draw Poisson quantiles.  Duplicating every draw
    leaves the result unchanged.
    """
    lam = np.asarray(lam, dtype=float).reshape(-1)
    if lam.size == 0:
        raise ValueError("need at least one draw")
    out = []
    for q in np.asarray(quantiles, dtype=float).reshape(-1):
        per_draw = poisson.ppf(q, lam)
        lo, hi = float(per_draw.min()), float(per_draw.max())

        def reached(n):
            return exact_mean(poisson.cdf(n, lam)) >= q - 1e-12

        # invariant: mixture CDF at hi reaches q; below lo it cannot
        while lo < hi:
            mid = math.floor((lo + hi) / 2)
            if reached(mid):
                hi = mid
            else:
                lo = mid + 1
        out.append(hi)
    return np.array(out, dtype=float)


def predictive_from_draws(log_draws: np.ndarray, interval, quantiles=(0.05, 0.5, 0.95),
                          seed: int = 0) -> PredictiveSummary:
    """Predictive summary for an ``(n, 2)`` array of ``(ln a, ln b)`` draws.

    Quantiles of ``Lambda`` use the inverted empirical CDF and count quantiles
    are exact for the Poisson mixture, so both depend only on the empirical
    distribution of the draws.  ``count_draws`` is one seeded count per draw.
    """
    iv = _as_interval(interval)
    d = np.asarray(log_draws, dtype=float).reshape(-1, 2)
    lam = _cum(np.exp(d[:, 0]), np.exp(d[:, 1]), iv.t1, iv.t2)
    counts = np.random.default_rng(seed).poisson(lam)
    q = np.asarray(quantiles, dtype=float)
    return PredictiveSummary(tuple(float(x) for x in q), np.quantile(lam, q, method="inverted_cdf"),
                             mixture_count_quantiles(lam, q), exact_mean(lam), lam, counts)


def posterior_predictive_counts(samples: PosteriorSamples, compartment, interval,
                                quantiles=(0.05, 0.5, 0.95), seed: int = 0) -> PredictiveSummary:
    """Quantiles of ``Lambda(t1, t2)`` and of a Poisson count, across posterior draws."""
    return predictive_from_draws(samples.flat(compartment), interval, quantiles, seed)


def expected_count_curve(log_draws, t_start: float, times, quantiles=(0.05, 0.5, 0.95)):
    """Quantile bands of cumulative expected counts ``Lambda(t_start, t)`` at each ``t``.

    Returns an array of shape ``(len(times), len(quantiles))``.
    """
    d = np.asarray(log_draws, dtype=float).reshape(-1, 2)
    t = np.asarray(times, dtype=float)
    lam = _cum(np.exp(d[:, 0])[:, None], np.exp(d[:, 1])[:, None], t_start, t[None, :])
    return np.quantile(lam, np.asarray(quantiles), axis=0, method="inverted_cdf").T

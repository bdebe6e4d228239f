"""Maximum-likelihood fitting by multistart Nelder-Mead in log space."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import minimize

from ..nhpp import PowerLawParams
from .likelihood import PackedIntervals, as_histories
from .priors import LogParams

LN_A_BOUNDS = (-30.0, 10.0)
LN_B_BOUNDS = (-3.0, 3.0)


@dataclass(frozen=True)
class MLEResult:
    params: PowerLawParams
    log_likelihood: float
    degenerate: bool
    converged: bool
    n_informative: int
    n_starts: int
    at_bound: bool

    def to_dict(self) -> dict:
        return {
            "a": self.params.a, "b": self.params.b,
            "ln_a": self.params.ln_a, "ln_b": self.params.ln_b,
            "log_likelihood": self.log_likelihood,
            "degenerate": self.degenerate, "converged": self.converged,
            "n_informative_intervals": self.n_informative, "at_bound": self.at_bound,
        }


def informative_intervals(packed: PackedIntervals) -> int:
    """Number of distinct intervals that saw at least one defect."""
    hit = packed.counts > 0
    return len(set(zip(packed.t1[hit].tolist(), packed.t2[hit].tolist())))


def _profile_ln_a(packed: PackedIntervals, b: float) -> float | None:
    # for fixed b the likelihood in a is maximized in closed form
    total = packed.counts.sum()
    if total <= 0:
        return None
    exposure = np.sum(np.power(packed.t2, b) - np.power(packed.t1, b))
    return math.log(total / exposure)


def fit_mle(data, initial: LogParams | None = None, fixed_b: float | None = None,
            n_starts: int = 5, seed: int = 0, max_iter: int = 4000,
            ln_a_bounds=LN_A_BOUNDS, ln_b_bounds=LN_B_BOUNDS) -> MLEResult:
    """Fit ``(a, b)`` to one history or pool every compartment of a dataset.

    The simplex runs in ``(ln a, ln b)`` from ``n_starts`` jittered points;
    the best optimum is then polished by profiling ``a`` exactly for the
    found ``b``.  The fit is flagged degenerate when fewer than two distinct
    intervals carry defects (one suffices when ``b`` is fixed).
    """
    packed = PackedIntervals.from_histories(as_histories(data))
    if packed.t1.size == 0:
        raise ValueError("MLE needs at least one inspection interval")
    n_info = informative_intervals(packed)
    needed = 1 if fixed_b is not None else 2
    degenerate = n_info < needed

    if initial is None:
        b0 = fixed_b if fixed_b is not None else 1.0
        ln_a0 = _profile_ln_a(packed, b0)
        initial = LogParams(ln_a0 if ln_a0 is not None else -7.0, math.log(b0))
    lo = np.array([ln_a_bounds[0], ln_b_bounds[0]])
    hi = np.array([ln_a_bounds[1], ln_b_bounds[1]])

    if fixed_b is not None:
        ln_b_fixed = math.log(fixed_b)

        def nll(x):
            v = packed.pooled(x[0], ln_b_fixed)
            return 1e300 if not np.isfinite(v) else -float(v)
        x0 = np.array([initial.ln_a])
        bounds = [tuple(ln_a_bounds)]
    else:
        def nll(x):
            v = packed.pooled(x[0], x[1])
            return 1e300 if not np.isfinite(v) else -float(v)
        x0 = np.array([initial.ln_a, initial.ln_b])
        bounds = [tuple(ln_a_bounds), tuple(ln_b_bounds)]

    rng = np.random.default_rng(seed)
    starts = [x0] + [x0 + rng.normal(0.0, 0.5, size=x0.size) for _ in range(max(n_starts, 1) - 1)]
    best = None
    converged = True
    for s in starts:
        s = np.clip(s, [b[0] for b in bounds], [b[1] for b in bounds])
        res = minimize(nll, s, method="Nelder-Mead", bounds=bounds,
                       options={"xatol": 1e-10, "fatol": 1e-12, "maxiter": max_iter,
                                "maxfev": 2 * max_iter})
        if best is None or res.fun < best.fun:
            best = res
            converged = bool(res.success)

    x = np.array(best.x, dtype=float)
    if fixed_b is not None:
        ln_a, ln_b = float(x[0]), ln_b_fixed
    else:
        ln_a, ln_b = float(x[0]), float(x[1])
    profiled = _profile_ln_a(packed, math.exp(ln_b))
    if profiled is not None and ln_a_bounds[0] <= profiled <= ln_a_bounds[1]:
        # exact maximizer over a for this b
        ln_a = profiled
    ll = float(packed.pooled(ln_a, ln_b))
    tol = 1e-6
    at_bound = bool(abs(ln_a - lo[0]) < tol or abs(ln_a - hi[0]) < tol
                    or (fixed_b is None and (abs(ln_b - lo[1]) < tol or abs(ln_b - hi[1]) < tol)))
    return MLEResult(PowerLawParams.from_log(ln_a, ln_b), ll, degenerate, converged,
                     n_info, len(starts), at_bound)

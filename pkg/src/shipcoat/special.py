"""Incomplete gamma functions.

Series expansion for ``x < s + 1`` and a modified-Lentz continued fraction
otherwise.  Both branches work on numpy arrays; every element is iterated
independently until its own convergence, so a value does not depend on what
else happens to be in the batch.
"""

from __future__ import annotations

import numpy as np
from scipy.special import gammaln

EPS = np.finfo(float).eps
TINY = np.finfo(float).tiny / EPS
MAX_ITER = 10_000


class GammaConvergenceError(ArithmeticError):
    """Raised when the series or continued fraction fails to converge."""


def _check_domain(s: np.ndarray, x: np.ndarray) -> None:
    if np.any(~(s > 0)):
        raise ValueError("incomplete gamma requires s > 0")
    if np.any(~(x >= 0)):
        raise ValueError("incomplete gamma requires x >= 0")


def _log_prefactor(s, x):
    # ln(x^s e^-x / Gamma(s)); x > 0 assumed
    return s * np.log(x) - x - gammaln(s)


def _series_p(s, x):
    """Regularized P(s, x) via the power series; intended for x < s + 1."""
    out = np.zeros_like(x)
    pos = x > 0
    if not np.any(pos):
        return out
    s_, x_ = s[pos], x[pos]
    ap = s_.copy()
    term = 1.0 / s_
    total = term.copy()
    active = np.ones(s_.shape, dtype=bool)
    for _ in range(MAX_ITER):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        ap[idx] += 1.0
        term[idx] *= x_[idx] / ap[idx]
        total[idx] += term[idx]
        done = np.abs(term[idx]) < np.abs(total[idx]) * EPS
        active[idx[done]] = False
    else:
        raise GammaConvergenceError("series for P(s, x) did not converge")
    out[pos] = total * np.exp(_log_prefactor(s_, x_))
    return out


def _contfrac_q(s, x):
    """Regularized Q(s, x) via Lentz's continued fraction; for x >= s + 1."""
    b = x + 1.0 - s
    c = np.full_like(x, 1.0 / TINY)
    d = 1.0 / b
    h = d.copy()
    active = np.ones(x.shape, dtype=bool)
    for i in range(1, MAX_ITER + 1):
        idx = np.flatnonzero(active)
        if idx.size == 0:
            break
        an = -i * (i - s[idx])
        b[idx] += 2.0
        dd = an * d[idx] + b[idx]
        dd = np.where(np.abs(dd) < TINY, TINY, dd)
        cc = b[idx] + an / c[idx]
        cc = np.where(np.abs(cc) < TINY, TINY, cc)
        dd = 1.0 / dd
        delta = dd * cc
        d[idx] = dd
        c[idx] = cc
        h[idx] *= delta
        done = np.abs(delta - 1.0) < EPS
        active[idx[done]] = False
    else:
        raise GammaConvergenceError("continued fraction for Q(s, x) did not converge")
    return h * np.exp(_log_prefactor(s, x))


def gammainc_pq(s, x):
    """Return both regularized incomplete gammas ``(P, Q)`` with ``P + Q = 1``.

    The smaller of the two is computed directly, the other as its complement,
    so each is accurate in the region where it is not close to 1.
    """
    s_arr, x_arr = np.broadcast_arrays(np.asarray(s, dtype=float), np.asarray(x, dtype=float))
    s_arr = np.array(s_arr, dtype=float)
    x_arr = np.array(x_arr, dtype=float)
    _check_domain(s_arr, x_arr)
    p = np.empty(s_arr.shape)
    q = np.empty(s_arr.shape)
    use_series = x_arr < s_arr + 1.0
    if np.any(use_series):
        ps = _series_p(s_arr[use_series], x_arr[use_series])
        p[use_series] = ps
        q[use_series] = 1.0 - ps
    use_cf = ~use_series
    if np.any(use_cf):
        qc = _contfrac_q(s_arr[use_cf], x_arr[use_cf])
        q[use_cf] = qc
        p[use_cf] = 1.0 - qc
    if p.ndim == 0:
        return float(p), float(q)
    return p, q


def gammainc_regularized(s, x):
    """Regularized lower incomplete gamma ``P(s, x) = gamma(s, x) / Gamma(s)``."""
    return gammainc_pq(s, x)[0]


def gammaincc_regularized(s, x):
    """Regularized upper incomplete gamma ``Q(s, x) = 1 - P(s, x)``."""
    return gammainc_pq(s, x)[1]


def lower_incomplete_gamma(s, x):
    """Unregularized lower incomplete gamma ``gamma(s, x) = int_0^x u^(s-1) e^-u du``.

    Parameters
    ----------
    s : float or array_like
        Shape, strictly positive. Non-integer values are supported.
    x : float or array_like
        Upper limit, nonnegative.

    Raises
    ------
    ValueError
        If ``s <= 0`` or ``x < 0``.
    """
    p = gammainc_regularized(s, x)
    return p * np.exp(gammaln(np.asarray(s, dtype=float)))


def log_lower_incomplete_gamma(s, x):
    """``ln gamma(s, x)``; finite wherever ``gamma(s, x)`` would overflow."""
    p = gammainc_regularized(s, x)
    with np.errstate(divide="ignore"):
        return np.log(p) + gammaln(np.asarray(s, dtype=float))

"""Power-law non-homogeneous Poisson process.

Intensity ``lambda(t) = a b t^(b-1)``, cumulative intensity
``Lambda(t1, t2) = a (t2^b - t1^b)``, the law of the k-th arrival after a
reference time, and the expected age ``A_k(t1, t2)`` of the k-th defect at an
inspection held at ``t2``.

Times are months since launch.  Point-time functions require ``t > 0``
(the intensity diverges at zero when ``b < 1``); interval functions accept
``t1 = 0``.
"""

from __future__ import annotations

import logging
import math
import warnings
from dataclasses import dataclass
from typing import Callable

import numpy as np
from scipy import integrate
from scipy.special import gammaln

from .special import gammainc_pq, gammainc_regularized, lower_incomplete_gamma

logger = logging.getLogger(__name__)

# Closed-form expected ages whose largest term exceeds the result by this
# factor are recomputed by quadrature.
CANCELLATION_LIMIT = 1e6
# Hard cap on the number of defects summed in the age-cost series.
MAX_AGE_TERMS = 10_000
QUAD_EPSABS = 1e-10
QUAD_EPSREL = 1e-10

__all__ = [
    "PowerLawParams",
    "TimeInterval",
    "AgeTable",
    "AgeEstimate",
    "NumericalInstabilityError",
    "TruncationWarning",
    "intensity",
    "cumulative_intensity",
    "count_pmf",
    "log_count_pmf",
    "lower_incomplete_gamma",
    "kth_arrival_cdf",
    "kth_arrival_pdf",
    "expected_defect_age",
    "defect_age_details",
    "expected_defect_age_quadrature",
    "expected_total_age_cost",
]


class NumericalInstabilityError(ArithmeticError):
    """Closed-form and quadrature expected ages disagree."""


class TruncationWarning(RuntimeWarning):
    """The age-cost series hit its term cap before converging."""


@dataclass(frozen=True)
class PowerLawParams:
    """Scale ``a`` (defects per month^b) and shape ``b`` of the intensity."""

    a: float
    b: float

    def __post_init__(self):
        a, b = float(self.a), float(self.b)
        if not (math.isfinite(a) and math.isfinite(b)):
            raise ValueError(f"power-law parameters must be finite, got a={a}, b={b}")
        if a <= 0 or b <= 0:
            raise ValueError(f"power-law parameters must be positive, got a={a}, b={b}")
        object.__setattr__(self, "a", a)
        object.__setattr__(self, "b", b)

    @classmethod
    def from_log(cls, ln_a: float, ln_b: float) -> "PowerLawParams":
        return cls(math.exp(ln_a), math.exp(ln_b))

    @property
    def ln_a(self) -> float:
        return math.log(self.a)

    @property
    def ln_b(self) -> float:
        return math.log(self.b)


@dataclass(frozen=True)
class TimeInterval:
    t1: float
    t2: float

    def __post_init__(self):
        t1, t2 = float(self.t1), float(self.t2)
        if not (0.0 <= t1 < t2) or not math.isfinite(t2):
            raise ValueError(f"need 0 <= t1 < t2, got [{t1}, {t2}]")
        object.__setattr__(self, "t1", t1)
        object.__setattr__(self, "t2", t2)

    @property
    def length(self) -> float:
        return self.t2 - self.t1


def _as_interval(interval) -> TimeInterval:
    if isinstance(interval, TimeInterval):
        return interval
    t1, t2 = interval
    return TimeInterval(t1, t2)


def _cum(a, b, t1, t2):
    """a (t2^b - t1^b) without cancellation for nearby t1, t2 (arrays ok)."""
    t1 = np.asarray(t1, dtype=float)
    t2 = np.asarray(t2, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        rel = np.expm1(b * np.log1p((t2 - t1) / t1))
        near = a * np.power(t1, b) * rel
        direct = a * (np.power(t2, b) - np.power(t1, b))
    return np.where(t1 > 0, near, direct)


def intensity(params: PowerLawParams, t):
    """Defect arrival rate ``a b t^(b-1)`` at ship age ``t > 0``."""
    t_arr = np.asarray(t, dtype=float)
    if np.any(~(t_arr > 0)):
        raise ValueError("intensity is only defined for t > 0")
    out = params.a * params.b * np.power(t_arr, params.b - 1.0)
    return float(out) if out.ndim == 0 else out


def cumulative_intensity(params: PowerLawParams, interval) -> float:
    """Expected number of arrivals in ``interval``."""
    iv = _as_interval(interval)
    return float(_cum(params.a, params.b, iv.t1, iv.t2))


def log_count_pmf(mean, n):
    """Poisson log-pmf, elementwise; handles ``mean = 0``."""
    mean = np.asarray(mean, dtype=float)
    n = np.asarray(n, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = n * np.log(mean) - mean - gammaln(n + 1.0)
    out = np.where(n == 0, -mean, out)
    return out


def count_pmf(params: PowerLawParams, interval, n: int) -> float:
    if int(n) != n or n < 0:
        raise ValueError(f"count must be a nonnegative integer, got {n}")
    lam = cumulative_intensity(params, interval)
    return float(np.exp(log_count_pmf(lam, n)))


def _check_k(k) -> int:
    if int(k) != k or k < 1:
        raise ValueError(f"arrival index must be an integer >= 1, got {k}")
    return int(k)


def kth_arrival_cdf(params: PowerLawParams, t1: float, k: int, t):
    """Probability that the k-th arrival after ``t1`` has occurred by ``t``."""
    k = _check_k(k)
    t_arr = np.asarray(t, dtype=float)
    if t1 < 0 or np.any(t_arr < t1):
        raise ValueError("need 0 <= t1 <= t")
    lam = _cum(params.a, params.b, t1, t_arr)
    out = np.asarray(gammainc_regularized(float(k), lam), dtype=float)
    out = np.where(t_arr == t1, 0.0, out)
    return float(out) if out.ndim == 0 else out


def kth_arrival_pdf(params: PowerLawParams, t1: float, k: int, t):
    """Density of the k-th arrival time after ``t1`` (per month)."""
    k = _check_k(k)
    t_arr = np.asarray(t, dtype=float)
    if t1 < 0 or np.any(t_arr < t1) or np.any(t_arr <= 0):
        raise ValueError("need t > 0 and t >= t1 >= 0")
    lam = _cum(params.a, params.b, t1, t_arr)
    log_rate = math.log(params.a * params.b) + (params.b - 1.0) * np.log(t_arr)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_shape = np.where(k == 1, 0.0, (k - 1) * np.log(lam))
    out = np.exp(log_shape - gammaln(k) + log_rate - lam)
    return float(out) if out.ndim == 0 else out


# --------------------------------------------------------------------------
# expected defect ages
# --------------------------------------------------------------------------

_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(20)


def _age_integrand_log(a, b, c2, lam, t2, k, z):
    """ln of the gamma(k) density at z plus ln(t2 - t(z)); broadcasting."""
    with np.errstate(divide="ignore", invalid="ignore"):
        log_dens = np.where(k == 1, 0.0, (k - 1) * np.log(z)) - z - gammaln(k)
        # t2 - t(z) with t(z) = ((c1 + z)/a)^(1/b) and c2 = c1 + lam
        gap = -t2 * np.expm1(np.log1p(-(lam - z) / c2) / b)
        return log_dens + np.log(gap)


def _composite_gl(a, b, c2, lam, t2, k, upper, panels):
    edges = np.linspace(0.0, 1.0, panels + 1)
    h = (edges[1:] - edges[:-1]) / 2.0
    mid = (edges[1:] + edges[:-1]) / 2.0
    u = (mid[:, None] + h[:, None] * _GL_NODES[None, :]).ravel()
    w = (h[:, None] * _GL_WEIGHTS[None, :]).ravel()
    z = upper[:, None] * u[None, :]
    vals = np.exp(_age_integrand_log(a, b, c2[:, None], lam[:, None], t2[:, None], k[:, None], z))
    return upper * (vals @ w)


def _age_quadrature(a, b, t1, t2, k, batch: int = 2048):
    """Expected ages by quadrature in the transformed variable z = Lambda(t1, t).

    Composite Gauss-Legendre with 8 and 16 panels; entries where the two
    disagree beyond tolerance are redone with adaptive QUADPACK.
    """
    t1 = np.atleast_1d(np.asarray(t1, dtype=float))
    t2 = np.atleast_1d(np.asarray(t2, dtype=float))
    k = np.atleast_1d(np.asarray(k, dtype=float))
    lam = _cum(a, b, t1, t2)
    c2 = a * np.power(t2, b)
    upper = np.minimum(lam, k + 12.0 * np.sqrt(k) + 40.0)
    out = np.empty(t1.size)
    for start in range(0, t1.size, batch):
        sl = slice(start, start + batch)
        args = (a, b, c2[sl], lam[sl], t2[sl], k[sl], upper[sl])
        coarse = _composite_gl(*args, 8)
        fine = _composite_gl(*args, 16)
        out[sl] = fine
        redo = np.flatnonzero(~(np.abs(fine - coarse) <= QUAD_EPSREL * np.abs(fine)) & (fine != 0))
        for i in redo + start:
            def f(z, i=i):
                return float(np.exp(_age_integrand_log(a, b, c2[i], lam[i], t2[i], k[i], z)))
            val, _ = integrate.quad(f, 0.0, float(upper[i]), epsabs=QUAD_EPSABS * 1e-4,
                                    epsrel=QUAD_EPSREL, limit=500)
            out[i] = val
    return out


def _apply(fn: Callable, x: np.ndarray) -> np.ndarray:
    return np.broadcast_to(np.asarray(fn(x), dtype=float), x.shape)


class AgeTable:
    """Expected ages of the 1st, 2nd, ... defect over many inspection intervals.

    All intervals share one set of time points, so the incomplete gammas
    needed by the closed form are evaluated once per time point rather than
    once per interval.  Columns are computed lazily and cached.  Entries whose
    closed form is ill-conditioned are left pending and only integrated
    numerically when a caller actually needs their value.

    Parameters
    ----------
    params : PowerLawParams
    times : array_like
        Distinct nonnegative time points (months).
    lo, hi : array_like of int
        Indices into ``times`` giving each interval ``(times[lo], times[hi]]``.
    """

    def __init__(self, params: PowerLawParams, times, lo, hi):
        self.params = params
        self.times = np.asarray(times, dtype=float)
        self.lo = np.asarray(lo, dtype=int)
        self.hi = np.asarray(hi, dtype=int)
        if np.any(self.times[self.hi] <= self.times[self.lo]) or np.any(self.times < 0):
            raise ValueError("every interval needs 0 <= t1 < t2")
        a, b = params.a, params.b
        self.t1 = self.times[self.lo]
        self.t2 = self.times[self.hi]
        self.lam = _cum(a, b, self.t1, self.t2)
        self._c = a * np.power(self.times, b)
        with np.errstate(divide="ignore"):
            self._log_c1 = np.log(self._c[self.lo])
        n = self.lo.size
        self._log_h = np.empty((n, 0))  # ln[Gamma(j+1/b) dP_j] - ln Gamma(j), j = 1, 2, ...
        self._ages = np.empty((n, 0))
        self._tail = np.empty((n, 0))  # P(k, lam)
        self.fallback = np.zeros((n, 0), dtype=bool)
        self._pending = np.zeros((n, 0), dtype=bool)
        self.max_ratio = np.zeros((n, 0))

    @property
    def n_intervals(self) -> int:
        return self.lo.size

    @property
    def n_columns(self) -> int:
        return self._ages.shape[1]

    def _extend_log_h(self, j_max: int) -> None:
        j0 = self._log_h.shape[1] + 1
        if j_max < j0:
            return
        j = np.arange(j0, j_max + 1, dtype=float)
        s = j + 1.0 / self.params.b
        p, q = gammainc_pq(s[None, :], self._c[:, None])
        p_lo, p_hi = p[self.lo], p[self.hi]
        q_lo, q_hi = q[self.lo], q[self.hi]
        dp = np.where(p_lo > 0.5, q_lo - q_hi, p_hi - p_lo)
        with np.errstate(divide="ignore", invalid="ignore"):
            log_dp = np.where(dp > 0, np.log(dp), -np.inf)
        block = gammaln(s)[None, :] + log_dp - gammaln(j)[None, :]
        self._log_h = np.hstack([self._log_h, block])

    def _poisson_tail(self, k0: int, k1: int) -> np.ndarray:
        """P(k, lam) for k = k0..k1 by downward recursion from P(k1 + 1, lam)."""
        lam = self.lam
        out = np.empty((lam.size, k1 - k0 + 1))
        acc = np.asarray(gammainc_regularized(float(k1 + 1), lam), dtype=float).reshape(lam.shape)
        for k in range(k1, k0 - 1, -1):
            acc = acc + np.exp(log_count_pmf(lam, k))
            out[:, k - k0] = acc
        return out

    def _compute(self, k0: int, k1: int) -> None:
        a, b = self.params.a, self.params.b
        self._extend_log_h(k1)
        tail = self._poisson_tail(k0, k1)
        base = self._c[self.lo] - math.log(a) / b
        n = self.n_intervals
        ages = np.empty((n, k1 - k0 + 1))
        ratio = np.empty((n, k1 - k0 + 1))
        i_all = np.arange(k1, dtype=float)
        with np.errstate(invalid="ignore", divide="ignore", over="ignore"):
            e_all = np.where(i_all[None, :] == 0, 0.0, i_all[None, :] * self._log_c1[:, None])
            e_all = e_all - gammaln(i_all + 1.0)[None, :]
            for col, k in enumerate(range(k0, k1 + 1)):
                # term i uses shape k - i + 1/b, i.e. log_h column k - i - 1
                log_mag = base[:, None] + e_all[:, :k] + self._log_h[:, k - 1::-1][:, :k]
                top = np.max(log_mag, axis=1)
                signs = np.where(np.arange(k) % 2 == 0, 1.0, -1.0)
                shifted = np.exp(log_mag - np.where(np.isfinite(top), top, 0.0)[:, None])
                s_sum = np.exp(top) * (shifted @ signs)
                first = self.t2 * tail[:, col]
                age = first - s_sum
                scale = np.maximum(first, np.exp(top))
                ages[:, col] = age
                ratio[:, col] = scale / np.abs(age)
                zero = scale == 0
                ages[zero, col] = 0.0
                ratio[zero, col] = 1.0
            bound = (self.t2 - self.t1)[:, None] * tail
            bad = (~np.isfinite(ages) | ~(ratio <= CANCELLATION_LIMIT) | (ages < 0)
                   | (ages > bound * (1 + 1e-9)))
        ages[bad] = np.nan
        self._ages = np.hstack([self._ages, ages])
        self._tail = np.hstack([self._tail, tail])
        self.fallback = np.hstack([self.fallback, bad])
        self._pending = np.hstack([self._pending, bad])
        self.max_ratio = np.hstack([self.max_ratio, np.where(np.isfinite(ratio), ratio, np.inf)])

    def _ensure(self, n_columns: int) -> None:
        have = self.n_columns
        if n_columns > have:
            self._compute(have + 1, n_columns)

    def _resolve(self, rows: np.ndarray, cols: np.ndarray) -> None:
        need = self._pending[rows, cols]
        rows, cols = rows[need], cols[need]
        if rows.size == 0:
            return
        self._ages[rows, cols] = _age_quadrature(self.params.a, self.params.b, self.t1[rows],
                                                 self.t2[rows], (cols + 1).astype(float))
        self._pending[rows, cols] = False
        logger.debug("expected-age closed form replaced by quadrature for %d entries", rows.size)

    def ages(self, n_columns: int) -> np.ndarray:
        """Array of shape (n_intervals, n_columns); column ``l - 1`` holds A_l."""
        self._ensure(n_columns)
        rows, cols = np.nonzero(self._pending[:, :n_columns])
        self._resolve(rows, cols)
        return self._ages[:, :n_columns]

    def upper_bounds(self, n_columns: int) -> np.ndarray:
        """``(t2 - t1) P(l, lam) >= A_l``, same layout as :meth:`ages`."""
        self._ensure(n_columns)
        return (self.t2 - self.t1)[:, None] * self._tail[:, :n_columns]

    def repair_sums(self, repair_fn: Callable, tol: float = 1e-9, max_terms: int = MAX_AGE_TERMS,
                    chunk: int = 16):
        """Sum ``repair_fn(A_l)`` over l = 1, 2, ... for every interval.

        A row stops at the first l with ``repair_fn(A_l) < tol * (sum + tol)``;
        that term is not added.  ``repair_fn`` must be nondecreasing, which lets
        the bound ``A_l <= (t2 - t1) P(l, lam)`` settle the stopping test
        without evaluating A_l exactly.  Returns ``(sums, n_terms, capped)``.
        """
        n = self.n_intervals
        total = np.zeros(n)
        n_terms = np.zeros(n, dtype=int)
        active = np.ones(n, dtype=bool)
        col = 0
        while col < max_terms and np.any(active):
            width = min(chunk, max_terms - col)
            self._ensure(col + width)
            for j in range(col, col + width):
                idx = np.flatnonzero(active)
                if idx.size == 0:
                    break
                thresh = tol * (total[idx] + tol)
                bound = (self.t2[idx] - self.t1[idx]) * self._tail[idx, j]
                settled = _apply(repair_fn, bound) < thresh
                open_rows = idx[~settled]
                self._resolve(open_rows, np.full(open_rows.size, j))
                term = _apply(repair_fn, self._ages[open_rows, j])
                stop = term < thresh[~settled]
                keep = open_rows[~stop]
                total[keep] += term[~stop]
                n_terms[keep] += 1
                active[idx[settled]] = False
                active[open_rows[stop]] = False
            col += width
            chunk = min(2 * chunk, 256)
        return total, n_terms, active.copy()


@dataclass(frozen=True)
class AgeEstimate:
    value: float
    method: str  # "closed_form" or "quadrature"
    cancellation_ratio: float


def defect_age_details(params: PowerLawParams, interval, k: int) -> AgeEstimate:
    """Expected age of the k-th defect plus how it was computed."""
    k = _check_k(k)
    iv = _as_interval(interval)
    table = AgeTable(params, [iv.t1, iv.t2], [0], [1])
    value = float(table.ages(k)[0, k - 1])
    fell_back = bool(table.fallback[0, k - 1])
    return AgeEstimate(value, "quadrature" if fell_back else "closed_form",
                       float(table.max_ratio[0, k - 1]))


def expected_defect_age_quadrature(params: PowerLawParams, interval, k: int) -> float:
    """Expected age of the k-th defect by quadrature only."""
    k = _check_k(k)
    iv = _as_interval(interval)
    return float(_age_quadrature(params.a, params.b, np.array([iv.t1]), np.array([iv.t2]),
                                 np.array([float(k)]))[0])


def expected_defect_age(params: PowerLawParams, interval, k: int, verify: bool = False) -> float:
    """Expected age at ``t2`` of the k-th defect arriving after ``t1``.

    This is the unconditional expectation of ``(t2 - T_k) 1[T_k <= t2]``,
    evaluated with the binomial sum over incomplete gammas.  When the sum's
    largest term dwarfs the result (see ``CANCELLATION_LIMIT``) the value is
    taken from quadrature instead.

    With ``verify=True`` the closed-form value is also checked against
    quadrature and :class:`NumericalInstabilityError` is raised if they differ
    by more than 1e-6 relative.
    """
    est = defect_age_details(params, interval, k)
    if verify and est.method == "closed_form":
        quad = expected_defect_age_quadrature(params, interval, k)
        if abs(quad - est.value) > 1e-6 * max(abs(quad), 1e-300):
            raise NumericalInstabilityError(
                f"expected age of defect {k}: closed form {est.value!r} vs quadrature {quad!r}")
    return est.value


def expected_total_age_cost(params: PowerLawParams, interval, repair_fn: Callable,
                            tol: float = 1e-9, max_terms: int = MAX_AGE_TERMS) -> float:
    """Sum of ``repair_fn(A_l)`` over defects l = 1, 2, ... in ``interval``.

    ``repair_fn`` must accept numpy arrays.  Emits :class:`TruncationWarning`
    when ``max_terms`` binds before the series converges.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    iv = _as_interval(interval)
    table = AgeTable(params, [iv.t1, iv.t2], [0], [1])
    total, n_terms, capped = table.repair_sums(repair_fn, tol, max_terms)
    if capped[0]:
        warnings.warn(f"age-cost series capped at {max_terms} terms before converging",
                      TruncationWarning, stacklevel=2)
    return float(total[0])

"""Poisson log-likelihood of interval-censored defect counts."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import gammaln

from ..fleet import CompartmentHistory, FleetDataset
from ..nhpp import PowerLawParams, _cum


@dataclass(frozen=True)
class PackedIntervals:
    """All inspection intervals of a dataset in flat arrays.

    ``owner[i]`` is the position (in ``keys``) of the compartment interval
    ``i`` belongs to.
    """

    keys: tuple
    t1: np.ndarray
    t2: np.ndarray
    counts: np.ndarray
    owner: np.ndarray
    log_fact: np.ndarray

    @classmethod
    def from_histories(cls, histories) -> "PackedIntervals":
        histories = list(histories)
        if histories:
            t1 = np.concatenate([h.starts for h in histories])
            t2 = np.concatenate([h.times for h in histories])
            counts = np.concatenate([h.counts for h in histories]).astype(float)
            owner = np.concatenate([np.full(h.n_intervals, i) for i, h in enumerate(histories)])
        else:
            t1 = t2 = counts = np.zeros(0)
            owner = np.zeros(0, dtype=int)
        return cls(tuple(h.key for h in histories), t1, t2, counts, owner.astype(int),
                   gammaln(counts + 1.0))

    def __post_init__(self):
        # cached logs make Lambda = a exp(b ln t1) expm1(b ln(t2 / t1)) cheap
        t1, t2 = self.t1, self.t2
        pos = t1 > 0
        with np.errstate(divide="ignore"):
            log_t1 = np.where(pos, np.log(np.where(pos, t1, 1.0)), 0.0)
            log_ratio = np.where(pos, np.log1p((t2 - t1) / np.where(pos, t1, 1.0)), 0.0)
        object.__setattr__(self, "_pos", pos)
        object.__setattr__(self, "_log_t1", log_t1)
        object.__setattr__(self, "_log_ratio", log_ratio)
        object.__setattr__(self, "_log_t2", np.log(np.maximum(t2, 1e-300)))
        object.__setattr__(self, "_has_counts", self.counts > 0)

    def expected_counts(self, a, b):
        """``Lambda`` of every interval for per-interval ``a`` and ``b``."""
        with np.errstate(over="ignore", invalid="ignore"):
            return np.where(self._pos, a * np.exp(b * self._log_t1) * np.expm1(b * self._log_ratio),
                            a * np.exp(b * self._log_t2))

    def _terms_fast(self, a, b):
        lam = self.expected_counts(a, b)
        with np.errstate(divide="ignore", invalid="ignore"):
            out = -lam + np.where(self._has_counts, self.counts * np.log(lam), 0.0) - self.log_fact
        return np.where(np.isnan(out) & self._has_counts, -np.inf, out)

    @property
    def n_compartments(self) -> int:
        return len(self.keys)

    def per_compartment(self, ln_a, ln_b) -> np.ndarray:
        """Log-likelihood of each compartment under its own ``(ln_a, ln_b)``.

        ``ln_a`` and ``ln_b`` have shape ``(..., n_compartments)``.
        """
        ln_a = np.asarray(ln_a, dtype=float)
        ln_b = np.asarray(ln_b, dtype=float)
        shape = np.broadcast_shapes(ln_a.shape, ln_b.shape)
        out = np.zeros(shape)
        if self.t1.size == 0:
            return out
        if ln_a.ndim == 1 and ln_b.ndim == 1 and shape == (self.n_compartments,):
            terms = self._terms_fast(np.exp(ln_a)[self.owner], np.exp(ln_b)[self.owner])
            res = np.bincount(self.owner, weights=terms, minlength=self.n_compartments)
            neg = np.isneginf(terms)
            if neg.any():
                res[np.unique(self.owner[neg])] = -np.inf
            return res
        a = np.exp(np.broadcast_to(ln_a, shape)[..., self.owner])
        b = np.exp(np.broadcast_to(ln_b, shape)[..., self.owner])
        terms = _terms(a, b, self.t1, self.t2, self.counts, self.log_fact)
        flat = terms.reshape(-1, self.t1.size)
        res = np.zeros((flat.shape[0], self.n_compartments))
        for row in range(flat.shape[0]):
            res[row] = np.bincount(self.owner, weights=flat[row], minlength=self.n_compartments)
        # bincount turns -inf + finite into nan; restore -inf
        bad = np.zeros(res.shape, dtype=bool)
        neg = np.isneginf(flat)
        if neg.any():
            for row in np.flatnonzero(neg.any(axis=1)):
                bad[row, np.unique(self.owner[neg[row]])] = True
            res[bad] = -np.inf
        return res.reshape(shape)

    def pooled(self, ln_a, ln_b) -> np.ndarray:
        """Pooled log-likelihood with shared parameters; broadcasts over ``ln_a, ln_b``."""
        ln_a = np.asarray(ln_a, dtype=float)[..., None]
        ln_b = np.asarray(ln_b, dtype=float)[..., None]
        if self.t1.size == 0:
            return np.zeros(np.broadcast_shapes(ln_a.shape, ln_b.shape)[:-1])
        if ln_a.ndim == 1 and ln_b.ndim == 1:
            return float(np.sum(self._terms_fast(np.exp(ln_a[0]), np.exp(ln_b[0]))))
        terms = _terms(np.exp(ln_a), np.exp(ln_b), self.t1, self.t2, self.counts, self.log_fact)
        return terms.sum(axis=-1)


def _terms(a, b, t1, t2, counts, log_fact):
    lam = _cum(a, b, t1, t2)
    with np.errstate(divide="ignore", invalid="ignore"):
        log_lam = np.log(lam)
        out = -lam + np.where(counts > 0, counts * log_lam, 0.0) - log_fact
    return np.where(np.isnan(out) & (counts > 0), -np.inf, out)


def log_likelihood(params: PowerLawParams, history: CompartmentHistory) -> float:
    """Poisson log-likelihood of one compartment's interval counts.

    Returns ``-inf`` when an interval with defects has zero expected count.
    """
    if history.n_intervals == 0:
        return 0.0
    terms = _terms(params.a, params.b, history.starts, history.times,
                   history.counts.astype(float), gammaln(history.counts + 1.0))
    return float(np.sum(terms))


def pooled_log_likelihood(params: PowerLawParams, dataset: FleetDataset) -> float:
    """Sum of :func:`log_likelihood` over every compartment in ``dataset``."""
    return float(sum(log_likelihood(params, h) for h in dataset))


def as_histories(data) -> list:
    if isinstance(data, CompartmentHistory):
        return [data]
    if isinstance(data, FleetDataset):
        return list(data.histories)
    return list(data)

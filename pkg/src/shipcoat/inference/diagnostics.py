"""Split R-hat and effective sample size for multi-chain draws."""

from __future__ import annotations

import math

import numpy as np

RHAT_LIMIT = 1.05
ESS_MIN = 100


def _split(x: np.ndarray) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.ndim != 2:
        raise ValueError("expected draws with shape (chains, draws)")
    half = x.shape[1] // 2
    if half < 2:
        raise ValueError("need at least 4 draws per chain")
    return np.concatenate([x[:, :half], x[:, x.shape[1] - half:]], axis=0)


def _is_constant(x: np.ndarray) -> bool:
    return bool(np.all(x == x.flat[0]))


def split_rhat(x) -> float:
    """Potential scale reduction on split chains; ``nan`` for constant draws."""
    s = _split(x)
    if _is_constant(s):
        return math.nan
    m, n = s.shape
    means = s.mean(axis=1)
    w = s.var(axis=1, ddof=1).mean()
    b = n * means.var(ddof=1)
    if w == 0:
        return math.inf
    var_plus = (n - 1) / n * w + b / n
    return float(math.sqrt(var_plus / w))


def _autocov(s: np.ndarray) -> np.ndarray:
    m, n = s.shape
    centered = s - s.mean(axis=1, keepdims=True)
    size = 1 << int(math.ceil(math.log2(2 * n)))
    f = np.fft.rfft(centered, n=size, axis=1)
    ac = np.fft.irfft(f * np.conj(f), n=size, axis=1)[:, :n]
    return ac / n


def effective_sample_size(x) -> float:
    """Multi-chain ESS with Geyer's initial monotone sequence; ``nan`` for constant draws."""
    s = _split(x)
    if _is_constant(s):
        return math.nan
    m, n = s.shape
    acov = _autocov(s)
    w = acov[:, 0].mean() * n / (n - 1)
    var_plus = w * (n - 1) / n
    if m > 1:
        var_plus += s.mean(axis=1).var(ddof=1)
    if var_plus <= 0:
        return math.nan
    rho = 1.0 - (w - acov.mean(axis=0)) / var_plus
    rho[0] = 1.0
    # sum adjacent pairs while positive, forcing them nonincreasing
    total = 0.0
    prev = math.inf
    t = 0
    while t + 1 < n:
        pair = rho[t] + rho[t + 1]
        if pair <= 0:
            break
        pair = min(pair, prev)
        total += pair
        prev = pair
        t += 2
    tau = max(-1.0 + 2.0 * total, 1.0 / math.log10(m * n)) if total > 0 else 1.0
    return float(m * n / tau)


def summarize(x) -> dict:
    """R-hat, ESS and a degeneracy flag for one parameter."""
    x = np.asarray(x, dtype=float)
    degenerate = _is_constant(x)
    return {
        "rhat": split_rhat(x),
        "ess": effective_sample_size(x),
        "degenerate": degenerate,
        "mean": float(x.mean()),
        "sd": float(x.std(ddof=1)) if x.size > 1 else 0.0,
    }


def converged(summary: dict) -> bool:
    if summary["degenerate"]:
        return False
    return summary["rhat"] <= RHAT_LIMIT and summary["ess"] >= ESS_MIN

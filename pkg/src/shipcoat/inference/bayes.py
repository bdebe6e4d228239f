"""Individual and hierarchical Bayesian fits."""

from __future__ import annotations

import warnings

import numpy as np
from scipy.optimize import minimize

from ..fleet import CompartmentHistory
from .likelihood import PackedIntervals, as_histories, log_likelihood
from .mcmc import (BlockKernel, MCMCConfig, Tuning, init_rng, run_chains, step_rng,
                   _SCALE_2D, _safe_chol)
from .priors import HyperPriors, LogParams, Priors
from .samples import PosteriorSamples


class ConvergenceWarning(RuntimeWarning):
    """R-hat above 1.05 or ESS below 100 for some parameter."""


def log_posterior(logparams: LogParams, history: CompartmentHistory, priors: Priors) -> float:
    """Unnormalized log posterior of one compartment."""
    ll = log_likelihood(logparams.to_params(), history)
    return float(ll + priors.logpdf(logparams.ln_a, logparams.ln_b))


def _block_objective(packed: PackedIntervals, prior_fn):
    def value(theta):
        ll = packed.per_compartment(theta[..., 0], theta[..., 1])
        out = ll + prior_fn(theta)
        return np.where(np.isnan(out), -np.inf, out)
    return value


def _hessian(value, theta: np.ndarray, h: float = 1e-3) -> np.ndarray:
    """Central-difference Hessian of a blockwise-separable density, per block."""
    n = theta.shape[0]
    H = np.empty((n, 2, 2))
    f0 = value(theta)
    e = np.eye(2) * h
    for i in range(2):
        fp = value(theta + e[i])
        fm = value(theta - e[i])
        H[:, i, i] = (fp - 2 * f0 + fm) / h ** 2
    fpp = value(theta + e[0] + e[1])
    fpm = value(theta + e[0] - e[1])
    fmp = value(theta - e[0] + e[1])
    fmm = value(theta - e[0] - e[1])
    H[:, 0, 1] = H[:, 1, 0] = (fpp - fpm - fmp + fmm) / (4 * h ** 2)
    return H


def _proposal_cov(H: np.ndarray, fallback=(0.5, 0.3)) -> np.ndarray:
    cov = np.empty_like(H)
    default = np.diag(np.square(fallback))
    for i, h in enumerate(H):
        neg = -h
        ok = np.all(np.isfinite(neg)) and neg[0, 0] > 0 and np.linalg.det(neg) > 0
        cov[i] = np.linalg.inv(neg) if ok else default
    return cov


def _map_blocks(packed: PackedIntervals, value, start: np.ndarray) -> np.ndarray:
    """Mode of each block's density, one small simplex search per block."""
    out = start.copy()
    for c in range(packed.n_compartments):
        def nlp(x, c=c):
            theta = out.copy()
            theta[c] = x
            v = value(theta)[c]
            return 1e300 if not np.isfinite(v) else -float(v)
        res = minimize(nlp, start[c], method="Nelder-Mead",
                       options={"xatol": 1e-6, "fatol": 1e-9, "maxiter": 2000})
        out[c] = res.x
    return out


def _finish(samples: PosteriorSamples, warn: bool) -> PosteriorSamples:
    samples.compute_diagnostics()
    bad = samples.problems()
    samples.meta["converged"] = not bad
    if bad and warn:
        shown = ", ".join(bad[:6]) + (" ..." if len(bad) > 6 else "")
        warnings.warn(f"MCMC convergence check failed for {len(bad)} parameter(s): {shown}",
                      ConvergenceWarning, stacklevel=3)
    return samples


def _collect(results, keys, mode, config, extra_meta) -> PosteriorSamples:
    theta = np.stack([r.theta for r in results], axis=0)        # (chains, K, C, 2)
    draws = np.transpose(theta, (2, 0, 1, 3))
    block = np.transpose(np.stack([r.block_logp for r in results]), (2, 0, 1))
    hyper = None
    if results[0].hyper is not None:
        hyper = np.stack([r.hyper for r in results], axis=0)
    meta = {
        "mcmc": config.to_dict(),
        "acceptance": [r.acceptance.tolist() for r in results],
        "tuning": [r.tuning for r in results],
        "warmup_last": [r.warmup_last for r in results],
        "joint_log_density": np.stack([r.joint_logp for r in results]),
    }
    meta.update(extra_meta)
    return PosteriorSamples(keys, draws, hyper, block, mode, meta)


def fit_bayes_individual(data, priors: Priors = Priors(), mcmc: MCMCConfig = MCMCConfig(),
                         threads: int = 1, warn: bool = True) -> PosteriorSamples:
    """Independent posteriors for one history, or for each compartment of a dataset.

    An empty history samples the prior.  Compartments are conditionally
    independent, so a dataset is sampled as separate blocks of one chain.
    """
    histories = as_histories(data)
    if not histories:
        raise ValueError("nothing to fit")
    packed = PackedIntervals.from_histories(histories)
    kernel = BlockKernel(packed, priors=priors)
    value = _block_objective(packed, lambda th: priors.logpdf(th[..., 0], th[..., 1]))
    center0 = np.tile([priors.mean_ln_a, priors.mean_ln_b], (packed.n_compartments, 1))
    center = _map_blocks(packed, value, center0)
    cov = _proposal_cov(_hessian(value, center), (priors.sd_ln_a, priors.sd_ln_b))
    chol = _safe_chol(cov)
    starts, tunings = [], []
    for ch in range(mcmc.chains):
        rng = init_rng(mcmc.seed, ch)
        z = rng.standard_normal(center.shape)
        theta = center + np.einsum("cij,cj->ci", chol, z)
        starts.append(kernel.make_state(theta))
        tunings.append(Tuning(_safe_chol(_SCALE_2D * cov), np.zeros(packed.n_compartments),
                              np.zeros(2)))
    results = run_chains(kernel, starts, tunings, mcmc, threads)
    samples = _collect(results, packed.keys, "bayes", mcmc,
                       {"priors": priors.to_dict(), "map": center.tolist()})
    samples.meta["kernel"] = kernel
    return _finish(samples, warn)


def fit_bayes_hierarchical(dataset, hyper: HyperPriors = HyperPriors(),
                           mcmc: MCMCConfig = MCMCConfig(), threads: int = 1,
                           warn: bool = True) -> PosteriorSamples:
    """Three-stage fit: compartment pairs, Normal population, hyperpriors."""
    histories = as_histories(dataset)
    if not histories:
        raise ValueError("hierarchical fit needs a nonempty dataset")
    packed = PackedIntervals.from_histories(histories)
    n = packed.n_compartments
    kernel = BlockKernel(packed, hyper=hyper)

    # common starting point: pooled mode under the hyperprior means
    weak = Priors(hyper.m_ln_a, hyper.s_ln_a or 1.0, hyper.m_ln_b, hyper.s_ln_b or 1.0)

    def pooled_nlp(x):
        v = packed.pooled(x[0], x[1]) + weak.logpdf(x[0], x[1])
        return 1e300 if not np.isfinite(v) else -float(v)
    res = minimize(pooled_nlp, [hyper.m_ln_a, hyper.m_ln_b], method="Nelder-Mead",
                   options={"xatol": 1e-6, "fatol": 1e-9, "maxiter": 4000})
    pooled = np.asarray(res.x, dtype=float)
    pooled = np.where([hyper.fixed_mean(0), hyper.fixed_mean(1)], [hyper.m_ln_a, hyper.m_ln_b], pooled)

    def sigma0(lo, hi):
        return min(max(0.5, lo + 0.05 * (hi - lo)), hi - 0.05 * (hi - lo))
    s_a0, s_b0 = sigma0(hyper.l_ln_a, hyper.u_ln_a), sigma0(hyper.l_ln_b, hyper.u_ln_b)
    stage2 = Priors(pooled[0], s_a0, pooled[1], s_b0)
    value = _block_objective(packed, lambda th: stage2.logpdf(th[..., 0], th[..., 1]))
    center = np.tile(pooled, (n, 1))
    cov = _proposal_cov(_hessian(value, center), (min(s_a0, 1.0), min(s_b0, 1.0)))
    chol = _safe_chol(cov)
    sig_step = 0.1 * np.array([min(hyper.u_ln_a - hyper.l_ln_a, 1.0),
                               min(hyper.u_ln_b - hyper.l_ln_b, 1.0)])
    starts, tunings = [], []
    for ch in range(mcmc.chains):
        rng = init_rng(mcmc.seed, ch)
        z = rng.standard_normal(center.shape)
        theta = center + 0.5 * np.einsum("cij,cj->ci", chol, z)
        h0 = np.array([pooled[0], s_a0, pooled[1], s_b0])
        starts.append(kernel.make_state(theta, h0))
        tunings.append(Tuning(_safe_chol(_SCALE_2D * cov), np.zeros(n), sig_step.copy()))
    results = run_chains(kernel, starts, tunings, mcmc, threads)
    samples = _collect(results, packed.keys, "hier", mcmc,
                       {"hyperpriors": hyper.to_dict(), "pooled_start": pooled.tolist()})
    samples.meta["kernel"] = kernel
    return _finish(samples, warn)


def replay_transition(samples: PosteriorSamples, chain: int, draw: int):
    """Recompute kept draw ``draw`` of ``chain`` from the previous recorded state.

    Returns the reproduced ``(theta, hyper, block_logp)``; the sampler is
    deterministic, so these equal the recorded values exactly.
    """
    kernel: BlockKernel = samples.meta["kernel"]
    cfg = MCMCConfig(**samples.meta["mcmc"])
    tuning = samples.meta["tuning"][chain]
    if draw == 0:
        prev = samples.meta["warmup_last"][chain]
    else:
        theta = samples.draws[:, chain, draw - 1]
        hyper = None if samples.hyper is None else samples.hyper[chain, draw - 1]
        prev = kernel.make_state(theta, hyper)
    state, _, _ = kernel.transition(prev, tuning, step_rng(cfg.seed, chain, cfg.warmup_draws + draw))
    return state.theta, state.hyper, kernel.block_logp(state)


def prefit_pooled(dataset, mcmc: MCMCConfig, flat_sd: float = 1e3, threads: int = 1) -> dict:
    """Pool every compartment under near-flat priors and summarize the posterior.

    The summary (posterior means and sds of ``ln a`` and ``ln b``) is the kind
    of information one would feed back into hyperprior settings.
    """
    histories = as_histories(dataset)
    merged = _merge_for_pooling(histories)
    flat = Priors(0.0, flat_sd, 0.0, flat_sd)
    samples = fit_bayes_individual(merged, flat, mcmc, threads=threads, warn=False)
    d = samples.draws.reshape(-1, 2)
    return {
        "mean_ln_a": float(d[:, 0].mean()), "sd_ln_a": float(d[:, 0].std(ddof=1)),
        "mean_ln_b": float(d[:, 1].mean()), "sd_ln_b": float(d[:, 1].std(ddof=1)),
        "samples": samples,
    }


def _merge_for_pooling(histories):
    packed = PackedIntervals.from_histories(histories)
    return [_PackedAsHistory(packed)]


class _PackedAsHistory:
    key = ("*", "pooled")

    def __init__(self, packed: PackedIntervals):
        self.starts = packed.t1
        self.times = packed.t2
        self.counts = packed.counts.astype(np.int64)
        self.n_intervals = packed.t1.size

"""Adaptive random-walk Metropolis for blocks of ``(ln a, ln b)`` pairs.

One chain state holds a pair per compartment and, for hierarchical fits,
the four population hyperparameters.  Compartment pairs are updated in
parallel (they are conditionally independent); hyperparameters are updated
first, means by Gibbs draws and sds by reflected random walks.

Two joint moves help the hierarchy mix: a translation of every compartment
together with the population means, and a rescaling of the deviations from
the means together with the population sds.

Every transition draws its random numbers from a generator keyed by
``(seed + chain, step)``, so a recorded transition can be replayed alone.
"""

from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass

import numpy as np

from .likelihood import PackedIntervals
from .priors import HyperPriors, Priors, normal_logpdf

HYPER_NAMES = ("mu_ln_a", "sigma_ln_a", "mu_ln_b", "sigma_ln_b")
_SCALE_2D = 2.38 ** 2 / 2.0


@dataclass(frozen=True)
class MCMCConfig:
    chains: int = 4
    warmup_draws: int = 2000
    kept_draws: int = 2000
    seed: int = 0
    target_acceptance: float = 0.3

    def __post_init__(self):
        if self.chains < 1 or self.warmup_draws < 1 or self.kept_draws < 1:
            raise ValueError("chain and draw counts must be >= 1")
        if not 0 < self.target_acceptance < 1:
            raise ValueError("target acceptance must lie in (0, 1)")
        if self.seed < 0:
            raise ValueError("seed must be nonnegative")

    @classmethod
    def fast(cls, seed: int = 0, chains: int = 4) -> "MCMCConfig":
        return cls(chains=chains, warmup_draws=1000, kept_draws=1000, seed=seed)

    def to_dict(self) -> dict:
        return asdict(self)


def step_rng(seed: int, chain: int, step: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(
        np.random.SeedSequence(entropy=seed + chain, spawn_key=(step,))))


def init_rng(seed: int, chain: int) -> np.random.Generator:
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy=seed + chain)))


def reflect(x, lo, hi):
    """Fold ``x`` back into ``[lo, hi]``; a symmetric proposal stays symmetric."""
    width = hi - lo
    y = np.mod(x - lo, 2.0 * width)
    return lo + np.where(y > width, 2.0 * width - y, y)


def _safe_chol(cov: np.ndarray) -> np.ndarray:
    out = np.empty_like(cov)
    for i, c in enumerate(cov):
        c = 0.5 * (c + c.T)
        jitter = 1e-10 * max(np.trace(c), 1e-12)
        for _ in range(8):
            try:
                out[i] = np.linalg.cholesky(c + jitter * np.eye(2))
                break
            except np.linalg.LinAlgError:
                jitter *= 100.0
        else:
            out[i] = np.diag(np.sqrt(np.maximum(np.diag(c), 1e-12)))
    return out


@dataclass
class Tuning:
    """Proposal settings of one chain, frozen after warmup."""

    chol: np.ndarray          # (C, 2, 2)
    log_scale: np.ndarray     # (C,)
    sigma_step: np.ndarray    # (2,) random-walk step for the two population sds
    shift_chol: np.ndarray = None   # (2, 2) joint translation of compartments and means
    shift_log_scale: float = 0.0
    scale_step: np.ndarray = None   # (2,) sd of the log rescaling factor

    def __post_init__(self):
        if self.shift_chol is None:
            self.shift_chol = np.diag([0.1, 0.05])
        if self.scale_step is None:
            self.scale_step = np.array([0.1, 0.1])
        self.shift_chol = np.asarray(self.shift_chol, dtype=float)
        self.scale_step = np.asarray(self.scale_step, dtype=float)

    def copy(self) -> "Tuning":
        return Tuning(self.chol.copy(), self.log_scale.copy(), self.sigma_step.copy(),
                      self.shift_chol.copy(), float(self.shift_log_scale), self.scale_step.copy())

    def to_dict(self) -> dict:
        return {"chol": self.chol.tolist(), "log_scale": self.log_scale.tolist(),
                "sigma_step": self.sigma_step.tolist(), "shift_chol": self.shift_chol.tolist(),
                "shift_log_scale": self.shift_log_scale, "scale_step": self.scale_step.tolist()}


@dataclass
class State:
    theta: np.ndarray               # (C, 2)
    loglik: np.ndarray              # (C,)
    hyper: np.ndarray | None = None  # (4,) mu_a, sigma_a, mu_b, sigma_b

    def copy(self) -> "State":
        return State(self.theta.copy(), self.loglik.copy(),
                     None if self.hyper is None else self.hyper.copy())


class BlockKernel:
    """Transition kernel; ``priors`` for independent fits, ``hyper`` for the hierarchy."""

    def __init__(self, packed: PackedIntervals, priors: Priors | None = None,
                 hyper: HyperPriors | None = None):
        if (priors is None) == (hyper is None):
            raise ValueError("give exactly one of priors or hyper")
        self.packed = packed
        self.priors = priors
        self.hyper = hyper
        self.n = packed.n_compartments

    # densities ------------------------------------------------------------
    def block_prior(self, theta, hyper=None):
        if self.priors is not None:
            return self.priors.logpdf(theta[..., 0], theta[..., 1])
        mu_a, s_a, mu_b, s_b = hyper
        with np.errstate(divide="ignore"):
            return normal_logpdf(theta[..., 0], mu_a, s_a) + normal_logpdf(theta[..., 1], mu_b, s_b)

    def block_logp(self, state: State) -> np.ndarray:
        """Per-compartment conditional log density (likelihood + stage-2 prior)."""
        return state.loglik + self.block_prior(state.theta, state.hyper)

    def joint_logp(self, state: State) -> float:
        total = float(np.sum(self.block_logp(state)))
        if self.hyper is not None:
            hp = self.hyper
            for p in range(2):
                if not hp.fixed_mean(p):
                    total += self._mu_prior(p, state.hyper[2 * p])
                if not hp.fixed_sd(p):
                    lo, hi = (hp.l_ln_a, hp.u_ln_a) if p == 0 else (hp.l_ln_b, hp.u_ln_b)
                    total -= math.log(hi - lo)
        return total

    def loglik(self, theta) -> np.ndarray:
        ll = self.packed.per_compartment(theta[:, 0], theta[:, 1])
        return np.where(np.isnan(ll), -np.inf, ll)

    def make_state(self, theta, hyper=None) -> State:
        theta = np.array(theta, dtype=float).reshape(self.n, 2)
        return State(theta, self.loglik(theta), None if hyper is None else np.array(hyper, float))

    # transition -----------------------------------------------------------
    def transition(self, state: State, tuning: Tuning, rng: np.random.Generator):
        """One sweep; returns ``(new_state, accepted (C,), hyper_accepted (5,))``.

        ``hyper_accepted`` flags the two sd walks, the translation and the
        two rescalings.
        """
        state = state.copy()
        sig_acc = np.zeros(5, dtype=bool)
        if self.hyper is not None:
            z_h = rng.standard_normal(8)
            u_h = rng.random(5)
            for p in range(2):
                self._update_hyper(state, p, z_h[2 * p], z_h[2 * p + 1], u_h[p], tuning, sig_acc)
            self._translate(state, z_h[4:6], u_h[2], tuning, sig_acc)
            for p in range(2):
                self._rescale(state, p, z_h[6 + p], u_h[3 + p], tuning, sig_acc)
        z = rng.standard_normal((self.n, 2))
        u = rng.random(self.n)
        step = np.exp(tuning.log_scale)[:, None] * np.einsum("cij,cj->ci", tuning.chol, z)
        prop = state.theta + step
        ll_prop = self.loglik(prop)
        cur = state.loglik + self.block_prior(state.theta, state.hyper)
        new = ll_prop + self.block_prior(prop, state.hyper)
        with np.errstate(invalid="ignore"):
            acc = np.log(u) < new - cur
        state.theta[acc] = prop[acc]
        state.loglik[acc] = ll_prop[acc]
        return state, acc, sig_acc

    def _mu_prior(self, p, mu):
        hp = self.hyper
        m, s = (hp.m_ln_a, hp.s_ln_a) if p == 0 else (hp.m_ln_b, hp.s_ln_b)
        return float(normal_logpdf(mu, m, s))

    def _translate(self, state, z, u, tuning, acc):
        delta = math.exp(tuning.shift_log_scale) * (tuning.shift_chol @ z)
        free = np.array([not self.hyper.fixed_mean(p) for p in range(2)])
        if not free.any():
            return
        delta = np.where(free, delta, 0.0)
        prop = state.theta + delta
        ll = self.loglik(prop)
        mu = state.hyper[[0, 2]]
        diff = float(np.sum(ll) - np.sum(state.loglik))
        diff += sum(self._mu_prior(p, mu[p] + delta[p]) - self._mu_prior(p, mu[p])
                    for p in range(2) if free[p])
        if math.log(u) < diff:
            state.theta = prop
            state.loglik = ll
            state.hyper[[0, 2]] = mu + delta
            acc[2] = True

    def _rescale(self, state, p, z, u, tuning, acc):
        hp = self.hyper
        lo, hi = (hp.l_ln_a, hp.u_ln_a) if p == 0 else (hp.l_ln_b, hp.u_ln_b)
        if hp.fixed_sd(p):
            return
        log_s = tuning.scale_step[p] * z
        factor = math.exp(log_s)
        sigma = state.hyper[2 * p + 1] * factor
        if not lo <= sigma <= hi:
            return
        mu = state.hyper[2 * p]
        prop = state.theta.copy()
        prop[:, p] = mu + factor * (prop[:, p] - mu)
        ll = self.loglik(prop)
        # stage-2 density changes by -C log s, the Jacobian contributes (C + 1) log s
        diff = float(np.sum(ll) - np.sum(state.loglik)) + log_s
        if math.log(u) < diff:
            state.theta = prop
            state.loglik = ll
            state.hyper[2 * p + 1] = sigma
            acc[3 + p] = True

    def _update_hyper(self, state, p, z_mu, z_sig, u, tuning, sig_acc):
        hp = self.hyper
        m, s = (hp.m_ln_a, hp.s_ln_a) if p == 0 else (hp.m_ln_b, hp.s_ln_b)
        lo, hi = (hp.l_ln_a, hp.u_ln_a) if p == 0 else (hp.l_ln_b, hp.u_ln_b)
        x = state.theta[:, p]
        sigma = state.hyper[2 * p + 1]
        # conjugate Normal update of the population mean
        if s == 0:
            mu = m
        else:
            prec = 1.0 / s ** 2 + self.n / sigma ** 2
            mean = (m / s ** 2 + x.sum() / sigma ** 2) / prec
            mu = mean + z_mu / math.sqrt(prec)
        state.hyper[2 * p] = mu
        if hp.fixed_sd(p):
            return
        # reflected random walk on the population sd
        ss = float(np.sum((x - mu) ** 2))
        prop = float(reflect(sigma + tuning.sigma_step[p] * z_sig, lo, hi))

        def logd(sd):
            if sd <= 0:
                return 0.0 if ss == 0 else -math.inf
            return -self.n * math.log(sd) - 0.5 * ss / sd ** 2
        if math.log(u) < logd(prop) - logd(sigma):
            state.hyper[2 * p + 1] = prop
            sig_acc[p] = True


@dataclass
class ChainResult:
    theta: np.ndarray        # (K, C, 2)
    hyper: np.ndarray | None  # (K, 4)
    block_logp: np.ndarray   # (K, C)
    joint_logp: np.ndarray   # (K,)
    acceptance: np.ndarray   # (C,) post-warmup acceptance rate
    tuning: Tuning
    warmup_last: State


def run_chain(kernel: BlockKernel, start: State, tuning: Tuning, config: MCMCConfig,
              chain: int) -> ChainResult:
    """Warm up (adapting ``tuning``), freeze, then record ``kept_draws`` states."""
    tuning = tuning.copy()
    W, K = config.warmup_draws, config.kept_draws
    target = config.target_acceptance
    window = max(10, min(50, W // 20))
    diag_at = W // 4
    full_at = {W // 2, (3 * W) // 4}
    warm = np.empty((W, kernel.n, 2))
    warm_mu = np.empty((W, 2))
    state = start.copy()
    acc_win = np.zeros(kernel.n)
    sig_win = np.zeros(5)
    n_win = 0
    j = 1
    for step in range(W):
        state, acc, sacc = kernel.transition(state, tuning, step_rng(config.seed, chain, step))
        warm[step] = state.theta
        if state.hyper is not None:
            warm_mu[step] = state.hyper[[0, 2]]
        acc_win += acc
        sig_win += sacc
        n_win += 1
        done = step + 1
        if n_win == window:
            gain = 2.0 / math.sqrt(j)
            tuning.log_scale += gain * (acc_win / n_win - target)
            if kernel.hyper is not None:
                rate = sig_win / n_win
                tuning.sigma_step *= np.exp(gain * (rate[:2] - target))
                tuning.shift_log_scale += gain * (rate[2] - target)
                tuning.scale_step *= np.exp(gain * (rate[3:] - target))
            acc_win[:] = 0.0
            sig_win[:] = 0.0
            n_win = 0
            j += 1
        if done == diag_at and diag_at >= 8:
            var = warm[diag_at // 2:diag_at].var(axis=0)  # (C, 2)
            ok = np.all(var > 0, axis=1)
            if np.any(ok):
                tuning.chol[ok] = np.sqrt(_SCALE_2D * var[ok])[:, :, None] * np.eye(2)
                tuning.log_scale[ok] = 0.0
                j = 1
        elif done in full_at and done - diag_at >= 8:
            seg = warm[diag_at:done]
            centered = seg - seg.mean(axis=0)
            cov = np.einsum("tci,tcj->cij", centered, centered) / (seg.shape[0] - 1)
            ok = np.all(np.diagonal(cov, axis1=1, axis2=2) > 0, axis=1)
            if np.any(ok):
                reg = cov[ok] + 1e-6 * np.eye(2)
                tuning.chol[ok] = _safe_chol(_SCALE_2D * reg)
                tuning.log_scale[ok] = 0.0
                j = 1
            if kernel.hyper is not None:
                mu_cov = np.cov(warm_mu[diag_at:done].T)
                if np.all(np.diag(mu_cov) > 0):
                    tuning.shift_chol = _safe_chol(_SCALE_2D * (mu_cov + 1e-8 * np.eye(2))[None])[0]
                    tuning.shift_log_scale = 0.0
    warmup_last = state.copy()

    theta = np.empty((K, kernel.n, 2))
    hyper = None if kernel.hyper is None else np.empty((K, 4))
    block = np.empty((K, kernel.n))
    joint = np.empty(K)
    accepted = np.zeros(kernel.n)
    for d in range(K):
        state, acc, _ = kernel.transition(state, tuning, step_rng(config.seed, chain, W + d))
        accepted += acc
        theta[d] = state.theta
        if hyper is not None:
            hyper[d] = state.hyper
        block[d] = kernel.block_logp(state)
        joint[d] = kernel.joint_logp(state)
    return ChainResult(theta, hyper, block, joint, accepted / K, tuning, warmup_last)


def run_chains(kernel: BlockKernel, starts: list, tunings: list, config: MCMCConfig,
               threads: int = 1) -> list:
    """Run every chain; results are ordered by chain index whatever ``threads`` is."""
    jobs = range(config.chains)
    if threads > 1 and config.chains > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            return list(pool.map(lambda c: run_chain(kernel, starts[c], tunings[c], config, c), jobs))
    return [run_chain(kernel, starts[c], tunings[c], config, c) for c in jobs]

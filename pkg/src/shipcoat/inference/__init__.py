"""Fitting the power-law process to interval-censored counts."""

from .bayes import (ConvergenceWarning, fit_bayes_hierarchical, fit_bayes_individual,
                    log_posterior, prefit_pooled, replay_transition)
from .diagnostics import effective_sample_size, split_rhat, summarize as diagnose
from .likelihood import PackedIntervals, log_likelihood, pooled_log_likelihood
from .mcmc import HYPER_NAMES, MCMCConfig
from .mle import MLEResult, fit_mle
from .predictive import (PredictiveSummary, expected_count_curve, posterior_predictive_counts,
                         predictive_from_draws)
from .priors import HyperPriors, LogParams, Priors
from .samples import PosteriorSamples

__all__ = [
    "ConvergenceWarning", "HYPER_NAMES", "HyperPriors", "LogParams", "MCMCConfig", "MLEResult",
    "PackedIntervals", "PosteriorSamples", "PredictiveSummary", "Priors",
    "diagnose", "effective_sample_size", "expected_count_curve", "fit_bayes_hierarchical",
    "fit_bayes_individual", "fit_mle", "log_likelihood", "log_posterior",
    "pooled_log_likelihood", "posterior_predictive_counts", "predictive_from_draws",
    "prefit_pooled", "replay_transition", "split_rhat",
]

"""Likelihood-based inference: exact enumeration at small n, mean-field variational EM at any n."""

from .exact import (
    PosteriorTable,
    alpha_deviation_bound,
    class_mass,
    complete_loglik,
    exact_em_fit,
    expected_contrast,
    kl_divergence,
    log_posterior_ratio,
    marginal_loglik,
    normalized_contrast,
    posterior_ratio_stat,
    posterior_table,
    prior_loglik,
)
from .results import FitResult
from .variational import TauMatrix, elbo, fit_tau, hard_assignment, m_step, tv_pinsker_check, update_tau, vem_fit

__all__ = [
    "FitResult",
    "PosteriorTable",
    "complete_loglik",
    "prior_loglik",
    "marginal_loglik",
    "posterior_table",
    "class_mass",
    "posterior_ratio_stat",
    "log_posterior_ratio",
    "normalized_contrast",
    "expected_contrast",
    "alpha_deviation_bound",
    "kl_divergence",
    "exact_em_fit",
    "TauMatrix",
    "hard_assignment",
    "elbo",
    "update_tau",
    "m_step",
    "vem_fit",
    "fit_tau",
    "tv_pinsker_check",
]

"""Zeroth-order gradient estimators and their optimal coefficients"""

import logging

import numpy as np

from ..geometry import SeededRng
from ..oracles.base import Oracle
from ..scalar_estimation import ScalarState
from .base import GA_THRESHOLD, EstimatorConfig, GaImpl, GradientEstimate, Variant
from .biased_sampling import prgf_bs_estimate
from .coefficients import (
    expected_beta,
    expected_beta_subspace,
    lambda_star,
    lambda_star_subspace,
    mu_star,
    mu_star_subspace,
    mu_star_subspace_exact,
)
from .gradient_averaging import prgf_ga_estimate
from .rgf import rgf_estimate

logger = logging.getLogger('prgf.estimators')


def estimate_gradient(oracle: Oracle, x: np.ndarray, y: int, prior, cfg: EstimatorConfig,
                      scalars: ScalarState, rng: SeededRng) -> GradientEstimate:
    """
    Dispatch to the configured estimator

    Without a prior (None) every variant degrades to a plain RGF estimate.
    """
    if cfg.variant is Variant.RGF or prior is None:
        base = scalars.ensure_baseline(oracle, x, y)
        return rgf_estimate(oracle, x, y, cfg, None, rng, base)
    if cfg.variant is Variant.PRGF_BS:
        return prgf_bs_estimate(oracle, x, y, prior, cfg, scalars, rng)
    return prgf_ga_estimate(oracle, x, y, prior, cfg, scalars, rng)


__all__ = [
    'GA_THRESHOLD', 'EstimatorConfig', 'GaImpl', 'GradientEstimate', 'Variant', 'estimate_gradient',
    'expected_beta', 'expected_beta_subspace', 'lambda_star', 'lambda_star_subspace', 'mu_star',
    'mu_star_subspace', 'mu_star_subspace_exact', 'prgf_bs_estimate', 'prgf_ga_estimate', 'rgf_estimate',
]

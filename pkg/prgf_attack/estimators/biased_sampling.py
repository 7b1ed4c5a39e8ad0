"""
Prior-guided estimator based on biased sampling

Probes are drawn with (u . v)^2 = lambda, where lambda is the closed-form
optimum for the estimated cosine alpha between the prior v and the gradient.
When lambda reaches 1 the prior itself is returned without probing.
"""

import logging

import numpy as np

from ..geometry import BiasedSampler, BiasedSubspaceSampler, SeededRng, as_unit
from ..oracles.base import Oracle
from ..scalar_estimation import ScalarState, estimate_alpha
from .base import EstimatorConfig, GradientEstimate
from .coefficients import lambda_star, lambda_star_subspace
from .rgf import average_probes, rgf_estimate

logger = logging.getLogger('prgf.estimators.bs')

ALPHA_CAP = 0.999


def estimate_prior_alignment(oracle: Oracle, x: np.ndarray, y: int, v, cfg: EstimatorConfig,
                             scalars: ScalarState, rng: SeededRng):
    """
    Refresh the scalars and estimate alpha for the prior

    Returns:
        (v, alpha) with v flipped so that alpha >= 0, alpha clamped to
        [0, 0.999]; alpha is None when the gradient norm estimate is 0
    """
    norm = scalars.ensure_norm(oracle, x, y, rng, cfg.dd_basis)
    if norm == 0.0:
        return v, None
    alpha = estimate_alpha(oracle, x, y, v, scalars.norm, cfg.sigma, scalars.baseline_loss)
    if alpha < 0:
        logger.debug(f"Flipping prior (estimated alpha {alpha:.4f})")
        v, alpha = -v, -alpha
    return v, min(alpha, ALPHA_CAP)


def prgf_bs_estimate(oracle: Oracle, x: np.ndarray, y: int, v, cfg: EstimatorConfig,
                     scalars: ScalarState, rng: SeededRng) -> GradientEstimate:
    """
    Biased-sampling estimate of grad f(x)

    Args:
        oracle: Metered oracle; its ledger is charged for every query
        v: Unit prior direction
        cfg: Estimator settings (q, sigma, optional subspace, optional fixed lambda)
        scalars: Norm cache and cached loss at x for this iteration
        rng: Stream for the probes

    Returns:
        GradientEstimate; prior_returned is set when lambda* = 1
    """
    start = oracle.ledger.total
    v = as_unit(v)
    scalars.ensure_baseline(oracle, x, y)
    alpha = None

    if cfg.fixed_lambda is not None:
        lam = cfg.fixed_lambda
    else:
        v, alpha = estimate_prior_alignment(oracle, x, y, v, cfg, scalars, rng)
        if alpha is None:
            logger.debug("Gradient norm estimate is 0, falling back to RGF")
            estimate = rgf_estimate(oracle, x, y, cfg, None, rng, scalars.baseline_loss)
            estimate.coefficient = 1.0 / cfg.D
            estimate.queries_used = oracle.ledger.total - start
            return estimate
        if cfg.dd_basis is not None:
            energy = scalars.subspace_energy
            lam = lambda_star_subspace(alpha ** 2, energy ** 2, cfg.q, cfg.dd_basis.d)
        else:
            lam = lambda_star(alpha ** 2, cfg.q, cfg.D)

    if lam == 1.0:
        return GradientEstimate(
            direction=v.data.copy(),
            queries_used=oracle.ledger.total - start,
            coefficient=1.0,
            prior_returned=True,
            alpha=alpha,
            subspace_energy=scalars.subspace_energy,
        )

    if cfg.dd_basis is not None:
        sampler = BiasedSubspaceSampler(v, cfg.dd_basis, lam)
    else:
        sampler = BiasedSampler(v, lam)
    direction = average_probes(oracle, x, y, sampler, cfg.q, cfg.sigma, rng, scalars.baseline_loss)
    return GradientEstimate(
        direction=direction,
        queries_used=oracle.ledger.total - start,
        coefficient=lam,
        alpha=alpha,
        subspace_energy=scalars.subspace_energy,
    )

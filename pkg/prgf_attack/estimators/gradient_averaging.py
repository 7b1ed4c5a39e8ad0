"""
Prior-guided estimator based on gradient averaging

Combines the prior v with a normalized random gradient-free estimate. The
prior is returned directly once the optimal weight mu* reaches the threshold c.
Below it the combination is either the closed form mu* v + (1 - mu*) g_bar,
or a projection of the gradient onto span{v, g_bar} whose two coordinates are
measured by finite differences.
"""

import logging

import numpy as np

from ..exceptions import EmptySpanError
from ..geometry import SeededRng, as_unit, gram_schmidt
from ..oracles.base import Oracle, Phase
from ..scalar_estimation import ScalarState, directional_derivatives
from .base import EstimatorConfig, GaImpl, GradientEstimate
from .biased_sampling import estimate_prior_alignment
from .coefficients import expected_beta, expected_beta_subspace, mu_star, mu_star_subspace
from .rgf import rgf_estimate

logger = logging.getLogger('prgf.estimators.ga')


def _prior_estimate(v, start: int, oracle: Oracle, mu: float, alpha, scalars: ScalarState) -> GradientEstimate:
    return GradientEstimate(
        direction=v.data.copy(),
        queries_used=oracle.ledger.total - start,
        coefficient=mu,
        prior_returned=True,
        alpha=alpha,
        subspace_energy=scalars.subspace_energy,
    )


def prgf_ga_estimate(oracle: Oracle, x: np.ndarray, y: int, v, cfg: EstimatorConfig,
                     scalars: ScalarState, rng: SeededRng) -> GradientEstimate:
    """
    Gradient-averaging estimate of grad f(x)

    Args:
        oracle: Metered oracle; its ledger is charged for every query
        v: Unit prior direction
        cfg: Estimator settings (q, sigma, c, ga_impl, optional subspace, optional fixed mu)
        scalars: Norm cache and cached loss at x for this iteration
        rng: Stream for the probes

    Returns:
        GradientEstimate; prior_returned is set when mu* >= c
    """
    start = oracle.ledger.total
    v = as_unit(v)
    base = scalars.ensure_baseline(oracle, x, y)
    alpha = None

    if cfg.fixed_mu is not None:
        mu = cfg.fixed_mu
        if mu == 1.0:
            return _prior_estimate(v, start, oracle, mu, alpha, scalars)
    else:
        v, alpha = estimate_prior_alignment(oracle, x, y, v, cfg, scalars, rng)
        if alpha is None:
            logger.debug("Gradient norm estimate is 0, falling back to RGF")
            estimate = rgf_estimate(oracle, x, y, cfg, None, rng, base)
            estimate.queries_used = oracle.ledger.total - start
            return estimate
        if cfg.dd_basis is not None:
            e_beta = expected_beta_subspace(scalars.subspace_energy, cfg.q, cfg.dd_basis.d)
            mu = mu_star_subspace(alpha, e_beta)
        else:
            mu = mu_star(alpha, expected_beta(cfg.q, cfg.D))
        if mu >= cfg.c:
            return _prior_estimate(v, start, oracle, mu, alpha, scalars)

    random_part = rgf_estimate(oracle, x, y, cfg, None, rng, base).direction
    random_norm = float(np.linalg.norm(random_part))
    if random_norm == 0.0:
        logger.debug("Random estimate vanished, returning the prior")
        return _prior_estimate(v, start, oracle, mu, alpha, scalars)
    random_dir = random_part / random_norm

    if cfg.ga_impl is GaImpl.CLOSED_FORM or cfg.fixed_mu is not None:
        direction = mu * v.data + (1.0 - mu) * random_dir
        applied = mu
    else:
        try:
            basis = gram_schmidt([v.data, random_dir])
        except EmptySpanError:
            return _prior_estimate(v, start, oracle, mu, alpha, scalars)
        if basis.d == 1:
            return _prior_estimate(v, start, oracle, mu, alpha, scalars)
        along_prior, along_random = directional_derivatives(
            oracle, x, y, basis.matrix, cfg.sigma, base, Phase.ESTIMATION
        )
        direction = along_prior * basis.matrix[0] + along_random * basis.matrix[1]
        total = abs(along_prior) + abs(along_random)
        applied = abs(along_prior) / total if total > 0 else mu

    return GradientEstimate(
        direction=direction,
        queries_used=oracle.ledger.total - start,
        coefficient=float(applied),
        alpha=alpha,
        subspace_energy=scalars.subspace_energy,
    )

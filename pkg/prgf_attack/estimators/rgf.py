"""
Random gradient-free estimator

g = (1/q) sum_i ((f(x + sigma u_i) - f(x)) / sigma) u_i with probes u_i from a
sampler (uniform sphere, subspace, or a biased sampler).
"""

import logging
from typing import Optional

import numpy as np

from ..geometry import Sampler, SeededRng
from ..oracles.base import Oracle, Phase
from ..scalar_estimation import baseline, directional_derivatives
from .base import EstimatorConfig, GradientEstimate

logger = logging.getLogger('prgf.estimators.rgf')


def average_probes(oracle: Oracle, x: np.ndarray, y: int, sampler: Sampler, q: int, sigma: float,
                   rng: SeededRng, baseline_loss: float) -> np.ndarray:
    """Average of q finite-difference estimates along sampled probes (q queries)"""
    probes = sampler.draw_batch(q, rng)
    derivatives = directional_derivatives(oracle, x, y, probes, sigma, baseline_loss, Phase.ESTIMATION)
    return derivatives @ probes / q


def rgf_estimate(oracle: Oracle, x: np.ndarray, y: int, cfg: EstimatorConfig, sampler: Optional[Sampler],
                 rng: SeededRng, baseline_loss: Optional[float] = None) -> GradientEstimate:
    """
    Plain random gradient-free estimate

    Args:
        sampler: Probe distribution; defaults to the configured search space
        baseline_loss: Loss at x if already known (saves one query)

    Returns:
        GradientEstimate with queries_used = q (+1 if the baseline was queried)
    """
    start = oracle.ledger.total
    sampler = sampler or cfg.probe_sampler()
    base = baseline(oracle, x, y, baseline_loss, Phase.ESTIMATION)
    direction = average_probes(oracle, x, y, sampler, cfg.q, cfg.sigma, rng, base)
    return GradientEstimate(direction=direction, queries_used=oracle.ledger.total - start)

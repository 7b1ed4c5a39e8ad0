"""
Scalar estimation

Query-based estimates of the gradient norm, of the cosine alpha between the
prior and the true gradient, and of the energy A of the normalized gradient
inside a subspace. The norm is cached and refreshed every `period` iterations.
"""

import logging
import sys
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .exceptions import DomainError, NumericError
from .geometry import SeededRng, SubspaceBasis, UniformSampler, as_unit
from .oracles.base import Oracle, Phase

logger = logging.getLogger('prgf.scalars')


@dataclass
class NormCache:
    """Cached estimate of ||grad f|| with its age in iterations"""

    value: Optional[float] = None
    age: int = 0
    period: int = 10
    probes: int = 10
    sigma: float = 1e-4

    def __post_init__(self):
        if self.period < 1 or self.probes < 1:
            raise DomainError(f"Norm refresh period and probe count must be >= 1, got {self.period}, {self.probes}")
        if self.sigma <= 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")

    @classmethod
    def fixed(cls, value: float, sigma: float = 1e-4, probes: int = 10) -> 'NormCache':
        """A cache holding a known norm that never asks to be refreshed"""
        return cls(value=float(value), period=sys.maxsize, probes=probes, sigma=sigma)

    @property
    def needs_refresh(self) -> bool:
        return self.value is None or self.age >= self.period

    def refresh(self, value: float):
        self.value = float(value)
        self.age = 0

    def tick(self):
        self.age += 1


def _check_sigma(sigma: float):
    if not sigma > 0:
        raise DomainError(f"sigma must be positive, got {sigma}")


def _finite(value: float, what: str) -> float:
    if not np.isfinite(value):
        raise NumericError(f"Non-finite {what}")
    return float(value)


def baseline(oracle: Oracle, x: np.ndarray, y: int, baseline_loss: Optional[float],
             phase: Phase = Phase.ATTACK_STEP) -> float:
    """Return the cached loss at x, querying it if absent"""
    if baseline_loss is not None:
        return float(baseline_loss)
    return oracle.query_loss(x, y, phase).loss


def directional_derivative(oracle: Oracle, x: np.ndarray, y: int, v, sigma: float,
                           baseline_loss: Optional[float] = None,
                           phase: Phase = Phase.ESTIMATION) -> float:
    """
    Forward difference (f(x + sigma v) - f(x)) / sigma

    Charges 2 queries, or 1 when the loss at x is supplied.
    """
    _check_sigma(sigma)
    direction = getattr(v, 'data', v)
    base = baseline(oracle, x, y, baseline_loss, phase)
    shifted = oracle.query_loss(x + sigma * direction, y, phase).loss
    return _finite((shifted - base) / sigma, 'directional derivative')


def directional_derivatives(oracle: Oracle, x: np.ndarray, y: int, directions: np.ndarray,
                            sigma: float, baseline_loss: float,
                            phase: Phase = Phase.ESTIMATION) -> np.ndarray:
    """Forward differences along the rows of `directions` in one batch"""
    _check_sigma(sigma)
    losses = oracle.losses(x + sigma * directions, y, phase)
    derivatives = (losses - baseline_loss) / sigma
    if not np.all(np.isfinite(derivatives)):
        raise NumericError("Non-finite directional derivative")
    return derivatives


def estimate_gradient_norm(oracle: Oracle, x: np.ndarray, y: int, S: int, sigma: float,
                           rng: SeededRng, baseline_loss: Optional[float] = None) -> float:
    """
    Estimate ||grad f(x)|| as sqrt(D/S * sum of squared derivatives) over S
    uniform directions (S + 1 queries, S when the loss at x is supplied).
    """
    if S < 1:
        raise DomainError(f"Need at least one probe, got S={S}")
    _check_sigma(sigma)
    base = baseline(oracle, x, y, baseline_loss, Phase.NORM)
    directions = UniformSampler(oracle.dim).draw_batch(S, rng)
    derivatives = directional_derivatives(oracle, x, y, directions, sigma, base, Phase.NORM)
    estimate = float(np.sqrt(oracle.dim / S * np.sum(derivatives ** 2)))
    logger.debug(f"Gradient norm estimate {estimate:.6g} from {S} probes")
    return estimate


def estimate_alpha(oracle: Oracle, x: np.ndarray, y: int, v, norm: NormCache, sigma: float,
                   baseline_loss: Optional[float] = None) -> float:
    """
    Estimate cos(v, grad f(x)) as the derivative along v over the cached norm,
    clamped to [-1, 1]. Returns 0 without querying when the norm is 0.
    """
    v = as_unit(v)
    if norm.value is None:
        raise DomainError("The norm cache has not been filled")
    if norm.value == 0.0:
        return 0.0
    derivative = directional_derivative(oracle, x, y, v, sigma, baseline_loss, Phase.ALPHA)
    return float(np.clip(derivative / norm.value, -1.0, 1.0))


def estimate_A(oracle: Oracle, x: np.ndarray, y: int, basis: SubspaceBasis, S: int, sigma: float,
               norm: NormCache, rng: SeededRng, baseline_loss: Optional[float] = None) -> float:
    """
    Estimate A = ||V^T grad f|| / ||grad f|| from S probes w = V xi, clamped to
    [0, 1]. Returns 0 without querying when the norm is 0.
    """
    if S < 1:
        raise DomainError(f"Need at least one probe, got S={S}")
    if norm.value is None:
        raise DomainError("The norm cache has not been filled")
    if norm.value == 0.0:
        return 0.0
    base = baseline(oracle, x, y, baseline_loss, Phase.NORM)
    coefficients = rng.normal((S, basis.d))
    directions = basis.lift(coefficients / np.linalg.norm(coefficients, axis=1, keepdims=True))
    derivatives = directional_derivatives(oracle, x, y, directions, sigma, base, Phase.NORM)
    in_subspace = float(np.sqrt(basis.d / S * np.sum(derivatives ** 2)))
    return float(np.clip(in_subspace / norm.value, 0.0, 1.0))


@dataclass
class ScalarState:
    """
    Per-attack scalar estimates shared across iterations

    The subspace energy A is re-estimated whenever the norm is refreshed.
    """

    norm: NormCache
    baseline_loss: Optional[float] = None
    subspace_energy: Optional[float] = None

    def ensure_baseline(self, oracle: Oracle, x: np.ndarray, y: int) -> float:
        if self.baseline_loss is None:
            self.baseline_loss = oracle.query_loss(x, y, Phase.ATTACK_STEP).loss
        return self.baseline_loss

    def ensure_norm(self, oracle: Oracle, x: np.ndarray, y: int, rng: SeededRng,
                    basis: Optional[SubspaceBasis] = None) -> float:
        base = self.ensure_baseline(oracle, x, y)
        refreshed = False
        if self.norm.needs_refresh:
            self.norm.refresh(estimate_gradient_norm(oracle, x, y, self.norm.probes, self.norm.sigma, rng, base))
            refreshed = True
        if basis is not None and (refreshed or self.subspace_energy is None):
            self.subspace_energy = estimate_A(
                oracle, x, y, basis, self.norm.probes, self.norm.sigma, self.norm, rng, base
            )
        return self.norm.value

    def refresh_cost(self, with_subspace: bool) -> int:
        """Queries the next ensure_norm call may spend (loss at x excluded)"""
        cost = self.norm.probes if self.norm.needs_refresh else 0
        if with_subspace and (self.norm.needs_refresh or self.subspace_energy is None):
            cost += self.norm.probes
        return cost


def norm_rmse(oracle: Oracle, points: np.ndarray, labels: np.ndarray, true_norms: np.ndarray,
              S: int, sigma: float, rng: SeededRng, repeats: int = 1) -> float:
    """
    Root-mean-square relative error of the norm estimator over a set of points,
    repeating the estimate `repeats` times per point.
    """
    if repeats < 1:
        raise DomainError(f"repeats must be >= 1, got {repeats}")
    errors = []
    for x, y, true_norm in zip(points, labels, true_norms):
        if true_norm <= 0:
            continue
        for _ in range(repeats):
            estimate = estimate_gradient_norm(oracle, x, int(y), S, sigma, rng)
            errors.append((estimate - true_norm) / true_norm)
    if not errors:
        raise DomainError("No point with a positive gradient norm")
    return float(np.sqrt(np.mean(np.square(errors))))

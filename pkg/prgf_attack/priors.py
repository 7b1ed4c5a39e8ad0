"""
Transfer-based priors

Builds the prior direction v from the gradients of one or more white-box
surrogate models: a single surrogate, the plain average of several, or the
projection of the target gradient onto the span of several (whose
coordinates cost one query each).
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Optional, Sequence

import numpy as np

from .exceptions import DegeneratePriorError, DomainError, EmptySpanError
from .geometry import UnitVector, gram_schmidt
from .oracles.base import Oracle, OracleBackend, Phase, surrogate_gradient
from .scalar_estimation import baseline, directional_derivatives

logger = logging.getLogger('prgf.priors')

CANCELLATION_TOLERANCE = 1e-12


class PriorSourceKind(str, Enum):
    SINGLE = 'single'
    EQUAL_AVERAGE = 'equal_average'
    SUBSPACE_PROJECTION = 'subspace_projection'

    @classmethod
    def parse(cls, name: str) -> 'PriorSourceKind':
        aliases = {'avg': cls.EQUAL_AVERAGE, 'average': cls.EQUAL_AVERAGE, 'proj': cls.SUBSPACE_PROJECTION}
        return aliases.get(name, None) or cls(name)


@dataclass(frozen=True)
class TransferPrior:
    """
    Prior direction with its provenance

    For subspace projection, surrogate_count is the number of independent
    surrogate gradients and projection_queries equals it.
    """

    direction: UnitVector
    source: PriorSourceKind
    surrogate_count: int
    projection_queries: int = 0


def _normalized(vec: np.ndarray, what: str) -> UnitVector:
    norm = float(np.linalg.norm(vec))
    if norm == 0.0 or not np.isfinite(norm):
        raise DegeneratePriorError(f"{what} is zero or not finite")
    return UnitVector(vec / norm)


def single_surrogate_prior(surrogate: OracleBackend, x: np.ndarray, y: int) -> TransferPrior:
    """Normalized gradient of one surrogate (no ledger charge)"""
    grad = surrogate_gradient(surrogate, x, y)
    return TransferPrior(_normalized(grad, "Surrogate gradient"), PriorSourceKind.SINGLE, 1)


def equal_average_prior(surrogates: Sequence[OracleBackend], x: np.ndarray, y: int) -> TransferPrior:
    """Normalized mean of the raw surrogate gradients (no ledger charge)"""
    if len(surrogates) == 0:
        raise DomainError("At least one surrogate is required")
    grads = [surrogate_gradient(s, x, y) for s in surrogates]
    total = np.sum(grads, axis=0)
    scale = sum(float(np.linalg.norm(g)) for g in grads)
    if float(np.linalg.norm(total)) <= CANCELLATION_TOLERANCE * scale:
        raise DegeneratePriorError("Surrogate gradients cancel out")
    return TransferPrior(_normalized(total / len(grads), "Averaged gradient"),
                         PriorSourceKind.EQUAL_AVERAGE, len(grads))


def subspace_projection_prior(surrogates: Sequence[OracleBackend], oracle: Oracle, x: np.ndarray, y: int,
                              sigma: float, baseline_loss: Optional[float] = None) -> TransferPrior:
    """
    Project the target gradient onto the span of the surrogate gradients

    The span is orthonormalized in surrogate order; its coordinates are
    measured by forward differences (one query per basis vector, sharing the
    loss at x). If all coordinates vanish the equal average is used instead.

    Raises:
        DegeneratePriorError: if the surrogate gradients span nothing
    """
    if len(surrogates) == 0:
        raise DomainError("At least one surrogate is required")
    grads = [surrogate_gradient(s, x, y) for s in surrogates]
    try:
        basis = gram_schmidt(grads)
    except EmptySpanError as e:
        raise DegeneratePriorError("Surrogate gradients span no direction") from e
    if basis.d < len(grads):
        logger.debug(f"Dropped {len(grads) - basis.d} dependent surrogate gradients")

    base = baseline(oracle, x, y, baseline_loss, Phase.ESTIMATION)
    coefficients = directional_derivatives(oracle, x, y, basis.matrix, sigma, base, Phase.ESTIMATION)
    combined = coefficients @ basis.matrix
    if float(np.linalg.norm(coefficients)) == 0.0:
        logger.warning("All projection coefficients vanished, using the averaged prior")
        return equal_average_prior(surrogates, x, y)
    return TransferPrior(_normalized(combined, "Projected gradient"),
                         PriorSourceKind.SUBSPACE_PROJECTION, basis.d, basis.d)


class SurrogatePrior:
    """Prior source used by the attack loop"""

    def __init__(self, surrogates: Sequence[OracleBackend], kind: PriorSourceKind = PriorSourceKind.SINGLE):
        if len(surrogates) == 0:
            raise DomainError("At least one surrogate is required")
        self.surrogates = list(surrogates)
        self.kind = PriorSourceKind(kind)

    @property
    def query_cost(self) -> int:
        """Upper bound on the queries one build() may charge"""
        if self.kind is PriorSourceKind.SUBSPACE_PROJECTION:
            return len(self.surrogates)
        return 0

    def build(self, oracle: Oracle, x: np.ndarray, y: int, sigma: float,
              baseline_loss: Optional[float] = None) -> TransferPrior:
        if self.kind is PriorSourceKind.SINGLE:
            return single_surrogate_prior(self.surrogates[0], x, y)
        if self.kind is PriorSourceKind.EQUAL_AVERAGE:
            return equal_average_prior(self.surrogates, x, y)
        return subspace_projection_prior(self.surrogates, oracle, x, y, sigma, baseline_loss)

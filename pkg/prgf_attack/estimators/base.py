"""
Estimator configuration and result types
"""

from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from ..exceptions import DomainError, InvalidBasisError
from ..geometry import Sampler, SubspaceBasis, SubspaceSampler, UniformSampler

GA_THRESHOLD = float(np.sqrt(2.0) / (np.sqrt(2.0) + 1.0))


class Variant(str, Enum):
    RGF = 'rgf'
    PRGF_BS = 'prgf_bs'
    PRGF_GA = 'prgf_ga'

    @classmethod
    def parse(cls, name: str) -> 'Variant':
        return cls(name.lower().replace('-', '_'))


class GaImpl(str, Enum):
    CLOSED_FORM = 'closed_form'
    PROJECTION = 'projection'

    @classmethod
    def parse(cls, name: str) -> 'GaImpl':
        return cls(name.lower().replace('-', '_'))


@dataclass(frozen=True)
class EstimatorConfig:
    """
    Gradient estimator settings

    fixed_lambda / fixed_mu replace the optimal coefficient with a constant;
    no alpha or norm queries are spent when one of them is set.
    """

    q: int
    sigma: float
    D: int
    variant: Variant = Variant.PRGF_GA
    dd_basis: Optional[SubspaceBasis] = None
    c: float = GA_THRESHOLD
    ga_impl: GaImpl = GaImpl.PROJECTION
    fixed_lambda: Optional[float] = None
    fixed_mu: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, 'variant', Variant(self.variant))
        object.__setattr__(self, 'ga_impl', GaImpl(self.ga_impl))
        if self.q < 1:
            raise DomainError(f"q must be >= 1, got {self.q}")
        if not self.sigma > 0:
            raise DomainError(f"sigma must be positive, got {self.sigma}")
        if self.D < 2:
            raise DomainError(f"D must be >= 2, got {self.D}")
        if not 0.0 < self.c < 1.0:
            raise DomainError(f"c must lie in (0, 1), got {self.c}")
        if self.dd_basis is not None and (self.dd_basis.dim != self.D or self.dd_basis.d >= self.D):
            raise InvalidBasisError(
                f"Subspace of dim {self.dd_basis.d} in R^{self.dd_basis.dim} does not fit D={self.D}"
            )
        for name in ('fixed_lambda', 'fixed_mu'):
            value = getattr(self, name)
            if value is not None and not 0.0 <= value <= 1.0:
                raise DomainError(f"{name} must lie in [0, 1], got {value}")

    @property
    def uses_fixed_coefficient(self) -> bool:
        if self.variant is Variant.PRGF_BS:
            return self.fixed_lambda is not None
        if self.variant is Variant.PRGF_GA:
            return self.fixed_mu is not None
        return False

    def probe_sampler(self) -> Sampler:
        """Uniform sampler of the search space (full space or the subspace)"""
        if self.dd_basis is not None:
            return SubspaceSampler(self.dd_basis)
        return UniformSampler(self.D)


@dataclass
class GradientEstimate:
    direction: np.ndarray
    queries_used: int
    coefficient: float = 0.0
    prior_returned: bool = False
    alpha: Optional[float] = None
    subspace_energy: Optional[float] = None

"""
Geometry primitives

Unit vectors, orthonormal subspace bases, seeded random streams and the probe
samplers used by the gradient estimators. Every sampler exposes the second
moment E[u u^T] applied to a vector so that closed-form estimator losses can be
evaluated for any sampling distribution.
"""

import logging
from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from .exceptions import (
    DegenerateDirectionError,
    DomainError,
    EmptySpanError,
    InvalidBasisError,
    InvalidDimensionError,
)

logger = logging.getLogger('prgf.geometry')

UNIT_TOLERANCE = 1e-9
ORTHONORMAL_TOLERANCE = 1e-8
GRAM_SCHMIDT_DROP = 1e-10
RESAMPLE_FLOOR = 1e-12
MAX_RESAMPLES = 16


class SeededRng:
    """
    Reproducible random stream keyed by (seed, stream)

    Two instances built from the same pair yield identical draw sequences;
    distinct streams of one seed are statistically independent.
    """

    def __init__(self, seed: int, stream: int = 0):
        if seed < 0 or stream < 0:
            raise DomainError(f"Seed and stream must be non-negative, got ({seed}, {stream})")
        self.seed = int(seed)
        self.stream = int(stream)
        sequence = np.random.SeedSequence(entropy=self.seed, spawn_key=(self.stream,))
        self.generator = np.random.Generator(np.random.PCG64(sequence))

    def spawn(self, stream: int) -> 'SeededRng':
        """Independent stream of the same seed"""
        return SeededRng(self.seed, stream)

    def normal(self, size) -> np.ndarray:
        return self.generator.standard_normal(size)

    def uniform(self, low: float, high: float, size=None):
        return self.generator.uniform(low, high, size)

    def integers(self, low: int, high: int, size=None):
        return self.generator.integers(low, high, size)

    def __repr__(self) -> str:
        return f"SeededRng(seed={self.seed}, stream={self.stream})"


@dataclass(frozen=True)
class UnitVector:
    """Vector of Euclidean norm 1 (within 1e-9) in a space of dimension >= 2"""

    data: np.ndarray

    def __post_init__(self):
        arr = np.asarray(self.data, dtype=np.float64)
        if arr.ndim != 1 or arr.shape[0] < 2:
            raise InvalidDimensionError(f"Unit vectors need dimension >= 2, got shape {arr.shape}")
        norm = float(np.linalg.norm(arr))
        if not np.isfinite(norm) or abs(norm - 1.0) > UNIT_TOLERANCE:
            raise DomainError(f"Vector norm {norm} is not 1")
        object.__setattr__(self, 'data', arr)

    @classmethod
    def from_vector(cls, vec) -> 'UnitVector':
        """
        Normalize an arbitrary vector

        Raises:
            DegenerateDirectionError: if the vector is zero or not finite
        """
        arr = np.asarray(vec, dtype=np.float64)
        norm = float(np.linalg.norm(arr))
        if norm == 0.0 or not np.isfinite(norm):
            raise DegenerateDirectionError("Cannot normalize a zero or non-finite vector")
        return cls(arr / norm)

    @property
    def dim(self) -> int:
        return int(self.data.shape[0])

    def __neg__(self) -> 'UnitVector':
        return UnitVector(-self.data)


def as_unit(v) -> UnitVector:
    if isinstance(v, UnitVector):
        return v
    return UnitVector(np.asarray(v, dtype=np.float64))


@dataclass(frozen=True)
class SubspaceBasis:
    """
    Orthonormal basis of a d-dimensional subspace of R^D

    Stored as a (d, D) matrix whose rows are the basis vectors.
    """

    matrix: np.ndarray = field(repr=False)

    def __post_init__(self):
        mat = np.asarray(self.matrix, dtype=np.float64)
        if mat.ndim != 2 or mat.shape[0] == 0:
            raise InvalidBasisError("A basis needs at least one vector")
        d, dim = mat.shape
        if dim < 2 or d > dim:
            raise InvalidBasisError(f"Cannot hold {d} orthonormal vectors in dimension {dim}")
        gram = mat @ mat.T
        if not np.all(np.isfinite(gram)) or np.max(np.abs(gram - np.eye(d))) > ORTHONORMAL_TOLERANCE:
            raise InvalidBasisError("Basis vectors are not orthonormal")
        object.__setattr__(self, 'matrix', mat)

    @classmethod
    def from_vectors(cls, vectors: Sequence) -> 'SubspaceBasis':
        if len(vectors) == 0:
            raise InvalidBasisError("A basis needs at least one vector")
        return cls(np.vstack([np.asarray(getattr(v, 'data', v), dtype=np.float64) for v in vectors]))

    @property
    def d(self) -> int:
        return int(self.matrix.shape[0])

    @property
    def dim(self) -> int:
        return int(self.matrix.shape[1])

    def __len__(self) -> int:
        return self.d

    @property
    def vectors(self) -> List[UnitVector]:
        return [UnitVector(row) for row in self.matrix]

    def project(self, x: np.ndarray) -> np.ndarray:
        """Orthogonal projection of x onto the subspace"""
        return self.matrix.T @ (self.matrix @ x)

    def lift(self, coefficients: np.ndarray) -> np.ndarray:
        """Map coefficients (..., d) to points (..., D) of the subspace"""
        return coefficients @ self.matrix


def _check_lambda(lam: float) -> float:
    lam = float(lam)
    if not 0.0 <= lam <= 1.0:
        raise DomainError(f"lambda must lie in [0, 1], got {lam}")
    return lam


def _normalize_rows(rows: np.ndarray) -> np.ndarray:
    return rows / np.linalg.norm(rows, axis=-1, keepdims=True)


def _orthogonal_batch(v: np.ndarray, draw, n: int) -> np.ndarray:
    """Rows of draw(k) projected off v and normalized, redrawing degenerate rows"""
    rows = draw(n)
    rows = rows - np.outer(rows @ v, v)
    norms = np.linalg.norm(rows, axis=1)
    for _ in range(MAX_RESAMPLES):
        bad = norms < RESAMPLE_FLOOR
        if not np.any(bad):
            break
        fresh = draw(int(np.sum(bad)))
        rows[bad] = fresh - np.outer(fresh @ v, v)
        norms[bad] = np.linalg.norm(rows[bad], axis=1)
    if np.any(norms < RESAMPLE_FLOOR):
        raise DegenerateDirectionError("Could not draw probes orthogonal to the prior")
    return rows / norms[:, None]


def sample_unit_sphere(dim: int, rng: SeededRng) -> UnitVector:
    """Draw u uniformly from the unit sphere of R^dim"""
    if dim < 2:
        raise InvalidDimensionError(f"Sphere sampling needs dim >= 2, got {dim}")
    for _ in range(MAX_RESAMPLES + 1):
        xi = rng.normal(dim)
        norm = np.linalg.norm(xi)
        if norm >= RESAMPLE_FLOOR:
            return UnitVector(xi / norm)
    raise DegenerateDirectionError("Gaussian draws kept collapsing to zero")


def _orthogonal_residual(v: np.ndarray, raw: np.ndarray) -> np.ndarray:
    return raw - v * float(v @ raw)


def sample_biased(v, lam: float, rng: SeededRng) -> UnitVector:
    """
    Draw u = sqrt(lam) v + sqrt(1 - lam) w with w uniform on the sphere of v's
    orthogonal complement, so that (u . v)^2 = lam.
    """
    v = as_unit(v)
    lam = _check_lambda(lam)
    for _ in range(MAX_RESAMPLES + 1):
        residual = _orthogonal_residual(v.data, rng.normal(v.dim))
        norm = np.linalg.norm(residual)
        if norm >= RESAMPLE_FLOOR:
            u = np.sqrt(lam) * v.data + np.sqrt(1.0 - lam) * (residual / norm)
            return UnitVector(u / np.linalg.norm(u))
    raise DegenerateDirectionError("Could not draw a direction orthogonal to the prior")


def sample_subspace(basis: SubspaceBasis, rng: SeededRng) -> UnitVector:
    """Draw u = V xi with xi uniform on the sphere of R^d"""
    for _ in range(MAX_RESAMPLES + 1):
        xi = rng.normal(basis.d)
        norm = np.linalg.norm(xi)
        if norm >= RESAMPLE_FLOOR:
            u = basis.lift(xi / norm)
            return UnitVector(u / np.linalg.norm(u))
    raise DegenerateDirectionError("Gaussian draws kept collapsing to zero")


def sample_biased_subspace(v, basis: SubspaceBasis, lam: float, rng: SeededRng) -> UnitVector:
    """
    Draw sqrt(lam) v + sqrt(1 - lam) normalize((I - v v^T) V xi)

    Degenerate projections (norm below 1e-12) are resampled up to 16 times.
    """
    v = as_unit(v)
    lam = _check_lambda(lam)
    if v.dim != basis.dim:
        raise InvalidDimensionError(f"Prior has dim {v.dim}, basis has dim {basis.dim}")
    for attempt in range(MAX_RESAMPLES + 1):
        residual = _orthogonal_residual(v.data, basis.lift(rng.normal(basis.d)))
        norm = np.linalg.norm(residual)
        if norm >= RESAMPLE_FLOOR:
            u = np.sqrt(lam) * v.data + np.sqrt(1.0 - lam) * (residual / norm)
            return UnitVector(u / np.linalg.norm(u))
        logger.debug(f"Resampling degenerate subspace probe (attempt {attempt + 1})")
    raise DegenerateDirectionError("Subspace is (numerically) spanned by the prior")


def gram_schmidt(raw: Sequence) -> SubspaceBasis:
    """
    Orthonormalize vectors in order

    A vector is dropped when its residual after removing the previous
    directions falls below 1e-10 times its own norm.

    Raises:
        EmptySpanError: if no vector survives
    """
    kept: List[np.ndarray] = []
    dim = None
    for index, vec in enumerate(raw):
        arr = np.asarray(getattr(vec, 'data', vec), dtype=np.float64)
        if dim is None:
            dim = arr.shape[0]
        elif arr.shape != (dim,):
            raise InvalidDimensionError(f"Vector {index} has shape {arr.shape}, expected ({dim},)")
        norm = float(np.linalg.norm(arr))
        if norm == 0.0 or not np.isfinite(norm):
            logger.debug(f"Dropping zero vector {index}")
            continue
        residual = arr.copy()
        # two passes keep the result orthonormal to ~1e-15
        for _ in range(2):
            for basis_vec in kept:
                residual -= basis_vec * float(basis_vec @ residual)
        remaining = float(np.linalg.norm(residual))
        if remaining < GRAM_SCHMIDT_DROP * norm:
            logger.debug(f"Dropping dependent vector {index}")
            continue
        kept.append(residual / remaining)
    if not kept:
        raise EmptySpanError("All input vectors are (near) zero or dependent")
    return SubspaceBasis(np.vstack(kept))


def nn_upsample_basis(d: int, dim: int) -> SubspaceBasis:
    """
    Basis of piecewise-constant vectors over d contiguous blocks of [0, dim)

    The first dim mod d blocks hold ceil(dim / d) coordinates, the others
    floor(dim / d). Block b is the normalized indicator of its coordinates.
    """
    if dim < 2 or not 1 <= d <= dim:
        raise InvalidDimensionError(f"Need 1 <= d <= D and D >= 2, got d={d}, D={dim}")
    matrix = np.zeros((d, dim))
    for row, block in enumerate(np.array_split(np.arange(dim), d)):
        matrix[row, block] = 1.0 / np.sqrt(len(block))
    return SubspaceBasis(matrix)


# Samplers

class Sampler:
    """Probe distribution on the unit sphere"""

    dim: int

    def draw(self, rng: SeededRng) -> UnitVector:
        raise NotImplementedError

    def draw_batch(self, n: int, rng: SeededRng) -> np.ndarray:
        """Draw n probes at once as an (n, D) array"""
        raise NotImplementedError

    def apply_second_moment(self, g: np.ndarray) -> np.ndarray:
        """Return E[u u^T] g"""
        raise NotImplementedError


class UniformSampler(Sampler):
    """Uniform on the sphere of R^D"""

    def __init__(self, dim: int):
        if dim < 2:
            raise InvalidDimensionError(f"Sphere sampling needs dim >= 2, got {dim}")
        self.dim = dim

    def draw(self, rng: SeededRng) -> UnitVector:
        return sample_unit_sphere(self.dim, rng)

    def draw_batch(self, n: int, rng: SeededRng) -> np.ndarray:
        return _normalize_rows(rng.normal((n, self.dim)))

    def apply_second_moment(self, g: np.ndarray) -> np.ndarray:
        return np.asarray(g, dtype=np.float64) / self.dim


class BiasedSampler(Sampler):
    """Probes with (u . v)^2 = lam, uniform around v"""

    def __init__(self, v, lam: float):
        self.prior = as_unit(v)
        self.lam = _check_lambda(lam)
        self.dim = self.prior.dim

    def draw(self, rng: SeededRng) -> UnitVector:
        return sample_biased(self.prior, self.lam, rng)

    def draw_batch(self, n: int, rng: SeededRng) -> np.ndarray:
        v = self.prior.data
        residual = _orthogonal_batch(v, lambda k: rng.normal((k, self.dim)), n)
        return np.sqrt(self.lam) * v + np.sqrt(1.0 - self.lam) * residual

    def apply_second_moment(self, g: np.ndarray) -> np.ndarray:
        v = self.prior.data
        along = float(v @ g)
        return self.lam * along * v + (1.0 - self.lam) / (self.dim - 1) * (g - along * v)


class SubspaceSampler(Sampler):
    """Uniform on the unit sphere of a subspace"""

    def __init__(self, basis: SubspaceBasis):
        self.basis = basis
        self.dim = basis.dim

    def draw(self, rng: SeededRng) -> UnitVector:
        return sample_subspace(self.basis, rng)

    def draw_batch(self, n: int, rng: SeededRng) -> np.ndarray:
        return self.basis.lift(_normalize_rows(rng.normal((n, self.basis.d))))

    def apply_second_moment(self, g: np.ndarray) -> np.ndarray:
        return self.basis.project(g) / self.basis.d


class BiasedSubspaceSampler(Sampler):
    """
    Biased sampling restricted to span(v) + subspace

    The second moment lam v v^T + (1 - lam)/d V V^T is exact when v is
    orthogonal to the subspace.
    """

    def __init__(self, v, basis: SubspaceBasis, lam: float):
        self.prior = as_unit(v)
        self.basis = basis
        self.lam = _check_lambda(lam)
        if self.prior.dim != basis.dim:
            raise InvalidDimensionError(f"Prior has dim {self.prior.dim}, basis has dim {basis.dim}")
        self.dim = basis.dim

    def draw(self, rng: SeededRng) -> UnitVector:
        return sample_biased_subspace(self.prior, self.basis, self.lam, rng)

    def draw_batch(self, n: int, rng: SeededRng) -> np.ndarray:
        v = self.prior.data
        residual = _orthogonal_batch(v, lambda k: self.basis.lift(rng.normal((k, self.basis.d))), n)
        return np.sqrt(self.lam) * v + np.sqrt(1.0 - self.lam) * residual

    def apply_second_moment(self, g: np.ndarray) -> np.ndarray:
        v = self.prior.data
        return self.lam * float(v @ g) * v + (1.0 - self.lam) / self.basis.d * self.basis.project(g)

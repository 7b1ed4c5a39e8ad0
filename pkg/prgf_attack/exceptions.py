"""
Exception hierarchy

Every error raised on purpose by prgf_attack derives from PrgfError.
Errors describing a bad argument also derive from ValueError so that callers
can catch them generically.
"""

from typing import Optional


class PrgfError(Exception):
    """Base class for all prgf_attack errors"""
    pass


# Geometry

class InvalidDimensionError(PrgfError, ValueError):
    """Raised when a dimension is outside its admissible range"""
    pass


class DomainError(PrgfError, ValueError):
    """Raised when a scalar argument lies outside its domain"""
    pass


class InvalidBasisError(PrgfError, ValueError):
    """Raised when a subspace basis is empty or not orthonormal"""
    pass


class EmptySpanError(PrgfError, ValueError):
    """Raised when Gram-Schmidt receives only (near-)zero vectors"""
    pass


class DegenerateDirectionError(PrgfError, ArithmeticError):
    """Raised when a direction cannot be normalized"""
    pass


# Oracles

class ShapeError(PrgfError, ValueError):
    """Raised on a dimension mismatch between a point and an oracle"""
    pass


class NumericError(PrgfError, ArithmeticError):
    """Raised when an oracle input or output is not finite"""
    pass


class TransportError(PrgfError):
    """Raised when a remote oracle cannot be reached or times out"""
    pass


class ProtocolError(PrgfError):
    """Raised when a remote oracle sends a reply that violates the wire protocol"""
    pass


class BudgetExceededError(PrgfError):
    """Raised when the query budget is exhausted"""

    def __init__(self, server_count: int, message: Optional[str] = None):
        self.server_count = server_count
        super().__init__(message or f"Query budget exhausted after {server_count} queries")


class ModelFormatError(PrgfError, ValueError):
    """Raised when a model file cannot be parsed"""

    def __init__(self, message: str, offset: int):
        self.offset = offset
        super().__init__(f"{message} (at byte offset {offset})")


class UnsupportedVersionError(ModelFormatError):
    """Raised when a model file declares a format version we cannot read"""
    pass


# Priors

class DegeneratePriorError(PrgfError):
    """Raised when surrogate gradients give no usable prior direction"""
    pass


# Configuration

class ConfigError(PrgfError, ValueError):
    """Raised when an experiment configuration is invalid"""
    pass

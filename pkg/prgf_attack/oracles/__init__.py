"""Black-box oracles, surrogate models and their wire protocol"""

from .base import (
    DifferentiableBackend,
    LinearOracle,
    ModelOracle,
    Oracle,
    OracleBackend,
    OracleFactory,
    OracleResponse,
    Phase,
    QuadraticOracle,
    QueryLedger,
    TapOracle,
    surrogate_gradient,
)
from .model_io import decode_model, encode_model, load_model, save_model
from .models import Activation, DenseLayer, LossKind, MlpModel, perturb_model

__all__ = [
    'Activation', 'DenseLayer', 'DifferentiableBackend', 'LinearOracle', 'LossKind', 'MlpModel',
    'ModelOracle', 'Oracle', 'OracleBackend', 'OracleFactory', 'OracleResponse', 'Phase',
    'QuadraticOracle', 'QueryLedger', 'TapOracle', 'decode_model', 'encode_model', 'load_model',
    'perturb_model', 'save_model', 'surrogate_gradient',
]

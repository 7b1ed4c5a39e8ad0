"""Shared fixtures"""

import numpy as np
import pytest

from prgf_attack.geometry import SeededRng
from prgf_attack.oracles import (
    Activation,
    DenseLayer,
    LinearOracle,
    LossKind,
    MlpModel,
    ModelOracle,
    Oracle,
    QuadraticOracle,
)


def unit(vec):
    vec = np.asarray(vec, dtype=np.float64)
    return vec / np.linalg.norm(vec)


@pytest.fixture
def rng():
    return SeededRng(1234)


@pytest.fixture
def linear_backend():
    direction = SeededRng(7).normal(20)
    return LinearOracle(direction, offset=0.5)


@pytest.fixture
def linear_oracle(linear_backend):
    return Oracle(linear_backend)


@pytest.fixture
def quadratic_backend():
    return QuadraticOracle(np.zeros(10), threshold=1.0)


@pytest.fixture
def softmax_model():
    source = SeededRng(11)
    return MlpModel.linear(source.normal((4, 12)), source.normal(4))


@pytest.fixture
def mlp_model():
    source = SeededRng(12)
    return MlpModel([
        DenseLayer(source.normal((16, 12)) / np.sqrt(12), source.normal(16) * 0.1, Activation.TANH),
        DenseLayer(source.normal((3, 16)) / 4.0, source.normal(3) * 0.1, Activation.IDENTITY),
    ])


@pytest.fixture
def softmax_backend(softmax_model):
    return ModelOracle(softmax_model, LossKind.CROSS_ENTROPY)

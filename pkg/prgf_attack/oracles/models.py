"""
Differentiable classifier models

A feed-forward network with dense layers is enough to host both the softmax
linear targets and small MLP surrogates. Forward passes accept a single point
or a batch; gradients with respect to the input are obtained by manual
backpropagation.
"""

import logging
from dataclasses import dataclass
from enum import Enum
from typing import List, Tuple

import numpy as np

from ..exceptions import DomainError, NumericError, ShapeError

logger = logging.getLogger('prgf.oracle.models')


class Activation(str, Enum):
    IDENTITY = 'identity'
    RELU = 'relu'
    TANH = 'tanh'


class LossKind(str, Enum):
    """Loss reported by an oracle"""
    CROSS_ENTROPY = 'cross_entropy'
    CW_MARGIN = 'cw_margin'


@dataclass(frozen=True)
class DenseLayer:
    """weights has shape (out_dim, in_dim); output = act(weights @ x + biases)"""

    weights: np.ndarray
    biases: np.ndarray
    activation: Activation = Activation.IDENTITY

    def __post_init__(self):
        weights = np.asarray(self.weights, dtype=np.float64)
        biases = np.asarray(self.biases, dtype=np.float64)
        if weights.ndim != 2 or biases.shape != (weights.shape[0],):
            raise ShapeError(f"Layer shapes do not match: weights {weights.shape}, biases {biases.shape}")
        if not (np.all(np.isfinite(weights)) and np.all(np.isfinite(biases))):
            raise NumericError("Layer parameters must be finite")
        object.__setattr__(self, 'weights', weights)
        object.__setattr__(self, 'biases', biases)
        object.__setattr__(self, 'activation', Activation(self.activation))

    @property
    def in_dim(self) -> int:
        return int(self.weights.shape[1])

    @property
    def out_dim(self) -> int:
        return int(self.weights.shape[0])


def _activate(z: np.ndarray, activation: Activation) -> np.ndarray:
    if activation is Activation.RELU:
        return np.maximum(z, 0.0)
    if activation is Activation.TANH:
        return np.tanh(z)
    return z


def _activation_slope(z: np.ndarray, activation: Activation) -> np.ndarray:
    if activation is Activation.RELU:
        # zero slope at the kink
        return (z > 0.0).astype(np.float64)
    if activation is Activation.TANH:
        return 1.0 - np.tanh(z) ** 2
    return np.ones_like(z)


class MlpModel:
    """Feed-forward classifier producing logits"""

    def __init__(self, layers: List[DenseLayer]):
        if not layers:
            raise ShapeError("A model needs at least one layer")
        for index, (first, second) in enumerate(zip(layers, layers[1:])):
            if first.out_dim != second.in_dim:
                raise ShapeError(
                    f"Layer {index} outputs {first.out_dim} values but layer {index + 1} expects {second.in_dim}"
                )
        self.layers = list(layers)

    @classmethod
    def linear(cls, weights: np.ndarray, biases: np.ndarray) -> 'MlpModel':
        """Softmax-linear classifier with logits W x + b"""
        return cls([DenseLayer(weights, biases, Activation.IDENTITY)])

    @property
    def input_dim(self) -> int:
        return self.layers[0].in_dim

    @property
    def num_classes(self) -> int:
        return self.layers[-1].out_dim

    def logits(self, points: np.ndarray) -> np.ndarray:
        """Logits for a point (D,) or a batch (n, D)"""
        activations = np.asarray(points, dtype=np.float64)
        if activations.shape[-1] != self.input_dim:
            raise ShapeError(f"Expected inputs of dim {self.input_dim}, got shape {activations.shape}")
        for layer in self.layers:
            activations = _activate(activations @ layer.weights.T + layer.biases, layer.activation)
        return activations

    def input_gradient(self, x: np.ndarray, logit_grad: np.ndarray) -> np.ndarray:
        """Backpropagate d(loss)/d(logits) of a single point to d(loss)/dx"""
        activations = np.asarray(x, dtype=np.float64)
        pre_activations = []
        for layer in self.layers:
            z = layer.weights @ activations + layer.biases
            pre_activations.append(z)
            activations = _activate(z, layer.activation)
        delta = np.asarray(logit_grad, dtype=np.float64)
        for layer, z in zip(reversed(self.layers), reversed(pre_activations)):
            delta = layer.weights.T @ (delta * _activation_slope(z, layer.activation))
        return delta


def predicted_labels(logits: np.ndarray) -> np.ndarray:
    """Argmax with ties going to the smallest index"""
    return np.argmax(logits, axis=-1)


def loss_from_logits(logits: np.ndarray, label: int, kind: LossKind) -> np.ndarray:
    """Loss of a batch of logits (n, K) for one true label"""
    logits = np.atleast_2d(logits)
    if kind is LossKind.CROSS_ENTROPY:
        shift = np.max(logits, axis=1, keepdims=True)
        log_partition = shift[:, 0] + np.log(np.sum(np.exp(logits - shift), axis=1))
        return log_partition - logits[:, label]
    others = logits.copy()
    others[:, label] = -np.inf
    return np.max(others, axis=1) - logits[:, label]


def loss_gradient_from_logits(logits: np.ndarray, label: int, kind: LossKind) -> np.ndarray:
    """d(loss)/d(logits) for a single logit vector"""
    grad = np.zeros_like(logits)
    if kind is LossKind.CROSS_ENTROPY:
        shifted = np.exp(logits - np.max(logits))
        grad = shifted / np.sum(shifted)
    else:
        others = logits.copy()
        others[label] = -np.inf
        grad[int(np.argmax(others))] = 1.0
    grad[label] -= 1.0
    return grad


def perturb_model(model: MlpModel, scale: float, rng) -> MlpModel:
    """
    Copy of a model with Gaussian noise added to every parameter

    The noise of each tensor is scaled by `scale` times the tensor's RMS value.
    """
    if scale < 0:
        raise DomainError(f"Perturbation scale must be non-negative, got {scale}")
    layers = []
    for layer in model.layers:
        w_rms = float(np.sqrt(np.mean(layer.weights ** 2))) or 1.0
        b_rms = float(np.sqrt(np.mean(layer.biases ** 2))) or 1.0
        layers.append(DenseLayer(
            layer.weights + scale * w_rms * rng.normal(layer.weights.shape),
            layer.biases + scale * b_rms * rng.normal(layer.biases.shape),
            layer.activation,
        ))
    logger.debug(f"Perturbed {len(layers)} layers with relative scale {scale}")
    return MlpModel(layers)


def check_label(label: int, num_classes: int) -> int:
    if not 0 <= int(label) < num_classes:
        raise DomainError(f"Label {label} outside [0, {num_classes})")
    return int(label)


def split_loss_and_labels(logits: np.ndarray, label: int, kind: LossKind) -> Tuple[np.ndarray, np.ndarray]:
    logits = np.atleast_2d(logits)
    return loss_from_logits(logits, label, kind), predicted_labels(logits)

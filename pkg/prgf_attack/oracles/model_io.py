"""
Binary model files

Layout (all integers little-endian u32, all reals little-endian f64):

    magic       8 bytes, b"PRGFMLP" followed by the ASCII format version ("1")
    layers      u32
    per layer:  in_dim u32, out_dim u32, activation tag u8
                weights (out_dim x in_dim, row-major), biases (out_dim)

Activation tags: 0 identity, 1 relu, 2 tanh.
"""

import logging
import struct
from pathlib import Path
from typing import Union

import numpy as np

from ..exceptions import ModelFormatError, UnsupportedVersionError
from .models import Activation, DenseLayer, MlpModel

logger = logging.getLogger('prgf.oracle.model_io')

MAGIC_PREFIX = b'PRGFMLP'
FORMAT_VERSION = b'1'

ACTIVATION_TAGS = {
    Activation.IDENTITY: 0,
    Activation.RELU: 1,
    Activation.TANH: 2,
}
TAG_ACTIVATIONS = {tag: activation for activation, tag in ACTIVATION_TAGS.items()}


def encode_model(model: MlpModel) -> bytes:
    chunks = [MAGIC_PREFIX + FORMAT_VERSION, struct.pack('<I', len(model.layers))]
    for layer in model.layers:
        chunks.append(struct.pack('<IIB', layer.in_dim, layer.out_dim, ACTIVATION_TAGS[layer.activation]))
        chunks.append(layer.weights.astype('<f8').tobytes(order='C'))
        chunks.append(layer.biases.astype('<f8').tobytes())
    return b''.join(chunks)


class _Reader:
    """Cursor over a byte buffer that reports offsets on failure"""

    def __init__(self, data: bytes):
        self.data = data
        self.offset = 0

    def take(self, size: int, what: str) -> bytes:
        if self.offset + size > len(self.data):
            raise ModelFormatError(f"Truncated file while reading {what}", self.offset)
        chunk = self.data[self.offset:self.offset + size]
        self.offset += size
        return chunk

    def floats(self, count: int, what: str) -> np.ndarray:
        start = self.offset
        values = np.frombuffer(self.take(8 * count, what), dtype='<f8').astype(np.float64)
        if not np.all(np.isfinite(values)):
            raise ModelFormatError(f"Non-finite value in {what}", start)
        return values


def decode_model(data: bytes) -> MlpModel:
    """
    Parse a model from bytes.

    Raises:
        UnsupportedVersionError: if the magic carries another format version
        ModelFormatError: on any other malformed content, with the byte offset
    """
    reader = _Reader(data)
    magic = reader.take(8, 'magic')
    if magic[:7] != MAGIC_PREFIX:
        raise ModelFormatError("Bad magic", 0)
    if magic[7:] != FORMAT_VERSION:
        raise UnsupportedVersionError(f"Unsupported model format version {magic[7:]!r}", 7)
    (layer_count,) = struct.unpack('<I', reader.take(4, 'layer count'))
    if layer_count == 0:
        raise ModelFormatError("Model has no layers", 8)

    layers = []
    previous_out = None
    for index in range(layer_count):
        header_offset = reader.offset
        in_dim, out_dim, tag = struct.unpack('<IIB', reader.take(9, f'layer {index} header'))
        if in_dim == 0 or out_dim == 0:
            raise ModelFormatError(f"Layer {index} has an empty dimension", header_offset)
        if previous_out is not None and in_dim != previous_out:
            raise ModelFormatError(
                f"Layer {index} expects {in_dim} inputs but the previous layer emits {previous_out}",
                header_offset,
            )
        if tag not in TAG_ACTIVATIONS:
            raise ModelFormatError(f"Unknown activation tag {tag}", header_offset + 8)
        weights = reader.floats(in_dim * out_dim, f'layer {index} weights').reshape(out_dim, in_dim)
        biases = reader.floats(out_dim, f'layer {index} biases')
        layers.append(DenseLayer(weights, biases, TAG_ACTIVATIONS[tag]))
        previous_out = out_dim

    if reader.offset != len(data):
        raise ModelFormatError(f"{len(data) - reader.offset} trailing bytes", reader.offset)
    return MlpModel(layers)


def save_model(model: MlpModel, path: Union[str, Path]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(encode_model(model))
    logger.debug(f"Saved model with {len(model.layers)} layers to {path}")


def load_model(path: Union[str, Path]) -> MlpModel:
    model = decode_model(Path(path).read_bytes())
    logger.debug(f"Loaded model {path}: {model.input_dim} -> {model.num_classes}")
    return model

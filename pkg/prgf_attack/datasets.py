"""
Synthetic datasets

Gaussian blobs with a closed-form softmax-linear target (the linear
discriminant of isotropic classes: weights = class means, biases =
-||mean||^2 / 2) and a weight-perturbed copy of it as surrogate. Only points
the target classifies correctly are kept.

A dataset file is JSON; the two models are stored next to it as
<out>.target.bin and <out>.surrogate.bin.
"""

import json
import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Tuple, Union

import numpy as np

from .exceptions import ConfigError, DomainError
from .geometry import SeededRng
from .oracles.model_io import load_model, save_model
from .oracles.models import MlpModel, perturb_model

logger = logging.getLogger('prgf.datasets')

DATASET_VERSION = 1
KINDS = ('blobs',)
MAX_ROUNDS = 100


@dataclass
class Dataset:
    points: np.ndarray
    labels: np.ndarray
    dim: int
    classes: int
    kind: str = 'blobs'
    seed: int = 0

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    def __iter__(self) -> Iterator[Tuple[np.ndarray, int]]:
        for x, y in zip(self.points, self.labels):
            yield x, int(y)

    def head(self, count: int) -> 'Dataset':
        return Dataset(self.points[:count], self.labels[:count], self.dim, self.classes, self.kind, self.seed)


def blob_target(means: np.ndarray) -> MlpModel:
    return MlpModel.linear(means, -0.5 * np.sum(means ** 2, axis=1))


def generate_blobs(n: int, dim: int, classes: int, seed: int, mean_scale: float = 2.0, noise: float = 0.5,
                   surrogate_noise: float = 1.0) -> Tuple[Dataset, MlpModel, MlpModel]:
    """
    Draw n correctly classified blob points with their target and surrogate

    Class means have norm about mean_scale and the per-point noise has norm
    about `noise`.
    """
    if n < 0 or dim < 2 or classes < 2:
        raise DomainError(f"Need n >= 0, dim >= 2, classes >= 2, got {n}, {dim}, {classes}")
    rng = SeededRng(seed)
    means = rng.normal((classes, dim)) * (mean_scale / np.sqrt(dim))
    target = blob_target(means)
    surrogate = perturb_model(target, surrogate_noise, rng.spawn(1))

    points = np.zeros((0, dim))
    labels = np.zeros(0, dtype=np.int64)
    for _ in range(MAX_ROUNDS):
        if len(labels) >= n:
            break
        batch = max(n - len(labels), 1) * 2
        drawn = rng.integers(0, classes, batch)
        candidates = means[drawn] + rng.normal((batch, dim)) * (noise / np.sqrt(dim))
        keep = np.argmax(target.logits(candidates), axis=1) == drawn
        points = np.vstack([points, candidates[keep]])
        labels = np.concatenate([labels, drawn[keep]])
    if len(labels) < n:
        raise DomainError("Blobs overlap too much to draw correctly classified points")
    dataset = Dataset(points[:n], labels[:n], dim, classes, 'blobs', seed)
    return dataset, target, surrogate


def model_paths(path: Union[str, Path]) -> Tuple[Path, Path]:
    """Paths of the target and surrogate models stored next to a dataset file"""
    path = Path(path)
    return path.with_name(path.name + '.target.bin'), path.with_name(path.name + '.surrogate.bin')


def save_dataset(dataset: Dataset, path: Union[str, Path]):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = {
        'version': DATASET_VERSION,
        'kind': dataset.kind,
        'dim': dataset.dim,
        'classes': dataset.classes,
        'seed': dataset.seed,
        'points': [[float(value) for value in x] for x in dataset.points],
        'labels': [int(y) for y in dataset.labels],
    }
    path.write_text(json.dumps(payload) + '\n')


def gen_dataset(kind: str, n: int, dim: int, seed: int, out: Union[str, Path], classes: int = 10) -> Path:
    """
    Generate a dataset file plus its target and surrogate models

    Returns:
        Path of the dataset file
    """
    if kind not in KINDS:
        raise DomainError(f"Unknown dataset kind: {kind}. Supported: {', '.join(KINDS)}")
    dataset, target, surrogate = generate_blobs(n, dim, classes, seed)
    out = Path(out)
    save_dataset(dataset, out)
    target_path, surrogate_path = model_paths(out)
    save_model(target, target_path)
    save_model(surrogate, surrogate_path)
    logger.info(f"✓ Wrote {n} {kind} points (dim {dim}, {classes} classes) to {out}")
    return out


def load_dataset(path: Union[str, Path]) -> Dataset:
    path = Path(path)
    try:
        payload = json.loads(path.read_text())
    except (OSError, json.JSONDecodeError) as e:
        raise ConfigError(f"Cannot read dataset {path}: {e}") from e
    if payload.get('version') != DATASET_VERSION:
        raise ConfigError(f"Dataset {path} has unsupported version {payload.get('version')!r}")
    dim = int(payload['dim'])
    points = np.asarray(payload['points'], dtype=np.float64).reshape(-1, dim)
    labels = np.asarray(payload['labels'], dtype=np.int64)
    if points.shape[0] != labels.shape[0]:
        raise ConfigError(f"Dataset {path} holds {points.shape[0]} points but {labels.shape[0]} labels")
    return Dataset(points, labels, dim, int(payload['classes']), payload.get('kind', 'blobs'),
                   int(payload.get('seed', 0)))


def load_dataset_models(path: Union[str, Path]) -> Tuple[MlpModel, MlpModel]:
    target_path, surrogate_path = model_paths(path)
    return load_model(target_path), load_model(surrogate_path)

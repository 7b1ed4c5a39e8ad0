"""
Black-box oracle abstraction

Backends evaluate losses and predicted labels for batches of points. An
Oracle wraps a backend with the query ledger of one attack instance: every
successful loss evaluation is charged to exactly one phase of the ledger.
Backends are immutable and may be shared across threads; ledgers are not
shared between attack instances.
"""

import logging
import threading
from abc import ABC, abstractmethod
from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Optional, Tuple

import numpy as np

from ..exceptions import BudgetExceededError, DomainError, NumericError, ShapeError
from .models import (
    LossKind,
    MlpModel,
    check_label,
    loss_gradient_from_logits,
    split_loss_and_labels,
)

logger = logging.getLogger('prgf.oracle')


class Phase(str, Enum):
    """Ledger phases a query can be charged to"""
    ESTIMATION = 'estimation'
    ALPHA = 'alpha'
    NORM = 'norm'
    ATTACK_STEP = 'attack_step'


@dataclass(frozen=True)
class OracleResponse:
    loss: float
    predicted_label: int
    queries_charged: int = 1


class QueryLedger:
    """Thread-safe per-phase query counters; total is their sum"""

    def __init__(self):
        self._counts: Dict[Phase, int] = {phase: 0 for phase in Phase}
        self._lock = threading.Lock()

    def charge(self, phase: Phase, count: int = 1):
        if count < 0:
            raise DomainError(f"Cannot charge a negative query count ({count})")
        with self._lock:
            self._counts[Phase(phase)] += count

    def count(self, phase: Phase) -> int:
        with self._lock:
            return self._counts[Phase(phase)]

    @property
    def total(self) -> int:
        with self._lock:
            return sum(self._counts.values())

    def snapshot(self) -> Dict[str, int]:
        with self._lock:
            return {phase.value: count for phase, count in self._counts.items()}


class OracleBackend(ABC):
    """Evaluates loss and predicted label for batches of points"""

    @property
    @abstractmethod
    def dim(self) -> int:
        pass

    @property
    @abstractmethod
    def num_classes(self) -> int:
        pass

    @abstractmethod
    def evaluate(self, points: np.ndarray, label: int) -> Tuple[np.ndarray, np.ndarray]:
        """
        Evaluate a batch.

        Args:
            points: Array of shape (n, D)
            label: True label shared by all points

        Returns:
            (losses, predicted_labels), both of shape (n,)
        """
        pass


class DifferentiableBackend(OracleBackend):
    """Local backend that also exposes the exact input gradient of its loss"""

    @abstractmethod
    def gradient(self, x: np.ndarray, label: int) -> np.ndarray:
        pass


class ModelOracle(DifferentiableBackend):
    """Loss oracle of an MLP classifier"""

    def __init__(self, model: MlpModel, loss_kind: LossKind = LossKind.CROSS_ENTROPY):
        self.model = model
        self.loss_kind = LossKind(loss_kind)

    @property
    def dim(self) -> int:
        return self.model.input_dim

    @property
    def num_classes(self) -> int:
        return self.model.num_classes

    def evaluate(self, points: np.ndarray, label: int) -> Tuple[np.ndarray, np.ndarray]:
        label = check_label(label, self.num_classes)
        return split_loss_and_labels(self.model.logits(points), label, self.loss_kind)

    def gradient(self, x: np.ndarray, label: int) -> np.ndarray:
        label = check_label(label, self.num_classes)
        logits = self.model.logits(x)
        return self.model.input_gradient(x, loss_gradient_from_logits(logits, label, self.loss_kind))


class QuadraticOracle(DifferentiableBackend):
    """
    Loss ||x - center||^2, independent of the label

    The predicted label is 0 while the loss stays below `threshold` and 1
    afterwards, which turns the bowl into a two-class problem.
    """

    def __init__(self, center: np.ndarray, threshold: float = float('inf')):
        self.center = np.asarray(center, dtype=np.float64)
        self.threshold = float(threshold)

    @property
    def dim(self) -> int:
        return int(self.center.shape[0])

    @property
    def num_classes(self) -> int:
        return 2

    def evaluate(self, points: np.ndarray, label: int) -> Tuple[np.ndarray, np.ndarray]:
        check_label(label, 2)
        losses = np.sum((np.atleast_2d(points) - self.center) ** 2, axis=1)
        return losses, (losses >= self.threshold).astype(np.int64)

    def gradient(self, x: np.ndarray, label: int) -> np.ndarray:
        return 2.0 * (np.asarray(x, dtype=np.float64) - self.center)


class LinearOracle(DifferentiableBackend):
    """Loss g . x + offset; label 1 once the loss reaches `threshold`"""

    def __init__(self, direction: np.ndarray, offset: float = 0.0, threshold: float = float('inf')):
        self.direction = np.asarray(direction, dtype=np.float64)
        self.offset = float(offset)
        self.threshold = float(threshold)

    @property
    def dim(self) -> int:
        return int(self.direction.shape[0])

    @property
    def num_classes(self) -> int:
        return 2

    def evaluate(self, points: np.ndarray, label: int) -> Tuple[np.ndarray, np.ndarray]:
        check_label(label, 2)
        losses = np.atleast_2d(points) @ self.direction + self.offset
        return losses, (losses >= self.threshold).astype(np.int64)

    def gradient(self, x: np.ndarray, label: int) -> np.ndarray:
        return self.direction.copy()


class TapOracle(OracleBackend):
    """Wraps a backend and counts the points it evaluates"""

    def __init__(self, backend: OracleBackend):
        self.backend = backend
        self._evaluated = 0
        self._lock = threading.Lock()

    @property
    def dim(self) -> int:
        return self.backend.dim

    @property
    def num_classes(self) -> int:
        return self.backend.num_classes

    @property
    def evaluated(self) -> int:
        with self._lock:
            return self._evaluated

    def evaluate(self, points: np.ndarray, label: int) -> Tuple[np.ndarray, np.ndarray]:
        result = self.backend.evaluate(points, label)
        with self._lock:
            self._evaluated += len(result[0])
        return result

    def gradient(self, x: np.ndarray, label: int) -> np.ndarray:
        return surrogate_gradient(self.backend, x, label)


class Oracle:
    """
    Metered handle on a backend

    Each handle owns one QueryLedger. Queries are charged only after the
    backend answered, so a failed evaluation costs nothing.
    """

    def __init__(self, backend: OracleBackend, ledger: Optional[QueryLedger] = None,
                 budget: Optional[int] = None):
        self.backend = backend
        self.ledger = ledger or QueryLedger()
        self.budget = budget

    @property
    def dim(self) -> int:
        return self.backend.dim

    @property
    def num_classes(self) -> int:
        return self.backend.num_classes

    def _check_points(self, points: np.ndarray) -> np.ndarray:
        points = np.asarray(points, dtype=np.float64)
        if points.ndim != 2 or points.shape[1] != self.dim:
            raise ShapeError(f"Oracle expects points of dim {self.dim}, got shape {points.shape}")
        if not np.all(np.isfinite(points)):
            raise NumericError("Query points must be finite")
        return points

    def batch_query(self, points: np.ndarray, label: int,
                    phase: Phase = Phase.ESTIMATION) -> List[OracleResponse]:
        """
        Evaluate n points atomically and charge n queries to `phase`.

        Raises:
            ShapeError: on a dimension mismatch
            NumericError: on non-finite inputs or outputs
            BudgetExceededError: if the batch would overrun the budget
        """
        points = self._check_points(points)
        count = points.shape[0]
        if count == 0:
            return []
        if self.budget is not None and self.ledger.total + count > self.budget:
            raise BudgetExceededError(self.ledger.total)
        losses, labels = self.backend.evaluate(points, label)
        losses = np.asarray(losses, dtype=np.float64)
        if losses.shape != (count,) or len(labels) != count:
            raise ShapeError(f"Backend answered {losses.shape} losses for {count} points")
        if not np.all(np.isfinite(losses)):
            raise NumericError("Oracle returned a non-finite loss")
        self.ledger.charge(phase, count)
        return [OracleResponse(float(loss), int(pred)) for loss, pred in zip(losses, labels)]

    def query_loss(self, x: np.ndarray, label: int, phase: Phase = Phase.ESTIMATION) -> OracleResponse:
        """Evaluate a single point (charges 1 query)"""
        return self.batch_query(np.asarray(x, dtype=np.float64)[None, :], label, phase)[0]

    def losses(self, points: np.ndarray, label: int, phase: Phase = Phase.ESTIMATION) -> np.ndarray:
        return np.array([response.loss for response in self.batch_query(points, label, phase)])


def surrogate_gradient(surrogate: OracleBackend, x: np.ndarray, label: int) -> np.ndarray:
    """Exact input gradient of a local surrogate's loss (no ledger involved)"""
    if not hasattr(surrogate, 'gradient'):
        raise DomainError(f"{type(surrogate).__name__} does not expose gradients")
    x = np.asarray(x, dtype=np.float64)
    if x.shape != (surrogate.dim,):
        raise ShapeError(f"Surrogate expects dim {surrogate.dim}, got shape {x.shape}")
    return np.asarray(surrogate.gradient(x, label), dtype=np.float64)


class OracleFactory:
    """Factory for creating oracle backends"""

    @staticmethod
    def create(kind: str, model: Optional[MlpModel] = None, loss: str = 'cross_entropy',
               endpoint: Optional[str] = None, center: Optional[np.ndarray] = None,
               threshold: float = float('inf'), timeout: Optional[float] = None) -> OracleBackend:
        """
        Create an oracle backend.

        Args:
            kind: Backend kind ('model', 'remote', 'quadratic')
            model: Classifier for 'model'
            loss: Loss kind for 'model' ('cross_entropy' or 'cw_margin')
            endpoint: Base URL for 'remote'
            center: Bowl center for 'quadratic'
            threshold: Label threshold for 'quadratic'
            timeout: Request timeout in seconds for 'remote'

        Returns:
            OracleBackend instance
        """
        kind = kind.lower()

        if kind == 'model':
            if model is None:
                raise DomainError("A model is required for a model oracle")
            return ModelOracle(model, LossKind(loss))

        elif kind == 'remote':
            if not endpoint:
                raise DomainError("An endpoint is required for a remote oracle")
            from .remote import RemoteOracle
            return RemoteOracle(endpoint, timeout=timeout)

        elif kind == 'quadratic':
            if center is None:
                raise DomainError("A center is required for a quadratic oracle")
            return QuadraticOracle(center, threshold)

        else:
            raise DomainError(f"Unknown oracle kind: {kind}. Supported: model, remote, quadratic")

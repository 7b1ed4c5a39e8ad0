"""
Remote oracle client

Talks to an oracle server over the JSON wire protocol using httpx. Transport
failures and timeouts become TransportError, status 429 becomes
BudgetExceededError and malformed replies become ProtocolError.
"""

import logging
import math
import os
from typing import Optional, Tuple

import httpx
import numpy as np

from ..exceptions import BudgetExceededError, ProtocolError, TransportError
from .base import OracleBackend

logger = logging.getLogger('prgf.oracle.remote')

TIMEOUT_ENV = 'PRGF_ORACLE_TIMEOUT_MS'
DEFAULT_TIMEOUT_MS = 5000


def default_timeout() -> float:
    """Request timeout in seconds, from PRGF_ORACLE_TIMEOUT_MS if set"""
    raw = os.environ.get(TIMEOUT_ENV)
    if raw:
        try:
            return max(float(raw), 1.0) / 1000.0
        except ValueError:
            logger.warning(f"Ignoring invalid {TIMEOUT_ENV}={raw!r}")
    return DEFAULT_TIMEOUT_MS / 1000.0


class RemoteOracle(OracleBackend):
    """Oracle backend served over HTTP"""

    def __init__(self, endpoint: str, timeout: Optional[float] = None,
                 dim: Optional[int] = None, num_classes: Optional[int] = None):
        self.endpoint = endpoint.rstrip('/')
        self.timeout = timeout if timeout is not None else default_timeout()
        self.client = httpx.Client(base_url=self.endpoint, timeout=self.timeout)
        self.last_remaining_budget: Optional[int] = None
        self._dim = dim
        self._num_classes = num_classes
        if dim is None or num_classes is None:
            info = self.info()
            self._dim = int(info['dim'])
            self._num_classes = int(info['classes'])
        logger.info(f"Connected to remote oracle {self.endpoint} (dim {self._dim}, timeout {self.timeout}s)")

    @property
    def dim(self) -> int:
        return self._dim

    @property
    def num_classes(self) -> int:
        return self._num_classes

    def _request(self, method: str, path: str, payload: Optional[dict] = None) -> httpx.Response:
        try:
            return self.client.request(method, path, json=payload)
        except httpx.TimeoutException as e:
            raise TransportError(f"Timed out after {self.timeout}s talking to {self.endpoint}{path}") from e
        except httpx.HTTPError as e:
            raise TransportError(f"Could not reach {self.endpoint}{path}: {e}") from e

    @staticmethod
    def _json(response: httpx.Response) -> dict:
        try:
            body = response.json()
        except ValueError as e:
            raise ProtocolError(f"Reply is not JSON (status {response.status_code})") from e
        if not isinstance(body, dict):
            raise ProtocolError("Reply must be a JSON object")
        return body

    def info(self) -> dict:
        response = self._request('GET', '/v1/info')
        if response.status_code != 200:
            raise ProtocolError(f"GET /v1/info answered status {response.status_code}")
        return self._json(response)

    def reset(self) -> int:
        """Reset the server budget and return the remaining quota"""
        response = self._request('POST', '/v1/reset')
        if response.status_code != 200:
            raise ProtocolError(f"POST /v1/reset answered status {response.status_code}")
        self.last_remaining_budget = int(self._json(response).get('remaining_budget', 0))
        return self.last_remaining_budget

    def evaluate(self, points: np.ndarray, label: int) -> Tuple[np.ndarray, np.ndarray]:
        points = np.atleast_2d(np.asarray(points, dtype=np.float64))
        response = self._request('POST', '/v1/loss', {'points': points.tolist(), 'label': int(label)})

        if response.status_code == 429:
            body = self._json(response)
            raise BudgetExceededError(int(body.get('queries_used', 0)), body.get('error'))
        if response.status_code == 400:
            raise ProtocolError(f"Server rejected request: {self._json(response).get('error')}")
        if response.status_code != 200:
            raise TransportError(f"Unexpected status {response.status_code} from {self.endpoint}")

        body = self._json(response)
        losses, labels = body.get('losses'), body.get('labels')
        if not isinstance(losses, list) or not isinstance(labels, list):
            raise ProtocolError("Reply lacks 'losses' or 'labels'")
        if len(losses) != len(points) or len(labels) != len(points):
            raise ProtocolError(f"Reply holds {len(losses)} losses for {len(points)} points")
        try:
            loss_array = np.array([float(loss) for loss in losses])
            label_array = np.array([int(pred) for pred in labels], dtype=np.int64)
        except (TypeError, ValueError) as e:
            raise ProtocolError(f"Reply holds non-numeric values: {e}") from e
        if not all(math.isfinite(loss) for loss in loss_array):
            raise ProtocolError("Reply holds non-finite losses")
        if 'remaining_budget' in body:
            self.last_remaining_budget = int(body['remaining_budget'])
        return loss_array, label_array

    def close(self):
        self.client.close()

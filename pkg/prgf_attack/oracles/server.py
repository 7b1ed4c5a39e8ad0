"""
Reference oracle server

Small HTTP server exposing a local oracle backend over the wire protocol:

    POST /v1/loss   {"points": [[f64, ...], ...], "label": int}
                    -> {"losses": [...], "labels": [...], "remaining_budget": int}
    POST /v1/reset  resets the query budget
    GET  /v1/info   {"dim", "classes", "budget", "queries_used", "remaining_budget"}

A request that would exceed the budget is refused as a whole with status 429
and nothing is charged. Malformed bodies get status 400 and backend
failures status 500; neither is charged.
"""

import json
import logging
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional, Tuple

import numpy as np

from ..exceptions import PrgfError
from .base import OracleBackend

logger = logging.getLogger('prgf.oracle.server')

DEFAULT_BUDGET = 10 ** 9


class OracleHTTPServer(ThreadingHTTPServer):
    """HTTP server holding the backend and the budget counter"""

    daemon_threads = True

    def __init__(self, address, backend: OracleBackend, budget: int = DEFAULT_BUDGET):
        super().__init__(address, OracleRequestHandler)
        self.backend = backend
        self.budget = int(budget)
        self.queries_used = 0
        self.budget_lock = threading.Lock()

    @property
    def remaining_budget(self) -> int:
        return max(self.budget - self.queries_used, 0)

    def refund(self, count: int):
        """Give back queries charged for a request that was not answered"""
        with self.budget_lock:
            self.queries_used = max(self.queries_used - count, 0)


class OracleRequestHandler(BaseHTTPRequestHandler):
    """Handler for oracle requests"""

    server: OracleHTTPServer

    def _set_headers(self, status=200):
        self.send_response(status)
        self.send_header('Content-type', 'application/json')
        self.end_headers()

    def _reply(self, payload: dict, status: int = 200):
        self._set_headers(status)
        self.wfile.write(json.dumps(payload).encode())

    def _read_body(self) -> Optional[dict]:
        length = int(self.headers.get('Content-Length') or 0)
        try:
            body = json.loads(self.rfile.read(length).decode() or 'null')
        except (UnicodeDecodeError, json.JSONDecodeError):
            return None
        return body if isinstance(body, dict) else None

    def _parse_loss_request(self, body: Optional[dict]) -> Tuple[Optional[np.ndarray], Optional[int], str]:
        if body is None:
            return None, None, 'Body must be a JSON object'
        points, label = body.get('points'), body.get('label')
        if not isinstance(label, int) or isinstance(label, bool):
            return None, None, 'label must be an integer'
        if not 0 <= label < self.server.backend.num_classes:
            return None, None, f'label must lie in [0, {self.server.backend.num_classes})'
        try:
            array = np.asarray(points, dtype=np.float64)
        except (TypeError, ValueError):
            return None, None, 'points must be a list of numeric vectors'
        if array.ndim != 2 or array.shape[0] == 0 or array.shape[1] != self.server.backend.dim:
            return None, None, f'points must have shape (n, {self.server.backend.dim})'
        if not np.all(np.isfinite(array)):
            return None, None, 'points must be finite'
        return array, label, ''

    def do_GET(self):
        """GET /v1/info - backend and budget state"""
        if self.path == '/v1/info':
            with self.server.budget_lock:
                self._reply({
                    'dim': self.server.backend.dim,
                    'classes': self.server.backend.num_classes,
                    'budget': self.server.budget,
                    'queries_used': self.server.queries_used,
                    'remaining_budget': self.server.remaining_budget,
                })
        else:
            self._reply({'error': 'Not found'}, 404)

    def do_POST(self):
        """POST /v1/loss or /v1/reset"""
        if self.path == '/v1/loss':
            points, label, problem = self._parse_loss_request(self._read_body())
            if points is None:
                self._reply({'error': problem}, 400)
                return
            count = points.shape[0]
            with self.server.budget_lock:
                if self.server.queries_used + count > self.server.budget:
                    logger.info(f"Refusing {count} queries: budget of {self.server.budget} exhausted")
                    self._reply({
                        'error': 'Query budget exhausted',
                        'queries_used': self.server.queries_used,
                        'remaining_budget': self.server.remaining_budget,
                    }, 429)
                    return
                self.server.queries_used += count
                remaining = self.server.remaining_budget
            try:
                losses, labels = self.server.backend.evaluate(points, label)
                payload = {
                    'losses': [float(loss) for loss in losses],
                    'labels': [int(pred) for pred in labels],
                    'remaining_budget': remaining,
                }
            except PrgfError as e:
                self.server.refund(count)
                self._reply({'error': str(e)}, 400)
                return
            except Exception as e:
                self.server.refund(count)
                logger.error(f"✗ Backend failed on {count} points: {e}", exc_info=True)
                self._reply({'error': 'Internal oracle error'}, 500)
                return
            self._reply(payload)

        elif self.path == '/v1/reset':
            with self.server.budget_lock:
                self.server.queries_used = 0
                remaining = self.server.remaining_budget
            logger.info("Query budget reset")
            self._reply({'status': 'reset', 'remaining_budget': remaining})

        else:
            self._reply({'error': 'Not found'}, 404)

    def log_message(self, format, *args):
        """Route request logs to debug level"""
        logger.debug(f"{self.address_string()} - {format % args}")


def start_background_server(backend: OracleBackend, budget: int = DEFAULT_BUDGET,
                            host: str = '127.0.0.1', port: int = 0) -> Tuple[OracleHTTPServer, threading.Thread]:
    """Start a server on a daemon thread; port 0 picks a free port"""
    httpd = OracleHTTPServer((host, port), backend, budget)
    thread = threading.Thread(target=httpd.serve_forever, daemon=True)
    thread.start()
    logger.debug(f"Oracle server listening on {host}:{httpd.server_address[1]}")
    return httpd, thread


def run_server(backend: OracleBackend, budget: int = DEFAULT_BUDGET, port: int = 8001, host: str = ''):
    """Serve until interrupted"""
    httpd = OracleHTTPServer((host, port), backend, budget)

    logger.info("=" * 60)
    logger.info("🎯 PRGF reference oracle server")
    logger.info(f"Listening on:  http://localhost:{port}")
    logger.info(f"Loss queries:  POST http://localhost:{port}/v1/loss")
    logger.info(f"Reset budget:  POST http://localhost:{port}/v1/reset")
    logger.info(f"Budget:        {budget} queries, dim {backend.dim}, {backend.num_classes} classes")
    logger.info("=" * 60)

    try:
        httpd.serve_forever()
    except KeyboardInterrupt:
        logger.info("Shutting down oracle server")
    finally:
        httpd.server_close()
        logger.info("✓ Server stopped")

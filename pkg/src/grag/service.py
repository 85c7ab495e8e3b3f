"""Read-only JSON HTTP service over a loaded index.

Endpoints::

    POST /query     {"query": str, "k": int}  -> ranked hits
    POST /generate  {"query": str, "k": int}  -> {"answer", "fragment_ids", "scores"}
    GET  /healthz                             -> {"status", "index_size", "embedding_dim"}

Malformed bodies get 400, a missing or empty index 503, and unexpected
faults 500 with an opaque id; the traceback goes to the log only.
"""
from __future__ import annotations

import json
import logging
import uuid
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from typing import Optional

from .errors import DimMismatch, EmptyIndex, EmptyText, GragError

log = logging.getLogger(__name__)

MAX_BODY = 1 << 20


class BadRequest(Exception):
    pass


class ServiceState:
    """What the handler needs: a pipeline (may be ``None``), a generator and a default k."""

    def __init__(self, pipeline, generator=None, default_k: int = 5):
        self.pipeline = pipeline
        self.generator = generator
        self.default_k = default_k

    def healthz(self) -> tuple:
        if self.pipeline is None:
            return 503, {"status": "no index", "index_size": 0, "embedding_dim": None}
        idx = self.pipeline.index
        return 200, {"status": "ok", "index_size": len(idx), "embedding_dim": idx.dim}

    def _parse(self, body: dict) -> tuple:
        if not isinstance(body, dict):
            raise BadRequest("body must be a JSON object")
        query = body.get("query")
        if not isinstance(query, str) or not query.strip():
            raise BadRequest("'query' must be a non-empty string")
        k = body.get("k", self.default_k)
        if isinstance(k, bool) or not isinstance(k, int) or k < 1:
            raise BadRequest("'k' must be a positive integer")
        return query, k

    def query(self, body) -> tuple:
        query, k = self._parse(body)
        if self.pipeline is None:
            return 503, {"error": "index not loaded"}
        return 200, self.pipeline.retrieve(query, k).to_dict()

    def generate(self, body) -> tuple:
        query, k = self._parse(body)
        if self.pipeline is None or self.generator is None:
            return 503, {"error": "index or generator not loaded"}
        hits, rec = self.pipeline.answer(query, k, self.generator)
        return 200, {"answer": rec.text, "fragment_ids": hits.ids, "scores": hits.scores}


def _make_handler(state: ServiceState):
    class Handler(BaseHTTPRequestHandler):
        server_version = "grag"
        protocol_version = "HTTP/1.1"

        def log_message(self, fmt, *args):
            log.debug("%s " + fmt, self.address_string(), *args)

        def _send(self, status: int, payload: dict):
            data = json.dumps(payload).encode("utf-8")
            self.send_response(status)
            self.send_header("Content-Type", "application/json")
            self.send_header("Content-Length", str(len(data)))
            self.end_headers()
            self.wfile.write(data)

        def _dispatch(self, fn, body):
            try:
                self._send(*fn(body))
            except BadRequest as exc:
                self._send(400, {"error": "BadRequest", "detail": str(exc)})
            except (EmptyText, DimMismatch) as exc:
                self._send(400, {"error": type(exc).__name__, "detail": str(exc)})
            except EmptyIndex as exc:
                self._send(503, {"error": "EmptyIndex", "detail": str(exc)})
            except Exception as exc:
                fault = uuid.uuid4().hex
                log.exception("fault %s while handling %s", fault, self.path)
                name = type(exc).__name__ if isinstance(exc, GragError) else "InternalError"
                self._send(500, {"error": name, "fault_id": fault})

        def do_GET(self):
            if self.path == "/healthz":
                self._send(*state.healthz())
            else:
                self._send(404, {"error": "NotFound"})

        def do_POST(self):
            routes = {"/query": state.query, "/generate": state.generate}
            fn = routes.get(self.path)
            length = int(self.headers.get("Content-Length") or 0)
            if length > MAX_BODY:
                self.close_connection = True
                self._send(413, {"error": "BodyTooLarge"})
                return
            raw = self.rfile.read(length) if length else b""
            if fn is None:
                self._send(404, {"error": "NotFound"})
                return
            try:
                body = json.loads(raw.decode("utf-8"))
            except (UnicodeDecodeError, json.JSONDecodeError):
                self._send(400, {"error": "BadRequest", "detail": "body is not valid JSON"})
                return
            self._dispatch(fn, body)

    return Handler


def make_server(state: ServiceState, host: str = "127.0.0.1", port: int = 8000) -> ThreadingHTTPServer:
    """Bound but not yet serving; call ``serve_forever()`` (``port=0`` picks a free port)."""
    server = ThreadingHTTPServer((host, port), _make_handler(state))
    server.daemon_threads = True
    return server


def parse_bind(bind: str) -> tuple:
    host, sep, port = bind.rpartition(":")
    if not sep:
        return bind, 8000
    return host or "127.0.0.1", int(port)


def serve(state: ServiceState, bind: str = "127.0.0.1:8000", ready: Optional[callable] = None) -> None:
    host, port = parse_bind(bind)
    server = make_server(state, host, port)
    if ready is not None:
        ready(server)
    log.info("serving on http://%s:%d", *server.server_address[:2])
    try:
        server.serve_forever()
    finally:
        server.server_close()

"""In-process HTTP stub implementing the inference wire protocol.

Backs the remote-backend and CLI tests: deterministic canned answers, a
request counter, and optional injected failures (5xx bursts, slow
responses) to exercise the retry path.
"""

from __future__ import annotations

import json
import threading
import time
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer


class StubAdapter:
    def __init__(self, word_prob=0.015625, fail_first=0, delay=0.0, model="stub-model/1"):
        self.word_prob = word_prob
        self.fail_first = fail_first
        self.delay = delay
        self.model = model
        self.requests = 0
        self._lock = threading.Lock()
        self._server = None
        self._thread = None

    # deterministic canned behaviour -------------------------------------
    def answer(self, payload: dict) -> tuple[int, dict]:
        op = payload.get("op")
        if op == "generate":
            text = f"stub {payload['dimension']} continuation of {payload['event']}"
            return 200, {"generated_text": text}
        if op == "word_prob":
            # vary slightly per word so substitutability tests are not trivial
            bump = (len(payload.get("word", "")) % 5) * 1e-4
            return 200, {"prob": self.word_prob + bump}
        return 400, {"error": "bad_request", "detail": f"unknown op {op!r}"}

    # lifecycle -----------------------------------------------------------
    def start(self) -> str:
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):  # keep test output quiet
                pass

            def _send(self, status, body):
                payload = json.dumps(body).encode("utf-8")
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

            def do_GET(self):
                if self.path == "/health":
                    self._send(200, {"status": "ok", "model": stub.model})
                else:
                    self._send(404, {"error": "not_found", "detail": self.path})

            def do_POST(self):
                with stub._lock:
                    stub.requests += 1
                    remaining_failures = stub.fail_first
                    if stub.fail_first > 0:
                        stub.fail_first -= 1
                if remaining_failures > 0:
                    self._send(500, {"error": "boom", "detail": "injected failure"})
                    return
                if stub.delay:
                    time.sleep(stub.delay)
                length = int(self.headers.get("Content-Length", 0))
                payload = json.loads(self.rfile.read(length) or b"{}")
                status, body = stub.answer(payload)
                self._send(status, body)

        self._server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)
        self._thread.start()
        host, port = self._server.server_address
        return f"http://{host}:{port}"

    def stop(self):
        if self._server is not None:
            self._server.shutdown()
            self._server.server_close()
            self._thread.join(timeout=5)

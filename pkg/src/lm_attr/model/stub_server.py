"""Minimal OpenAI-style completions server backed by a local model.

Serves ``POST /v1/completions`` with the fields the HTTP backend uses.  Echo
responses tokenize the full text with the backing model, report character
offsets, and give the first token a null logprob as real servers do.
Failures can be injected to exercise client retries.

Run standalone with ``python -m lm_attr.model.stub_server --model-file m.json``.
"""

from __future__ import annotations

import argparse
import json
import math
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

from ..errors import ConfigError
from .mock import MockModel


class StubCompletionsServer:
    """Backed by a :class:`MockModel`, whose tokens concatenate to the text
    and so give exact character offsets."""

    def __init__(self, model, host="127.0.0.1", port=0, api_key=None):
        if not isinstance(model, MockModel):
            raise ConfigError("the stub server needs a mock model backend")
        self.model = model
        self.api_key = api_key
        self.requests: list[dict] = []
        self.failures = []  # queue of status codes to answer before serving
        self._lock = threading.Lock()
        self.httpd = ThreadingHTTPServer((host, port), self._handler())
        self._thread = None

    @property
    def base_url(self) -> str:
        host, port = self.httpd.server_address[:2]
        return f"http://{host}:{port}/v1"

    def fail_next(self, count=1, status=500):
        with self._lock:
            self.failures.extend([status] * count)

    def start(self):
        self._thread = threading.Thread(target=self.httpd.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self.httpd.shutdown()
        self.httpd.server_close()

    def __enter__(self):
        return self.start()

    def __exit__(self, *exc):
        self.stop()

    def complete(self, body: dict) -> dict:
        text = body["prompt"]
        if body.get("echo") and body.get("max_tokens", 16) == 0:
            tokens = self.model.tokenize(text)
            offsets, logprobs, pos = [], [], 0
            for i, tok in enumerate(tokens):
                offsets.append(pos)
                if i == 0:
                    logprobs.append(None)
                else:
                    logprobs.append(self.model.score_target(text[:pos], tok).total_logprob)
                pos += len(tok)
            return _response(text, tokens, logprobs, offsets)
        seq = self.model.generate_greedy(text, int(body.get("max_tokens", 16)), body.get("stop"))
        offsets, pos = [], len(text)
        for tok in seq.tokens:
            offsets.append(pos)
            pos += len(tok)
        return _response(seq.text, list(seq.tokens), list(seq.token_logprobs), offsets)

    def _handler(self):
        server = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def _send(self, status, payload):
                data = json.dumps(payload).encode()
                self.send_response(status)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(data)))
                self.end_headers()
                self.wfile.write(data)

            def do_POST(self):
                length = int(self.headers.get("Content-Length", 0))
                body = json.loads(self.rfile.read(length) or b"{}")
                with server._lock:
                    server.requests.append({"path": self.path, "body": body, "auth": self.headers.get("Authorization")})
                    status = server.failures.pop(0) if server.failures else None
                if status is not None:
                    return self._send(status, {"error": {"message": "injected failure"}})
                if server.api_key and self.headers.get("Authorization") != f"Bearer {server.api_key}":
                    return self._send(401, {"error": {"message": "bad key"}})
                if self.path.rstrip("/") != "/v1/completions":
                    return self._send(404, {"error": {"message": f"no route {self.path}"}})
                try:
                    return self._send(200, server.complete(body))
                except Exception as exc:
                    return self._send(400, {"error": {"message": str(exc)}})

        return Handler


def _response(text, tokens, logprobs, offsets):
    logprobs = [None if v is None or math.isinf(v) else v for v in logprobs]
    return {
        "object": "text_completion",
        "choices": [
            {
                "index": 0,
                "text": text,
                "logprobs": {"tokens": tokens, "token_logprobs": logprobs, "text_offset": offsets},
                "finish_reason": "length",
            }
        ],
    }


def main(argv=None):
    from ..config import build_model

    parser = argparse.ArgumentParser(description="serve a local model over a completions API")
    parser.add_argument("--model-file", required=True, help="JSON mock model section")
    parser.add_argument("--host", default="127.0.0.1")
    parser.add_argument("--port", type=int, default=8000)
    args = parser.parse_args(argv)
    with open(args.model_file, encoding="utf-8") as fh:
        model = build_model(json.load(fh))
    server = StubCompletionsServer(model, args.host, args.port)
    print(f"serving on {server.base_url}", flush=True)
    try:
        server.httpd.serve_forever()
    except KeyboardInterrupt:
        pass


if __name__ == "__main__":
    main()

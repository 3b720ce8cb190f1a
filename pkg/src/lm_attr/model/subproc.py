"""Child-process backend speaking line-delimited JSON over stdin/stdout.

Requests::

    {"op": "score", "prompt": ..., "continuation": ...} -> {"tokens": [...], "token_logprobs": [...]}
    {"op": "generate", "prompt": ..., "max_tokens": N}  -> {"text": ..., "tokens": [...], "token_logprobs": [...]}
    {"op": "tokenize", "text": ...}                     -> {"tokens": [...]}

A child reports failures as ``{"error": "..."}``.  Only one request is in
flight at a time; concurrent callers queue on a lock.
"""

from __future__ import annotations

import json
import select
import subprocess
import threading

from ..errors import TransportError
from .base import Capabilities, ModelHandle, ScoredSequence


class SubprocessModel(ModelHandle):
    capabilities = Capabilities(scores_targets=True, generates=True)

    def __init__(self, command, timeout_s: float = 120.0, model_id: str | None = None, env=None):
        super().__init__()
        self.command = list(command)
        self.timeout_s = timeout_s
        self.model_id = model_id or f"subprocess:{self.command[0]}"
        self._lock = threading.Lock()
        try:
            self.proc = subprocess.Popen(
                self.command,
                stdin=subprocess.PIPE,
                stdout=subprocess.PIPE,
                stderr=subprocess.PIPE,
                text=True,
                bufsize=1,
                env=env,
            )
        except OSError as exc:
            raise TransportError(f"cannot start {self.command}: {exc}") from exc

    def _stderr_tail(self) -> str:
        if self.proc.poll() is None:
            return ""
        try:
            return self.proc.stderr.read()[-500:]
        except (OSError, ValueError):
            return ""

    def request(self, payload: dict) -> dict:
        with self._lock:
            if self.proc.poll() is not None:
                raise TransportError(f"child exited with code {self.proc.returncode}: {self._stderr_tail()}")
            try:
                self.proc.stdin.write(json.dumps(payload) + "\n")
                self.proc.stdin.flush()
            except (BrokenPipeError, OSError) as exc:
                raise TransportError(f"child stdin closed: {exc}") from exc
            ready, _, _ = select.select([self.proc.stdout], [], [], self.timeout_s)
            if not ready:
                raise TransportError(f"child did not answer within {self.timeout_s} s")
            line = self.proc.stdout.readline()
        if not line:
            self.proc.wait(timeout=5)
            raise TransportError(f"child closed its output: {self._stderr_tail()}")
        try:
            reply = json.loads(line)
        except ValueError as exc:
            raise TransportError(f"child sent invalid JSON: {line[:200]!r}") from exc
        if "error" in reply:
            raise TransportError(f"child error: {reply['error']}")
        return reply

    def tokenize(self, text):
        return list(self.request({"op": "tokenize", "text": text})["tokens"])

    def _score(self, prompt, target):
        reply = self.request({"op": "score", "prompt": prompt, "continuation": target})
        return ScoredSequence(reply["tokens"], reply["token_logprobs"], text=target)

    def _generate(self, prompt, max_tokens, stop):
        payload = {"op": "generate", "prompt": prompt, "max_tokens": max_tokens}
        if stop:
            payload["stop"] = list(stop)
        reply = self.request(payload)
        return ScoredSequence(reply["tokens"], reply["token_logprobs"], text=reply.get("text", ""))

    def close(self):
        if self.proc.poll() is None:
            try:
                self.proc.stdin.close()
                self.proc.wait(timeout=5)
            except (OSError, subprocess.TimeoutExpired):
                self.proc.kill()
        for stream in (self.proc.stdout, self.proc.stderr):
            if stream:
                stream.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()

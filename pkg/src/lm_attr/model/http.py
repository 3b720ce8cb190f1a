"""OpenAI-compatible completions backend.

Target scoring uses echo mode: the request sends ``prompt + target`` with
``max_tokens=0``, ``echo=true`` and ``logprobs=0``, and the tokens whose
character offset is at or beyond ``len(prompt)`` are taken as the target.
A token straddling the seam therefore counts as part of the target.
"""

from __future__ import annotations

import os
import time

import httpx

from ..errors import TransportError
from .base import Capabilities, ModelHandle, ScoredSequence

API_KEY_ENV = "LM_ATTR_API_KEY"


class OpenAICompletionsModel(ModelHandle):
    capabilities = Capabilities(scores_targets=True, generates=True)

    def __init__(
        self,
        base_url: str,
        model: str,
        api_key: str | None = None,
        timeout_s: float = 120.0,
        max_retries: int = 3,
        backoff_base: float = 0.5,
        transport: httpx.BaseTransport | None = None,
    ):
        super().__init__()
        self.url = base_url.rstrip("/") + "/completions"
        self.model = model
        self.model_id = f"http:{model}"
        self.max_retries = max_retries
        self.backoff_base = backoff_base
        key = api_key if api_key is not None else os.environ.get(API_KEY_ENV)
        headers = {"Authorization": f"Bearer {key}"} if key else {}
        self.client = httpx.Client(timeout=timeout_s, headers=headers, transport=transport)

    def _post(self, body: dict, idempotent: bool) -> dict:
        last = None
        for attempt in range(self.max_retries + 1):
            if attempt:
                time.sleep(self.backoff_base * 2 ** (attempt - 1))
            try:
                resp = self.client.post(self.url, json=body)
            except httpx.ConnectError as exc:
                last = f"connection failed: {exc}"
                continue
            except httpx.TransportError as exc:
                last = f"transport failure: {exc}"
                if idempotent:
                    continue
                raise TransportError(f"{self.url}: {last}") from exc
            if resp.status_code >= 500 or resp.status_code == 429:
                last = f"HTTP {resp.status_code}: {resp.text[:200]}"
                if idempotent:
                    continue
                raise TransportError(f"{self.url}: {last}")
            if resp.status_code >= 400:
                raise TransportError(f"{self.url}: HTTP {resp.status_code}: {resp.text[:200]}")
            try:
                return resp.json()
            except ValueError as exc:
                raise TransportError(f"{self.url}: response is not JSON") from exc
        raise TransportError(f"{self.url}: giving up after {self.max_retries + 1} attempts; {last}")

    @staticmethod
    def _logprobs(payload: dict) -> tuple[str, dict]:
        try:
            choice = payload["choices"][0]
            return choice.get("text", ""), choice["logprobs"]
        except (KeyError, IndexError, TypeError) as exc:
            raise TransportError(f"malformed completions response: missing {exc}") from exc

    def _echo(self, text: str) -> dict:
        body = {
            "model": self.model,
            "prompt": text,
            "max_tokens": 0,
            "echo": True,
            "logprobs": 0,
            "temperature": 0,
        }
        return self._logprobs(self._post(body, idempotent=True))[1]

    def tokenize(self, text: str) -> list[str]:
        if not text:
            return []
        return list(self._echo(text)["tokens"])

    def _score(self, prompt, target):
        lp = self._echo(prompt + target)
        tokens, logprobs = [], []
        for tok, value, offset in zip(lp["tokens"], lp["token_logprobs"], lp["text_offset"]):
            if offset < len(prompt):
                continue
            if value is None:
                raise TransportError(f"backend returned no logprob for target token {tok!r}")
            tokens.append(tok)
            logprobs.append(value)
        return ScoredSequence(tokens, logprobs, text=target)

    def _generate(self, prompt, max_tokens, stop):
        body = {
            "model": self.model,
            "prompt": prompt,
            "max_tokens": max_tokens,
            "temperature": 0,
            "logprobs": 0,
        }
        if stop:
            body["stop"] = list(stop)
        text, lp = self._logprobs(self._post(body, idempotent=False))
        return ScoredSequence(lp["tokens"], lp["token_logprobs"], text=text)

    def close(self):
        self.client.close()

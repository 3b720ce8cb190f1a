"""Exact-key memoization wrapper for any model handle."""

from __future__ import annotations

import threading

from .base import ModelHandle


class CachedModel(ModelHandle):
    """Memoizes scoring, generation and next-token distributions.

    Keys are the exact query arguments.  Concurrent misses on one key may
    both reach the backend; the first stored value wins and is returned to
    every caller, so results stay identical.
    """

    def __init__(self, inner: ModelHandle, enabled: bool = True):
        super().__init__()
        self.inner = inner
        self.enabled = enabled
        self.model_id = inner.model_id
        self.capabilities = inner.capabilities
        self.hits = 0
        self.misses = 0
        self._memo: dict = {}
        self._lock = threading.Lock()

    @property
    def calls(self):
        return self.inner.calls

    def _lookup(self, key, compute):
        if not self.enabled:
            return compute()
        with self._lock:
            if key in self._memo:
                self.hits += 1
                return self._memo[key]
            self.misses += 1
        value = compute()
        with self._lock:
            return self._memo.setdefault(key, value)

    def tokenize(self, text):
        return self._lookup(("tok", text), lambda: self.inner.tokenize(text))

    def score_target(self, prompt, target):
        return self._lookup(("score", prompt, target), lambda: self.inner.score_target(prompt, target))

    def generate_greedy(self, prompt, max_tokens, stop=None):
        stop = tuple(stop or ())
        return self._lookup(
            ("gen", prompt, max_tokens, stop),
            lambda: self.inner.generate_greedy(prompt, max_tokens, stop),
        )

    def next_token_distribution(self, prompt):
        return self._lookup(("dist", prompt), lambda: self.inner.next_token_distribution(prompt))

    def __getattr__(self, name):
        # gradient and embedding hooks pass straight through
        if name == "inner":
            raise AttributeError(name)
        return getattr(self.inner, name)

    def close(self):
        self.inner.close()


def cached(model: ModelHandle, enabled: bool = True) -> CachedModel:
    return CachedModel(model, enabled=enabled)

"""A tiny mean-pooling language model with hand-derived gradients.

The next-token distribution is ``softmax(mean(E[context]) @ W + bias)``.
There is no attention and no recurrence, so the gradient of a token's
log-probability with respect to each context embedding is available in
closed form, while the softmax keeps the model non-linear.

Parameters are drawn uniformly from [-0.5, 0.5) with SplitMix64 in the
order E (row-major), W (row-major), bias, which makes them identical on
every platform for a given seed.
"""

from __future__ import annotations

import math
from pathlib import Path

import numpy as np

from .errors import ConfigError, TokenizationError, VocabularyError
from .model.base import Capabilities, ModelHandle, ScoredSequence
from .rng import SplitMix64

UNK = "<unk>"
EOS = "<eos>"

DEFAULT_VOCAB = [UNK, EOS] + (
    "Dave Sarah John David lives in Palm Coast, Beach, Seattle, Boston, FL WA MA "
    "and is a lawyer. doctor. engineer. teacher. technician. plumber. His Her "
    "personal interests include playing golf, hiking, cooking. reading, "
    "the movie was ok great amazing Positive Negative"
).split()

MAX_VOCAB = 64
MAX_DIM = 16


def log_softmax(logits: np.ndarray) -> np.ndarray:
    shifted = logits - np.max(logits, axis=-1, keepdims=True)
    return shifted - np.log(np.sum(np.exp(shifted), axis=-1, keepdims=True))


class ToyLM(ModelHandle):
    capabilities = Capabilities(
        scores_targets=True, generates=True, exposes_logits=True, exposes_gradients=True
    )

    def __init__(self, seed: int = 0, vocab=None, embedding_dim: int = 8, model_id: str | None = None):
        super().__init__()
        vocab = list(DEFAULT_VOCAB if vocab is None else vocab)
        for special in (EOS, UNK):
            if special not in vocab:
                vocab.insert(0, special)
        if len(vocab) > MAX_VOCAB:
            raise ConfigError(f"toy vocabulary limited to {MAX_VOCAB} tokens, got {len(vocab)}")
        if len(set(vocab)) != len(vocab):
            raise ConfigError("toy vocabulary has duplicate tokens")
        if not 1 <= embedding_dim <= MAX_DIM:
            raise ConfigError(f"embedding_dim must be in 1..{MAX_DIM}")
        self.vocab = vocab
        self.index = {t: i for i, t in enumerate(vocab)}
        self.seed = seed
        self.model_id = model_id or f"toylm-{seed}"
        v, k = len(vocab), embedding_dim
        gen = SplitMix64(seed)
        self.E = gen.uniform(-0.5, 0.5, v * k).reshape(v, k)
        self.W = gen.uniform(-0.5, 0.5, k * v).reshape(k, v)
        self.bias = gen.uniform(-0.5, 0.5, v)

    @classmethod
    def from_params(cls, vocab, E, W, bias, model_id="toylm-custom") -> ToyLM:
        model = cls(vocab=vocab, embedding_dim=np.asarray(E).shape[1], model_id=model_id)
        if list(model.vocab) != list(vocab):
            raise ConfigError(f"vocab must already contain {UNK!r} and {EOS!r}")
        model.E = np.asarray(E, dtype=float)
        model.W = np.asarray(W, dtype=float)
        model.bias = np.asarray(bias, dtype=float)
        return model

    @classmethod
    def from_vocab_file(cls, path, seed=0, embedding_dim=8) -> ToyLM:
        tokens = [line.strip() for line in Path(path).read_text(encoding="utf-8").splitlines()]
        return cls(seed=seed, vocab=[t for t in tokens if t], embedding_dim=embedding_dim)

    @property
    def embedding_dim(self) -> int:
        return self.E.shape[1]

    def tokenize(self, text: str) -> list[str]:
        return [t if t in self.index else UNK for t in text.split()]

    def encode(self, text: str) -> list[int]:
        return [self.index[t] for t in self.tokenize(text)]

    def _check(self, ids):
        ids = np.asarray(ids, dtype=int)
        if ids.size == 0:
            raise TokenizationError("toy model needs a non-empty context")
        if ids.min() < 0 or ids.max() >= len(self.vocab):
            raise VocabularyError(f"token ids out of range for vocabulary of {len(self.vocab)}")
        return ids

    def forward(self, ids) -> np.ndarray:
        ids = self._check(ids)
        return np.exp(log_softmax(self.E[ids].mean(axis=0) @ self.W + self.bias))

    def grad_logprob_wrt_embeddings(self, context_ids, target_id: int) -> np.ndarray:
        """d ln p(target | context) / d E[context], one row per position."""
        ids = self._check(context_ids)
        self._check([target_id])
        p = self.forward(ids)
        onehot = np.zeros(len(self.vocab))
        onehot[target_id] = 1.0
        row = self.W @ (onehot - p) / len(ids)
        return np.tile(row, (len(ids), 1))

    # gradient-backend hooks: prompt embeddings are the free variables,
    # target tokens enter through their fixed embedding rows

    def embed_text(self, text: str) -> tuple[list[str], np.ndarray]:
        tokens = self.tokenize(text)
        ids = self._check([self.index[t] for t in tokens])
        return tokens, self.E[ids].copy()

    def embedding_of(self, token: str) -> np.ndarray:
        if token not in self.index:
            raise VocabularyError(f"token {token!r} not in vocabulary")
        return self.E[self.index[token]].copy()

    def encode_target(self, target: str) -> tuple[list[str], list[int]]:
        tokens = self.tokenize(target)
        return tokens, [self.index[t] for t in tokens]

    def _pooled(self, prompt_emb, target_ids):
        """Pooled context vector before each target token, shape (T, k)."""
        prompt_emb = np.asarray(prompt_emb, dtype=float)
        n = prompt_emb.shape[0]
        if n == 0:
            raise TokenizationError("toy model needs a non-empty prompt")
        prefix = np.cumsum(np.vstack([np.zeros(self.embedding_dim), self.E[target_ids[:-1]]]), axis=0)
        counts = n + np.arange(len(target_ids))
        return (prompt_emb.sum(axis=0) + prefix) / counts[:, None], counts

    def target_logprobs_from_embeddings(self, prompt_emb, target_ids) -> np.ndarray:
        target_ids = list(target_ids)
        if not target_ids:
            return np.zeros(0)
        pooled, _ = self._pooled(prompt_emb, target_ids)
        logp = log_softmax(pooled @ self.W + self.bias)
        return logp[np.arange(len(target_ids)), target_ids]

    def target_grads_from_embeddings(self, prompt_emb, target_ids) -> np.ndarray:
        """Per-target-token gradients w.r.t. prompt embeddings, shape (T, n, k)."""
        target_ids = list(target_ids)
        n = np.asarray(prompt_emb).shape[0]
        if not target_ids:
            return np.zeros((0, n, self.embedding_dim))
        pooled, counts = self._pooled(prompt_emb, target_ids)
        p = np.exp(log_softmax(pooled @ self.W + self.bias))
        resid = -p
        resid[np.arange(len(target_ids)), target_ids] += 1.0
        rows = (resid @ self.W.T) / counts[:, None]
        return np.repeat(rows[:, None, :], n, axis=1)

    def _score(self, prompt, target):
        _, emb = self.embed_text(prompt)
        tokens, ids = self.encode_target(target)
        return ScoredSequence(tokens, self.target_logprobs_from_embeddings(emb, ids), text=target)

    def _generate(self, prompt, max_tokens, stop):
        ids = self.encode(prompt)
        tokens, logprobs = [], []
        for _ in range(max_tokens):
            p = self.forward(ids)
            idx = int(np.argmax(p))
            tok = self.vocab[idx]
            if tok == EOS or tok in stop:
                break
            tokens.append(tok)
            logprobs.append(math.log(p[idx]))
            ids.append(idx)
        return ScoredSequence(tokens, logprobs, text=" ".join(tokens))

    def _distribution(self, prompt):
        return list(self.vocab), self.forward(self.encode(prompt))

"""Gradient attribution with respect to input-token embeddings.

Token lookups are not differentiable, so both methods differentiate the
target log-probability with respect to the embedding rows of the prompt and
then aggregate each row into one score per prompt token.
"""

from __future__ import annotations

from collections.abc import Callable
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError

AGGREGATIONS = ("sum", "l2")


def aggregate(per_dim: np.ndarray, mode: str = "sum") -> np.ndarray:
    """Collapse the trailing embedding axis: plain sum or Euclidean norm."""
    per_dim = np.asarray(per_dim, dtype=float)
    if mode == "sum":
        return per_dim.sum(axis=-1)
    if mode == "l2":
        return np.sqrt((per_dim**2).sum(axis=-1))
    raise ConfigError(f"unknown aggregation {mode!r}; choose from {AGGREGATIONS}")


@dataclass
class EmbeddingAttribution:
    """Attributions over prompt tokens.

    ``rows`` holds one (tokens x dims) slice per target token; ``per_dim`` is
    their sum, i.e. the attribution of the whole target's log-probability.
    """

    tokens: list
    target_tokens: list
    rows: np.ndarray
    aggregation: str = "sum"

    @property
    def per_dim(self) -> np.ndarray:
        return self.rows.sum(axis=0)

    @property
    def per_token(self) -> np.ndarray:
        return aggregate(self.per_dim, self.aggregation)

    @property
    def row_per_token(self) -> np.ndarray:
        """(target tokens x prompt tokens) matrix."""
        return aggregate(self.rows, self.aggregation)


def trapezoid_weights(steps: int) -> np.ndarray:
    """Weights on ``linspace(0, 1, steps + 1)`` averaging a function over [0, 1]."""
    w = np.full(steps + 1, 1.0 / steps)
    w[0] = w[-1] = 0.5 / steps
    return w


def path_integral(grad_fn: Callable[[np.ndarray], np.ndarray], x, baseline, steps: int = 50) -> np.ndarray:
    """``(x - baseline) * mean gradient`` along the straight path.

    ``grad_fn`` maps a point shaped like ``x`` to a gradient whose trailing
    axes match ``x`` (leading axes, e.g. one per output, are kept).  The mean
    uses the trapezoid rule on ``steps`` equal intervals.
    """
    x = np.asarray(x, dtype=float)
    baseline = np.asarray(baseline, dtype=float)
    if x.shape != baseline.shape:
        raise ShapeError(f"baseline shape {baseline.shape} differs from input shape {x.shape}")
    if steps < 1:
        raise ConfigError("steps must be >= 1")
    diff = x - baseline
    total = None
    for alpha, w in zip(np.linspace(0.0, 1.0, steps + 1), trapezoid_weights(steps)):
        g = w * np.asarray(grad_fn(baseline + alpha * diff))
        total = g if total is None else total + g
    return diff * total


def _require_gradients(model):
    model.require("exposes_gradients")


def _check_aggregation(mode):
    if mode not in AGGREGATIONS:
        raise ConfigError(f"unknown aggregation {mode!r}; choose from {AGGREGATIONS}")


def saliency(model, prompt: str, target: str, aggregation: str = "sum") -> EmbeddingAttribution:
    """Gradient of the target log-probability at the actual prompt embeddings."""
    _require_gradients(model)
    _check_aggregation(aggregation)
    tokens, emb = model.embed_text(prompt)
    target_tokens, ids = model.encode_target(target)
    rows = model.target_grads_from_embeddings(emb, ids)
    return EmbeddingAttribution(tokens, target_tokens, rows, aggregation)


def embedding_baseline(model, prompt_emb: np.ndarray, baseline) -> np.ndarray:
    """Resolve a baseline: None (zeros), a token string (its embedding per position) or an array."""
    if baseline is None:
        return np.zeros_like(prompt_emb)
    if isinstance(baseline, str):
        return np.tile(model.embedding_of(baseline), (prompt_emb.shape[0], 1))
    baseline = np.asarray(baseline, dtype=float)
    if baseline.shape != prompt_emb.shape:
        raise ShapeError(f"baseline shape {baseline.shape} differs from input shape {prompt_emb.shape}")
    return baseline


def integrated_gradients(
    model, prompt: str, target: str, baseline=None, steps: int = 50, aggregation: str = "sum"
) -> EmbeddingAttribution:
    """Integrated gradients from ``baseline`` embeddings to the prompt's."""
    _require_gradients(model)
    _check_aggregation(aggregation)
    tokens, emb = model.embed_text(prompt)
    target_tokens, ids = model.encode_target(target)
    base = embedding_baseline(model, emb, baseline)
    rows = path_integral(lambda e: model.target_grads_from_embeddings(e, ids), emb, base, steps)
    return EmbeddingAttribution(tokens, target_tokens, rows, aggregation)


def completeness_gap(model, prompt: str, target: str, attribution: EmbeddingAttribution, baseline=None) -> float:
    """``|sum of attributions - (f(X) - f(B))|`` for the summed target log-probability."""
    _, emb = model.embed_text(prompt)
    _, ids = model.encode_target(target)
    base = embedding_baseline(model, emb, baseline)
    fx = model.target_logprobs_from_embeddings(emb, ids).sum()
    fb = model.target_logprobs_from_embeddings(base, ids).sum()
    return float(abs(attribution.per_dim.sum() - (fx - fb)))

"""Backend-neutral model interface."""

from __future__ import annotations

import math
import threading
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from ..errors import CapabilityError, ConfigError


@dataclass(frozen=True)
class Capabilities:
    scores_targets: bool = True
    generates: bool = True
    exposes_logits: bool = False
    exposes_gradients: bool = False


@dataclass(frozen=True)
class ScoredSequence:
    """Tokens with natural-log conditional probabilities."""

    tokens: tuple
    token_logprobs: tuple
    text: str = ""
    total_logprob: float = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "tokens", tuple(self.tokens))
        object.__setattr__(self, "token_logprobs", tuple(float(x) for x in self.token_logprobs))
        if len(self.tokens) != len(self.token_logprobs):
            raise ValueError("tokens and token_logprobs differ in length")
        object.__setattr__(self, "total_logprob", math.fsum(self.token_logprobs))


def entropy(probs: np.ndarray) -> float:
    p = probs[probs > 0]
    return float(-np.sum(p * np.log(p)))


def max_prob(probs: np.ndarray) -> float:
    return float(np.max(probs))


STATS: dict[str, Callable[[np.ndarray], float]] = {"entropy": entropy, "max_prob": max_prob}


class ModelHandle:
    """Uniform scoring and generation interface.

    Subclasses implement ``tokenize``, ``_score`` and whichever of
    ``_generate`` / ``_distribution`` their capability flags advertise.
    """

    model_id = "model"
    capabilities = Capabilities()

    def __init__(self):
        self._calls = 0
        self._calls_lock = threading.Lock()

    @property
    def calls(self) -> int:
        """Backend requests served so far."""
        return self._calls

    def _count(self):
        with self._calls_lock:
            self._calls += 1

    def require(self, name: str) -> None:
        if not getattr(self.capabilities, name):
            raise CapabilityError(f"backend {self.model_id!r} does not support {name}")

    def tokenize(self, text: str) -> list[str]:
        raise NotImplementedError

    def score_target(self, prompt: str, target: str) -> ScoredSequence:
        """Teacher-forced log-probabilities of ``target`` after ``prompt``."""
        self.require("scores_targets")
        if target == "":
            return ScoredSequence((), ())
        self._count()
        return self._score(prompt, target)

    def generate_greedy(self, prompt: str, max_tokens: int, stop=None) -> ScoredSequence:
        self.require("generates")
        if max_tokens < 1:
            raise ConfigError(f"max_tokens must be >= 1, got {max_tokens}")
        self._count()
        return self._generate(prompt, int(max_tokens), tuple(stop or ()))

    def next_token_distribution(self, prompt: str) -> tuple[list[str], np.ndarray]:
        self.require("exposes_logits")
        self._count()
        return self._distribution(prompt)

    def output_stat(self, prompt: str, stat) -> float:
        """Apply ``stat`` (callable or name in ``STATS``) to the next-token distribution."""
        if isinstance(stat, str):
            if stat not in STATS:
                raise ConfigError(f"unknown statistic {stat!r}; choose from {sorted(STATS)}")
            stat = STATS[stat]
        _, probs = self.next_token_distribution(prompt)
        return float(stat(probs))

    def _score(self, prompt, target):
        raise NotImplementedError

    def _generate(self, prompt, max_tokens, stop):
        raise NotImplementedError

    def _distribution(self, prompt):
        raise NotImplementedError

    def close(self):
        pass

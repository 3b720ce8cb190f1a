"""Table-driven mock language model for deterministic tests and demos."""

from __future__ import annotations

import math
from collections.abc import Callable, Mapping
from dataclasses import dataclass

import numpy as np

from ..errors import ConfigError, TokenizationError
from .base import Capabilities, ModelHandle, ScoredSequence


@dataclass(frozen=True)
class MockRule:
    """Next-token probabilities for every context containing all of
    ``contains`` and ending with ``ends_with``."""

    next: Mapping
    contains: tuple = ()
    ends_with: str = ""

    def matches(self, context: str) -> bool:
        return context.endswith(self.ends_with) and all(s in context for s in self.contains)


class MockModel(ModelHandle):
    """Conditional table ``(context, next token) -> probability``.

    Lookup order for a context: exact ``table`` entry, then the first matching
    rule, then ``fn(context)``.  Mass the entry leaves undeclared is spread
    uniformly over the remaining vocabulary; a context with no entry is
    uniform.  Tokenization is greedy longest match over the vocabulary.
    """

    capabilities = Capabilities(scores_targets=True, generates=True, exposes_logits=True)

    def __init__(
        self,
        vocab,
        table: Mapping | None = None,
        rules=(),
        fn: Callable[[str], Mapping | None] | None = None,
        eos: str = "<eos>",
        model_id: str = "mock",
    ):
        super().__init__()
        self.vocab = list(vocab)
        if len(set(self.vocab)) != len(self.vocab):
            raise ConfigError("mock vocabulary has duplicate tokens")
        self.index = {t: i for i, t in enumerate(self.vocab)}
        self.eos = eos
        self.model_id = model_id
        self.table = {ctx: dict(nxt) for ctx, nxt in (table or {}).items()}
        self.rules = [r if isinstance(r, MockRule) else MockRule(**r) for r in rules]
        self.fn = fn
        for entry in list(self.table.values()) + [r.next for r in self.rules]:
            self._expand(entry)
        self._by_length = sorted((t for t in self.vocab if t and t != eos), key=len, reverse=True)

    def _expand(self, declared: Mapping) -> np.ndarray:
        probs = np.zeros(len(self.vocab))
        for tok, p in declared.items():
            if tok not in self.index:
                raise ConfigError(f"mock table token {tok!r} not in vocabulary")
            if p < 0:
                raise ConfigError(f"negative probability for {tok!r}")
            probs[self.index[tok]] = p
        mass = float(probs.sum())
        if mass > 1 + 1e-9:
            raise ConfigError(f"declared probabilities sum to {mass} > 1")
        rest = [i for i, t in enumerate(self.vocab) if t not in declared]
        if rest:
            probs[rest] = max(0.0, 1.0 - mass) / len(rest)
        elif abs(mass - 1) > 1e-9:
            raise ConfigError("declared probabilities cover the vocabulary but do not sum to 1")
        return probs

    def distribution(self, context: str) -> np.ndarray:
        if context in self.table:
            return self._expand(self.table[context])
        for rule in self.rules:
            if rule.matches(context):
                return self._expand(rule.next)
        if self.fn is not None:
            declared = self.fn(context)
            if declared is not None:
                return self._expand(declared)
        return np.full(len(self.vocab), 1.0 / len(self.vocab))

    def tokenize(self, text: str) -> list[str]:
        tokens, pos = [], 0
        while pos < len(text):
            for tok in self._by_length:
                if text.startswith(tok, pos):
                    tokens.append(tok)
                    pos += len(tok)
                    break
            else:
                raise TokenizationError(f"no vocabulary token matches {text[pos:pos + 20]!r} at offset {pos}")
        return tokens

    def _score(self, prompt, target):
        tokens = self.tokenize(target)
        context, logprobs = prompt, []
        for tok in tokens:
            p = self.distribution(context)[self.index[tok]]
            logprobs.append(math.log(p) if p > 0 else -math.inf)
            context += tok
        return ScoredSequence(tokens, logprobs, text=target)

    def _generate(self, prompt, max_tokens, stop):
        context, tokens, logprobs = prompt, [], []
        for _ in range(max_tokens):
            probs = self.distribution(context)
            # argmax returns the first maximum, i.e. the lowest token id
            idx = int(np.argmax(probs))
            tok = self.vocab[idx]
            if tok == self.eos or tok in stop:
                break
            tokens.append(tok)
            logprobs.append(math.log(probs[idx]))
            context += tok
        return ScoredSequence(tokens, logprobs, text="".join(tokens))

    def _distribution(self, prompt):
        return list(self.vocab), self.distribution(prompt)

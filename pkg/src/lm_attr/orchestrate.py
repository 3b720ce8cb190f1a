"""Bind a template input, a model, a method and a target into one attribution run."""

from __future__ import annotations

import json
import math
import time
from dataclasses import dataclass, field

import jsonschema
import numpy as np

from . import grad, perturb
from . import rng as rngmod
from .errors import ConfigError, GenerationError, SchemaError, SizeError, TokenizationError
from .features import TemplateInput, perturbed_prompt, sample_baseline
from .model.cache import cached

PERTURBATION_METHODS = ("ablation", "shapley-exact", "shapley-sampling", "lime", "kernel-shap")
GRADIENT_METHODS = ("saliency", "integrated-gradients")
METHODS = PERTURBATION_METHODS + GRADIENT_METHODS

HYPERPARAMETERS = {
    "ablation": (),
    "shapley-exact": ("max_groups",),
    "shapley-sampling": ("n_permutations", "antithetic"),
    "lime": ("n_samples", "kernel_width", "regularization", "exhaustive"),
    "kernel-shap": ("n_samples", "exhaustive"),
    "saliency": ("aggregation",),
    "integrated-gradients": ("steps", "baseline", "aggregation"),
}


@dataclass(frozen=True)
class MostLikely:
    """Attribute the greedy decode of the original prompt."""

    max_tokens: int = 25
    stop: tuple = ()

    def __post_init__(self):
        if self.max_tokens < 1:
            raise ConfigError("max_tokens must be >= 1")


@dataclass(frozen=True)
class FixedString:
    text: str

    def __post_init__(self):
        if not self.text:
            raise ConfigError("target string must be non-empty")


@dataclass(frozen=True)
class OutputStat:
    """A statistic of the next-token distribution, e.g. ``entropy``."""

    name: str = "entropy"


def as_target_spec(target):
    if target is None:
        return MostLikely()
    if isinstance(target, str):
        return FixedString(target)
    if isinstance(target, (MostLikely, FixedString, OutputStat)):
        return target
    raise ConfigError(f"unsupported target {target!r}")


RESULT_SCHEMA = {
    "type": "object",
    "required": ["version", "features", "target_tokens", "matrix", "totals", "meta"],
    "properties": {
        "version": {"const": 1},
        "features": {"type": "array", "items": {"type": "string"}},
        "target_tokens": {"type": "array", "items": {"type": "string"}},
        "matrix": {"type": "array", "items": {"type": "array", "items": {"type": ["number", "null"]}}},
        "totals": {"type": "array", "items": {"type": ["number", "null"]}},
        "meta": {
            "type": "object",
            "required": ["method", "seed", "model", "evaluations", "wall_ms"],
            "properties": {
                "method": {"type": "string"},
                "seed": {"type": ["integer", "null"]},
                "model": {"type": "string"},
                "evaluations": {"type": "integer", "minimum": 0},
                "wall_ms": {"type": ["number", "null"]},
            },
        },
    },
}


def _json_float(x):
    x = float(x)
    return None if math.isnan(x) else x


@dataclass
class AttributionResult:
    """Score matrix with rows = target tokens and columns = feature groups."""

    features: list
    target_tokens: list
    matrix: np.ndarray
    meta: dict = field(default_factory=dict)
    totals: np.ndarray = field(init=False)

    def __post_init__(self):
        self.features = [str(f) for f in self.features]
        self.target_tokens = [str(t) for t in self.target_tokens]
        self.matrix = np.asarray(self.matrix, dtype=float).reshape(len(self.target_tokens), len(self.features))
        self.totals = self.matrix.sum(axis=0)

    def to_dict(self, timing: bool = False) -> dict:
        meta = dict(self.meta)
        if not timing:
            meta["wall_ms"] = None
        return {
            "version": 1,
            "features": self.features,
            "target_tokens": self.target_tokens,
            "matrix": [[_json_float(v) for v in row] for row in self.matrix],
            "totals": [_json_float(v) for v in self.totals],
            "meta": meta,
        }

    def to_json(self, timing: bool = False) -> str:
        """Stable JSON text; wall time is written only when ``timing`` is set."""
        return json.dumps(self.to_dict(timing), indent=2, ensure_ascii=False) + "\n"

    @classmethod
    def from_dict(cls, doc: dict) -> AttributionResult:
        try:
            jsonschema.validate(doc, RESULT_SCHEMA)
        except jsonschema.ValidationError as exc:
            raise SchemaError(exc.message, exc.json_path) from exc
        rows, cols = len(doc["target_tokens"]), len(doc["features"])
        if len(doc["matrix"]) != rows or any(len(r) != cols for r in doc["matrix"]):
            raise SchemaError(f"matrix must be {rows} x {cols}", "$.matrix")
        matrix = [[math.nan if v is None else v for v in row] for row in doc["matrix"]]
        return cls(doc["features"], doc["target_tokens"], np.array(matrix, dtype=float).reshape(rows, cols), doc["meta"])

    @classmethod
    def from_json(cls, text: str) -> AttributionResult:
        try:
            doc = json.loads(text)
        except ValueError as exc:
            raise SchemaError(f"not valid JSON: {exc}") from exc
        return cls.from_dict(doc)

    def plot_token_attr(self, path=None, **kwargs):
        from .render import plot_heatmap

        return plot_heatmap(self, path, **kwargs)


def resolve_target(model, input: TemplateInput, spec) -> tuple[str, list[str]]:
    """Target text and per-token labels.  A greedy target is decoded once
    from the original prompt and then held fixed."""
    spec = as_target_spec(spec)
    if isinstance(spec, OutputStat):
        model.require("exposes_logits")
        return spec.name, [spec.name]
    prompt = input.original()
    if isinstance(spec, MostLikely):
        decoded = model.generate_greedy(prompt, spec.max_tokens, spec.stop)
        if not decoded.tokens or not decoded.text:
            raise GenerationError("greedy decode of the original prompt produced no tokens")
        text = decoded.text
    else:
        text = spec.text
    labels = list(model.score_target(prompt, text).tokens)
    if not labels:
        raise TokenizationError(f"target {text!r} tokenizes to nothing")
    return text, labels


def evaluation_budget(method: str, n_groups: int, **hyper) -> int:
    """Number of model evaluations a perturbation or gradient run will request."""
    g = n_groups
    _check_method(method, hyper)
    if method == "ablation":
        return g + 1
    if method == "shapley-exact":
        cap = hyper.get("max_groups") or perturb.EXACT_CAP
        if g > cap:
            raise SizeError(
                f"shapley-exact over {g} groups needs 2^{g} evaluations, above the cap of 2^{cap} "
                f"({1 << cap}); use shapley-sampling"
            )
        return 1 << g
    if method == "shapley-sampling":
        n = hyper.get("n_permutations") or 25
        if hyper.get("antithetic"):
            n *= 2
        return n * g + 1
    if method in ("lime", "kernel-shap"):
        n = hyper.get("n_samples")
        exhaustive = hyper.get("exhaustive")
        if exhaustive is None:
            exhaustive = n is None and g <= 10
        if exhaustive:
            return 1 << g
        return (n or perturb.default_samples(g)) + 2
    if method == "saliency":
        return 1
    return (hyper.get("steps") or 50) + 1


def _check_method(method, hyper):
    if method not in METHODS:
        raise ConfigError(f"unknown method {method!r}; valid methods: {', '.join(METHODS)}")
    unknown = sorted(set(hyper) - set(HYPERPARAMETERS[method]))
    if unknown:
        raise ConfigError(f"method {method!r} does not take {unknown}; accepted: {list(HYPERPARAMETERS[method])}")


def _perturbation_scores(method, f, seed, hyper):
    hyper = {k: v for k, v in hyper.items() if v is not None}
    if method == "ablation":
        return perturb.feature_ablation(f)
    if method == "shapley-exact":
        return perturb.shapley_exact(f, **hyper)
    if method == "shapley-sampling":
        return perturb.shapley_sampling(f, seed=seed, **hyper)
    if method == "lime":
        return perturb.lime(f, seed=seed, **hyper)
    return perturb.kernel_shap(f, seed=seed, **hyper)


def attribute(
    model,
    input: TemplateInput,
    method: str = "ablation",
    target=None,
    seed: int = 0,
    workers: int = 1,
    cache: bool = True,
    **hyper,
) -> AttributionResult:
    """Attribute the target's log-probability (or statistic) to feature groups.

    Perturbation methods score the fixed target under each perturbed prompt
    with teacher forcing; every target token's conditional log-probability is
    one output row, so per-token rows and totals come from the same
    evaluations.  Gradient methods attribute to the prompt's tokens instead
    of the template's feature groups.
    """
    _check_method(method, hyper)
    started = time.perf_counter()
    handle = cached(model, enabled=cache)
    spec = as_target_spec(target)

    if method in GRADIENT_METHODS:
        if isinstance(spec, OutputStat):
            raise ConfigError("gradient methods need a text target, not an output statistic")
        handle.require("exposes_gradients")
        text, _ = resolve_target(handle, input, spec)
        prompt = input.original()
        if method == "saliency":
            attr = grad.saliency(handle, prompt, text, **hyper)
            evaluations = 1
        else:
            hyper = {k: v for k, v in hyper.items() if v is not None}
            attr = grad.integrated_gradients(handle, prompt, text, **hyper)
            evaluations = hyper.get("steps", 50) + 1
        features, labels, matrix = attr.tokens, attr.target_tokens, attr.row_per_token
    else:
        text, labels = resolve_target(handle, input, spec)
        stat = spec.name if isinstance(spec, OutputStat) else None
        fixed_draw = None if input.baselines.is_random else sample_baseline(input.baselines, None)

        def evaluate(present, index):
            draw = fixed_draw
            if draw is None:
                draw = sample_baseline(input.baselines, rngmod.stream(seed, rngmod.BASELINE, index))
            prompt = perturbed_prompt(input, present, draw)
            if stat is not None:
                return [handle.output_stat(prompt, stat)]
            seq = handle.score_target(prompt, text)
            if len(seq.tokens) != len(labels):
                raise TokenizationError(
                    f"target tokenized into {len(seq.tokens)} tokens after {prompt!r}, "
                    f"expected {len(labels)}; the prompt/target seam is unstable"
                )
            return seq.token_logprobs

        f = perturb.SetFunction(evaluate, input.n_groups, indexed=True, workers=workers)
        scores = _perturbation_scores(method, f, seed, hyper)
        features, matrix, evaluations = input.group_labels(), scores.matrix, f.evaluations

    meta = {
        "method": method,
        "seed": int(seed),
        "model": str(model.model_id),
        "evaluations": int(evaluations),
        "wall_ms": round((time.perf_counter() - started) * 1000.0, 3),
        "target": text,
    }
    return AttributionResult(features, labels, matrix, meta)


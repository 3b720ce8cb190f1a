"""JSON config documents: schema, validation and object construction."""

from __future__ import annotations

import json
from pathlib import Path

import jsonschema

from .errors import ConfigError, SchemaError
from .features import BaselineSpec, TemplateInput
from .orchestrate import METHODS, FixedString, MostLikely, OutputStat
from .model.base import STATS

_str_list = {"type": "array", "items": {"type": "string"}}

MODEL_SCHEMAS = {
    "mock": {
        "properties": {
            "type": {"const": "mock"},
            "vocab": {**_str_list, "minItems": 1},
            "table": {
                "type": "object",
                "additionalProperties": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
            },
            "rules": {
                "type": "array",
                "items": {
                    "type": "object",
                    "required": ["next"],
                    "properties": {
                        "contains": _str_list,
                        "ends_with": {"type": "string"},
                        "next": {"type": "object", "additionalProperties": {"type": "number", "minimum": 0}},
                    },
                    "additionalProperties": False,
                },
            },
            "eos": {"type": "string"},
            "id": {"type": "string"},
        },
        "required": ["type", "vocab"],
    },
    "toylm": {
        "properties": {
            "type": {"const": "toylm"},
            "seed": {"type": "integer", "minimum": 0},
            "vocab_file": {"type": "string"},
            "vocab": _str_list,
            "embedding_dim": {"type": "integer", "minimum": 1, "maximum": 16},
        },
        "required": ["type"],
    },
    "http": {
        "properties": {
            "type": {"const": "http"},
            "base_url": {"type": "string"},
            "model": {"type": "string"},
            "timeout_s": {"type": "number", "exclusiveMinimum": 0},
            "max_retries": {"type": "integer", "minimum": 0},
            "backoff_s": {"type": "number", "minimum": 0},
        },
        "required": ["type", "base_url", "model"],
    },
    "subprocess": {
        "properties": {
            "type": {"const": "subprocess"},
            "command": {**_str_list, "minItems": 1},
            "timeout_s": {"type": "number", "exclusiveMinimum": 0},
        },
        "required": ["type", "command"],
    },
}

_text_or_list = {"oneOf": [{"type": "string"}, {**_str_list, "minItems": 1}]}

CONFIG_SCHEMA = {
    "$schema": "https://json-schema.org/draft/2020-12/schema",
    "type": "object",
    "required": ["model", "method", "input"],
    "additionalProperties": False,
    "properties": {
        "model": {
            "type": "object",
            "required": ["type"],
            "properties": {"type": {"enum": sorted(MODEL_SCHEMAS)}},
            "allOf": [
                {
                    "if": {"properties": {"type": {"const": name}}},
                    "then": {**schema, "additionalProperties": False},
                }
                for name, schema in MODEL_SCHEMAS.items()
            ],
        },
        "method": {
            "type": "object",
            "required": ["name"],
            "additionalProperties": False,
            "properties": {
                "name": {"enum": list(METHODS)},
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                "max_groups": {"type": "integer", "minimum": 1},
                "n_permutations": {"type": "integer", "minimum": 1},
                "antithetic": {"type": "boolean"},
                "n_samples": {"type": "integer", "minimum": 1},
                "exhaustive": {"type": "boolean"},
                "kernel_width": {"type": "number", "exclusiveMinimum": 0},
                "regularization": {
                    "type": "object",
                    "required": ["kind"],
                    "additionalProperties": False,
                    "properties": {
                        "kind": {"enum": ["none", "ridge", "lasso"]},
                        "lambda": {"type": "number", "minimum": 0},
                    },
                },
                "steps": {"type": "integer", "minimum": 1},
                "baseline": {"type": ["string", "null"]},
                "aggregation": {"enum": ["sum", "l2"]},
            },
        },
        "input": {
            "type": "object",
            "required": ["template", "values"],
            "additionalProperties": False,
            "properties": {
                "template": {"type": "string"},
                "values": {"oneOf": [_str_list, {"type": "object", "additionalProperties": {"type": "string"}}]},
                "baselines": {
                    "oneOf": [
                        _str_list,
                        {
                            "type": "object",
                            "required": ["product"],
                            "additionalProperties": False,
                            "properties": {
                                "product": {
                                    "type": "object",
                                    "additionalProperties": {
                                        "type": "array",
                                        "minItems": 1,
                                        "items": {"oneOf": [{"type": "string"}, _str_list]},
                                    },
                                }
                            },
                        },
                        {
                            "type": "object",
                            "not": {"required": ["product"]},
                            "additionalProperties": _text_or_list,
                        },
                    ]
                },
                "mask": {
                    "oneOf": [
                        {"type": "array", "items": {"type": ["integer", "string"]}},
                        {"type": "object", "additionalProperties": {"type": ["integer", "string"]}},
                    ]
                },
            },
        },
        "target": {
            "type": "object",
            "required": ["type"],
            "properties": {"type": {"enum": ["most_likely", "string", "stat"]}},
            "allOf": [
                {
                    "if": {"properties": {"type": {"const": "most_likely"}}},
                    "then": {
                        "properties": {
                            "type": True,
                            "max_tokens": {"type": "integer", "minimum": 1},
                            "stop": _str_list,
                        },
                        "additionalProperties": False,
                    },
                },
                {
                    "if": {"properties": {"type": {"const": "string"}}},
                    "then": {
                        "required": ["text"],
                        "properties": {"type": True, "text": {"type": "string", "minLength": 1}},
                        "additionalProperties": False,
                    },
                },
                {
                    "if": {"properties": {"type": {"const": "stat"}}},
                    "then": {
                        "required": ["name"],
                        "properties": {"type": True, "name": {"enum": sorted(STATS)}},
                        "additionalProperties": False,
                    },
                },
            ],
        },
    },
}

_validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)


def validate_config(doc) -> dict:
    """Raise :class:`SchemaError` with a JSON path for the most relevant violation."""
    error = jsonschema.exceptions.best_match(_validator.iter_errors(doc))
    if error is not None:
        raise SchemaError(error.message, error.json_path)
    return doc


def load_config(path) -> dict:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    try:
        doc = json.loads(text)
    except ValueError as exc:
        raise SchemaError(f"not valid JSON: {exc}") from exc
    return validate_config(doc)


def build_model(section: dict, timeout_s: float | None = None):
    kind = section.get("type")
    if kind == "mock":
        from .model.mock import MockModel

        return MockModel(
            section["vocab"],
            table=section.get("table"),
            rules=[
                {**r, "contains": tuple(r.get("contains", ()))} for r in section.get("rules", ())
            ],
            eos=section.get("eos", "<eos>"),
            model_id=section.get("id", "mock"),
        )
    if kind == "toylm":
        from .toylm import ToyLM

        seed, dim = section.get("seed", 0), section.get("embedding_dim", 8)
        if "vocab_file" in section:
            return ToyLM.from_vocab_file(section["vocab_file"], seed=seed, embedding_dim=dim)
        return ToyLM(seed=seed, vocab=section.get("vocab"), embedding_dim=dim)
    if kind == "http":
        from .model.http import OpenAICompletionsModel

        return OpenAICompletionsModel(
            section["base_url"],
            section["model"],
            timeout_s=timeout_s or section.get("timeout_s", 120.0),
            max_retries=section.get("max_retries", 3),
            backoff_base=section.get("backoff_s", 0.5),
        )
    if kind == "subprocess":
        from .model.subproc import SubprocessModel

        return SubprocessModel(section["command"], timeout_s=timeout_s or section.get("timeout_s", 120.0))
    raise ConfigError(f"unknown model type {kind!r}; choose from {sorted(MODEL_SCHEMAS)}")


def _slot_key(key: str, positional: bool):
    if positional:
        if not key.isdigit():
            raise SchemaError(f"positional template expects numeric slot keys, got {key!r}", "$.input")
        return int(key)
    return key


def _joint_key(key: str, positional: bool):
    parts = [p.strip() for p in key.split(",")]
    if len(parts) == 1:
        return _slot_key(parts[0], positional)
    return tuple(_slot_key(p, positional) for p in parts)


def build_input(section: dict) -> TemplateInput:
    values = section["values"]
    positional = isinstance(values, list)
    baselines = section.get("baselines")
    if isinstance(baselines, dict):
        if "product" in baselines:
            mapping = {}
            for key, options in baselines["product"].items():
                k = _joint_key(key, positional)
                mapping[k] = [tuple(o) if isinstance(o, list) else o for o in options]
            baselines = BaselineSpec.product(mapping)
        else:
            baselines = {_slot_key(k, positional): v for k, v in baselines.items()}
    mask = section.get("mask")
    if isinstance(mask, dict):
        mask = {_joint_key(k, positional): v for k, v in mask.items()}
    return TemplateInput(section["template"], values, baselines=baselines, mask=mask)


def build_target(section: dict | None):
    if not section or section["type"] == "most_likely":
        section = section or {}
        return MostLikely(section.get("max_tokens", 25), tuple(section.get("stop", ())))
    if section["type"] == "string":
        return FixedString(section["text"])
    return OutputStat(section["name"])


def method_params(section: dict) -> tuple[str, int, dict]:
    hyper = {k: v for k, v in section.items() if k not in ("name", "seed")}
    return section["name"], int(section.get("seed", 0)), hyper

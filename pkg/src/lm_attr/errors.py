"""Exception hierarchy shared by every module."""


class LMAttrError(Exception):
    """Base class for all errors raised by lm_attr."""


class ConfigError(LMAttrError):
    """Invalid user configuration (maps to CLI exit code 2)."""


class ArityError(ConfigError):
    """Slot assignment does not match the template's slots."""


class MaskConflictError(ConfigError):
    """A slot was assigned to more than one feature group."""


class BaselineError(ConfigError):
    """Baseline specification is malformed or does not cover the slots."""


class SchemaError(ConfigError):
    """A config or result document failed schema validation."""

    def __init__(self, message, path="$"):
        super().__init__(f"{path}: {message}")
        self.path = path


class CapabilityError(LMAttrError):
    """The model backend lacks a capability the operation requires."""


class SizeError(LMAttrError):
    """Problem too large for an exact method."""


class RankError(LMAttrError):
    """Regression system is rank deficient."""

    def __init__(self, message, columns=()):
        super().__init__(message)
        self.columns = tuple(columns)


class ShapeError(LMAttrError):
    """Array shapes are incompatible."""


class TokenizationError(LMAttrError):
    """Text cannot be tokenized by the backend."""


class VocabularyError(LMAttrError):
    """A token id lies outside the model vocabulary."""


class GenerationError(LMAttrError):
    """Decoding produced no usable output."""


class TransportError(LMAttrError):
    """A remote or child-process backend failed (maps to CLI exit code 3)."""


class RenderError(LMAttrError):
    """A result cannot be rendered."""


class EvaluationError(LMAttrError):
    """A set-function evaluation failed; carries the include set."""

    def __init__(self, present, cause):
        super().__init__(f"evaluation failed for include set {sorted(present)}: {cause}")
        self.present = frozenset(present)
        self.cause = cause

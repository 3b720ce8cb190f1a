"""Feature attribution for generative text models."""

from .features import BaselineSpec, ProductBaselines, TemplateInput, perturbed_prompt, sample_baseline
from .grad import aggregate, integrated_gradients, saliency
from .model.base import ModelHandle, ScoredSequence
from .model.cache import cached
from .model.mock import MockModel, MockRule
from .orchestrate import (
    AttributionResult,
    FixedString,
    MostLikely,
    OutputStat,
    attribute,
    evaluation_budget,
    resolve_target,
)
from .perturb import (
    SetFunction,
    feature_ablation,
    kernel_shap,
    lime,
    shapley_exact,
    shapley_sampling,
    solve_weighted_ls,
)
from .toylm import ToyLM

__version__ = "0.1.0"

"""Model backends behind one scoring/generation interface."""

from .base import Capabilities, ModelHandle, ScoredSequence
from .cache import CachedModel, cached
from .mock import MockModel, MockRule

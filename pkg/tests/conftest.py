import numpy as np
import pytest

from lm_attr import TemplateInput
from lm_attr.orchestrate import AttributionResult

POSITIONAL_TEMPLATE = "{} lives in {}, {} and is a {}. {} personal interests include"
POSITIONAL_VALUES = ["Dave", "Palm Coast", "FL", "lawyer", "His"]
POSITIONAL_BASELINES = ["Sarah", "Seattle", "WA", "doctor", "Her"]

NAMED_TEMPLATE = "{name} lives in {city}, {state} and is a {occupation}. {pronoun} personal interests include"
NAMED_VALUES = {"name": "Dave", "city": "Palm Coast", "state": "FL", "occupation": "lawyer", "pronoun": "His"}
NAMED_BASELINES = {"name": "Sarah", "city": "Seattle", "state": "WA", "occupation": "doctor", "pronoun": "Her"}

# rows: features; columns: Golfing, Hiking, Cooking
INTERESTS = [
    ("(Name) Dave", [0.4660, -0.2640, -0.4515]),
    ("(City) Palm Coast", [1.0810, -0.8762, -0.2699]),
    ("(State) FL", [0.6070, -0.3620, -0.3513]),
    ("(Occupation) lawyer", [0.7584, -0.1966, 0.0331]),
    ("(Pronoun) His", [0.2217, -0.0650, -0.2577]),
]

SENTIMENT = [
    ("'The movie was ok, the actors weren't great' -> Negative", -0.0413),
    ("'I loved it, it was an amazing story!' -> Positive", -0.2751),
    ("'Total waste of time!!' -> Negative", -0.2085),
    ("'Won't recommend' -> Negative", -0.0399),
]


@pytest.fixture
def positional_input():
    return TemplateInput(POSITIONAL_TEMPLATE, POSITIONAL_VALUES, baselines=POSITIONAL_BASELINES)


@pytest.fixture
def named_input():
    return TemplateInput(NAMED_TEMPLATE, NAMED_VALUES, baselines=NAMED_BASELINES)


def interests_result():
    features = [name for name, _ in INTERESTS]
    matrix = np.array([row for _, row in INTERESTS]).T
    meta = {"method": "shapley-sampling", "seed": 0, "model": "fixture-interests", "evaluations": 0, "wall_ms": None}
    return AttributionResult(features, ["Golfing", "Hiking", "Cooking"], matrix, meta)


def sentiment_result():
    meta = {"method": "shapley-exact", "seed": 0, "model": "fixture-sentiment", "evaluations": 16, "wall_ms": None}
    return AttributionResult([e for e, _ in SENTIMENT], ["Positive"], [[v for _, v in SENTIMENT]], meta)


@pytest.fixture
def interests():
    return interests_result()


@pytest.fixture
def sentiment():
    return sentiment_result()


def pytest_terminal_summary(terminalreporter):
    from . import test_acceptance

    if test_acceptance.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in test_acceptance.RESULTS:
            terminalreporter.write_line(line)

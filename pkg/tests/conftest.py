import numpy as np
import pytest

FIXTURE_PROMPTS = [
    "a dog on the beach",
    "a surfboard on the beach",
    "a dog in the park",
    "the beach at sunset",
]


@pytest.fixture
def prompts():
    return list(FIXTURE_PROMPTS)


@pytest.fixture
def np_rng():
    return np.random.default_rng(20261014)

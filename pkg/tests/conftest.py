"""Shared fixtures: small-tick configs, bundle accessors, prompt recording."""

import random

import pytest

from vignette.harness.bundle import (
    DINNER_CONFIG,
    DINNER_SEED,
    dinner_gateway,
    dinner_spec,
    dinner_trace,
)
from vignette.harness.generate import generate_spec
from vignette.llm.gateway import Gateway
from vignette.llm.providers import ScriptedMockProvider
from vignette.runtime import RuntimeConfig


class RecordingProvider:
    """Wraps a provider and keeps every rendered prompt it was sent."""

    def __init__(self, inner):
        self.inner = inner
        self.calls = []  # (template_id, prompt, variables)

    def generate(self, template_id, prompt, variables, temperature=0.0, output_schema_id=""):
        self.calls.append((template_id, prompt, dict(variables)))
        return self.inner.generate(
            template_id, prompt, variables, temperature, output_schema_id
        )

    def prompts_for(self, template_id):
        return [p for t, p, _ in self.calls if t == template_id]

    def __getattr__(self, name):  # moderate, provider_id, ...
        return getattr(self.inner, name)


@pytest.fixture
def small_config():
    return RuntimeConfig(
        activity_duration=10, idle_divergence_ticks=4, inner_voice_cooldown=8
    )


@pytest.fixture
def mock_gateway():
    return Gateway(ScriptedMockProvider())


@pytest.fixture
def recording_gateway():
    provider = RecordingProvider(ScriptedMockProvider())
    return Gateway(provider), provider


@pytest.fixture(scope="session")
def bundle_spec():
    return dinner_spec()


@pytest.fixture(scope="session")
def bundle_trace():
    return dinner_trace()


@pytest.fixture
def bundle_gateway():
    return dinner_gateway()


@pytest.fixture
def bundle_config():
    return DINNER_CONFIG


@pytest.fixture
def bundle_seed():
    return DINNER_SEED


@pytest.fixture(scope="session")
def spec_pool():
    """Five generated vignettes shared by the heavier suites."""
    return [generate_spec(seed) for seed in (11, 23, 37, 51, 64)]


@pytest.fixture
def rng():
    return random.Random(2026)

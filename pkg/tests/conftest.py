import hypothesis
import numpy as np
import pytest

from ctxd_scdv import synth

hypothesis.settings.register_profile(
    "default", max_examples=50, deadline=None,
    suppress_health_check=[hypothesis.HealthCheck.too_slow],
)
hypothesis.settings.load_profile("default")


@pytest.fixture(scope="session")
def small_planted():
    """60-doc planted corpus, cheap enough for per-module tests."""
    spec = synth.PlantedSpec(docs_per_class=30, doc_length=20, vocab_size=30,
                             ambiguous_word_count=6, dim=12, seed=7)
    return synth.generate(spec)


@pytest.fixture(scope="session")
def default_planted():
    """Acceptance-scale planted corpus (2 classes x 200 docs)."""
    return synth.generate(synth.PlantedSpec())


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

import numpy as np
import pytest

from signagent.synth import SynthConfig, build_fixture


@pytest.fixture(scope="session")
def small_fixture():
    return build_fixture(SynthConfig(seed=3, n_glosses=20, n_sentences=4, n_idgloss=2))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

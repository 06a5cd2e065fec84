import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from modedse.codec import clear_cache
from modedse.media_io import synthesize_sequence

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_seq():
    return synthesize_sequence("moving_block", 64, 64, 2, seed=3)


@pytest.fixture(scope="session")
def train_seqs():
    return [synthesize_sequence(k, 64, 64, 2, seed=i) for i, k in enumerate(("moving_block", "gradient", "noise"))]


@pytest.fixture(autouse=True, scope="module")
def _fresh_cache():
    clear_cache()
    yield


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for n in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[n])

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from unrolled_jadce import signal_model as sm

settings.register_profile(
    "repo", max_examples=40, deadline=None, suppress_health_check=[HealthCheck.too_slow]
)
settings.load_profile("repo")

ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def small_system():
    """Lifted 6 x 12 system from a 3 x 6 complex Gaussian preamble."""
    return sm.gen_preamble("gaussian", 3, 6, seed=5).lifted


@pytest.fixture(scope="session")
def desk_dataset():
    return sm.synth_dataset(sm.DatasetConfig(p_train=16, n_test=32))

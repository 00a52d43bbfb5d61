import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from chirpfit.signal import ChirpModel, NoiseSpec, add, generate_noise, synthesize_clean

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))


def noisy(model, n, sigma2, seed):
    return add(synthesize_clean(model, n), generate_noise(NoiseSpec(sigma2=sigma2, seed=seed), n))


@pytest.fixture
def single():
    return ChirpModel.from_tuples([(5.0, 0.0, 0.5)])


@pytest.fixture
def two_comp():
    # amplitudes 7 and 5 at rates 1.0 and 0.5
    return ChirpModel.from_tuples([(7.0, 0.0, 1.0), (5.0, 0.0, 0.5)])


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


# filled by the acceptance suite, echoed after the run even when output is captured
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)

import numpy as np
import pytest

from monoreg import ModelConfig, RawSeries, standardize

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def fast_config(**overrides) -> ModelConfig:
    """Small but functional MCMC settings for unit tests."""
    defaults = dict(n_iter=600, n_burn=300, thin=3, seed=7)
    defaults.update(overrides)
    return ModelConfig(**defaults)


def toy_dataset(n=40, slope=1.0, noise=0.1, seed=0, **kwargs):
    rng = np.random.default_rng(seed)
    x = np.sort(rng.uniform(0, 1, n))
    y = slope * x + rng.normal(0, noise, n)
    return standardize(RawSeries(times=x, values=y), **kwargs)

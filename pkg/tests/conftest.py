import numpy as np
import pytest

from codine.net import TrainConfig
from codine.oracle import AwgnSpec, sample_copula
from codine.trainer import train

# d=2, rho=0.5, 0 dB
SPEC_D2 = AwgnSpec.from_db(2, 0.0, 0.5)


@pytest.fixture(scope="session")
def oracle_pseudo_d2():
    return sample_copula(SPEC_D2, 10_000, 123)


@pytest.fixture(scope="session")
def oracle_model_d2(oracle_pseudo_d2):
    return train(oracle_pseudo_d2, "kl", TrainConfig(seed=0))


@pytest.fixture(scope="session")
def independence_model():
    u = np.random.default_rng(99).random((10_000, 2))
    return train(u, "kl", TrainConfig(seed=1))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS:
            terminalreporter.write_line(line)

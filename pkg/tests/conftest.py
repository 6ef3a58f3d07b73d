import numpy as np
import pytest

from amtransfer import data


@pytest.fixture(scope="session")
def target_task():
    return data.DEFAULT_TASKS["target"]


@pytest.fixture(scope="session")
def target24(target_task):
    return data.generate_synthetic(target_task, 24, seed=101)


@pytest.fixture(scope="session")
def source40(target_task):
    # drawn from the target task's generator: an ideal-transfer source
    return data.generate_synthetic(target_task, 40, seed=202)


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(12345)

import numpy as np
import pytest


@pytest.fixture(autouse=True)
def _seed_numpy_legacy():
    # some tests use np.random for scratch data; pin it so failures replay
    np.random.seed(0)
    yield

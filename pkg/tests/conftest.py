import numpy as np
import pytest

from css_envelope import config


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def ref_cfg():
    return config.load(config.bundled("reference"))


@pytest.fixture(scope="session")
def cx_cfg():
    return config.load(config.bundled("counterexample"))

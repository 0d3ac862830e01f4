import numpy as np
import pytest

from lipforge.spaces import lp_space


@pytest.fixture(scope="session")
def l2_2():
    return lp_space(2, 2)


@pytest.fixture(scope="session")
def linf_2():
    return lp_space(2, "inf")


@pytest.fixture(scope="session")
def l1_2():
    return lp_space(2, 1)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)

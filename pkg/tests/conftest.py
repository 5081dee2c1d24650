import numpy as np
import pytest

from ncsr.profile import polynomial_profile, validate_profile


@pytest.fixture(scope="session")
def z2():
    return polynomial_profile([0.0, 0.0, 1.0])


@pytest.fixture(scope="session")
def z4():
    return polynomial_profile([0.0, 0.0, 0.0, 0.0, 1.0])


@pytest.fixture(scope="session")
def z4z2():
    return polynomial_profile([0.0, 0.0, 1.0, 0.0, 1.0])


@pytest.fixture(scope="session")
def asym():
    # z^2 on the left, z^2 + z^3/2 + z^4/4 on the right: C^1 at 0, trivial, not even
    return validate_profile([(-np.inf, [0.0, 0.0, 1.0]), (0.0, [0.0, 0.0, 1.0, 0.5, 0.25])])


@pytest.fixture(scope="session")
def double_well():
    return polynomial_profile([1.0, 0.0, -2.0, 0.0, 1.0])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)

import numpy as np
import pytest

from dppss.wavelets import daubechies2_cascade


@pytest.fixture(scope="session")
def db2():
    return daubechies2_cascade(10)


@pytest.fixture(scope="session")
def db2_hires():
    return daubechies2_cascade(13)


@pytest.fixture()
def rng():
    return np.random.default_rng(20240817)

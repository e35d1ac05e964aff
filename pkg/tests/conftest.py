import numpy as np
import pytest

import fkwc.testing
from fkwc import FunctionalDataset, Grid

# not a test class despite the name
fkwc.testing.TestConfig.__test__ = False
fkwc.testing.TestResult.__test__ = False


@pytest.fixture
def grid101():
    return Grid.regular(101)


@pytest.fixture
def grid21():
    return Grid.regular(21)


@pytest.fixture
def two_group_dataset(grid101):
    rng = np.random.default_rng(424242)
    curves = rng.normal(size=(30, grid101.m))
    return FunctionalDataset(grid101, curves, [1] * 15 + [2] * 15)

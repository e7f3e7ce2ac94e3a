import numpy as np
import pytest

import spillfree as sf


@pytest.fixture(scope="session")
def params():
    # desk-scale tank: 1 m long, half full, walls at twice the fill level
    return sf.PhysicalParams(g=9.81, mu=0.1, L=1.0, m=0.5, H_max=1.0)


@pytest.fixture(scope="session")
def grid(params):
    return sf.Grid(201, params.L)


@pytest.fixture(scope="session")
def fparams():
    return sf.FunctionalParams(delta=1.0, q=1.0, k=0.05, beta=1.0, gamma=1.0)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)

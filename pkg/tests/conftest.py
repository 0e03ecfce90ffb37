import numpy as np
import pytest

from sphdvr import RadialMap, build_grid, build_operators


@pytest.fixture(scope="session")
def hydrogen_ops():
    # rational map used throughout for the hydrogen checks
    return build_operators(build_grid(200), RadialMap.rational(200.0, 20.0))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)

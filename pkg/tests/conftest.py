import numpy as np
import pytest
from hypothesis import settings

from fiberpath.geometry import SDSS_ARM, SDSS_PITCH, AngularPose
from fiberpath.grid import assign_random_targets, build_hex_grid, set_folded_destination

# first calls hit the on-disk JIT cache; wall-clock deadlines only add noise
settings.register_profile("fiberpath", deadline=None)
settings.load_profile("fiberpath")

FOLD = AngularPose(10.0, 170.0)


@pytest.fixture(scope="session")
def grid19():
    return build_hex_grid(19, SDSS_PITCH, SDSS_ARM, 2.5)


@pytest.fixture(scope="session")
def grid19_tight():
    return build_hex_grid(19, SDSS_PITCH, SDSS_ARM, 3.5)


@pytest.fixture(scope="session")
def grid37():
    return build_hex_grid(37, SDSS_PITCH, SDSS_ARM, 2.5)


@pytest.fixture()
def configured19(grid19):
    config = assign_random_targets(grid19, 42)
    set_folded_destination(config, FOLD)
    return config


@pytest.fixture(scope="session")
def rng():
    return np.random.default_rng(20260810)

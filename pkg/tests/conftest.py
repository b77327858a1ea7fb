import numpy as np
import pytest

from sarinv.geometry import ViewConfig
from sarinv.scene import DsmSurface


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)


@pytest.fixture
def flat_surface():
    return DsmSurface(heights=np.full((8, 8), 0.3))


@pytest.fixture
def bumpy_surface():
    gen = np.random.default_rng(11)
    return DsmSurface(heights=np.clip(0.3 + 0.12 * gen.standard_normal((8, 8)),
                                      0.02, 0.98))


@pytest.fixture
def small_view():
    """A cheap but fully valid acquisition for unit tests."""
    return ViewConfig.for_scene(
        azimuth_heading=0.0,
        incidence=np.pi / 4,
        n_planes=6,
        n_range_bins=64,
        n_rays=16,
    )

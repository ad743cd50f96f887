import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from pyrocell import Landscape
from pyrocell.data_io import slope_from_altitude


def make_random_landscape(n, m=None, seed=0, max_wind=5.0):
    """Small random landscape with finite, in-range fields."""
    m = n if m is None else m
    rng = np.random.default_rng(seed)
    altitude = rng.uniform(0.0, 60.0, (n, m))
    return Landscape(
        wind_speed=rng.uniform(0.0, max_wind, (n, m)),
        wind_direction=rng.uniform(0.0, 360.0, (n, m)),
        slope=slope_from_altitude(altitude, 30.0),
        canopy=rng.uniform(-0.3, 0.3, (n, m)),
        density=rng.uniform(-0.3, 0.3, (n, m)),
    )


def make_flat_landscape(n, m=None):
    m = n if m is None else m
    zeros = np.zeros((n, m))
    return Landscape(
        wind_speed=zeros.copy(),
        wind_direction=zeros.copy(),
        slope=np.zeros((n, m, 3, 3)),
        canopy=zeros.copy(),
        density=zeros.copy(),
    )


@pytest.fixture
def flat9():
    return make_flat_landscape(9)


@pytest.fixture
def random16():
    return make_random_landscape(16, seed=42)

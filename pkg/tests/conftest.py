import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from fastfca.modelops import power_floor
from fastfca.types import SpatialModel


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def model_from_arrays(y, v, S):
    """Wrap raw arrays into a SpatialModel with the standard power floor."""
    floor = power_floor(y)
    return SpatialModel(v=np.maximum(v, floor[None, None, :]), S=S, v_floor=floor)

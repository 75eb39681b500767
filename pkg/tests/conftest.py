import numpy as np
import pytest

from earth4d.hashgrid import GridConfig
from earth4d.probing import ProbeConfig


@pytest.fixture
def desk_grid() -> GridConfig:
    # desk profile: 8 levels, T_max 2^14, compact probe table
    return GridConfig(
        num_levels=8,
        max_rows=1 << 14,
        features_per_level=2,
        probing=ProbeConfig(table_rows=1 << 12),
    )


@pytest.fixture
def desk_grid_plain() -> GridConfig:
    return GridConfig(num_levels=8, max_rows=1 << 14, features_per_level=2)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(0)

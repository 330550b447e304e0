import numpy as np
import pytest

from hjlab.grid import Grid, GridSpec, ScalarField, make_grid


@pytest.fixture
def grid_1d() -> Grid:
    return make_grid(GridSpec(1, 1.0, 0.25, 1.0, 0.25))


@pytest.fixture
def grid_1d_fine() -> Grid:
    return make_grid(GridSpec(1, 1.0, 0.0625, 1.0, 0.125))


def random_field(grid: Grid, seed: int, scale: float = 1.0) -> ScalarField:
    rng = np.random.default_rng(seed)
    vals = scale * rng.normal(size=(grid.n_levels,) + grid.shape)
    vals[:, ~grid.active] = 0.0
    return ScalarField(grid, vals)

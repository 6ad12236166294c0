"""Shared fixtures: small grids, seeded drivers, semigroup tables."""

import os
import sys

import numpy as np
import pytest

sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), "src"))

from roughmild.models import Grid, Path, QSpectrum  # noqa: E402
from roughmild.rough_core import enhance_piecewise_linear  # noqa: E402
from roughmild.semigroup import build_semigroup, laplacian_1d  # noqa: E402
from roughmild.stochastic_drivers import sample_q_fbm, sample_q_wiener  # noqa: E402


@pytest.fixture
def grid():
    return Grid(1.0, 32)


@pytest.fixture
def spectrum():
    return QSpectrum.polynomial(2.0, 2)


@pytest.fixture
def fbm_driver(grid, spectrum):
    return sample_q_fbm(spectrum, 0.4, grid, seed=3)


@pytest.fixture
def ito_driver(grid, spectrum):
    return sample_q_wiener(spectrum, grid, fine_factor=16, seed=5)


@pytest.fixture
def smooth_rough(grid):
    """Piecewise-linear lift of (sin 2t, cos 3t)."""
    t = grid.points
    values = np.column_stack([np.sin(2.0 * t), np.cos(3.0 * t)])
    return enhance_piecewise_linear(Path(grid, values), 0.45)


@pytest.fixture
def heat_table(grid):
    return build_semigroup(laplacian_1d(8), grid)

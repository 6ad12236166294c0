import numpy as np
import pytest

from roughmild.errors import (
    ConfigError,
    ContractError,
    DimensionMismatchError,
    IndexRangeError,
    ParameterError,
    RoughMildError,
    SolverFailure,
)
from roughmild.models import (
    ITO_WIENER,
    OPERATOR,
    CheckResult,
    CoincidenceSweep,
    ControlledPath,
    DriverSample,
    Grid,
    Path,
    QSpectrum,
    RoughPath,
    SolveConfig,
    check_rough_alpha,
)


def test_grid_points_and_window():
    grid = Grid(2.0, 8)
    assert grid.step == pytest.approx(0.25)
    assert grid.points[-1] == pytest.approx(2.0)
    sub = grid.window(2, 6)
    assert sub.n_steps == 4
    assert sub.origin == pytest.approx(0.5)
    assert sub.step == pytest.approx(grid.step)
    assert grid.steps_within(0.5) == 2


@pytest.mark.parametrize("horizon, steps", [(0.0, 4), (-1.0, 4), (float("inf"), 4), (1.0, 0)])
def test_grid_rejects_bad_parameters(horizon, steps):
    with pytest.raises(ParameterError):
        Grid(horizon, steps)


def test_grid_window_must_be_ordered():
    with pytest.raises(ParameterError):
        Grid(1.0, 4).window(3, 3)


def test_path_validates_length_and_finiteness():
    grid = Grid(1.0, 4)
    with pytest.raises(DimensionMismatchError):
        Path(grid, np.zeros(4))
    with pytest.raises(ParameterError):
        Path(grid, [0.0, 1.0, np.nan, 0.0, 0.0])
    path = Path(grid, np.arange(5.0))
    assert path.shape == (1,)
    assert not path.values.flags.writeable


def test_rough_path_checks_area_shape():
    grid = Grid(1.0, 4)
    first = Path(grid, np.zeros((5, 2)))
    with pytest.raises(DimensionMismatchError):
        RoughPath(first, np.zeros((4, 2, 3)), 0.4)
    with pytest.raises(ParameterError):
        RoughPath(first, np.zeros((4, 2, 2)), 0.3)


def test_controlled_path_shape_and_role_contracts(smooth_rough):
    grid = smooth_rough.grid
    n = grid.n_steps + 1
    y = Path(grid, np.zeros((n, 3)))
    with pytest.raises(DimensionMismatchError):
        ControlledPath(smooth_rough, y, Path(grid, np.zeros((n, 3, 1))), 0.4)
    with pytest.raises(ContractError):
        ControlledPath(smooth_rough, y, Path(grid, np.zeros((n, 3, 2))), 0.4, OPERATOR)
    with pytest.raises(ContractError):
        ControlledPath(smooth_rough, y, Path(grid, np.zeros((n, 3, 2))), 0.4, "scalar")


@pytest.mark.parametrize("alpha", [1.0 / 3.0, 0.2, 0.51])
def test_alpha_outside_rough_range(alpha):
    with pytest.raises(ParameterError):
        check_rough_alpha(alpha)


def test_check_result_upper_bound():
    ok = CheckResult.upper_bound("c", 1, 1.0, 1.0 - 1e-12)
    assert ok.passed and ok.instance_id == "1"
    bad = CheckResult.upper_bound("c", 1, 1.0, 0.5)
    assert not bad.passed and bad.slack == pytest.approx(-0.5)
    assert not CheckResult.upper_bound("c", 1, float("inf"), 1.0).passed


def test_spectrum_sorted_and_normalized():
    spectrum = QSpectrum([0.25, 1.0])
    assert list(spectrum.eigenvalues) == [1.0, 0.25]
    poly = QSpectrum.polynomial(2.0, 6)
    assert poly.trace == pytest.approx(1.0)
    assert poly.d == 6
    with pytest.raises(ParameterError):
        QSpectrum([1.0, 0.0])


def test_driver_sample_kind_contracts(smooth_rough):
    with pytest.raises(ContractError):
        DriverSample(smooth_rough, "levy", 0.5, 1, 0)
    with pytest.raises(ContractError):
        DriverSample(smooth_rough, ITO_WIENER, 0.4, 16, 0)


@pytest.mark.parametrize("kwargs", [
    {"picard_tol": 0.0},
    {"max_picard_iters": 0},
    {"initial_window": 1.5},
    {"initial_iterate": "zero"},
    {"convolution_rule": "midpoint"},
    {"alpha": 0.6},
])
def test_solve_config_validation(kwargs):
    with pytest.raises(ParameterError):
        SolveConfig(**kwargs)


def test_coincidence_sweep_monotonicity():
    assert CoincidenceSweep((1, 2, 3), (0.3, 0.2, 0.1), (0.3, 0.2, 0.1)).decreasing
    assert not CoincidenceSweep((1, 2, 3), (0.3, 0.4, 0.1), (0.3, 0.4, 0.1)).decreasing


def test_error_hierarchy():
    assert issubclass(ParameterError, ValueError)
    assert issubclass(IndexRangeError, IndexError)
    assert issubclass(ConfigError, RoughMildError)
    assert str(ConfigError("bad key", 7)).startswith("line 7: ")
    failure = SolverFailure("stuck", [1.0, 0.5], (0, 4))
    assert failure.history == [1.0, 0.5] and failure.window == (0, 4)

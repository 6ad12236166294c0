import numpy as np
import pytest

from roughmild.controlled import constant_controlled, driver_as_controlled
from roughmild.errors import ContractError, ParameterError
from roughmild.gubinelli import (
    integral_as_controlled,
    rough_integral,
    rough_integral_path,
    sewing_constant,
    sewing_rate_probe,
    sewing_slope,
)
from roughmild.models import OPERATOR, Grid, Path
from roughmild.presets import sine_integrand
from roughmild.rough_core import enhance_piecewise_linear


def smooth_lift(n_steps: int, alpha: float = 0.45):
    grid = Grid(1.0, n_steps)
    t = grid.points
    return enhance_piecewise_linear(Path(grid, np.column_stack([np.sin(2.0 * t), np.cos(3.0 * t)])), alpha)


def test_constant_integrand_integrates_increment(fbm_driver):
    rough = fbm_driver.rough
    c = np.array([[1.0, 2.0], [-1.0, 0.5], [0.0, 3.0]])
    cp = constant_controlled(rough, c, role=OPERATOR)
    np.testing.assert_allclose(rough_integral(cp, 0, rough.n_steps),
                               c @ rough.first_level.increment(0, rough.n_steps), atol=1e-13)
    assert rough_integral(cp, 7, 7).shape == (3,)


def test_sine_integral_matches_antiderivative():
    rough = smooth_lift(256)
    x = rough.first_level.values
    integral = rough_integral(sine_integrand(rough), 0, rough.n_steps)
    np.testing.assert_allclose(integral, np.cos(x[0]) - np.cos(x[-1]), atol=1e-3)


def test_integral_is_additive(fbm_driver):
    cp = sine_integrand(fbm_driver.rough)
    path = rough_integral_path(cp)
    assert np.all(path[0] == 0.0)
    np.testing.assert_allclose(path[20] - path[6], rough_integral(cp, 6, 20), atol=1e-13)


def test_state_paths_are_rejected(fbm_driver):
    with pytest.raises(ContractError):
        rough_integral(driver_as_controlled(fbm_driver.rough), 0, 4)


def test_sewing_probe_rate_on_smooth_driver():
    rough = smooth_lift(256)
    probe = sewing_rate_probe(sine_integrand(rough), 0, 256, 6)
    assert probe.shape == (7, 2)
    assert probe[0, 0] == pytest.approx(1.0)
    assert sewing_slope(probe) >= 3.0 * rough.alpha - 0.1


def test_sewing_probe_needs_dyadic_range(fbm_driver):
    cp = sine_integrand(fbm_driver.rough)
    with pytest.raises(ParameterError):
        sewing_rate_probe(cp, 0, 24, 3)
    with pytest.raises(ParameterError):
        sewing_rate_probe(cp, 0, 32, 6)


def test_sewing_probe_stops_before_single_steps(fbm_driver):
    probe = sewing_rate_probe(sine_integrand(fbm_driver.rough), 0, 32, 5)
    assert probe.shape[0] == 5
    assert probe[-1, 0] == pytest.approx(2 * fbm_driver.rough.grid.step)


def test_integral_as_controlled(fbm_driver):
    cp = sine_integrand(fbm_driver.rough)
    z = integral_as_controlled(cp)
    assert z.y_prime is cp.y
    assert 0.0 <= sewing_constant(cp, z) < np.inf
    constant = constant_controlled(fbm_driver.rough, np.eye(2), role=OPERATOR)
    assert sewing_constant(constant, integral_as_controlled(constant)) <= 1e-9

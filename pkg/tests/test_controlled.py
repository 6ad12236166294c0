import numpy as np
import pytest

from roughmild.controlled import (
    CoefficientField,
    bilinear_constant,
    bilinear_remainder_terms,
    compose_bilinear,
    compose_linear,
    compose_smooth,
    constant_controlled,
    controlled_difference,
    controlled_norms,
    driver_as_controlled,
    empirical_time_lipschitz,
    load_controlled,
    pair,
    remainder,
    remainder_norm,
    restrict_controlled,
    save_controlled,
)
from roughmild.errors import CoefficientEvaluationError, ContractError, DimensionMismatchError
from roughmild.models import OPERATOR, STATE, ControlledPath, Grid, Path
from roughmild.rough_core import holder_norm


def sine_state(rough) -> ControlledPath:
    """Y = sin(X) componentwise, Y' = diag(cos X)."""
    x = rough.first_level.values
    yp = np.zeros(x.shape + (rough.d,))
    idx = np.arange(rough.d)
    yp[:, idx, idx] = np.cos(x)
    return ControlledPath(rough, Path(rough.grid, np.sin(x)), Path(rough.grid, yp), rough.alpha, STATE)


def outer_field(d: int, m: int = 2) -> CoefficientField:
    w = np.linspace(0.5, 1.5, d)
    return CoefficientField(m=m, d=d, f=lambda t, y: np.outer(np.sin(y), w))


def test_driver_has_zero_remainder(fbm_driver):
    cp = driver_as_controlled(fbm_driver.rough)
    assert remainder_norm(cp) <= 1e-12
    assert np.allclose(cp.y_prime.values[5], np.eye(fbm_driver.rough.d))


def test_constant_path_norms(smooth_rough):
    cp = constant_controlled(smooth_rough, [3.0, 4.0])
    norms = controlled_norms(cp)
    assert norms.seminorm == 0.0
    assert norms.full == pytest.approx(5.0)


def test_remainder_matches_definition(fbm_driver):
    cp = sine_state(fbm_driver.rough)
    x = fbm_driver.rough.first_level.values
    expected = np.sin(x[9]) - np.sin(x[4]) - np.cos(x[4]) * (x[9] - x[4])
    np.testing.assert_allclose(remainder(cp, 4, 9), expected, atol=1e-14)


def test_norm_of_y_bounded_by_derivative_and_remainder(fbm_driver):
    rough = fbm_driver.rough
    norms = controlled_norms(sine_state(rough))
    x_norm = holder_norm(rough.first_level, rough.alpha)
    bound = norms.y_prime_sup * x_norm + norms.remainder_2alpha * rough.grid.horizon ** rough.alpha
    assert norms.y_alpha <= bound + 1e-12


def test_analytic_and_finite_difference_derivatives_agree(smooth_rough):
    base = outer_field(2)
    w = np.linspace(0.5, 1.5, 2)

    def df(t, y):
        out = np.zeros((2, 2, 2))
        idx = np.arange(2)
        out[idx, :, idx] = np.cos(y)[:, None] * w
        return out

    analytic = CoefficientField(m=2, d=2, f=base.f, df=df)
    cp = sine_state(smooth_rough)
    fd = compose_smooth(base, cp)
    exact = compose_smooth(analytic, cp)
    assert exact.role == OPERATOR
    np.testing.assert_allclose(fd.y.values, exact.y.values)
    np.testing.assert_allclose(fd.y_prime.values, exact.y_prime.values, atol=1e-7)


def test_coefficient_evaluation_errors():
    broken = CoefficientField(m=2, d=1, f=lambda t, y: np.full((2, 1), np.nan))
    with pytest.raises(CoefficientEvaluationError) as info:
        broken.eval_f(0.5, np.zeros(2))
    assert info.value.t == 0.5
    wrong = CoefficientField(m=2, d=1, f0=lambda t, y: np.zeros(3))
    with pytest.raises(DimensionMismatchError):
        wrong.eval_f0(0.0, np.zeros(2))


def test_compose_smooth_needs_state_path(smooth_rough):
    operator = compose_smooth(outer_field(2), sine_state(smooth_rough))
    with pytest.raises(ContractError):
        compose_smooth(outer_field(2), operator)


def test_linear_composition_commutes_with_remainder(fbm_driver):
    cp = sine_state(fbm_driver.rough)
    phi = np.array([[1.0, -2.0], [0.5, 0.0], [0.0, 3.0]])
    image = compose_linear(phi, cp)
    np.testing.assert_allclose(remainder(image, 3, 20), phi @ remainder(cp, 3, 20), atol=1e-13)
    op = np.linalg.norm(phi, ord=2)
    assert controlled_norms(image).seminorm <= op * controlled_norms(cp).seminorm * (1 + 1e-12)
    with pytest.raises(DimensionMismatchError):
        compose_linear(np.ones((2, 3)), cp)


def test_time_lipschitz_of_linear_family():
    grid = Grid(1.0, 16)
    family = grid.points[:, None, None] * np.eye(2)[None]
    assert empirical_time_lipschitz(family, grid, 0.4) == pytest.approx(1.0)


def test_bilinear_remainder_identity(fbm_driver):
    rough = fbm_driver.rough
    cp1 = sine_state(rough)
    cp2 = driver_as_controlled(rough)
    b = np.arange(8.0).reshape(2, 2, 2) / 8.0
    for i, j in ((0, 32), (5, 6), (10, 27)):
        lhs, rhs = bilinear_remainder_terms(b, cp1, cp2, i, j)
        np.testing.assert_allclose(lhs, rhs, atol=1e-12)
    assert compose_bilinear(b, cp1, cp2).m == 2
    assert 0.0 < bilinear_constant(b, cp1, cp2) < np.inf


def test_pair_and_difference(fbm_driver, smooth_rough):
    cp = sine_state(fbm_driver.rough)
    joined = pair(cp, driver_as_controlled(fbm_driver.rough))
    assert joined.y.shape == (4,)
    assert joined.y_prime.shape == (4, 2)
    zero = controlled_difference(cp, cp)
    assert np.all(zero.y.values == 0.0)
    with pytest.raises(ContractError):
        pair(cp, sine_state(smooth_rough))


def test_restriction_keeps_remainders(fbm_driver):
    cp = sine_state(fbm_driver.rough)
    window = restrict_controlled(cp, 8, 24)
    np.testing.assert_allclose(remainder(window, 1, 10), remainder(cp, 9, 18), atol=1e-14)


def test_controlled_file_round_trip(tmp_path, fbm_driver):
    cp = compose_smooth(outer_field(2), sine_state(fbm_driver.rough))
    target = tmp_path / "solution.txt"
    save_controlled(cp, target, {"preset": "demo"})
    loaded, meta = load_controlled(target)
    assert meta == {"preset": "demo"}
    assert loaded.role == OPERATOR
    np.testing.assert_array_equal(loaded.y.values, cp.y.values)
    np.testing.assert_array_equal(loaded.y_prime.values, cp.y_prime.values)

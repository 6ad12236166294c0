import numpy as np
import pytest

from roughmild.convolution import (
    convolution_decomposition_probe,
    decomposition_gap,
    decomposition_slopes,
    regular_convolution,
    regular_convolution_bound,
    regular_convolution_path,
    rough_convolution,
    rough_convolution_controlled,
    rough_convolution_path,
    twisted_prefactor_check,
)
from roughmild.errors import DimensionMismatchError, ParameterError
from roughmild.gubinelli import rough_integral_path
from roughmild.models import Grid, Path
from roughmild.presets import sine_integrand
from roughmild.semigroup import build_semigroup, diagonal_generator, nonnormal_generator, zero_generator


@pytest.fixture
def integrand(fbm_driver):
    return sine_integrand(fbm_driver.rough)


@pytest.fixture
def coupled_table(grid):
    return build_semigroup(nonnormal_generator(2, 1.0), grid)


def test_zero_generator_reduces_to_rough_integral(grid, integrand):
    flat = build_semigroup(zero_generator(2), grid)
    np.testing.assert_allclose(rough_convolution_path(flat, integrand), rough_integral_path(integrand),
                               rtol=0.0, atol=1e-14)


def test_regular_convolution_rules():
    grid = Grid(1.0, 32)
    table = build_semigroup(diagonal_generator([-1.0]), grid)
    g = Path(grid, np.ones(33))
    exact = 1.0 - np.exp(-1.0)
    left = regular_convolution(table, g, 32, "left")[0]
    trapezoid = regular_convolution(table, g, 32, "trapezoid")[0]
    assert abs(trapezoid - exact) < abs(left - exact)
    assert abs(trapezoid - exact) <= 1e-3
    assert np.all(regular_convolution(table, g, 0, "trapezoid") == 0.0)
    with pytest.raises(ParameterError):
        regular_convolution(table, g, 4, "simpson")


def test_regular_convolution_with_zero_generator_is_riemann_sum(grid):
    table = build_semigroup(zero_generator(2), grid)
    g = Path(grid, np.tile([1.0, -2.0], (33, 1)))
    path = regular_convolution_path(table, g)
    np.testing.assert_allclose(path[:, 0], grid.points, atol=1e-14)
    np.testing.assert_allclose(path[:, 1], -2.0 * grid.points, atol=1e-14)


def test_exponential_rule_is_exact_for_linear_integrands(grid):
    rates = np.array([-1.0, -1e4])
    table = build_semigroup(diagonal_generator(rates), grid)
    g = Path(grid, np.outer(grid.points, [1.0, 1.0]))
    exact = -1.0 / rates + np.expm1(rates) / rates ** 2
    np.testing.assert_allclose(regular_convolution(table, g, 32, "exponential"), exact, rtol=1e-8)
    assert abs(regular_convolution(table, g, 32, "trapezoid")[1] - exact[1]) > 1e-3
    np.testing.assert_allclose(regular_convolution_path(table, g, "exponential")[32],
                               regular_convolution(table, g, 32, "exponential"))
    assert np.all(regular_convolution(table, g, 0, "exponential") == 0.0)


def test_regular_bound_reduces_to_sup_norm_without_generator(grid):
    g = Path(grid, np.sin(np.outer(grid.points, [1.0, 2.0])))
    lhs, rhs = regular_convolution_bound(build_semigroup(zero_generator(2), grid), g)
    assert rhs == pytest.approx(2.0 * np.max(np.linalg.norm(g.values, axis=1)))
    assert lhs <= rhs


def test_regular_convolution_bounds(grid, coupled_table):
    g = Path(grid, np.sin(np.outer(grid.points, [1.0, 2.0])))
    lhs, rhs = regular_convolution_bound(coupled_table, g)
    assert lhs <= rhs
    lhs, rhs = regular_convolution_bound(coupled_table, g, 0.4)
    assert lhs <= rhs


def test_decomposition_splits_exactly(coupled_table, integrand):
    n = integrand.grid.n_steps
    for i, j in ((0, n), (8, 24), (16, 32)):
        term1, term2 = convolution_decomposition_probe(coupled_table, integrand, i, j)
        gap, scale = decomposition_gap(coupled_table, integrand, i, j, term1 + term2)
        assert gap <= 1e-10 * scale
    _, term2 = convolution_decomposition_probe(coupled_table, integrand, 0, 8)
    assert np.all(term2 == 0.0)


def test_twisted_prefactors_bounded(coupled_table, integrand):
    for i, j in ((0, 32), (4, 12), (20, 21)):
        (first, bound1), (second, bound2) = twisted_prefactor_check(coupled_table, integrand, i, j)
        assert first <= bound1 * (1 + 1e-8)
        assert second <= bound2 * (1 + 1e-8)


def test_decomposition_slopes_on_smooth_integrand(smooth_rough, coupled_table):
    slope1, slope2 = decomposition_slopes(coupled_table, sine_integrand(smooth_rough))
    assert slope1 >= 0.9
    assert slope2 >= 0.9


def test_rough_convolution_controlled(coupled_table, integrand):
    out = rough_convolution_controlled(coupled_table, integrand)
    assert out.y_prime is integrand.y
    np.testing.assert_allclose(out.y.values[-1], rough_convolution(coupled_table, integrand, 32))


def test_step_mismatch_is_rejected(integrand):
    table = build_semigroup(zero_generator(2), Grid(1.0, 64))
    with pytest.raises(DimensionMismatchError):
        rough_convolution(table, integrand, 4)
    short = build_semigroup(zero_generator(2), Grid(0.5, 16))
    with pytest.raises(DimensionMismatchError):
        rough_convolution_path(short, integrand)

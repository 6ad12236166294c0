import numpy as np
import pytest

from roughmild.errors import ContractError, ParameterError, RoughPathFormatError
from roughmild.experiments import COINCIDENCE_FINAL, CONTROL_MIN_GAP
from roughmild.models import GEOMETRIC_FBM, GEOMETRIC_WIENER, ITO_WIENER, Grid, QSpectrum
from roughmild.presets import sine_integrand
from roughmild.rough_core import (
    export_full_table,
    geometric_defect_tensor,
    max_chen_defect,
    max_geometric_defect,
)
from roughmild.stochastic_drivers import (
    LINEAR_CONTROL,
    coincidence_gap,
    coincidence_sweep,
    default_alpha,
    dyadic_lengths,
    fbm_covariance,
    fbm_covariance_probe,
    ito_integral_leftpoint,
    linear_driver,
    load_driver,
    moment_scaling_probe,
    sample_driver,
    sample_q_fbm,
    sample_q_wiener,
    save_driver,
    substream,
)


def test_substreams_are_reproducible_and_distinct():
    a = substream(7, 0).normal(size=4)
    np.testing.assert_array_equal(a, substream(7, 0).normal(size=4))
    assert not np.allclose(a, substream(7, 1).normal(size=4))
    assert not np.allclose(a, substream(8, 0).normal(size=4))


def test_default_alpha():
    assert default_alpha(0.5) == pytest.approx(0.45)
    assert default_alpha(0.35) > 1.0 / 3.0


def test_same_seed_same_driver(grid, spectrum):
    a = sample_q_fbm(spectrum, 0.4, grid, seed=9).rough
    b = sample_q_fbm(spectrum, 0.4, grid, seed=9).rough
    np.testing.assert_array_equal(a.first_level.values, b.first_level.values)
    c = sample_q_fbm(spectrum, 0.4, grid, seed=10).rough
    assert not np.array_equal(a.first_level.values, c.first_level.values)


@pytest.mark.parametrize("kind", [ITO_WIENER, GEOMETRIC_WIENER, GEOMETRIC_FBM])
def test_every_driver_satisfies_chen(kind, grid, spectrum):
    sample = sample_driver(kind, spectrum, grid, seed=2, hurst=0.4)
    assert sample.kind == kind
    worst, _ = max_chen_defect(sample.rough.first_level, export_full_table(sample.rough))
    assert worst <= 1e-10


def test_geometric_enhancements_are_geometric(grid, spectrum):
    geo = sample_q_wiener(spectrum, grid, 16, seed=4, enhancement="geometric")
    assert max_geometric_defect(geo.rough) <= 1e-10
    ito = sample_q_wiener(spectrum, grid, 16, seed=4)
    np.testing.assert_array_equal(ito.rough.first_level.values, geo.rough.first_level.values)


def test_ito_defect_mean_is_half_quadratic_variation(spectrum):
    grid = Grid(1.0, 4)
    tensors = np.stack([
        geometric_defect_tensor(sample_q_wiener(spectrum, grid, 16, seed).rough, 0, 4)
        for seed in range(400)
    ])
    mean = tensors.mean(axis=0)
    se = tensors.std(axis=0, ddof=1) / np.sqrt(len(tensors))
    target = -0.5 * np.diag(spectrum.eigenvalues)
    assert np.all(np.abs(mean - target) <= 4.0 * se + 1e-12)


def test_driver_parameter_validation(grid, spectrum):
    with pytest.raises(ParameterError):
        sample_q_wiener(spectrum, grid, fine_factor=12)
    with pytest.raises(ParameterError):
        sample_q_wiener(spectrum, grid, enhancement="stratonovich")
    with pytest.raises(ParameterError):
        sample_q_fbm(spectrum, 0.6, grid)
    with pytest.raises(ParameterError):
        sample_driver("levy", spectrum, grid, 0)


def test_fbm_covariance_reduces_to_brownian():
    times = np.array([0.25, 0.5, 1.0])
    np.testing.assert_allclose(fbm_covariance(times, 0.5), np.minimum.outer(times, times))


def test_fbm_covariance_probe_within_tolerance(spectrum):
    assert fbm_covariance_probe(spectrum, 0.4, Grid(1.0, 8), n_seeds=300) <= 5.0


def test_driver_file_round_trip(tmp_path, fbm_driver):
    target = tmp_path / "driver.txt"
    save_driver(fbm_driver, target)
    loaded, table = load_driver(target)
    assert table is None
    assert loaded.kind == GEOMETRIC_FBM and loaded.seed == fbm_driver.seed
    np.testing.assert_array_equal(loaded.spectrum.eigenvalues, fbm_driver.spectrum.eigenvalues)


def test_driver_file_needs_kind(tmp_path, fbm_driver):
    target = tmp_path / "driver.txt"
    save_driver(fbm_driver, target)
    text = target.read_text().replace("kind=geometric_fbm ", "")
    target.write_text(text)
    with pytest.raises(RoughPathFormatError):
        load_driver(target)


def test_dyadic_lengths():
    assert list(dyadic_lengths(32)) == [1, 2, 4, 8, 16]


def test_linear_control_has_exact_scaling():
    spectrum = QSpectrum([1.0, 0.5])
    probe = moment_scaling_probe(LINEAR_CONTROL, spectrum, Grid(1.0, 64), p=2, n_seeds=1)
    assert probe.first_slope == pytest.approx(2.0, abs=1e-8)
    assert probe.second_slope == pytest.approx(4.0, abs=1e-8)
    assert max_geometric_defect(linear_driver(spectrum, Grid(1.0, 8))) <= 1e-12


def test_moment_probe_contracts(spectrum, grid):
    with pytest.raises(ContractError):
        moment_scaling_probe(GEOMETRIC_FBM, spectrum, grid, 2, 4)
    with pytest.raises(ParameterError):
        moment_scaling_probe(ITO_WIENER, spectrum, grid, 3, 4)


@pytest.mark.slow
def test_wiener_moment_slopes(spectrum):
    probe = moment_scaling_probe(ITO_WIENER, spectrum, Grid(1.0, 64), p=2, n_seeds=400)
    assert probe.first_slope == pytest.approx(1.0, abs=0.1)
    assert probe.second_slope == pytest.approx(2.0, abs=0.15)


def test_coincidence_needs_ito_driver(fbm_driver):
    with pytest.raises(ContractError):
        coincidence_gap(sine_integrand(fbm_driver.rough), fbm_driver)


def test_ito_leftpoint_sum_matches_explicit_loop():
    driver = sample_q_wiener(QSpectrum([1.0, 0.5]), Grid(1.0, 16), 4, seed=3)
    y = sine_integrand(driver.rough).y
    dx = driver.rough.increments
    expected = sum(y.values[k] @ dx[k] for k in range(10))
    np.testing.assert_allclose(ito_integral_leftpoint(y, driver, 10), expected)
    np.testing.assert_array_equal(ito_integral_leftpoint(y, driver, 0), np.zeros(2))


def test_coincidence_gap_shrinks_with_resolution():
    spectrum = QSpectrum([1.0])
    sweep = coincidence_sweep(sine_integrand, spectrum, 1.0, (16, 64, 256), range(20))
    assert sweep.n_steps == (16, 64, 256)
    assert sweep.decreasing
    control = coincidence_sweep(sine_integrand, spectrum, 1.0, (16, 64, 256), range(20),
                                enhancement="geometric")
    assert control.median_relative_gap[-1] > sweep.median_relative_gap[-1]
    with pytest.raises(ParameterError):
        coincidence_sweep(sine_integrand, spectrum, 1.0, (16, 24), range(2))


@pytest.mark.slow
def test_coincidence_at_full_resolution():
    spectrum = QSpectrum([1.0])
    resolutions = (256, 1024, 4096)
    sweep = coincidence_sweep(sine_integrand, spectrum, 1.0, resolutions, range(50))
    assert sweep.decreasing
    assert sweep.median_relative_gap[-1] <= COINCIDENCE_FINAL
    control = coincidence_sweep(sine_integrand, spectrum, 1.0, resolutions, range(50),
                                enhancement="geometric")
    assert control.median_relative_gap[-1] >= CONTROL_MIN_GAP

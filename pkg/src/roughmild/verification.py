"""Structural check suites behind ``roughmild verify``.

Each suite returns a list of CheckResult rows (check_id, instance_id,
lhs, rhs, slack, pass). A row passes when rhs - lhs >= -1e-10; slope
checks are written as (target, fitted slope) so the same rule applies.
"""

import logging
from typing import Callable, Dict, Iterator, List, Tuple

import numpy as np

from .config import RunConfig
from .controlled import (
    compose_linear,
    controlled_norms,
    pair,
)
from .convolution import (
    convolution_decomposition_probe,
    decomposition_gap,
    decomposition_slopes,
    regular_convolution_bound,
    rough_convolution_path,
    twisted_prefactor_check,
)
from .errors import InvariantViolation, RoughMildError
from .gubinelli import rough_integral_path, sewing_rate_probe, sewing_slope
from .models import (
    GEOMETRIC_FBM,
    GEOMETRIC_WIENER,
    ITO_WIENER,
    STATE,
    CheckResult,
    ControlledPath,
    Grid,
    Path,
    QSpectrum,
    RoughPath,
)
from .presets import sine_integrand
from .rough_core import (
    STRUCTURAL_TOL,
    enhance_piecewise_linear,
    export_full_table,
    holder_report,
    max_chen_defect,
    max_geometric_defect,
    scaling_bound_sides,
)
from .semigroup import (
    build_semigroup,
    generator_consistency_slope,
    graph_norm,
    integral_identity_residual,
    laplacian_1d,
    nonnormal_generator,
    orbit_lipschitz_check,
    quad_estimate_check,
    restricted_envelope_check,
    semigroup_law_defect,
    zero_generator,
)
from .stochastic_drivers import (
    WIENER_ALPHA,
    default_alpha,
    load_driver,
    sample_q_fbm,
    sample_q_wiener,
    substream,
)

logger = logging.getLogger(__name__)

RATIO_TOL = 1e-8
SLOPE_MARGIN = 0.1
SEMIGROUP_SIZE = 8
CONSISTENCY_STEPS = 256
CONVOLUTION_COUPLING = 1.0

Suite = Callable[[RunConfig], List[CheckResult]]


def _slope_row(check_id: str, instance_id: str, slope: float, target: float) -> CheckResult:
    return CheckResult.upper_bound(check_id, instance_id, target, slope, tol=0.0)


def _seeds(config: RunConfig, salt: int) -> List[int]:
    return [config.run.seed * 1000 + salt * 100 + k for k in range(config.verify.instances)]


# ─────────────────────────────────────────────────────────────────────────────
# Drivers shared by the rough-path suites
# ─────────────────────────────────────────────────────────────────────────────


def _piecewise_linear(grid: Grid, d: int, seed: int, alpha: float) -> RoughPath:
    rng = substream(seed, d + 1)
    steps = rng.normal(0.0, np.sqrt(grid.step), (grid.n_steps, d))
    values = np.concatenate([np.zeros((1, d)), np.cumsum(steps, axis=0)])
    return enhance_piecewise_linear(Path(grid, values), alpha)


def structural_drivers(config: RunConfig, salt: int = 0) -> Iterator[Tuple[str, RoughPath, bool]]:
    """(instance_id, rough path, geometric?) for every driver kind the suites sweep."""
    v = config.verify
    grid = Grid(config.grid.horizon, v.steps)
    spectrum = QSpectrum.polynomial(2.0, 4)
    for seed in _seeds(config, salt):
        yield f"piecewise_linear/seed={seed}", _piecewise_linear(grid, 4, seed, WIENER_ALPHA), True
        ito = sample_q_wiener(spectrum, grid, config.driver.fine_factor, seed)
        yield f"{ITO_WIENER}/seed={seed}", ito.rough, False
        geo = sample_q_wiener(spectrum, grid, config.driver.fine_factor, seed, enhancement="geometric")
        yield f"{GEOMETRIC_WIENER}/seed={seed}", geo.rough, True
        for hurst in v.hursts:
            fbm = sample_q_fbm(spectrum, hurst, grid, seed)
            yield f"{GEOMETRIC_FBM}/H={hurst}/seed={seed}", fbm.rough, True


# ─────────────────────────────────────────────────────────────────────────────
# Rough-path suites
# ─────────────────────────────────────────────────────────────────────────────


def chen_suite(config: RunConfig) -> List[CheckResult]:
    rows = []
    for instance, rough, _ in structural_drivers(config, salt=1):
        worst, where = max_chen_defect(rough.first_level, export_full_table(rough))
        logger.debug("chen %s: %.3e at %s", instance, worst, where)
        rows.append(CheckResult.upper_bound("chen_defect", instance, worst, STRUCTURAL_TOL, tol=0.0))
    return rows


def geometric_suite(config: RunConfig) -> List[CheckResult]:
    rows = []
    for instance, rough, geometric in structural_drivers(config, salt=2):
        if geometric:
            rows.append(CheckResult.upper_bound("geometric_defect", instance,
                                                max_geometric_defect(rough), STRUCTURAL_TOL, tol=0.0))
    return rows


def scaling_suite(config: RunConfig) -> List[CheckResult]:
    alpha, beta = config.verify.alpha, config.verify.beta
    rows = []
    for instance, rough, _ in structural_drivers(config, salt=3):
        lhs, rhs = scaling_bound_sides(rough, alpha, beta)
        rows.append(CheckResult.upper_bound("scaling_bound", instance, lhs, rhs, tol=1e-12))
    return rows


def random_controlled(rough: RoughPath, p: int, seed: int) -> ControlledPath:
    """Y = tanh(B X) + c t with Y' = diag(1 - tanh^2(B X)) B."""
    rng = substream(seed, 1000 + p)
    b = rng.normal(0.0, 1.0, (p, rough.d))
    c = rng.normal(0.0, 1.0, p)
    x = rough.first_level.values
    inner = np.tanh(x @ b.T)
    t = rough.grid.points - rough.grid.origin
    y = inner + np.outer(t, c)
    yp = (1.0 - inner ** 2)[:, :, None] * b[None]
    return ControlledPath(rough, Path(rough.grid, y), Path(rough.grid, yp), rough.alpha, STATE)


def norms_suite(config: RunConfig) -> List[CheckResult]:
    """Norm inequalities for controlled paths on [0, T] with T <= 1, plus linear and pair bounds."""
    rows = []
    if config.grid.horizon > 1.0:
        logger.warning("norm inequalities assume T <= 1; running on T = 1 instead")
    grid = Grid(min(config.grid.horizon, 1.0), config.verify.steps)
    spectrum = QSpectrum.polynomial(2.0, 3)
    for seed in _seeds(config, salt=4):
        for hurst in config.verify.hursts:
            rough = sample_q_fbm(spectrum, hurst, grid, seed).rough
            instance = f"H={hurst}/seed={seed}"
            cp = random_controlled(rough, 3, seed)
            norms = controlled_norms(cp)
            x_norm = holder_report(rough, rough.alpha).combined
            rows.append(CheckResult.upper_bound("norm_y_prime_sup", instance,
                                                norms.y_prime_sup, norms.pointed))
            rows.append(CheckResult.upper_bound("norm_y_alpha", instance,
                                                norms.y_alpha, norms.pointed * (x_norm + 1.0)))
            rows.append(CheckResult.upper_bound("norm_y_sup", instance,
                                                norms.y_sup, norms.full * (x_norm + 2.0)))

            phi = substream(seed, 2000).normal(0.0, 1.0, (2, 3))
            image = controlled_norms(compose_linear(phi, cp))
            op = float(np.linalg.norm(phi, ord=2))
            rows.append(CheckResult.upper_bound("linear_full", instance, image.full, op * norms.full))
            rows.append(CheckResult.upper_bound("linear_seminorm", instance,
                                                image.seminorm, op * norms.seminorm))

            other = random_controlled(rough, 2, seed + 1)
            joined = controlled_norms(pair(cp, other))
            rows.append(CheckResult.upper_bound("pair_seminorm", instance, joined.seminorm,
                                                norms.seminorm + controlled_norms(other).seminorm))
    return rows


def sewing_suite(config: RunConfig) -> List[CheckResult]:
    v = config.verify
    grid = Grid(config.grid.horizon, v.sewing_steps)
    spectrum = QSpectrum.polynomial(2.0, 2)
    rows = []
    for seed in _seeds(config, salt=5)[:1]:
        cases = [(f"{GEOMETRIC_FBM}/H={h}", sample_q_fbm(spectrum, h, grid, seed).rough, default_alpha(h))
                 for h in v.hursts]
        ito = sample_q_wiener(spectrum, grid, config.driver.fine_factor, seed)
        cases.append((ITO_WIENER, ito.rough, WIENER_ALPHA))
        for name, rough, alpha in cases:
            probe = sewing_rate_probe(sine_integrand(rough), 0, grid.n_steps, v.sewing_levels)
            rows.append(_slope_row("sewing_slope", f"{name}/seed={seed}",
                                   sewing_slope(probe), 3.0 * alpha - SLOPE_MARGIN))
    return rows


# ─────────────────────────────────────────────────────────────────────────────
# Semigroup suite
# ─────────────────────────────────────────────────────────────────────────────


def _smooth_mode(m: int) -> np.ndarray:
    return np.sin(np.pi * np.arange(1, m + 1) / (m + 1))


def semigroup_suite(config: RunConfig) -> List[CheckResult]:
    v = config.verify
    grid = Grid(config.grid.horizon, v.quad_steps)
    horizon = grid.horizon
    generators = {
        "laplacian1d": laplacian_1d(SEMIGROUP_SIZE),
        "nonnormal": nonnormal_generator(SEMIGROUP_SIZE, config.semigroup.coupling),
        "zero": zero_generator(SEMIGROUP_SIZE),
    }
    rows = []
    for name, a_matrix in generators.items():
        table = build_semigroup(a_matrix, grid)
        bound1 = table.envelope(horizon) * (1.0 + RATIO_TOL)
        bound2 = table.growth_m * np.exp(2.0 * table.growth_omega * horizon) * (1.0 + RATIO_TOL)
        rng = substream(config.run.seed, 3000 + len(rows))
        law = max(semigroup_law_defect(table, j, k)
                  for j, k in rng.integers(0, v.quad_steps // 2 + 1, (16, 2)))
        rows.append(CheckResult.upper_bound("semigroup_law", name, law, STRUCTURAL_TOL, tol=0.0))
        samples = rng.normal(0.0, 1.0, (v.quad_samples, table.m))
        for k, y in enumerate(samples):
            instance = f"{name}/y{k}"
            rows.append(CheckResult.upper_bound("orbit_lipschitz", instance,
                                                orbit_lipschitz_check(table, y), bound1))
            rows.append(CheckResult.upper_bound("quad_estimate", instance,
                                                quad_estimate_check(table, y), bound2))
        rows.append(CheckResult.upper_bound("restricted_envelope", name,
                                            restricted_envelope_check(table, samples), 1.0 + RATIO_TOL))
        if name == "zero":
            continue
        # first-order behaviour needs h |lambda| << 1, so both run on a finer table
        fine = build_semigroup(a_matrix, Grid(horizon, CONSISTENCY_STEPS))
        mode = _smooth_mode(fine.m)
        rows.append(_slope_row("generator_consistency", name,
                               generator_consistency_slope(fine, mode), 1.0 - SLOPE_MARGIN))
        h = fine.grid.step
        a2y = float(np.linalg.norm(fine.a_matrix @ fine.a_matrix @ mode))
        a_op = float(np.linalg.norm(fine.a_matrix, ord=2))
        rounding = 1e-9 * (1.0 + graph_norm(fine, mode, 1))
        quadrature = a_op * horizon * h * h / 12.0 * fine.envelope(horizon) * a2y
        rows.append(CheckResult.upper_bound("integral_identity", name,
                                            integral_identity_residual(fine, mode, CONSISTENCY_STEPS),
                                            quadrature + rounding))
    return rows


# ─────────────────────────────────────────────────────────────────────────────
# Convolution suite
# ─────────────────────────────────────────────────────────────────────────────


def convolution_suite(config: RunConfig) -> List[CheckResult]:
    v = config.verify
    grid = Grid(config.grid.horizon, v.steps)
    spectrum = QSpectrum.polynomial(2.0, 2)
    rows = []
    for seed in _seeds(config, salt=6):
        hurst = config.driver.hurst
        rough = sample_q_fbm(spectrum, hurst, grid, seed).rough
        cp = sine_integrand(rough)
        instance = f"H={hurst}/seed={seed}"

        flat = build_semigroup(zero_generator(cp.m), grid)
        gap = float(np.max(np.abs(rough_convolution_path(flat, cp) - rough_integral_path(cp))))
        rows.append(CheckResult.upper_bound("zero_generator_reduction", instance, gap, 0.0, tol=0.0))

        table = build_semigroup(nonnormal_generator(cp.m, CONVOLUTION_COUPLING), grid)
        n = grid.n_steps
        for i, j in ((0, n), (n // 4, 3 * n // 4), (n // 2, n)):
            term1, term2 = convolution_decomposition_probe(table, cp, i, j)
            split_gap, scale = decomposition_gap(table, cp, i, j, term1 + term2)
            rows.append(CheckResult.upper_bound("decomposition_split", f"{instance}/({i},{j})",
                                                split_gap, STRUCTURAL_TOL * scale, tol=0.0))
            (first, bound1), (second, bound2) = twisted_prefactor_check(table, cp, i, j)
            rows.append(CheckResult.upper_bound("twisted_prefactor_1", f"{instance}/({i},{j})",
                                                first, bound1 * (1.0 + RATIO_TOL)))
            rows.append(CheckResult.upper_bound("twisted_prefactor_2", f"{instance}/({i},{j})",
                                                second, bound2 * (1.0 + RATIO_TOL)))

        slope1, slope2 = decomposition_slopes(table, cp)
        alpha = rough.alpha
        rows.append(_slope_row("decomposition_slope_1", instance, slope1,
                               min(3.0 * alpha, 1.0) - SLOPE_MARGIN))
        rows.append(_slope_row("decomposition_slope_2", instance, slope2, 1.0 - SLOPE_MARGIN))

        g = Path(grid, np.sin(np.outer(grid.points, np.arange(1, cp.m + 1))))
        lhs, rhs = regular_convolution_bound(table, g)
        rows.append(CheckResult.upper_bound("regular_lipschitz", instance, lhs, rhs))
        lhs, rhs = regular_convolution_bound(table, g, alpha)
        rows.append(CheckResult.upper_bound("regular_holder", instance, lhs, rhs))
    return rows


# ─────────────────────────────────────────────────────────────────────────────
# Imported drivers
# ─────────────────────────────────────────────────────────────────────────────


def driver_file_checks(file_path: str) -> List[CheckResult]:
    """Chen check of a driver file; a file that fails to load counts as a failed check."""
    try:
        sample, table = load_driver(file_path)
    except (OSError, RoughMildError) as exc:
        logger.error("cannot load driver file %s: %s", file_path, exc)
        return [CheckResult("chen_defect", file_path, float("inf"), STRUCTURAL_TOL,
                            float("-inf"), False)]
    if table is None:
        table = export_full_table(sample.rough)
    worst, where = max_chen_defect(sample.rough.first_level, table)
    if worst > STRUCTURAL_TOL:
        logger.warning("driver file %s violates Chen's relation at %s by %.3e", file_path, where, worst)
    rows = [CheckResult.upper_bound("chen_defect", file_path, worst, STRUCTURAL_TOL, tol=0.0)]
    if sample.kind != ITO_WIENER:
        rows.append(CheckResult.upper_bound("geometric_defect", file_path,
                                            max_geometric_defect(sample.rough), STRUCTURAL_TOL, tol=0.0))
    return rows


SUITES: Dict[str, Suite] = {
    "chen": chen_suite,
    "geometric": geometric_suite,
    "scaling": scaling_suite,
    "norms": norms_suite,
    "semigroup": semigroup_suite,
    "sewing": sewing_suite,
    "convolution": convolution_suite,
}


def run_verify_suites(config: RunConfig) -> Dict[str, List[CheckResult]]:
    """Run the configured suites in order; the driver file, if any, adds a ``driver_file`` suite."""
    results: Dict[str, List[CheckResult]] = {}
    for name in config.verify.suites:
        logger.info("suite %s", name)
        try:
            rows = SUITES[name](config)
        except InvariantViolation as exc:
            logger.error("suite %s aborted: %s", name, exc)
            rows = [CheckResult(f"{name}_invariant", "aborted", float("inf"), 0.0, float("-inf"), False)]
        failed = sum(not r.passed for r in rows)
        logger.info("suite %s: %d checks, %d failed", name, len(rows), failed)
        results[name] = rows
    if config.verify.driver_file:
        results["driver_file"] = driver_file_checks(config.verify.driver_file)
    return results

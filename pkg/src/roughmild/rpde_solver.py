"""Mild solutions of dY = (AY + f0(t,Y)) dt + f(t,Y) dX by Picard iteration.

The fixed-point map on a window is

    Phi(Y)_t = S_t xi + int_0^t S_{t-s} f0(s, Y_s) ds + int_0^t S_{t-s} f(s, Y_s) dX_s

with Gubinelli derivative f(Y). Windows that fail to contract are halved;
accepted windows are concatenated by restarting from the terminal value.
"""

import logging
from dataclasses import replace
from typing import Optional, Tuple

import numpy as np

from .controlled import (
    CoefficientField,
    compose_smooth,
    controlled_difference,
    controlled_norms,
    full_norm,
    remainder_norm,
)
from .convolution import regular_convolution_path, rough_convolution_path
from .errors import CoefficientEvaluationError, DimensionMismatchError, SolverFailure
from .gubinelli import rough_integral_path
from .models import (
    STATE,
    ControlledPath,
    Path,
    RoughPath,
    SolveConfig,
    SolveReport,
    WindowOutcome,
)
from .rough_core import dilate_rough_path, holder_norm, restrict_rough_path, rough_path_distance
from .semigroup import SemigroupTable, graph_norm

logger = logging.getLogger(__name__)


def _diffusion_values(field: CoefficientField, grid, y: np.ndarray) -> np.ndarray:
    return np.stack([field.eval_f(t, yk) for t, yk in zip(grid.points, y)])


def initial_iterate(table: SemigroupTable, field: CoefficientField, xi: np.ndarray,
                    rough: RoughPath, kind: str = "constant", alpha: Optional[float] = None) -> ControlledPath:
    """Constant xi, or the orbit S_t xi; derivative f(t, Y^0_t) in both cases."""
    n = rough.n_steps
    if kind == "orbit":
        y = table.step_exponentials[:n + 1] @ xi
    else:
        y = np.broadcast_to(xi, (n + 1, xi.size))
    yp = _diffusion_values(field, rough.grid, y)
    return ControlledPath(rough, Path(rough.grid, y), Path(rough.grid, yp),
                          rough.alpha if alpha is None else alpha, STATE)


def phi_map(table: SemigroupTable, field: CoefficientField, xi: np.ndarray,
            cp: ControlledPath, rule: str = "left") -> ControlledPath:
    """Phi(Y) on the window carried by ``cp`` (its grid origin fixes absolute time)."""
    grid = cp.grid
    orbit = table.step_exponentials[:grid.n_steps + 1] @ xi
    drift = Path(grid, np.stack([field.eval_f0(t, yk) for t, yk in zip(grid.points, cp.y.values)]))
    gamma = regular_convolution_path(table, drift, rule)
    diffusion = compose_smooth(field, cp)
    psi = rough_convolution_path(table, diffusion)
    return ControlledPath(cp.reference, Path(grid, orbit + gamma + psi), diffusion.y, cp.alpha, STATE)


def fixed_point_residual(table: SemigroupTable, field: CoefficientField, xi: np.ndarray,
                         cp: ControlledPath, rule: str = "left") -> float:
    """[[Phi(Y) - Y]]_{X, 2 alpha}."""
    return full_norm(controlled_difference(phi_map(table, field, xi, cp, rule), cp))


def solve_window(table: SemigroupTable, field: CoefficientField, xi: np.ndarray,
                 rough: RoughPath, window: Tuple[int, int], config: SolveConfig) -> WindowOutcome:
    """Picard iteration on rough[i:j]; rejects when the residuals stop contracting."""
    i, j = window
    local = restrict_rough_path(rough, i, j)
    current = initial_iterate(table, field, xi, local, config.initial_iterate, config.alpha)
    history = []
    streak = 0
    reason = f"no convergence in {config.max_picard_iters} iterations"
    converged = False
    with np.errstate(over="ignore", invalid="ignore"):
        for iteration in range(config.max_picard_iters):
            try:
                update = phi_map(table, field, xi, current, config.convolution_rule)
            except CoefficientEvaluationError as exc:
                reason = f"coefficient evaluation failed: {exc}"
                break
            residual = full_norm(controlled_difference(update, current))
            history.append(residual)
            if not np.isfinite(residual):
                reason = "non-finite residual"
                break
            current = update
            if len(history) > 1 and history[-2] > 0:
                ratio = residual / history[-2]
                streak = streak + 1 if ratio > config.contraction_target else 0
                logger.debug("window %s iteration %d: residual %.3e ratio %.3f",
                             window, iteration, residual, ratio)
            else:
                logger.debug("window %s iteration %d: residual %.3e", window, iteration, residual)
            if residual < config.picard_tol:
                converged = True
                break
            if streak >= config.rejection_streak:
                reason = f"{streak} consecutive residual ratios above {config.contraction_target}"
                break

    if not converged:
        logger.info("window %s rejected after %d iterations: %s", window, len(history), reason)
        return WindowOutcome(window, False, None, history, reason)

    solution = ControlledPath(local, current.y,
                              Path(local.grid, _diffusion_values(field, local.grid, current.y.values)),
                              config.alpha, STATE)
    seminorm = holder_norm(solution.y_prime, config.alpha) + remainder_norm(solution)
    if seminorm > 1.0:
        logger.warning("window %s leaves the unit ball: seminorm %.4g", window, seminorm)
    logger.info("window %s accepted after %d iterations", window, len(history))
    return WindowOutcome(window, True, solution, history, "")


def _working_config(config: SolveConfig, rough: RoughPath) -> SolveConfig:
    """Norms are taken at no more than the driver's own exponent."""
    if config.alpha > rough.alpha:
        logger.info("working exponent lowered from %g to the driver's %g", config.alpha, rough.alpha)
        return replace(config, alpha=rough.alpha)
    return config


def _check_inputs(table: SemigroupTable, field: CoefficientField, xi: np.ndarray, rough: RoughPath):
    if table.grid.n_steps != rough.n_steps or not np.isclose(table.grid.step, rough.grid.step):
        raise DimensionMismatchError("semigroup table and driver use different grids")
    if xi.shape != (field.m,) or table.m != field.m:
        raise DimensionMismatchError(f"state dimension mismatch: xi {xi.shape}, A {table.m}, field {field.m}")
    if rough.d != field.d:
        raise DimensionMismatchError(f"driver dimension {rough.d} differs from field's {field.d}")


def solve_global(table: SemigroupTable, field: CoefficientField, xi, rough: RoughPath,
                 config: SolveConfig) -> SolveReport:
    """Greedy window scheme over [0, T]: halve on rejection, double (capped) on success."""
    xi = np.asarray(xi, dtype=float)
    _check_inputs(table, field, xi, rough)
    config = _working_config(config, rough)
    n = rough.n_steps
    logger.info("initial value |xi|_{D(A^2)} = %.6g", graph_norm(table, xi, 2))

    cap = max(config.min_window_steps, int(round(config.initial_window * n)))
    steps = cap
    start = 0
    eta = xi
    pieces, windows, histories = [], [], []
    while start < n:
        width = min(steps, n - start)
        outcome = solve_window(table, field, eta, rough, (start, start + width), config)
        if not outcome.accepted:
            if width <= config.min_window_steps:
                raise SolverFailure(
                    f"window ({start}, {start + width}) did not contract: {outcome.reason}",
                    outcome.history, outcome.window)
            steps = max(config.min_window_steps, width // 2)
            continue
        pieces.append(outcome.path.y.values if not pieces else outcome.path.y.values[1:])
        windows.append(outcome.window)
        histories.append(outcome.history)
        eta = outcome.path.y.values[-1]
        start += width
        steps = min(cap, 2 * steps)

    y = np.concatenate(pieces)
    solution = ControlledPath(rough, Path(rough.grid, y),
                              Path(rough.grid, _diffusion_values(field, rough.grid, y)),
                              config.alpha, STATE)
    mild = mild_residual(table, field, xi, solution, config.convolution_rule)
    if mild > 10.0 * config.picard_tol:
        logger.warning("mild residual %.3e exceeds 10 x picard_tol", mild)
    report = SolveReport(
        solution=solution,
        xi=xi,
        windows=windows,
        picard_residuals=histories,
        mild_residual=mild,
        strong_residual=0.0,
        norms=controlled_norms(solution),
        apriori_sup=float(np.max(np.linalg.norm(y, axis=1))),
    )
    report.strong_residual = strong_residual(table, field, report)
    logger.info("solved on %d windows: mild %.3e, strong %.3e, sup %.4g",
                len(windows), mild, report.strong_residual, report.apriori_sup)
    return report


def mild_residual(table: SemigroupTable, field: CoefficientField, xi: np.ndarray,
                  solution: ControlledPath, rule: str = "left") -> float:
    """sup_t |Y_t - Phi(Y)_t| with Phi taken over the whole horizon."""
    image = phi_map(table, field, xi, solution, rule)
    return float(np.max(np.linalg.norm(image.y.values - solution.y.values, axis=1)))


def strong_residual(table: SemigroupTable, field: CoefficientField, report: SolveReport) -> float:
    """sup_j |Y_{t_j} - xi - sum_{k<j} (A Y + f0) h - int_0^{t_j} f(Y) dX|."""
    solution = report.solution
    grid = solution.grid
    y = solution.y.values
    drift = y @ table.a_matrix.T + np.stack([field.eval_f0(t, yk) for t, yk in zip(grid.points, y)])
    drift_integral = np.concatenate([np.zeros((1, y.shape[1])), grid.step * np.cumsum(drift[:-1], axis=0)])
    noise_integral = rough_integral_path(compose_smooth(field, solution))
    gap = y - report.xi - drift_integral - noise_integral
    return float(np.max(np.linalg.norm(gap, axis=1)))


def apriori_check(report: SolveReport, bound_k: Optional[float] = None) -> bool:
    """sup_t |Y_t| is finite and, when given, at most K."""
    if not np.isfinite(report.apriori_sup):
        return False
    return bound_k is None or report.apriori_sup <= bound_k


# ─────────────────────────────────────────────────────────────────────────────
# References
# ─────────────────────────────────────────────────────────────────────────────


def solve_rode_picard(field: CoefficientField, xi, rough: RoughPath, config: SolveConfig) -> ControlledPath:
    """Rough ODE dY = f0 dt + f dX by Picard iteration over the whole horizon, no semigroup."""
    xi = np.asarray(xi, dtype=float)
    config = _working_config(config, rough)
    grid = rough.grid
    y = np.broadcast_to(xi, (grid.n_steps + 1, xi.size)).copy()
    current = ControlledPath(rough, Path(grid, y), Path(grid, _diffusion_values(field, grid, y)),
                             config.alpha, STATE)
    for iteration in range(config.max_picard_iters):
        drift = np.stack([field.eval_f0(t, yk) for t, yk in zip(grid.points, current.y.values)])
        drift_integral = np.concatenate([np.zeros((1, xi.size)), np.cumsum(grid.step * drift[:-1], axis=0)])
        diffusion = compose_smooth(field, current)
        y = xi + drift_integral + rough_integral_path(diffusion)
        change = float(np.max(np.abs(y - current.y.values)))
        current = ControlledPath(rough, Path(grid, y), diffusion.y, config.alpha, STATE)
        if change < config.picard_tol:
            return ControlledPath(rough, current.y, Path(grid, _diffusion_values(field, grid, y)),
                                  config.alpha, STATE)
    raise SolverFailure(f"rough ODE Picard did not settle in {config.max_picard_iters} iterations",
                        window=(0, grid.n_steps))


def linear_closed_form(xi: float, rough: RoughPath) -> np.ndarray:
    """xi exp(X_t - X_0), the solution of dY = Y dX for a scalar geometric driver."""
    x = rough.first_level.values[:, 0]
    return xi * np.exp(x - x[0])


def ito_lyons_perturbation(table: SemigroupTable, field: CoefficientField, xi, rough: RoughPath,
                           config: SolveConfig, eps: float) -> Tuple[float, float]:
    """(input distance, sup output distance) for (xi, X) against (xi + eps, dilated X)."""
    xi = np.asarray(xi, dtype=float)
    shifted_xi = xi + eps
    shifted = dilate_rough_path(rough, 1.0 + eps)
    base = solve_global(table, field, xi, rough, config)
    moved = solve_global(table, field, shifted_xi, shifted, config)
    distance_in = (float(np.linalg.norm(shifted_xi - xi))
                   + rough_path_distance(rough, shifted, config.alpha))
    distance_out = float(np.max(np.linalg.norm(moved.solution.y.values - base.solution.y.values, axis=1)))
    logger.info("perturbation eps=%g: input %.4g, output %.4g", eps, distance_in, distance_out)
    return distance_in, distance_out

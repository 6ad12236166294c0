"""Regular and rough convolutions against a cached semigroup table.

Every convolution is a left-endpoint sum sum_{k<j} S_{(j-k)h} term_k,
evaluated by multiplying each term by its lag exponential and then
folding with ``gubinelli.left_sum``. With A = 0 the products are exact,
so the rough convolution reproduces ``rough_integral`` bit for bit.
"""

import logging
from typing import Optional, Tuple

import numpy as np

from .controlled import controlled_norms
from .errors import DimensionMismatchError, InvariantViolation, ParameterError
from .gubinelli import _require_operator, compensated_terms, left_sum, rough_integral
from .models import STATE, ControlledPath, Grid, Path
from .rough_core import _check_pair, fit_loglog_slope, holder_norm, pairwise_sup
from .semigroup import SemigroupTable, graph_norm, step_weights

logger = logging.getLogger(__name__)

DECOMPOSITION_TOL = 1e-10
RULES = ("left", "trapezoid", "exponential")


def _check_lags(table: SemigroupTable, grid: Grid):
    if not np.isclose(grid.step, table.grid.step, rtol=1e-12, atol=0.0):
        raise DimensionMismatchError(
            f"path step {grid.step!r} differs from semigroup step {table.grid.step!r}")
    if grid.n_steps > table.grid.n_steps:
        raise DimensionMismatchError("path is longer than the semigroup table")


def _twisted_sum(table: SemigroupTable, terms: np.ndarray, j: int) -> np.ndarray:
    """sum_{k<j} S_{(j-k)h} terms[k]."""
    lags = table.step_exponentials[j - np.arange(j)]
    return left_sum(np.matmul(lags, terms[:j, :, None])[..., 0])


# ─────────────────────────────────────────────────────────────────────────────
# Regular convolution
# ─────────────────────────────────────────────────────────────────────────────


def regular_convolution(table: SemigroupTable, g: Path, j: int, rule: str = "left",
                        weights: Optional[Tuple[np.ndarray, np.ndarray]] = None) -> np.ndarray:
    """int_0^{t_j} S_{t_j - s} g_s ds.

    ``left`` and ``trapezoid`` weight the grid values of the twisted
    integrand. ``exponential`` integrates the semigroup exactly against
    the piecewise-linear interpolant of g, which stays second order for
    stiff A; ``weights`` passes a precomputed ``step_weights(table)``.
    """
    _check_lags(table, g.grid)
    _check_pair(g.grid.n_steps, 0, j)
    if rule not in RULES:
        raise ParameterError(f"unknown quadrature rule {rule!r}")
    h = g.grid.step
    values = g.values
    if rule == "left":
        return h * _twisted_sum(table, values, j)
    if j == 0:
        return np.zeros(values.shape[1])
    if rule == "exponential":
        w_left, w_right = step_weights(table) if weights is None else weights
        steps = values[:j] @ w_left.T + values[1:j + 1] @ w_right.T
        return _twisted_sum(table, steps, j - 1) + steps[j - 1]
    weighted = values[:j + 1].copy()
    weighted[0] *= 0.5
    weighted[j] *= 0.5
    return h * (_twisted_sum(table, weighted, j) + weighted[j])


def regular_convolution_path(table: SemigroupTable, g: Path, rule: str = "left") -> np.ndarray:
    weights = step_weights(table) if rule == "exponential" else None
    return np.stack([regular_convolution(table, g, j, rule, weights) for j in range(g.grid.n_steps + 1)])


def regular_convolution_bound(table: SemigroupTable, g: Path,
                              alpha: Optional[float] = None) -> Tuple[float, float]:
    """(lhs, rhs) of the Lipschitz bound of the left-rule convolution.

    |N_{s,t}| <= (1 + T) M e^{omega T} sup|g|_{D(A)} |t - s|; with ``alpha``
    the 2 alpha-Hölder form with the extra factor T^{1 - 2 alpha}.

    This is the D(A) form of the bound. It reduces to the sup|g| form when
    A = 0, and unlike that form it follows from the envelope M e^{omega t}
    alone for non-normal generators.
    """
    horizon = g.grid.horizon
    n_path = Path(g.grid, regular_convolution_path(table, g))
    g_sup = max(graph_norm(table, gk, 1) for gk in g.values)
    rhs = (1.0 + horizon) * table.envelope(horizon) * g_sup
    if alpha is None:
        return holder_norm(n_path, 1.0), rhs
    return holder_norm(n_path, 2.0 * alpha), rhs * horizon ** (1.0 - 2.0 * alpha)


# ─────────────────────────────────────────────────────────────────────────────
# Rough convolution
# ─────────────────────────────────────────────────────────────────────────────


def rough_convolution(table: SemigroupTable, cp: ControlledPath, j: int) -> np.ndarray:
    """int_0^{t_j} S_{t_j - s} Y_s dX_s as the compensated sum of the twisted integrand."""
    _require_operator(cp)
    _check_lags(table, cp.grid)
    _check_pair(cp.grid.n_steps, 0, j)
    return _twisted_sum(table, compensated_terms(cp, 0, j), j)


def rough_convolution_path(table: SemigroupTable, cp: ControlledPath) -> np.ndarray:
    _require_operator(cp)
    _check_lags(table, cp.grid)
    n = cp.grid.n_steps
    terms = compensated_terms(cp, 0, n)
    return np.stack([_twisted_sum(table, terms, j) for j in range(n + 1)])


def rough_convolution_controlled(table: SemigroupTable, cp: ControlledPath) -> ControlledPath:
    """(N, Y): the rough convolution with Gubinelli derivative Y."""
    values = rough_convolution_path(table, cp)
    out = ControlledPath(cp.reference, Path(cp.grid, values), cp.y, cp.alpha, STATE)
    if logger.isEnabledFor(logging.INFO):
        x_norm = holder_norm(cp.reference.first_level, cp.alpha)
        scale = controlled_norms(cp).full * (1.0 + x_norm)
        if scale > 0:
            logger.info("rough convolution constant: %.6g", controlled_norms(out).seminorm / scale)
    return out


def convolution_decomposition_probe(table: SemigroupTable, cp: ControlledPath,
                                    i: int, j: int) -> Tuple[np.ndarray, np.ndarray]:
    """The two pieces of N_{s,t} - I_{s,t}.

    term1 = sum_{i<=k<j} (S_{t_j - t_k} - I) Y dX,
    term2 = sum_{k<i} (S_{t_j - t_k} - S_{t_i - t_k}) Y dX.
    """
    _require_operator(cp)
    _check_lags(table, cp.grid)
    _check_pair(cp.grid.n_steps, i, j)
    terms = compensated_terms(cp, 0, j)
    exps = table.step_exponentials
    eye = np.eye(table.m)
    ks = np.arange(i, j)
    term1 = left_sum(np.matmul(exps[j - ks] - eye, terms[i:j, :, None])[..., 0])
    ks = np.arange(i)
    term2 = left_sum(np.matmul(exps[j - ks] - exps[i - ks], terms[:i, :, None])[..., 0])

    gap, scale = decomposition_gap(table, cp, i, j, term1 + term2)
    if gap > DECOMPOSITION_TOL * scale:
        raise InvariantViolation(f"convolution split off by {gap:.3e} on ({i}, {j})")
    return term1, term2


def decomposition_gap(table: SemigroupTable, cp: ControlledPath, i: int, j: int,
                      split: np.ndarray) -> Tuple[float, float]:
    """(|split - (N_{s,t} - I_{s,t})|, 1 + |N_t|)."""
    n_t = rough_convolution(table, cp, j)
    target = n_t - rough_convolution(table, cp, i) - rough_integral(cp, i, j)
    return float(np.linalg.norm(split - target)), 1.0 + float(np.linalg.norm(n_t))


def decomposition_slopes(table: SemigroupTable, cp: ControlledPath,
                         min_steps: int = 1) -> Tuple[float, float]:
    """Log-log slopes of the two terms against the interval length.

    term1 takes the max over aligned dyadic intervals; term2 is read on the
    interval starting at the midpoint, where it grows linearly in the length.
    """
    n = cp.grid.n_steps
    h = cp.grid.step
    anchor = n // 2
    scales, first, second = [], [], []
    length = anchor
    while length >= min_steps:
        worst1 = 0.0
        for i in range(length, n - length + 1, length):
            term1, _ = convolution_decomposition_probe(table, cp, i, i + length)
            worst1 = max(worst1, float(np.linalg.norm(term1)))
        _, term2 = convolution_decomposition_probe(table, cp, anchor, anchor + length)
        anchored = float(np.linalg.norm(term2))
        scales.append(length * h)
        first.append(worst1)
        second.append(anchored)
        length //= 2
    return fit_loglog_slope(scales, first), fit_loglog_slope(scales, second)


def twisted_prefactor_check(table: SemigroupTable, cp: ControlledPath,
                            i: int, j: int) -> Tuple[Tuple[float, float], Tuple[float, float]]:
    """(lhs, rhs) pairs for the sup-norm factors of the two twisted integrands.

    sup_{i<=k<=j} |(S_{t_j - t_k} - I) Y_k| and
    sup_{k<=i} |(S_{t_j - t_k} - S_{t_i - t_k}) Y_k|, each bounded by
    M e^{omega T} sup|Y|_{D(A)} |t_j - t_i|.
    """
    _require_operator(cp)
    _check_pair(cp.grid.n_steps, i, j)
    exps = table.step_exponentials
    y = cp.y.values
    eye = np.eye(table.m)
    gap = (j - i) * cp.grid.step
    bound = table.envelope(cp.grid.horizon) * max(graph_norm(table, yk, 1) for yk in y) * gap
    ks = np.arange(i, j + 1)
    first = float(np.max(np.linalg.norm(np.matmul(exps[j - ks] - eye, y[ks]), axis=(1, 2))))
    ks = np.arange(0, i + 1)
    second = float(np.max(np.linalg.norm(np.matmul(exps[j - ks] - exps[i - ks], y[ks]), axis=(1, 2))))
    return (first, bound), (second, bound)

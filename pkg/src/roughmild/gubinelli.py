"""Rough integral as the compensated Riemann sum on the working grid."""

import logging
from typing import List, Tuple

import numpy as np

from .controlled import remainder_rows
from .errors import ContractError, ParameterError
from .models import OPERATOR, STATE, ControlledPath, Path
from .rough_core import _check_pair, area_rows, fit_loglog_slope, pairwise_sup

logger = logging.getLogger(__name__)


def _require_operator(cp: ControlledPath):
    if cp.role != OPERATOR:
        raise ContractError("rough integration needs an operator-valued controlled path")


def compensated_terms(cp: ControlledPath, i: int, j: int) -> np.ndarray:
    """Y_{t_k} X_{t_k,t_{k+1}} + Y'_{t_k} : XX_{t_k,t_{k+1}} for k = i..j-1."""
    _require_operator(cp)
    dx = cp.reference.increments[i:j]
    areas = cp.reference.step_areas[i:j]
    return (np.einsum("kmb,kb->km", cp.y.values[i:j], dx)
            + np.einsum("kmba,kab->km", cp.y_prime.values[i:j], areas))


def left_sum(terms: np.ndarray) -> np.ndarray:
    """Sequential sum along the first axis (shared by every convolution)."""
    if terms.shape[0] == 0:
        return np.zeros(terms.shape[1:])
    return np.cumsum(terms, axis=0)[-1]


def rough_integral(cp: ControlledPath, i: int, j: int) -> np.ndarray:
    _check_pair(cp.grid.n_steps, i, j)
    return left_sum(compensated_terms(cp, i, j))


def rough_integral_path(cp: ControlledPath) -> np.ndarray:
    """int_0^{t_j} Y dX for every j, starting at zero."""
    terms = compensated_terms(cp, 0, cp.grid.n_steps)
    return np.concatenate([np.zeros((1, cp.m)), np.cumsum(terms, axis=0)])


def sewing_rate_probe(cp: ControlledPath, i: int, j: int, levels: int) -> np.ndarray:
    """Rows (scale, defect) of the single-increment approximation per dyadic level.

    At each level the range is cut into 2^level pieces and the defect is
    the largest |Y_u X_{u,v} + Y'_u XX_{u,v} - int_u^v Y dX| over them.
    """
    _require_operator(cp)
    _check_pair(cp.grid.n_steps, i, j)
    length = j - i
    if length < 2 or length & (length - 1) or length < 2 ** levels:
        raise ParameterError(f"range of {length} steps is not a power of two >= 2^{levels}")
    h = cp.grid.step
    rough = cp.reference
    y, yp = cp.y.values, cp.y_prime.values
    rows: List[Tuple[float, float]] = []
    for level in range(levels + 1):
        piece = length >> level
        if piece < 2:
            break
        worst = 0.0
        for u in range(i, j, piece):
            v = u + piece
            single = (y[u] @ rough.first_level.increment(u, v)
                      + np.einsum("mba,ab->m", yp[u], area_rows(rough, u, v)[-1]))
            worst = max(worst, float(np.linalg.norm(single - rough_integral(cp, u, v))))
        rows.append((piece * h, worst))
    return np.array(rows)


def sewing_slope(probe: np.ndarray, last: int = 4) -> float:
    """Log-log slope of the defects over the finest ``last`` levels."""
    tail = probe[-last:]
    return fit_loglog_slope(tail[:, 0], tail[:, 1])


def sewing_constant(cp: ControlledPath, integral: ControlledPath) -> float:
    """max |R^Z_{s,t} - Y'_s : XX_{s,t}| / |t-s|^{3 alpha} for Z = int Y dX."""
    yp = cp.y_prime.values

    def rows(i, j_end):
        compensation = np.einsum("mba,kab->km", yp[i], area_rows(cp.reference, i, j_end))
        gap = remainder_rows(integral, i, j_end) - compensation
        return np.linalg.norm(gap, axis=1)

    return pairwise_sup(cp.grid, rows, 3.0 * cp.alpha)


def integral_as_controlled(cp: ControlledPath) -> ControlledPath:
    """(int_0^. Y dX, Y) as a state-valued controlled path."""
    _require_operator(cp)
    z = ControlledPath(cp.reference, Path(cp.grid, rough_integral_path(cp)), cp.y, cp.alpha, STATE)
    logger.info("sewing constant of rough integral: %.6g", sewing_constant(cp, z))
    return z

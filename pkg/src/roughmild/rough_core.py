"""Hölder calculus and Chen-relation algebra for grid-sampled rough paths.

Second levels are stored per step only; XX over any grid pair (t_i, t_j)
is rebuilt by left-folding Chen's relation

    XX_{s,t} = XX_{s,u} + XX_{u,t} + X_{s,u} (x) X_{u,t}

so every RoughPath is Chen-consistent by construction. Norms are exact
suprema over grid pairs (Euclidean on vectors, Frobenius on tensors).
"""

import logging
from pathlib import Path as FilePath
from typing import Callable, Dict, List, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    DegenerateInputError,
    DimensionMismatchError,
    IndexRangeError,
    ParameterError,
    RoughPathFormatError,
)
from .models import Grid, HoelderReport, Path, RoughPath, check_rough_alpha

logger = logging.getLogger(__name__)

HEADER_TAG = "roughpath v1"
STRUCTURAL_TOL = 1e-10


# ─────────────────────────────────────────────────────────────────────────────
# Pairwise suprema
# ─────────────────────────────────────────────────────────────────────────────


def _check_pair(n_steps: int, i: int, j: int):
    if not (0 <= i <= n_steps and 0 <= j <= n_steps):
        raise IndexRangeError(f"indices ({i}, {j}) outside 0..{n_steps}")
    if i > j:
        raise IndexRangeError(f"expected i <= j, got ({i}, {j})")


def _window_steps(grid: Grid, window: Optional[float]) -> int:
    if window is None:
        return grid.n_steps
    if window <= 0:
        raise ParameterError(f"window must be positive, got {window!r}")
    return min(grid.n_steps, grid.steps_within(window))


def pairwise_sup(grid: Grid, row_norms: Callable[[int, int], np.ndarray],
                 exponent: float, window: Optional[float] = None) -> float:
    """sup over grid pairs s < t of |increment_{s,t}| / |t - s|^exponent.

    row_norms(i, j_end) must return the increment norms for j = i+1..j_end.
    """
    w = _window_steps(grid, window)
    if w < 1:
        return 0.0
    n = grid.n_steps
    h = grid.step
    best = 0.0
    for i in range(n):
        j_end = min(n, i + w)
        norms = row_norms(i, j_end)
        lags = np.arange(1, j_end - i + 1) * h
        best = max(best, float(np.max(norms / lags ** exponent)))
    return best


def _vector_row_norms(values: np.ndarray) -> Callable[[int, int], np.ndarray]:
    flat = values.reshape(values.shape[0], -1)

    def rows(i, j_end):
        return np.linalg.norm(flat[i + 1:j_end + 1] - flat[i], axis=1)

    return rows


def holder_norm(path: Path, alpha: float, window: Optional[float] = None) -> float:
    """||X||_alpha over grid pairs, optionally restricted to |t - s| <= window."""
    if path.grid.n_steps + 1 < 2:
        raise DegenerateInputError("Hölder norm needs at least two grid points")
    if not (0 < alpha <= 1):
        raise ParameterError(f"alpha must lie in (0, 1], got {alpha!r}")
    return pairwise_sup(path.grid, _vector_row_norms(path.values), alpha, window)


def fit_loglog_slope(scales: Sequence[float], values: Sequence[float]) -> float:
    """Least-squares slope of log(values) against log(scales); zeros are dropped."""
    s = np.asarray(scales, dtype=float)
    v = np.asarray(values, dtype=float)
    keep = (s > 0) & (v > 0) & np.isfinite(v)
    if keep.sum() < 2:
        raise DegenerateInputError("slope fit needs at least two positive points")
    return float(np.polyfit(np.log(s[keep]), np.log(v[keep]), 1)[0])


# ─────────────────────────────────────────────────────────────────────────────
# Chen algebra
# ─────────────────────────────────────────────────────────────────────────────


def area_rows(rough: RoughPath, i: int, j_end: int) -> np.ndarray:
    """XX_{t_i, t_j} for j = i+1..j_end, by left fold from t_i."""
    x = rough.first_level.values
    dx = rough.increments
    terms = rough.step_areas[i:j_end] + np.einsum(
        "ka,kb->kab", x[i:j_end] - x[i], dx[i:j_end])
    return np.cumsum(terms, axis=0)


def chen_reconstruct(rough: RoughPath, i: int, j: int) -> np.ndarray:
    _check_pair(rough.n_steps, i, j)
    if i == j:
        return np.zeros((rough.d, rough.d))
    return area_rows(rough, i, j)[-1]


def second_level_norm(rough: RoughPath, alpha: float, window: Optional[float] = None) -> float:
    """||XX||_{2 alpha} with Frobenius tensor norm."""
    check_rough_alpha(alpha)

    def rows(i, j_end):
        return np.sqrt(np.sum(area_rows(rough, i, j_end) ** 2, axis=(1, 2)))

    return pairwise_sup(rough.grid, rows, 2.0 * alpha, window)


def holder_report(rough: RoughPath, alpha: float, window: Optional[float] = None) -> HoelderReport:
    x_norm = holder_norm(rough.first_level, alpha)
    xx_norm = second_level_norm(rough, alpha)
    report = HoelderReport(alpha=alpha, x_norm=x_norm, xx_norm=xx_norm, combined=x_norm + xx_norm)
    if window is None:
        return report
    return HoelderReport(
        alpha=alpha, x_norm=x_norm, xx_norm=xx_norm, combined=x_norm + xx_norm,
        window=window,
        x_norm_windowed=holder_norm(rough.first_level, alpha, window),
        xx_norm_windowed=second_level_norm(rough, alpha, window),
    )


def export_full_table(rough: RoughPath) -> np.ndarray:
    """XX over all grid pairs; zero on and below the diagonal."""
    n, d = rough.n_steps, rough.d
    table = np.zeros((n + 1, n + 1, d, d))
    for i in range(n):
        table[i, i + 1:] = area_rows(rough, i, n)
    return table


def chen_defect(first_level: Path, full_table: np.ndarray, s: int, u: int, t: int) -> float:
    """|XX_{s,t} - XX_{s,u} - XX_{u,t} - X_{s,u} (x) X_{u,t}|_F for an external table."""
    n = first_level.grid.n_steps
    _check_pair(n, s, u)
    _check_pair(n, u, t)
    x = first_level.values
    defect = (full_table[s, t] - full_table[s, u] - full_table[u, t]
              - np.outer(x[u] - x[s], x[t] - x[u]))
    return float(np.linalg.norm(defect))


def max_chen_defect(first_level: Path, full_table: np.ndarray) -> Tuple[float, Tuple[int, int, int]]:
    """Largest Chen defect over all index triples s <= u <= t."""
    n = first_level.grid.n_steps
    x = first_level.values
    worst, where = 0.0, (0, 0, 0)
    for s in range(n + 1):
        for u in range(s, n + 1):
            xsu = x[u] - x[s]
            xut = x[u:] - x[u]
            defect = (full_table[s, u:] - full_table[s, u] - full_table[u, u:]
                      - np.einsum("a,kb->kab", xsu, xut))
            norms = np.sqrt(np.sum(defect ** 2, axis=(1, 2)))
            k = int(np.argmax(norms))
            if norms[k] > worst:
                worst, where = float(norms[k]), (s, u, u + k)
    return worst, where


# ─────────────────────────────────────────────────────────────────────────────
# Geometric rough paths
# ─────────────────────────────────────────────────────────────────────────────


def geometric_defect_tensor(rough: RoughPath, i: int, j: int) -> np.ndarray:
    """Sym(XX_{s,t}) - 1/2 X_{s,t} (x) X_{s,t}."""
    xx = chen_reconstruct(rough, i, j)
    x = rough.first_level.increment(i, j)
    return 0.5 * (xx + xx.T) - 0.5 * np.outer(x, x)


def geometric_defect(rough: RoughPath, i: int, j: int) -> float:
    return float(np.linalg.norm(geometric_defect_tensor(rough, i, j)))


def max_geometric_defect(rough: RoughPath) -> float:
    """Largest geometric defect over all grid pairs."""
    x = rough.first_level.values
    worst = 0.0
    for i in range(rough.n_steps):
        xx = area_rows(rough, i, rough.n_steps)
        dx = x[i + 1:] - x[i]
        sym = 0.5 * (xx + np.transpose(xx, (0, 2, 1))) - 0.5 * np.einsum("ka,kb->kab", dx, dx)
        worst = max(worst, float(np.max(np.sqrt(np.sum(sym ** 2, axis=(1, 2))))))
    return worst


def enhance_piecewise_linear(path: Path, alpha: float) -> RoughPath:
    """Exact second level of the piecewise-linear interpolation of the samples."""
    if len(path.shape) != 1:
        raise DimensionMismatchError("only vector-valued paths can be enhanced")
    dx = np.diff(path.values, axis=0)
    areas = 0.5 * np.einsum("ka,kb->kab", dx, dx)
    return RoughPath(first_level=path, step_areas=areas, alpha=alpha)


def scaling_bound_sides(rough: RoughPath, alpha: float, beta: float) -> Tuple[float, float]:
    """|||X|||_alpha and ||X||_beta T^(beta-alpha) + ||XX||_{2 beta} T^(2(beta-alpha))."""
    if alpha >= beta:
        raise ParameterError(f"need alpha < beta, got alpha={alpha!r}, beta={beta!r}")
    check_rough_alpha(alpha)
    check_rough_alpha(beta)
    horizon = rough.grid.horizon
    lhs = holder_norm(rough.first_level, alpha) + second_level_norm(rough, alpha)
    rhs = (holder_norm(rough.first_level, beta) * horizon ** (beta - alpha)
           + second_level_norm(rough, beta) * horizon ** (2.0 * (beta - alpha)))
    return lhs, rhs


def scaling_bound_check(rough: RoughPath, alpha: float, beta: float) -> Tuple[bool, float]:
    lhs, rhs = scaling_bound_sides(rough, alpha, beta)
    slack = rhs - lhs
    return slack >= -1e-12, float(slack)


# ─────────────────────────────────────────────────────────────────────────────
# Transformations
# ─────────────────────────────────────────────────────────────────────────────


def _check_same_grid(a: RoughPath, b: RoughPath):
    if a.grid != b.grid or a.d != b.d:
        raise DimensionMismatchError("rough paths must share grid and dimension")


def rough_path_distance(a: RoughPath, b: RoughPath, alpha: float) -> float:
    """d_alpha = |X_0 - Y_0| + ||X - Y||_alpha + ||XX - YY||_{2 alpha}."""
    _check_same_grid(a, b)
    check_rough_alpha(alpha)
    diff = Path(a.grid, a.first_level.values - b.first_level.values)

    def rows(i, j_end):
        gap = area_rows(a, i, j_end) - area_rows(b, i, j_end)
        return np.sqrt(np.sum(gap ** 2, axis=(1, 2)))

    start = float(np.linalg.norm(a.first_level.values[0] - b.first_level.values[0]))
    return start + holder_norm(diff, alpha) + pairwise_sup(a.grid, rows, 2.0 * alpha)


def restrict_rough_path(rough: RoughPath, i: int, j: int) -> RoughPath:
    """The rough path over the window [t_i, t_j]."""
    _check_pair(rough.n_steps, i, j)
    grid = rough.grid.window(i, j)
    return RoughPath(
        first_level=Path(grid, rough.first_level.values[i:j + 1]),
        step_areas=rough.step_areas[i:j],
        alpha=rough.alpha,
    )


def coarsen_rough_path(rough: RoughPath, factor: int) -> RoughPath:
    """Subsample to every factor-th grid point; step areas by Chen composition."""
    if factor < 1 or rough.n_steps % factor:
        raise ParameterError(f"factor {factor} must divide {rough.n_steps} steps")
    if factor == 1:
        return rough
    n_coarse = rough.n_steps // factor
    areas = np.stack([chen_reconstruct(rough, k * factor, (k + 1) * factor)
                      for k in range(n_coarse)])
    grid = Grid(rough.grid.horizon, n_coarse, rough.grid.origin)
    return RoughPath(Path(grid, rough.first_level.values[::factor]), areas, rough.alpha)


def dilate_rough_path(rough: RoughPath, lam: float) -> RoughPath:
    """(lam X, lam^2 XX): keeps Chen's relation and geometricity."""
    return RoughPath(
        Path(rough.grid, lam * rough.first_level.values),
        lam * lam * rough.step_areas,
        rough.alpha,
    )


# ─────────────────────────────────────────────────────────────────────────────
# Text format
# ─────────────────────────────────────────────────────────────────────────────


def _fmt_row(values) -> str:
    return " ".join(repr(float(v)) for v in np.ravel(values))


def _parse_fields(line: str, tag: str, lineno: int) -> Dict[str, str]:
    if not line.startswith(tag):
        raise RoughPathFormatError(f"line {lineno}: expected '{tag}', got {line[:40]!r}")
    fields = {}
    for token in line[len(tag):].split():
        key, sep, value = token.partition("=")
        if not sep:
            raise RoughPathFormatError(f"line {lineno}: malformed field {token!r}")
        fields[key] = value
    return fields


def _parse_floats(line: str, expected: int, lineno: int) -> List[float]:
    try:
        values = [float(tok) for tok in line.split()]
    except ValueError as exc:
        raise RoughPathFormatError(f"line {lineno}: {exc}") from exc
    if len(values) != expected:
        raise RoughPathFormatError(f"line {lineno}: expected {expected} floats, got {len(values)}")
    return values


def _read_block(lines: List[str], start: int, count: int, width: int) -> np.ndarray:
    if start + count > len(lines):
        raise RoughPathFormatError(f"file ends before line {start + count}")
    return np.array([_parse_floats(lines[k], width, k + 1)
                     for k in range(start, start + count)], dtype=float)


def format_rough_path(rough: RoughPath, meta: Optional[Dict[str, object]] = None,
                      full_table: Optional[np.ndarray] = None) -> List[str]:
    grid = rough.grid
    header = (f"{HEADER_TAG} dim={rough.d} steps={rough.n_steps} "
              f"T={grid.horizon!r} alpha={float(rough.alpha)!r}")
    if grid.origin:
        header += f" t0={grid.origin!r}"
    lines = [header]
    if meta:
        lines.append("meta " + " ".join(f"{k}={v}" for k, v in meta.items()))
    lines.extend(_fmt_row(row) for row in rough.first_level.values)
    lines.extend(_fmt_row(area) for area in rough.step_areas)
    if full_table is not None:
        lines.append("table")
        n = rough.n_steps
        lines.extend(_fmt_row(full_table[i, j]) for i in range(n + 1) for j in range(n + 1))
    return lines


def parse_rough_path(lines: List[str]) -> Tuple[RoughPath, Dict[str, str], Optional[np.ndarray], int]:
    """Parse a rough path block; returns (rough, meta, table, next line index)."""
    if not lines:
        raise RoughPathFormatError("empty rough path file")
    fields = _parse_fields(lines[0], HEADER_TAG, 1)
    try:
        d = int(fields["dim"])
        n = int(fields["steps"])
        grid = Grid(float(fields["T"]), n, float(fields.get("t0", 0.0)))
        alpha = float(fields["alpha"])
    except (KeyError, ValueError, ParameterError) as exc:
        raise RoughPathFormatError(f"line 1: bad header ({exc})") from exc
    pos = 1
    meta: Dict[str, str] = {}
    if pos < len(lines) and lines[pos].startswith("meta"):
        meta = _parse_fields(lines[pos], "meta", pos + 1)
        pos += 1
    first = _read_block(lines, pos, n + 1, d)
    pos += n + 1
    areas = _read_block(lines, pos, n, d * d).reshape(n, d, d)
    pos += n
    table = None
    if pos < len(lines) and lines[pos].strip() == "table":
        pos += 1
        table = _read_block(lines, pos, (n + 1) ** 2, d * d).reshape(n + 1, n + 1, d, d)
        pos += (n + 1) ** 2
    rough = RoughPath(Path(grid, first), areas, alpha)
    return rough, meta, table, pos


def save_rough_path(rough: RoughPath, file_path, meta: Optional[Dict[str, object]] = None,
                    full_table: Optional[np.ndarray] = None):
    lines = format_rough_path(rough, meta, full_table)
    FilePath(file_path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def load_rough_path(file_path) -> Tuple[RoughPath, Dict[str, str], Optional[np.ndarray]]:
    lines = [ln.strip() for ln in FilePath(file_path).read_text(encoding="utf-8").splitlines()
             if ln.strip()]
    rough, meta, table, pos = parse_rough_path(lines)
    if pos != len(lines):
        raise RoughPathFormatError(f"line {pos + 1}: unexpected trailing content")
    return rough, meta, table

"""Matrix generators, cached step exponentials and semigroup estimates."""

import logging
from dataclasses import dataclass
from pathlib import Path as FilePath
from typing import Optional, Sequence, Tuple

import numpy as np
import scipy.linalg

from .errors import DimensionMismatchError, ParameterError
from .models import Grid
from .rough_core import fit_loglog_slope, pairwise_sup, _vector_row_norms

logger = logging.getLogger(__name__)

SUBSTEP_SAMPLES = 32


@dataclass(frozen=True)
class SemigroupTable:
    a_matrix: np.ndarray
    grid: Grid
    step_exponentials: np.ndarray   # (n_steps + 1, m, m), entry k is exp(k h A)
    growth_m: float
    growth_omega: float
    symmetric: bool

    @property
    def m(self) -> int:
        return self.a_matrix.shape[0]

    def envelope(self, t: float) -> float:
        """M e^{omega t}."""
        return self.growth_m * float(np.exp(self.growth_omega * t))

    def orbit(self, y: np.ndarray) -> np.ndarray:
        """S_{t_k} y for k = 0..n_steps."""
        return self.step_exponentials @ np.asarray(y, dtype=float)


# ─────────────────────────────────────────────────────────────────────────────
# Generators
# ─────────────────────────────────────────────────────────────────────────────


def zero_generator(m: int) -> np.ndarray:
    return np.zeros((m, m))


def diagonal_generator(entries: Sequence[float]) -> np.ndarray:
    return np.diag(np.asarray(entries, dtype=float))


def laplacian_1d(m: int, spacing: Optional[float] = None) -> np.ndarray:
    """Dirichlet Laplacian on m interior points, tridiagonal (1, -2, 1) / dx^2."""
    dx = 1.0 / (m + 1) if spacing is None else float(spacing)
    main = -2.0 * np.ones(m)
    off = np.ones(m - 1)
    return (np.diag(main) + np.diag(off, 1) + np.diag(off, -1)) / dx ** 2


def laplacian_1d_eigenvalues(m: int, spacing: Optional[float] = None) -> np.ndarray:
    dx = 1.0 / (m + 1) if spacing is None else float(spacing)
    k = np.arange(1, m + 1)
    return -4.0 * np.sin(k * np.pi / (2.0 * (m + 1))) ** 2 / dx ** 2


def nonnormal_generator(m: int, coupling: float = 4.0) -> np.ndarray:
    """-1 on the diagonal and ``coupling`` on the superdiagonal; gives M > 1."""
    return -np.eye(m) + coupling * np.eye(m, k=1)


def load_generator_matrix(file_path) -> np.ndarray:
    """Square matrix from whitespace-separated floats, row-major."""
    values = np.array(FilePath(file_path).read_text(encoding="utf-8").split(), dtype=float)
    m = int(round(np.sqrt(values.size)))
    if m * m != values.size or m == 0:
        raise DimensionMismatchError(f"{file_path}: {values.size} entries do not form a square matrix")
    return values.reshape(m, m)


def make_generator(name: str, size: int = 8, spacing: Optional[float] = None,
                   diagonal: Optional[Sequence[float]] = None, coupling: float = 4.0,
                   matrix_file: Optional[str] = None) -> np.ndarray:
    if name == "zero":
        return zero_generator(size)
    if name == "diagonal":
        return diagonal_generator(diagonal if diagonal is not None else -np.ones(size))
    if name == "laplacian1d":
        return laplacian_1d(size, spacing)
    if name == "nonnormal":
        return nonnormal_generator(size, coupling)
    if name == "custom":
        if not matrix_file:
            raise ParameterError("custom generator needs a matrix file")
        return load_generator_matrix(matrix_file)
    raise ParameterError(f"unknown generator {name!r}")


# ─────────────────────────────────────────────────────────────────────────────
# Table construction
# ─────────────────────────────────────────────────────────────────────────────


def _exponentials(a: np.ndarray, times: np.ndarray, symmetric: bool) -> np.ndarray:
    if not np.any(a):
        return np.broadcast_to(np.eye(a.shape[0]), (times.size,) + a.shape).copy()
    if symmetric:
        w, v = scipy.linalg.eigh(a)
        return np.einsum("ij,kj,lj->kil", v, np.exp(np.outer(times, w)), v)
    return scipy.linalg.expm(times[:, None, None] * a)


def build_semigroup(a_matrix, grid: Grid) -> SemigroupTable:
    """Cache exp(k h A) for k = 0..n and fit the growth envelope M e^{omega t}.

    omega is the largest log-norm slope (at least 0); M covers the grid
    points and, through the worst within-step norm, every time in between.
    """
    a = np.array(a_matrix, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DimensionMismatchError(f"generator must be square, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ParameterError("generator has non-finite entries")
    symmetric = bool(np.array_equal(a, a.T))
    h = grid.step
    times = np.arange(grid.n_steps + 1) * h
    exps = _exponentials(a, times, symmetric)
    exps[0] = np.eye(a.shape[0])

    norms = np.linalg.norm(exps[1:], ord=2, axis=(1, 2))
    omega = max(0.0, float(np.max(np.log(norms) / times[1:])))
    grid_m = max(1.0, float(np.max(norms * np.exp(-omega * times[1:]))))
    sub = np.linspace(0.0, h, SUBSTEP_SAMPLES + 1)[1:]
    within = np.linalg.norm(_exponentials(a, sub, symmetric), ord=2, axis=(1, 2))
    growth_m = grid_m * max(1.0, float(np.max(within * np.exp(-omega * sub))))

    exps.setflags(write=False)
    a.setflags(write=False)
    logger.info("semigroup table: m=%d, steps=%d, symmetric=%s, M=%.6g, omega=%.6g",
                a.shape[0], grid.n_steps, symmetric, growth_m, omega)
    return SemigroupTable(a, grid, exps, growth_m, omega, symmetric)


def step_weights(table: SemigroupTable) -> Tuple[np.ndarray, np.ndarray]:
    """(W_left, W_right) with int_0^h S_{h-u} g(u) du = W_left g(0) + W_right g(h) for affine g.

    Both come from one exponential of the block matrix [[A, I, 0], [0, 0, I], [0, 0, 0]] h,
    whose top row holds int_0^h S_v dv and int_0^h S_v (h - v) dv.
    """
    m = table.m
    h = table.grid.step
    block = np.zeros((3 * m, 3 * m))
    block[:m, :m] = table.a_matrix
    block[:m, m:2 * m] = np.eye(m)
    block[m:2 * m, 2 * m:] = np.eye(m)
    top = scipy.linalg.expm(block * h)[:m]
    integral = top[:, m:2 * m]
    ramp = top[:, 2 * m:] / h
    return integral - ramp, ramp


def semigroup_law_defect(table: SemigroupTable, j: int, k: int) -> float:
    """Relative |S_{(j+k)h} - S_{jh} S_{kh}|."""
    exps = table.step_exponentials
    lhs = exps[j + k]
    return float(np.linalg.norm(lhs - exps[j] @ exps[k]) / max(1.0, np.linalg.norm(lhs)))


# ─────────────────────────────────────────────────────────────────────────────
# Estimates
# ─────────────────────────────────────────────────────────────────────────────


def graph_norm(table: SemigroupTable, y, order: int) -> float:
    """|y|_{D(A^n)} = |y| + sum_{j<=n} |A^j y|; y may be a vector or a matrix."""
    if not (0 <= order <= 3):
        raise ParameterError(f"graph norm order must be 0..3, got {order}")
    current = np.asarray(y, dtype=float)
    total = float(np.linalg.norm(current))
    for _ in range(order):
        current = table.a_matrix @ current
        total += float(np.linalg.norm(current))
    return total


def orbit_lipschitz_check(table: SemigroupTable, y) -> float:
    """max |S_t y - S_s y| / (|t - s| |y|_{D(A)}); bounded by M e^{omega T}."""
    scale = graph_norm(table, y, 1)
    if scale == 0:
        return 0.0
    return pairwise_sup(table.grid, _vector_row_norms(table.orbit(y)), 1.0) / scale


def quad_estimate_check(table: SemigroupTable, y) -> float:
    """max over q <= r <= s <= t of the second difference ratio.

    With x = s - r, p = t - s and delta = r - q, the numerator is
    |D_p(x) - D_p(x + delta)| where D_p(x) = S_{x+p} y - S_x y; the ratio
    divides by p delta h^2 |y|_{D(A^2)} and is bounded by M e^{2 omega T}.
    """
    scale = graph_norm(table, y, 2)
    if scale == 0:
        return 0.0
    orbit = table.orbit(y)
    n = table.grid.n_steps
    h = table.grid.step
    best = 0.0
    for p in range(1, n):
        diffs = orbit[p:] - orbit[:-p]       # D_p(x) for x = 0..n-p
        last = diffs.shape[0]
        for x in range(last - 1):
            gaps = np.linalg.norm(diffs[x + 1:] - diffs[x], axis=1)
            deltas = np.arange(1, last - x)
            best = max(best, float(np.max(gaps / deltas)) / (p * h * h))
    return best / scale


def generator_consistency(table: SemigroupTable, y, index: int = 0,
                          multiples: Sequence[int] = (4, 2, 1)) -> Tuple[np.ndarray, np.ndarray]:
    """Errors |(S_{t+h'} y - S_t y)/h' - A S_t y| for h' = multiple * h."""
    orbit = table.orbit(y)
    if index + max(multiples) > table.grid.n_steps:
        raise ParameterError("generator consistency needs room after the base index")
    target = table.a_matrix @ orbit[index]
    hs = np.array([k * table.grid.step for k in multiples])
    errors = np.array([
        np.linalg.norm((orbit[index + k] - orbit[index]) / hk - target)
        for k, hk in zip(multiples, hs)
    ])
    return hs, errors


def generator_consistency_slope(table: SemigroupTable, y, index: int = 0) -> float:
    hs, errors = generator_consistency(table, y, index)
    return fit_loglog_slope(hs, errors)


def integral_identity_residual(table: SemigroupTable, y, j: int) -> float:
    """|A (trapezoid int_0^{t_j} S_s y ds) - (S_{t_j} y - y)|."""
    orbit = table.orbit(y)[:j + 1]
    h = table.grid.step
    integral = h * (orbit.sum(axis=0) - 0.5 * (orbit[0] + orbit[-1]))
    return float(np.linalg.norm(table.a_matrix @ integral - (orbit[-1] - orbit[0])))


def restricted_envelope_check(table: SemigroupTable, samples) -> float:
    """max_k |S_k y|_{D(A)} / (|y|_{D(A)} M e^{omega t_k}) over sample rows y."""
    worst = 0.0
    times = np.arange(table.grid.n_steps + 1) * table.grid.step
    for y in np.atleast_2d(samples):
        base = graph_norm(table, y, 1)
        if base == 0:
            continue
        orbit = table.orbit(y)
        moved = np.linalg.norm(orbit, axis=1) + np.linalg.norm(orbit @ table.a_matrix.T, axis=1)
        bounds = base * table.growth_m * np.exp(table.growth_omega * times)
        worst = max(worst, float(np.max(moved / bounds)))
    return worst

"""Controlled rough paths: remainders, norms and composition rules.

Storage convention: y_prime carries the derivative direction on its last
axis, so Y'_s X_{s,t} is ``y_prime[s] @ X_{s,t}``. For operator-valued
paths (values m x d, integrand slot b) the derivative is stored as
(m, b, a) with a the derivative slot.
"""

import logging
import math
from dataclasses import dataclass
from pathlib import Path as FilePath
from typing import Callable, Optional, Sequence, Tuple

import numpy as np

from .errors import (
    CoefficientEvaluationError,
    ContractError,
    DimensionMismatchError,
    RoughPathFormatError,
)
from .models import (
    OPERATOR,
    STATE,
    ControlledNorms,
    ControlledPath,
    Grid,
    Path,
    RoughPath,
)
from .rough_core import (
    _check_pair,
    _parse_fields,
    _read_block,
    _fmt_row,
    format_rough_path,
    holder_norm,
    pairwise_sup,
    parse_rough_path,
    restrict_rough_path,
)

logger = logging.getLogger(__name__)

FD_STEP_SCALE = np.finfo(float).eps ** (1.0 / 3.0)
CONTROLLED_TAG = "controlled v1"


# ─────────────────────────────────────────────────────────────────────────────
# Coefficients
# ─────────────────────────────────────────────────────────────────────────────


@dataclass
class CoefficientField:
    """Drift f0(t, y) in R^m and diffusion f(t, y) in R^{m x d}.

    ``df`` returns the (m, d, m) array of D_y f; when omitted it is
    replaced by central differences. Evaluators must be reentrant.
    """
    m: int
    d: int
    f0: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    f: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    df: Optional[Callable[[float, np.ndarray], np.ndarray]] = None
    lip_f0: Optional[float] = None
    cb_f: Optional[float] = None
    bounded: bool = True
    name: str = ""

    def __post_init__(self):
        if not self.bounded:
            logger.warning("coefficient field %r declared unbounded; C_b hypotheses not met",
                           self.name or "<anonymous>")

    @property
    def has_analytic_derivative(self) -> bool:
        return self.f is None or self.df is not None

    def _checked(self, what: str, value, shape, t, y) -> np.ndarray:
        arr = np.asarray(value, dtype=float)
        if arr.shape != shape:
            raise DimensionMismatchError(f"{what} returned shape {arr.shape}, expected {shape}")
        if not np.all(np.isfinite(arr)):
            raise CoefficientEvaluationError(f"{what} returned non-finite values", t, y)
        return arr

    def eval_f0(self, t: float, y: np.ndarray) -> np.ndarray:
        if self.f0 is None:
            return np.zeros(self.m)
        return self._checked("f0", self.f0(t, y), (self.m,), t, y)

    def eval_f(self, t: float, y: np.ndarray) -> np.ndarray:
        if self.f is None:
            return np.zeros((self.m, self.d))
        return self._checked("f", self.f(t, y), (self.m, self.d), t, y)

    def eval_df(self, t: float, y: np.ndarray) -> np.ndarray:
        shape = (self.m, self.d, self.m)
        if self.f is None:
            return np.zeros(shape)
        if self.df is not None:
            return self._checked("df", self.df(t, y), shape, t, y)
        return self.finite_difference_df(t, y)

    def finite_difference_df(self, t: float, y: np.ndarray) -> np.ndarray:
        y = np.asarray(y, dtype=float)
        step = FD_STEP_SCALE * (1.0 + float(np.linalg.norm(y)))
        out = np.empty((self.m, self.d, self.m))
        for j in range(self.m):
            e = np.zeros(self.m)
            e[j] = step
            out[:, :, j] = (self.eval_f(t, y + e) - self.eval_f(t, y - e)) / (2.0 * step)
        return out


# ─────────────────────────────────────────────────────────────────────────────
# Construction helpers
# ─────────────────────────────────────────────────────────────────────────────


def driver_as_controlled(rough: RoughPath) -> ControlledPath:
    """(X, Id) as a state-valued controlled path."""
    n, d = rough.n_steps, rough.d
    eye = np.broadcast_to(np.eye(d), (n + 1, d, d))
    return ControlledPath(rough, rough.first_level, Path(rough.grid, eye), rough.alpha, STATE)


def constant_controlled(rough: RoughPath, value, derivative=None, role: str = STATE) -> ControlledPath:
    """Y constant in time; Y' constant (zero when omitted)."""
    value = np.asarray(value, dtype=float)
    n = rough.n_steps
    if derivative is None:
        derivative = np.zeros(value.shape + (rough.d,))
    y = np.broadcast_to(value, (n + 1,) + value.shape)
    yp = np.broadcast_to(np.asarray(derivative, dtype=float), (n + 1,) + value.shape + (rough.d,))
    return ControlledPath(rough, Path(rough.grid, y), Path(rough.grid, yp), rough.alpha, role)


def _same_reference(a: RoughPath, b: RoughPath) -> bool:
    if a is b:
        return True
    return (a.grid == b.grid
            and np.array_equal(a.first_level.values, b.first_level.values)
            and np.array_equal(a.step_areas, b.step_areas))


def _require_same_reference(cp1: ControlledPath, cp2: ControlledPath):
    if not _same_reference(cp1.reference, cp2.reference):
        raise ContractError("controlled paths are built on different rough paths")


# ─────────────────────────────────────────────────────────────────────────────
# Remainders and norms
# ─────────────────────────────────────────────────────────────────────────────


def remainder(cp: ControlledPath, i: int, j: int) -> np.ndarray:
    """R^Y_{t_i,t_j} = Y_{t_i,t_j} - Y'_{t_i} X_{t_i,t_j}."""
    _check_pair(cp.grid.n_steps, i, j)
    dx = cp.reference.first_level.increment(i, j)
    return cp.y.increment(i, j) - cp.y_prime.values[i] @ dx


def remainder_rows(cp: ControlledPath, i: int, j_end: int) -> np.ndarray:
    """R^Y_{t_i,t_j} for j = i+1..j_end, first axis indexing j."""
    y = cp.y.values
    x = cp.reference.first_level.values
    dx = x[i + 1:j_end + 1] - x[i]
    return (y[i + 1:j_end + 1] - y[i]) - np.einsum("...a,ka->k...", cp.y_prime.values[i], dx)


def _flat_norms(rows: np.ndarray) -> np.ndarray:
    return np.linalg.norm(rows.reshape(rows.shape[0], -1), axis=1)


def remainder_norm(cp: ControlledPath, exponent: Optional[float] = None) -> float:
    """||R^Y||_{exponent}, default 2 alpha."""
    exponent = 2.0 * cp.alpha if exponent is None else exponent
    return pairwise_sup(cp.grid, lambda i, j_end: _flat_norms(remainder_rows(cp, i, j_end)), exponent)


def _sup(values: np.ndarray) -> float:
    return float(np.max(np.linalg.norm(values.reshape(values.shape[0], -1), axis=1)))


def full_norm(cp: ControlledPath) -> float:
    """[[Y, Y']]_{X, 2 alpha} without the auxiliary sup norms."""
    return (float(np.linalg.norm(cp.y.values[0])) + float(np.linalg.norm(cp.y_prime.values[0]))
            + holder_norm(cp.y_prime, cp.alpha) + remainder_norm(cp))


def controlled_norms(cp: ControlledPath) -> ControlledNorms:
    y_prime_alpha = holder_norm(cp.y_prime, cp.alpha)
    rem = remainder_norm(cp)
    seminorm = y_prime_alpha + rem
    pointed = float(np.linalg.norm(cp.y_prime.values[0])) + seminorm
    full = float(np.linalg.norm(cp.y.values[0])) + pointed
    return ControlledNorms(
        y_prime_alpha=y_prime_alpha,
        remainder_2alpha=rem,
        seminorm=seminorm,
        pointed=pointed,
        full=full,
        y_sup=_sup(cp.y.values),
        y_prime_sup=_sup(cp.y_prime.values),
        y_alpha=holder_norm(cp.y, cp.alpha),
    )


# ─────────────────────────────────────────────────────────────────────────────
# Composition
# ─────────────────────────────────────────────────────────────────────────────


def compose_smooth(field: CoefficientField, cp: ControlledPath) -> ControlledPath:
    """(f(Y), D_y f(Y) Y') as an operator-valued controlled path."""
    if cp.role != STATE:
        raise ContractError("compose_smooth needs a state-valued controlled path")
    if cp.m != field.m or cp.reference.d != field.d:
        raise DimensionMismatchError(
            f"field is ({field.m}, {field.d}), path is ({cp.m}, {cp.reference.d})")
    times = cp.grid.points
    y, yp = cp.y.values, cp.y_prime.values
    values = np.stack([field.eval_f(t, yk) for t, yk in zip(times, y)])
    derivs = np.stack([
        np.einsum("ibj,ja->iba", field.eval_df(t, yk), ypk)
        for t, yk, ypk in zip(times, y, yp)
    ])
    return ControlledPath(cp.reference, Path(cp.grid, values), Path(cp.grid, derivs),
                          cp.alpha, OPERATOR)


def _linear_family(phi, n_points: int) -> np.ndarray:
    arr = np.asarray(phi, dtype=float)
    if arr.ndim == 2:
        return np.broadcast_to(arr, (n_points,) + arr.shape)
    if arr.ndim == 3 and arr.shape[0] == n_points:
        return arr
    raise DimensionMismatchError(f"linear map of shape {arr.shape} is neither constant nor per grid point")


def compose_linear(phi, cp: ControlledPath) -> ControlledPath:
    """Apply a linear map (constant p x m, or one per grid point) to Y and Y'."""
    fam = _linear_family(phi, cp.grid.n_steps + 1)
    if fam.shape[2] != cp.m:
        raise DimensionMismatchError(f"map acts on R^{fam.shape[2]}, path lives in R^{cp.m}")
    y = np.einsum("kpm,km...->kp...", fam, cp.y.values)
    yp = np.einsum("kpm,km...->kp...", fam, cp.y_prime.values)
    return ControlledPath(cp.reference, Path(cp.grid, y), Path(cp.grid, yp), cp.alpha, cp.role)


def empirical_time_lipschitz(phi_family, grid: Grid, alpha: float) -> float:
    """Sampled L with |phi(t) - phi(s)|_op <= L |t - s|^{2 alpha}."""
    fam = _linear_family(phi_family, grid.n_steps + 1)

    def rows(i, j_end):
        return np.linalg.norm(fam[i + 1:j_end + 1] - fam[i], ord=2, axis=(1, 2))

    lip = pairwise_sup(grid, rows, 2.0 * alpha)
    logger.info("time-Lipschitz constant of linear family: %.6g", lip)
    return lip


def _bilinear_tensor(b, m1: int, m2: int) -> np.ndarray:
    arr = np.asarray(b, dtype=float)
    if arr.ndim != 3 or arr.shape[1:] != (m1, m2):
        raise DimensionMismatchError(f"bilinear tensor shape {arr.shape} does not act on R^{m1} x R^{m2}")
    return arr


def compose_bilinear(b, cp1: ControlledPath, cp2: ControlledPath) -> ControlledPath:
    """B(Y, Z) with derivative B(Y', Z) + B(Y, Z'); B is a (p, m1, m2) tensor."""
    _require_same_reference(cp1, cp2)
    if cp1.role != STATE or cp2.role != STATE:
        raise ContractError("compose_bilinear needs state-valued controlled paths")
    tensor = _bilinear_tensor(b, cp1.m, cp2.m)
    y, yp = cp1.y.values, cp1.y_prime.values
    z, zp = cp2.y.values, cp2.y_prime.values
    values = np.einsum("pij,ki,kj->kp", tensor, y, z)
    derivs = (np.einsum("pij,kia,kj->kpa", tensor, yp, z)
              + np.einsum("pij,ki,kja->kpa", tensor, y, zp))
    return ControlledPath(cp1.reference, Path(cp1.grid, values), Path(cp1.grid, derivs),
                          cp1.alpha, STATE)


def bilinear_remainder_terms(b, cp1: ControlledPath, cp2: ControlledPath,
                             i: int, j: int) -> Tuple[np.ndarray, np.ndarray]:
    """R^{B(Y,Z)}_{s,t} and B(R^Y, Z_s) + B(Y_s, R^Z) + B(Y_{s,t}, Z_{s,t})."""
    tensor = _bilinear_tensor(b, cp1.m, cp2.m)
    lhs = remainder(compose_bilinear(tensor, cp1, cp2), i, j)
    ys, zs = cp1.y.values[i], cp2.y.values[i]
    rhs = (np.einsum("pij,i,j->p", tensor, remainder(cp1, i, j), zs)
           + np.einsum("pij,i,j->p", tensor, ys, remainder(cp2, i, j))
           + np.einsum("pij,i,j->p", tensor, cp1.y.increment(i, j), cp2.y.increment(i, j)))
    return lhs, rhs


def bilinear_constant(b, cp1: ControlledPath, cp2: ControlledPath) -> float:
    """Empirical C in [[B(Y,Z)]] <= C [[Y]] [[Z]]."""
    out = controlled_norms(compose_bilinear(b, cp1, cp2)).full
    scale = controlled_norms(cp1).full * controlled_norms(cp2).full
    constant = out / scale if scale > 0 else 0.0
    logger.info("empirical bilinear constant: %.6g", constant)
    return constant


def pair(cp1: ControlledPath, cp2: ControlledPath) -> ControlledPath:
    """(Y, Z) in the product space, derivative (Y', Z')."""
    _require_same_reference(cp1, cp2)
    if cp1.role != STATE or cp2.role != STATE:
        raise ContractError("pair needs state-valued controlled paths")
    y = np.concatenate([cp1.y.values, cp2.y.values], axis=1)
    yp = np.concatenate([cp1.y_prime.values, cp2.y_prime.values], axis=1)
    return ControlledPath(cp1.reference, Path(cp1.grid, y), Path(cp1.grid, yp), cp1.alpha, STATE)


def controlled_difference(cp1: ControlledPath, cp2: ControlledPath) -> ControlledPath:
    _require_same_reference(cp1, cp2)
    if cp1.role != cp2.role or cp1.y.shape != cp2.y.shape:
        raise DimensionMismatchError("controlled paths differ in role or shape")
    return ControlledPath(
        cp1.reference,
        Path(cp1.grid, cp1.y.values - cp2.y.values),
        Path(cp1.grid, cp1.y_prime.values - cp2.y_prime.values),
        cp1.alpha, cp1.role,
    )


def restrict_controlled(cp: ControlledPath, i: int, j: int) -> ControlledPath:
    rough = restrict_rough_path(cp.reference, i, j)
    return ControlledPath(
        rough,
        Path(rough.grid, cp.y.values[i:j + 1]),
        Path(rough.grid, cp.y_prime.values[i:j + 1]),
        cp.alpha, cp.role,
    )


# ─────────────────────────────────────────────────────────────────────────────
# Text format
# ─────────────────────────────────────────────────────────────────────────────


def save_controlled(cp: ControlledPath, file_path, meta=None):
    lines = format_rough_path(cp.reference, meta)
    shape = ",".join(str(s) for s in cp.y.shape)
    lines.append(f"{CONTROLLED_TAG} role={cp.role} alpha={float(cp.alpha)!r} shape={shape}")
    lines.append("y")
    lines.extend(_fmt_row(v) for v in cp.y.values)
    lines.append("y_prime")
    lines.extend(_fmt_row(v) for v in cp.y_prime.values)
    FilePath(file_path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _expect(lines: Sequence[str], pos: int, word: str):
    if pos >= len(lines) or lines[pos] != word:
        raise RoughPathFormatError(f"line {pos + 1}: expected '{word}'")


def load_controlled(file_path) -> Tuple[ControlledPath, dict]:
    lines = [ln.strip() for ln in FilePath(file_path).read_text(encoding="utf-8").splitlines()
             if ln.strip()]
    rough, meta, _, pos = parse_rough_path(lines)
    if pos >= len(lines):
        raise RoughPathFormatError("missing controlled section")
    fields = _parse_fields(lines[pos], CONTROLLED_TAG, pos + 1)
    try:
        shape = tuple(int(s) for s in fields["shape"].split(","))
        alpha = float(fields["alpha"])
        role = fields["role"]
    except (KeyError, ValueError) as exc:
        raise RoughPathFormatError(f"line {pos + 1}: bad controlled header ({exc})") from exc
    n, d = rough.n_steps, rough.d
    width = int(math.prod(shape))
    pos += 1
    _expect(lines, pos, "y")
    y = _read_block(lines, pos + 1, n + 1, width).reshape((n + 1,) + shape)
    pos += n + 2
    _expect(lines, pos, "y_prime")
    yp = _read_block(lines, pos + 1, n + 1, width * d).reshape((n + 1,) + shape + (d,))
    pos += n + 2
    if pos != len(lines):
        raise RoughPathFormatError(f"line {pos + 1}: unexpected trailing content")
    cp = ControlledPath(rough, Path(rough.grid, y), Path(rough.grid, yp), alpha, role)
    return cp, meta

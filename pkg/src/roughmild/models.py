"""Data models used across the package"""

import math
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np

from .errors import ContractError, DimensionMismatchError, ParameterError

ALPHA_MIN = 1.0 / 3.0
ALPHA_MAX = 0.5

STATE = "state"        # values in R^m
OPERATOR = "operator"  # values in L(R^d, R^m), stored as m x d matrices

ITO_WIENER = "ito_wiener"
GEOMETRIC_WIENER = "geometric_wiener"
GEOMETRIC_FBM = "geometric_fbm"
DRIVER_KINDS = (ITO_WIENER, GEOMETRIC_WIENER, GEOMETRIC_FBM)


def _frozen_array(values) -> np.ndarray:
    arr = np.array(values, dtype=float)
    arr.setflags(write=False)
    return arr


def check_rough_alpha(alpha: float) -> float:
    """Validate a rough-path exponent in (1/3, 1/2]."""
    if not (ALPHA_MIN < alpha <= ALPHA_MAX):
        raise ParameterError(f"alpha must lie in (1/3, 1/2], got {alpha!r}")
    return float(alpha)


@dataclass(frozen=True)
class Grid:
    """Uniform grid on [origin, origin + horizon]."""
    horizon: float          # interval length T
    n_steps: int
    origin: float = 0.0     # 0 for the global grid, t_i for solver windows

    def __post_init__(self):
        if not (math.isfinite(self.horizon) and self.horizon > 0):
            raise ParameterError(f"horizon must be positive and finite, got {self.horizon!r}")
        if int(self.n_steps) != self.n_steps or self.n_steps < 1:
            raise ParameterError(f"n_steps must be a positive integer, got {self.n_steps!r}")

    @property
    def step(self) -> float:
        return self.horizon / self.n_steps

    @property
    def points(self) -> np.ndarray:
        return np.linspace(self.origin, self.origin + self.horizon, self.n_steps + 1)

    def window(self, i: int, j: int) -> "Grid":
        """Sub-grid over [t_i, t_j] sharing this grid's spacing."""
        if not (0 <= i < j <= self.n_steps):
            raise ParameterError(f"invalid window ({i}, {j}) on {self.n_steps} steps")
        return Grid(horizon=(j - i) * self.step, n_steps=j - i,
                    origin=self.origin + i * self.step)

    def steps_within(self, length: float) -> int:
        """Number of whole steps that fit in a time length."""
        return int(math.floor(length / self.step + 1e-9))


@dataclass(frozen=True)
class Path:
    """Grid-sampled values; trailing axes hold vectors or matrices."""
    grid: Grid
    values: np.ndarray

    def __post_init__(self):
        arr = _frozen_array(self.values)
        if arr.ndim == 1:
            arr = _frozen_array(arr[:, None])
        if arr.shape[0] != self.grid.n_steps + 1:
            raise DimensionMismatchError(
                f"path has {arr.shape[0]} samples, grid needs {self.grid.n_steps + 1}")
        if not np.all(np.isfinite(arr)):
            raise ParameterError("path values must be finite")
        object.__setattr__(self, "values", arr)

    @property
    def shape(self) -> Tuple[int, ...]:
        return tuple(self.values.shape[1:])

    @property
    def dim(self) -> int:
        return int(np.prod(self.shape))

    def increment(self, i: int, j: int) -> np.ndarray:
        return self.values[j] - self.values[i]


@dataclass(frozen=True)
class RoughPath:
    """First level on the grid plus one second-level tensor per step."""
    first_level: Path
    step_areas: np.ndarray   # (n_steps, d, d), entry i is XX_{t_i, t_{i+1}}
    alpha: float

    def __post_init__(self):
        check_rough_alpha(self.alpha)
        if len(self.first_level.shape) != 1:
            raise DimensionMismatchError("rough path first level must be vector-valued")
        areas = _frozen_array(self.step_areas)
        d = self.first_level.shape[0]
        if areas.shape != (self.first_level.grid.n_steps, d, d):
            raise DimensionMismatchError(
                f"step_areas shape {areas.shape} does not match "
                f"({self.first_level.grid.n_steps}, {d}, {d})")
        if not np.all(np.isfinite(areas)):
            raise ParameterError("step areas must be finite")
        object.__setattr__(self, "step_areas", areas)

    @property
    def grid(self) -> Grid:
        return self.first_level.grid

    @property
    def d(self) -> int:
        return self.first_level.shape[0]

    @property
    def n_steps(self) -> int:
        return self.grid.n_steps

    @property
    def increments(self) -> np.ndarray:
        return np.diff(self.first_level.values, axis=0)


@dataclass(frozen=True)
class HoelderReport:
    alpha: float
    x_norm: float
    xx_norm: float
    combined: float
    window: Optional[float] = None
    x_norm_windowed: Optional[float] = None
    xx_norm_windowed: Optional[float] = None


@dataclass(frozen=True)
class ControlledPath:
    """Path Y with Gubinelli derivative Y' against a shared rough path.

    y_prime carries one extra trailing axis of length d (the direction
    in which the derivative acts); y_prime[k] @ X_{s,t} has y's shape.
    """
    reference: RoughPath
    y: Path
    y_prime: Path
    alpha: float
    role: str = STATE

    def __post_init__(self):
        if self.role not in (STATE, OPERATOR):
            raise ContractError(f"unknown role {self.role!r}")
        grid = self.reference.grid
        if self.y.grid != grid or self.y_prime.grid != grid:
            raise DimensionMismatchError("y and y_prime must share the reference grid")
        d = self.reference.d
        if self.y_prime.shape != self.y.shape + (d,):
            raise DimensionMismatchError(
                f"y_prime shape {self.y_prime.shape} must be y shape {self.y.shape} + ({d},)")
        if self.role == STATE and len(self.y.shape) != 1:
            raise ContractError("state-valued controlled path needs vector values")
        if self.role == OPERATOR and (len(self.y.shape) != 2 or self.y.shape[1] != d):
            raise ContractError("operator-valued controlled path needs m x d values")

    @property
    def grid(self) -> Grid:
        return self.reference.grid

    @property
    def m(self) -> int:
        return self.y.shape[0]


@dataclass(frozen=True)
class ControlledNorms:
    y_prime_alpha: float      # ||Y'||_alpha
    remainder_2alpha: float   # ||R^Y||_{2 alpha}
    seminorm: float           # ||Y, Y'||_{X, 2 alpha}
    pointed: float            # |Y'_0| + seminorm
    full: float               # |Y_0| + pointed
    y_sup: float = 0.0
    y_prime_sup: float = 0.0
    y_alpha: float = 0.0


@dataclass(frozen=True)
class CheckResult:
    """One verification row: passes when slack = rhs - lhs >= -tol."""
    check_id: str
    instance_id: str
    lhs: float
    rhs: float
    slack: float
    passed: bool

    @classmethod
    def upper_bound(cls, check_id: str, instance_id, lhs: float, rhs: float,
                    tol: float = 1e-10) -> "CheckResult":
        lhs, rhs = float(lhs), float(rhs)
        slack = rhs - lhs
        passed = bool(math.isfinite(slack) and slack >= -tol)
        return cls(check_id, str(instance_id), lhs, rhs, slack, passed)


@dataclass(frozen=True)
class QSpectrum:
    """Leading eigenvalues of the covariance operator Q, descending."""
    eigenvalues: np.ndarray

    def __post_init__(self):
        lam = np.sort(np.asarray(self.eigenvalues, dtype=float).ravel())[::-1]
        if lam.size == 0 or not np.all(lam > 0) or not np.all(np.isfinite(lam)):
            raise ParameterError("spectrum eigenvalues must be positive and finite")
        object.__setattr__(self, "eigenvalues", _frozen_array(lam))

    @property
    def d(self) -> int:
        return int(self.eigenvalues.size)

    @property
    def trace(self) -> float:
        return float(self.eigenvalues.sum())

    @classmethod
    def polynomial(cls, decay: float = 2.0, d: int = 8) -> "QSpectrum":
        """lambda_k = k^-decay normalized to trace 1."""
        lam = np.arange(1, d + 1, dtype=float) ** (-float(decay))
        return cls(lam / lam.sum())


@dataclass(frozen=True)
class DriverSample:
    rough: RoughPath
    kind: str
    hurst: float
    fine_factor: int
    seed: int
    spectrum: Optional[QSpectrum] = None

    def __post_init__(self):
        if self.kind not in DRIVER_KINDS:
            raise ContractError(f"unknown driver kind {self.kind!r}")
        if self.kind == ITO_WIENER and self.hurst != 0.5:
            raise ContractError("ito_wiener drivers have hurst 1/2")


@dataclass(frozen=True)
class SolveConfig:
    alpha: float = 0.45
    picard_tol: float = 1e-10
    max_picard_iters: int = 50
    initial_window: float = 1.0        # fraction of T
    min_window_steps: int = 1
    contraction_target: float = 0.9
    rejection_streak: int = 3
    initial_iterate: str = "constant"  # or "orbit"
    convolution_rule: str = "left"     # or "trapezoid", "exponential"

    def __post_init__(self):
        check_rough_alpha(self.alpha)
        if self.picard_tol <= 0 or self.contraction_target <= 0:
            raise ParameterError("tolerances must be positive")
        if self.max_picard_iters < 1 or self.min_window_steps < 1:
            raise ParameterError("iteration and window counts must be positive")
        if not (0 < self.initial_window <= 1):
            raise ParameterError("initial_window is a fraction of T in (0, 1]")
        if self.initial_iterate not in ("constant", "orbit"):
            raise ParameterError(f"unknown initial iterate {self.initial_iterate!r}")
        if self.convolution_rule not in ("left", "trapezoid", "exponential"):
            raise ParameterError(f"unknown convolution rule {self.convolution_rule!r}")


@dataclass
class WindowOutcome:
    window: Tuple[int, int]          # global grid indices [i, j]
    accepted: bool
    path: Optional[ControlledPath]
    history: List[float] = field(default_factory=list)
    reason: str = ""


@dataclass
class SolveReport:
    solution: ControlledPath
    xi: np.ndarray
    windows: List[Tuple[int, int]]
    picard_residuals: List[List[float]]
    mild_residual: float
    strong_residual: float
    norms: ControlledNorms
    apriori_sup: float


@dataclass(frozen=True)
class MomentScaling:
    """Monte Carlo moments of |X_{s,t}|^p and |XX_{s,t}|^p against |t - s|."""
    p: int
    scales: np.ndarray
    first_moments: np.ndarray
    second_moments: np.ndarray
    first_slope: float
    second_slope: float


@dataclass(frozen=True)
class CoincidenceSweep:
    """Median rough-minus-Itô gap per resolution."""
    n_steps: Tuple[int, ...]
    median_gap: Tuple[float, ...]
    median_relative_gap: Tuple[float, ...]

    @property
    def decreasing(self) -> bool:
        gaps = self.median_gap
        return all(b < a for a, b in zip(gaps, gaps[1:]))

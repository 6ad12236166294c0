"""Named solver scenarios and reusable coefficient fields."""

from dataclasses import dataclass
from typing import Callable, Dict

import numpy as np

from .controlled import CoefficientField, compose_smooth, driver_as_controlled
from .errors import ParameterError
from .models import GEOMETRIC_FBM, ITO_WIENER, ControlledPath, QSpectrum, RoughPath
from .semigroup import laplacian_1d, zero_generator


@dataclass(frozen=True)
class Preset:
    name: str
    a_matrix: np.ndarray
    field: CoefficientField
    xi: np.ndarray
    driver_kind: str
    hurst: float
    spectrum: QSpectrum
    description: str = ""


def sine_field(d: int) -> CoefficientField:
    """f(x) = diag(sin x_1, ..., sin x_d), used as an integrand of the driver itself."""
    def f(t, x):
        return np.diag(np.sin(x))

    def df(t, x):
        out = np.zeros((d, d, d))
        idx = np.arange(d)
        out[idx, idx, idx] = np.cos(x)
        return out

    return CoefficientField(m=d, d=d, f=f, df=df, cb_f=1.0, name="sine")


def sine_integrand(rough: RoughPath) -> ControlledPath:
    """(sin X, cos X) as an operator-valued controlled path."""
    return compose_smooth(sine_field(rough.d), driver_as_controlled(rough))


def sine_modes(m: int, d: int) -> np.ndarray:
    """Columns are the first d discrete Dirichlet eigenvectors on m points."""
    i = np.arange(1, m + 1)[:, None]
    k = np.arange(1, d + 1)[None, :]
    return np.sqrt(2.0 / (m + 1)) * np.sin(np.pi * i * k / (m + 1))


def _bump(m: int) -> np.ndarray:
    return np.sin(np.pi * np.arange(1, m + 1) / (m + 1))


def linear_scalar_geometric(xi: float = 1.0, hurst: float = 0.4, **_) -> Preset:
    field = CoefficientField(
        m=1, d=1,
        f=lambda t, y: y.reshape(1, 1),
        df=lambda t, y: np.ones((1, 1, 1)),
        bounded=False, name="linear",
    )
    return Preset("linear_scalar_geometric", zero_generator(1), field, np.array([xi]),
                  GEOMETRIC_FBM, hurst, QSpectrum([1.0]),
                  "dY = Y dX, A = 0; solution xi exp(X_t)")


def heat_additive(size: int = 32, modes: int = 8, noise: float = 0.1, **_) -> Preset:
    basis = noise * sine_modes(size, modes)
    field = CoefficientField(
        m=size, d=modes,
        f0=lambda t, y: np.tanh(y),
        f=lambda t, y: basis,
        df=lambda t, y: np.zeros((size, modes, size)),
        lip_f0=1.0, cb_f=float(np.abs(basis).max()), name="heat_additive",
    )
    return Preset("heat_additive", laplacian_1d(size), field, _bump(size),
                  ITO_WIENER, 0.5, QSpectrum.polynomial(2.0, modes),
                  "Dirichlet heat equation, f0 = tanh, additive Q-Wiener noise")


def heat_multiplicative(size: int = 32, modes: int = 8, noise: float = 0.3,
                        hurst: float = 0.45, **_) -> Preset:
    basis = noise * sine_modes(size, modes)
    idx = np.arange(size)

    def f(t, y):
        return np.sin(y)[:, None] * basis

    def df(t, y):
        out = np.zeros((size, modes, size))
        out[idx, :, idx] = np.cos(y)[:, None] * basis
        return out

    field = CoefficientField(m=size, d=modes, f0=lambda t, y: np.tanh(y), f=f, df=df,
                             lip_f0=1.0, cb_f=float(np.abs(basis).max()),
                             name="heat_multiplicative")
    return Preset("heat_multiplicative", laplacian_1d(size), field, _bump(size),
                  GEOMETRIC_FBM, hurst, QSpectrum.polynomial(2.0, modes),
                  "Dirichlet heat equation, f(y) = sin(y) times sine modes, Q-fBm driver")


def rode_flat(hurst: float = 0.4, **_) -> Preset:
    def f(t, y):
        return 0.5 * np.array([[np.cos(y[1]), 0.0], [0.0, np.sin(y[0])]])

    def df(t, y):
        out = np.zeros((2, 2, 2))
        out[0, 0, 1] = -0.5 * np.sin(y[1])
        out[1, 1, 0] = 0.5 * np.cos(y[0])
        return out

    field = CoefficientField(m=2, d=2, f0=lambda t, y: -y, f=f, df=df,
                             lip_f0=1.0, cb_f=0.5, name="rode_flat")
    return Preset("rode_flat", zero_generator(2), field, np.array([1.0, 0.5]),
                  GEOMETRIC_FBM, hurst, QSpectrum([0.5, 0.5]),
                  "A = 0 rough ODE with bounded trigonometric diffusion")


PRESETS: Dict[str, Callable[..., Preset]] = {
    "linear_scalar_geometric": linear_scalar_geometric,
    "heat_additive": heat_additive,
    "heat_multiplicative": heat_multiplicative,
    "rode_flat": rode_flat,
}


def get_preset(name: str, **params) -> Preset:
    try:
        factory = PRESETS[name]
    except KeyError:
        raise ParameterError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}") from None
    return factory(**params)

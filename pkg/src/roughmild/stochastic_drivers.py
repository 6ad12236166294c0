"""Q-Wiener and Q-fractional Brownian rough-path drivers.

Randomness comes from counter-based Philox streams, one substream per
(seed, component), so a sample depends only on its seed and settings
and can be drawn on any worker thread.
"""

import logging
from functools import lru_cache
from typing import Callable, Dict, Optional, Sequence

import numpy as np
import scipy.linalg

from .errors import CholeskyError, ContractError, ParameterError, RoughPathFormatError
from .gubinelli import left_sum, rough_integral
from .models import (
    ALPHA_MIN,
    GEOMETRIC_FBM,
    GEOMETRIC_WIENER,
    ITO_WIENER,
    CoincidenceSweep,
    ControlledPath,
    DriverSample,
    Grid,
    MomentScaling,
    Path,
    QSpectrum,
    RoughPath,
)
from .rough_core import (
    coarsen_rough_path,
    enhance_piecewise_linear,
    fit_loglog_slope,
    load_rough_path,
    save_rough_path,
)

logger = logging.getLogger(__name__)

WIENER_ALPHA = 0.45
CHOLESKY_JITTER = 1e-12
LINEAR_CONTROL = "linear"


def substream(seed: int, component: int) -> np.random.Generator:
    """Independent Philox stream for one (seed, component) pair."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(component,))))


def default_alpha(hurst: float) -> float:
    return max(ALPHA_MIN + 1e-3, hurst - 0.05)


# ─────────────────────────────────────────────────────────────────────────────
# Q-Wiener
# ─────────────────────────────────────────────────────────────────────────────


def sample_q_wiener(spectrum: QSpectrum, grid: Grid, fine_factor: int = 16, seed: int = 0,
                    alpha: float = WIENER_ALPHA, enhancement: str = "ito") -> DriverSample:
    """Q-Wiener rough path with second level from fine-grid double sums.

    ``enhancement="ito"`` uses left-point sums (the Itô lift);
    ``"geometric"`` integrates the piecewise-linear fine path instead.
    """
    if fine_factor < 8 or fine_factor & (fine_factor - 1):
        raise ParameterError(f"fine_factor must be a power of two >= 8, got {fine_factor}")
    if enhancement not in ("ito", "geometric"):
        raise ParameterError(f"unknown enhancement {enhancement!r}")
    n, d = grid.n_steps, spectrum.d
    fine_step = grid.step / fine_factor
    db = np.empty((n * fine_factor, d))
    for k in range(d):
        db[:, k] = substream(seed, k).normal(0.0, np.sqrt(fine_step), n * fine_factor)
    db = db.reshape(n, fine_factor, d)
    b_rel = np.cumsum(db, axis=1) - db
    if enhancement == "geometric":
        b_rel = b_rel + 0.5 * db
    weights = np.sqrt(spectrum.eigenvalues)
    areas = np.einsum("nrj,nrk->njk", b_rel, db) * np.outer(weights, weights)
    steps = db.sum(axis=1) * weights
    first = np.concatenate([np.zeros((1, d)), np.cumsum(steps, axis=0)])
    rough = RoughPath(Path(grid, first), areas, alpha)
    kind = ITO_WIENER if enhancement == "ito" else GEOMETRIC_WIENER
    return DriverSample(rough, kind, 0.5, fine_factor, seed, spectrum)


# ─────────────────────────────────────────────────────────────────────────────
# Q-fBm
# ─────────────────────────────────────────────────────────────────────────────


def fbm_covariance(times: np.ndarray, hurst: float) -> np.ndarray:
    """1/2 (s^{2H} + t^{2H} - |t - s|^{2H})."""
    s, t = np.meshgrid(times, times, indexing="ij")
    two_h = 2.0 * hurst
    return 0.5 * (s ** two_h + t ** two_h - np.abs(t - s) ** two_h)


@lru_cache(maxsize=16)
def _fbm_factor(n_steps: int, horizon: float, hurst: float) -> np.ndarray:
    times = np.linspace(0.0, horizon, n_steps + 1)[1:]
    cov = fbm_covariance(times, hurst)
    try:
        factor = scipy.linalg.cholesky(cov, lower=True)
    except np.linalg.LinAlgError:
        logger.warning("fBm covariance not positive definite (H=%g, n=%d); retrying with jitter",
                       hurst, n_steps)
        try:
            factor = scipy.linalg.cholesky(cov + CHOLESKY_JITTER * np.eye(n_steps), lower=True)
        except np.linalg.LinAlgError as exc:
            raise CholeskyError(f"fBm covariance factorization failed for H={hurst}") from exc
    factor.setflags(write=False)
    return factor


def sample_q_fbm(spectrum: QSpectrum, hurst: float, grid: Grid, seed: int = 0,
                 alpha: Optional[float] = None) -> DriverSample:
    """Q-fBm components by exact Cholesky sampling, lifted piecewise-linearly."""
    if not (ALPHA_MIN < hurst <= 0.5):
        raise ParameterError(f"hurst must lie in (1/3, 1/2], got {hurst!r}")
    alpha = default_alpha(hurst) if alpha is None else alpha
    n, d = grid.n_steps, spectrum.d
    factor = _fbm_factor(n, grid.horizon, float(hurst))
    values = np.zeros((n + 1, d))
    for k in range(d):
        values[1:, k] = factor @ substream(seed, k).standard_normal(n)
    values *= np.sqrt(spectrum.eigenvalues)
    rough = enhance_piecewise_linear(Path(grid, values), alpha)
    return DriverSample(rough, GEOMETRIC_FBM, float(hurst), 1, seed, spectrum)


def sample_driver(kind: str, spectrum: QSpectrum, grid: Grid, seed: int, hurst: float = 0.5,
                  fine_factor: int = 16, alpha: Optional[float] = None) -> DriverSample:
    if kind == ITO_WIENER:
        return sample_q_wiener(spectrum, grid, fine_factor, seed, alpha or WIENER_ALPHA)
    if kind == GEOMETRIC_WIENER:
        return sample_q_wiener(spectrum, grid, fine_factor, seed, alpha or WIENER_ALPHA,
                               enhancement="geometric")
    if kind == GEOMETRIC_FBM:
        return sample_q_fbm(spectrum, hurst, grid, seed, alpha)
    raise ParameterError(f"unknown driver kind {kind!r}")


def linear_driver(spectrum: QSpectrum, grid: Grid, alpha: float = WIENER_ALPHA) -> RoughPath:
    """X_t = t sqrt(lambda), exactly enhanced; deterministic control input."""
    values = np.outer(grid.points - grid.origin, np.sqrt(spectrum.eigenvalues))
    return enhance_piecewise_linear(Path(grid, values), alpha)


# ─────────────────────────────────────────────────────────────────────────────
# Driver files
# ─────────────────────────────────────────────────────────────────────────────


def save_driver(sample: DriverSample, file_path, full_table: Optional[np.ndarray] = None):
    meta: Dict[str, object] = {
        "kind": sample.kind,
        "hurst": repr(sample.hurst),
        "seed": sample.seed,
        "fine_factor": sample.fine_factor,
    }
    if sample.spectrum is not None:
        meta["lambda"] = ",".join(repr(float(v)) for v in sample.spectrum.eigenvalues)
    save_rough_path(sample.rough, file_path, meta, full_table)


def load_driver(file_path):
    """Returns (DriverSample, full table or None)."""
    rough, meta, table = load_rough_path(file_path)
    try:
        spectrum = QSpectrum([float(v) for v in meta["lambda"].split(",")]) if "lambda" in meta else None
        sample = DriverSample(rough, meta["kind"], float(meta["hurst"]),
                              int(meta.get("fine_factor", 1)), int(meta.get("seed", 0)), spectrum)
    except (KeyError, ValueError) as exc:
        raise RoughPathFormatError(f"{file_path}: bad driver meta line ({exc})") from exc
    return sample, table


# ─────────────────────────────────────────────────────────────────────────────
# Monte Carlo probes
# ─────────────────────────────────────────────────────────────────────────────


def dyadic_lengths(n_steps: int):
    """1, 2, 4, ... up to n_steps / 2."""
    length = 1
    while 2 * length <= n_steps:
        yield length
        length *= 2


def moment_scaling_probe(kind: str, spectrum: QSpectrum, grid: Grid, p: int, n_seeds: int,
                         base_seed: int = 0, fine_factor: int = 16) -> MomentScaling:
    """E|X_{s,t}|^p and E|XX_{s,t}|^p over disjoint dyadic intervals, with log-log slopes."""
    if kind not in (ITO_WIENER, LINEAR_CONTROL):
        raise ContractError(f"moment probe runs on ito_wiener or the linear control, not {kind!r}")
    if p not in (2, 4):
        raise ParameterError(f"p must be 2 or 4, got {p}")
    lengths = list(dyadic_lengths(grid.n_steps))
    first = np.zeros(len(lengths))
    second = np.zeros(len(lengths))
    seeds = range(base_seed, base_seed + n_seeds) if kind == ITO_WIENER else [base_seed]
    for seed in seeds:
        if kind == ITO_WIENER:
            rough = sample_q_wiener(spectrum, grid, fine_factor, seed).rough
        else:
            rough = linear_driver(spectrum, grid)
        for idx, length in enumerate(lengths):
            coarse = coarsen_rough_path(rough, length)
            first[idx] += np.mean(np.linalg.norm(coarse.increments, axis=1) ** p)
            second[idx] += np.mean(np.linalg.norm(coarse.step_areas, axis=(1, 2)) ** p)
    first /= len(seeds)
    second /= len(seeds)
    scales = np.array(lengths) * grid.step
    return MomentScaling(p, scales, first, second,
                         fit_loglog_slope(scales, first), fit_loglog_slope(scales, second))


def ito_integral_leftpoint(y: Path, driver: DriverSample, j: int) -> np.ndarray:
    """sum_{k<j} Y_{t_k} X_{t_k,t_{k+1}} for an operator-valued path y."""
    dx = driver.rough.increments[:j]
    return left_sum(np.einsum("kmb,kb->km", y.values[:j], dx))


def coincidence_gap(cp: ControlledPath, driver: DriverSample, require_ito: bool = True) -> float:
    """|rough integral - left-point Itô sum| over the whole grid."""
    if require_ito and driver.kind != ITO_WIENER:
        raise ContractError(f"coincidence check needs an ito_wiener driver, got {driver.kind}")
    n = cp.grid.n_steps
    return float(np.linalg.norm(rough_integral(cp, 0, n) - ito_integral_leftpoint(cp.y, driver, n)))


def coincidence_sweep(build_integrand: Callable[[RoughPath], ControlledPath], spectrum: QSpectrum,
                      horizon: float, resolutions: Sequence[int], seeds: Sequence[int],
                      fine_factor: int = 16, enhancement: str = "ito") -> CoincidenceSweep:
    """Median gap per resolution, all resolutions cut from one finest sample per seed."""
    resolutions = tuple(sorted(resolutions))
    finest = resolutions[-1]
    if any(finest % n for n in resolutions):
        raise ParameterError("every resolution must divide the finest one")
    gaps = np.zeros((len(seeds), len(resolutions)))
    scales = np.zeros_like(gaps)
    for row, seed in enumerate(seeds):
        sample = sample_q_wiener(spectrum, Grid(horizon, finest), fine_factor, seed,
                                 enhancement=enhancement)
        for col, n in enumerate(resolutions):
            rough = coarsen_rough_path(sample.rough, finest // n)
            coarse = DriverSample(rough, sample.kind, 0.5, fine_factor * finest // n, seed, spectrum)
            cp = build_integrand(rough)
            gaps[row, col] = coincidence_gap(cp, coarse, require_ito=enhancement == "ito")
            scales[row, col] = float(np.linalg.norm(ito_integral_leftpoint(cp.y, coarse, n)))
    median_gap = np.median(gaps, axis=0)
    scale = np.maximum(np.median(scales, axis=0), np.finfo(float).tiny)
    logger.info("coincidence sweep (%s): median gaps %s", enhancement, np.array2string(median_gap))
    return CoincidenceSweep(resolutions, tuple(float(g) for g in median_gap),
                            tuple(float(g) for g in median_gap / scale))


def fbm_covariance_probe(spectrum: QSpectrum, hurst: float, grid: Grid, n_seeds: int,
                         base_seed: int = 0) -> float:
    """max |empirical Cov(X^k_s, X^k_t) - R(s,t) lambda_k| in units of its standard error."""
    times = grid.points[1:] - grid.origin
    target = fbm_covariance(times, hurst)[None] * spectrum.eigenvalues[:, None, None]
    samples = np.stack([
        sample_q_fbm(spectrum, hurst, grid, seed).rough.first_level.values[1:]
        for seed in range(base_seed, base_seed + n_seeds)
    ])                                             # (seeds, n, d)
    products = np.einsum("sik,sjk->skij", samples, samples)
    mean = products.mean(axis=0)
    se = products.std(axis=0, ddof=1) / np.sqrt(n_seeds)
    return float(np.max(np.abs(mean - target) / np.maximum(se, np.finfo(float).tiny)))

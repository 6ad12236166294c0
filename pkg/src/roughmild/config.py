"""INI run configuration.

Sections and keys (all optional, defaults shown in ``configs/default.ini``):

    [run]        seed, out, reproducible
    [grid]       horizon, steps
    [driver]     kind, hurst, fine_factor, spectrum, alpha, file
    [semigroup]  generator, spacing, diagonal, coupling, matrix_file
    [solver]     preset, size, modes, noise, hurst, xi, alpha, picard_tol,
                 max_picard_iters, initial_window, min_window_steps,
                 contraction_target, rejection_streak, initial_iterate,
                 convolution_rule
    [montecarlo] experiment, n_seeds, p, resolutions
    [verify]     suites, instances, steps, hursts, quad_steps, quad_samples,
                 sewing_steps, sewing_levels, alpha, beta, driver_file
"""

import configparser
import hashlib
import re
from dataclasses import dataclass, field, fields
from pathlib import Path as FilePath
from typing import Dict, Optional, Tuple

from .errors import ConfigError, RoughMildError
from .models import DRIVER_KINDS, QSpectrum, SolveConfig

ALL_SUITES = ("chen", "geometric", "scaling", "norms", "semigroup", "sewing", "convolution")
EXPERIMENTS = ("moments", "coincidence", "covariance", "ito_defect", "apriori", "linear_closed_form")

_SECTION_RE = re.compile(r"^\s*\[([^\]]+)\]")
_KEY_RE = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")
_POLY_RE = re.compile(r"^\s*polynomial\s*\((.*)\)\s*$")


@dataclass(frozen=True)
class RunSection:
    seed: int = 1
    out: str = "results"
    reproducible: bool = False


@dataclass(frozen=True)
class GridSection:
    horizon: float = 1.0
    steps: int = 256


@dataclass(frozen=True)
class DriverSection:
    kind: Optional[str] = None         # None: the preset's driver
    hurst: float = 0.4
    fine_factor: int = 16
    spectrum: QSpectrum = field(default_factory=lambda: QSpectrum.polynomial(2.0, 4))
    alpha: Optional[float] = None
    file: Optional[str] = None


@dataclass(frozen=True)
class SemigroupSection:
    generator: str = "preset"          # or a make_generator name
    spacing: Optional[float] = None
    diagonal: Optional[Tuple[float, ...]] = None
    coupling: float = 4.0
    matrix_file: Optional[str] = None


@dataclass(frozen=True)
class SolverSection:
    preset: str = "heat_additive"
    size: int = 32
    modes: int = 8
    noise: Optional[float] = None
    hurst: Optional[float] = None
    xi: Optional[float] = None
    solve: SolveConfig = field(default_factory=SolveConfig)

    def preset_params(self) -> Dict[str, object]:
        """Keyword arguments understood by the preset factories."""
        params: Dict[str, object] = {"size": self.size, "modes": self.modes}
        for name in ("noise", "hurst", "xi"):
            value = getattr(self, name)
            if value is not None:
                params[name] = value
        return params


@dataclass(frozen=True)
class MonteCarloSection:
    experiment: str = "moments"
    n_seeds: int = 100
    p: int = 2
    resolutions: Tuple[int, ...] = (256, 1024, 4096)


@dataclass(frozen=True)
class VerifySection:
    suites: Tuple[str, ...] = ALL_SUITES
    instances: int = 3
    steps: int = 64
    hursts: Tuple[float, ...] = (0.35, 0.4, 0.45, 0.5)
    quad_steps: int = 32
    quad_samples: int = 5
    sewing_steps: int = 1024
    sewing_levels: int = 8
    alpha: float = 0.35
    beta: float = 0.45
    driver_file: Optional[str] = None


@dataclass(frozen=True)
class RunConfig:
    run: RunSection = field(default_factory=RunSection)
    grid: GridSection = field(default_factory=GridSection)
    driver: DriverSection = field(default_factory=DriverSection)
    semigroup: SemigroupSection = field(default_factory=SemigroupSection)
    solver: SolverSection = field(default_factory=SolverSection)
    montecarlo: MonteCarloSection = field(default_factory=MonteCarloSection)
    verify: VerifySection = field(default_factory=VerifySection)
    config_hash: str = hashlib.sha256(b"").hexdigest()[:12]
    source: Optional[str] = None


def parse_spectrum(text: str) -> QSpectrum:
    """``polynomial(decay=2, d=8)`` or an explicit comma-separated eigenvalue list."""
    match = _POLY_RE.match(text)
    if match:
        kwargs = {}
        for part in filter(None, (p.strip() for p in match.group(1).split(","))):
            key, sep, value = part.partition("=")
            if not sep or key.strip() not in ("decay", "d"):
                raise ValueError(f"bad polynomial argument {part!r}")
            kwargs[key.strip()] = float(value) if key.strip() == "decay" else int(value)
        return QSpectrum.polynomial(**kwargs)
    return QSpectrum([float(v) for v in text.split(",")])


def _key_lines(text: str) -> Dict[Tuple[str, str], int]:
    lines: Dict[Tuple[str, str], int] = {}
    section = ""
    for lineno, raw in enumerate(text.splitlines(), start=1):
        header = _SECTION_RE.match(raw)
        if header:
            section = header.group(1).strip()
            lines[(section, "")] = lineno
            continue
        key = _KEY_RE.match(raw)
        if key and section:
            lines[(section, key.group(1).strip().lower())] = lineno
    return lines


def _float_tuple(text: str) -> Tuple[float, ...]:
    return tuple(float(v) for v in text.split(",") if v.strip())


def _int_tuple(text: str) -> Tuple[int, ...]:
    return tuple(int(v) for v in text.split(",") if v.strip())


def _name_tuple(text: str) -> Tuple[str, ...]:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def _bool(text: str) -> bool:
    lowered = text.strip().lower()
    if lowered in ("1", "true", "yes", "on"):
        return True
    if lowered in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def _optional(convert):
    def parse(text: str):
        return None if not text.strip() else convert(text)
    return parse


_CONVERTERS = {
    "run": {"seed": int, "out": str, "reproducible": _bool},
    "grid": {"horizon": float, "steps": int},
    "driver": {"kind": _optional(str), "hurst": float, "fine_factor": int, "spectrum": parse_spectrum,
               "alpha": _optional(float), "file": _optional(str)},
    "semigroup": {"generator": str, "spacing": _optional(float),
                  "diagonal": _optional(_float_tuple), "coupling": float,
                  "matrix_file": _optional(str)},
    "solver": {"preset": str, "size": int, "modes": int, "noise": _optional(float),
               "hurst": _optional(float), "xi": _optional(float),
               "alpha": float, "picard_tol": float, "max_picard_iters": int,
               "initial_window": float, "min_window_steps": int, "contraction_target": float,
               "rejection_streak": int, "initial_iterate": str, "convolution_rule": str},
    "montecarlo": {"experiment": str, "n_seeds": int, "p": int, "resolutions": _int_tuple},
    "verify": {"suites": _name_tuple, "instances": int, "steps": int, "hursts": _float_tuple,
               "quad_steps": int, "quad_samples": int, "sewing_steps": int,
               "sewing_levels": int, "alpha": float, "beta": float,
               "driver_file": _optional(str)},
}

_SOLVE_KEYS = {f.name for f in fields(SolveConfig)}


def _section_values(parser, name, lines) -> Dict[str, object]:
    values: Dict[str, object] = {}
    if not parser.has_section(name):
        return values
    converters = _CONVERTERS[name]
    for key, raw in parser.items(name, raw=True):
        line = lines.get((name, key))
        if key not in converters:
            raise ConfigError(f"unknown key '{key}' in [{name}]", line)
        try:
            values[key] = converters[key](raw)
        except (ValueError, RoughMildError) as exc:
            raise ConfigError(f"bad value for '{key}' in [{name}]: {exc}", line) from None
    return values


def parse_config(text: str, source: Optional[str] = None) -> RunConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source or "<config>")
    except configparser.Error as exc:
        line = getattr(exc, "lineno", None)
        if line is None and getattr(exc, "errors", None):
            line = exc.errors[0][0]
        raise ConfigError(str(exc).splitlines()[0], line) from None
    lines = _key_lines(text)
    for name in parser.sections():
        if name not in _CONVERTERS:
            raise ConfigError(f"unknown section [{name}]", lines.get((name, "")))

    def build(name, cls, **extra):
        values = _section_values(parser, name, lines)
        try:
            return cls(**values, **extra)
        except (TypeError, ValueError, RoughMildError) as exc:
            raise ConfigError(f"[{name}]: {exc}", lines.get((name, ""))) from None

    solver_values = _section_values(parser, "solver", lines)
    solve_values = {k: solver_values.pop(k) for k in list(solver_values) if k in _SOLVE_KEYS}
    try:
        solver = SolverSection(**solver_values, solve=SolveConfig(**solve_values))
    except (TypeError, ValueError, RoughMildError) as exc:
        raise ConfigError(f"[solver]: {exc}", lines.get(("solver", ""))) from None

    driver = build("driver", DriverSection)
    if driver.kind is not None and driver.kind not in DRIVER_KINDS:
        raise ConfigError(f"unknown driver kind '{driver.kind}'", lines.get(("driver", "kind")))
    montecarlo = build("montecarlo", MonteCarloSection)
    if montecarlo.experiment not in EXPERIMENTS:
        raise ConfigError(f"unknown experiment '{montecarlo.experiment}'",
                          lines.get(("montecarlo", "experiment")))
    verify = build("verify", VerifySection)
    unknown = [s for s in verify.suites if s not in ALL_SUITES]
    if unknown:
        raise ConfigError(f"unknown suite(s) {', '.join(unknown)}", lines.get(("verify", "suites")))

    return RunConfig(
        run=build("run", RunSection),
        grid=build("grid", GridSection),
        driver=driver,
        semigroup=build("semigroup", SemigroupSection),
        solver=solver,
        montecarlo=montecarlo,
        verify=verify,
        config_hash=hashlib.sha256(text.encode("utf-8")).hexdigest()[:12],
        source=source,
    )


def load_config(path) -> RunConfig:
    file_path = FilePath(path)
    try:
        data = file_path.read_bytes()
    except OSError as exc:
        raise ConfigError(f"cannot read {file_path}: {exc.strerror}") from None
    config = parse_config(data.decode("utf-8"), str(file_path))
    return config

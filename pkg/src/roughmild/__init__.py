"""roughmild - rough-path calculus and mild solutions of semilinear rough PDEs"""

from .version import __app_name__, __version__

__all__ = [
    "__version__",
    "__app_name__",
    "config",
    "controlled",
    "convolution",
    "errors",
    "experiments",
    "export",
    "gubinelli",
    "models",
    "presets",
    "rough_core",
    "rpde_solver",
    "semigroup",
    "stochastic_drivers",
    "verification",
    "workers",
]

"""Random walks in iid Dirichlet environments on Z^d: samplers, exact annealed
path laws, Green functions, Kalikow kernels and velocity bounds."""

__version__ = "0.1.0"

from .dirichlet import WeightVector, sample_dirichlet, dirichlet_moment  # noqa: E402,F401
from .environment import EnvironmentView, env_at, make_box, materialize  # noqa: E402,F401
from .walks import estimate_velocity, run_quenched, run_reinforced  # noqa: E402,F401

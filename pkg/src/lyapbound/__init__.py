"""Top Lyapunov exponents of cooperative linear ODE systems x' = A(t) x and
lower bounds on them built from the entries of A(t)."""

__version__ = "0.1.0"

from .bounds import (  # noqa: E402
    BoundConfig,
    BoundReport,
    Integrand,
    best_bound,
    expectation_bound,
    time_average_bound,
)
from .floquet import Monodromy, floquet_exponent, monodromy  # noqa: E402
from .lyapunov import LyapunovEstimate, convergence_report, top_exponent_matrix, top_exponent_vector  # noqa: E402
from .matrix_core import (  # noqa: E402
    MLMatrix,
    SquareMatrix,
    best_pairwise_bound_static,
    dominant_eigenvalue,
    frobenius_bounds_static,
    kolotilina_bound_static,
    pairwise_bound_static,
    random_ml_matrix,
    validate_ml,
)
from .propagator import ScaledMatrix, Trajectory, expm, propagate, solve_trajectory  # noqa: E402
from .signals import (  # noqa: E402
    ConstantSignal,
    JumpPath,
    MarkovSignal,
    PeriodicSignal,
    sample_jump_path,
    stationary_distribution,
)

__all__ = [
    "BoundConfig",
    "BoundReport",
    "ConstantSignal",
    "Integrand",
    "JumpPath",
    "LyapunovEstimate",
    "MLMatrix",
    "MarkovSignal",
    "Monodromy",
    "PeriodicSignal",
    "ScaledMatrix",
    "SquareMatrix",
    "Trajectory",
    "best_bound",
    "best_pairwise_bound_static",
    "convergence_report",
    "dominant_eigenvalue",
    "expectation_bound",
    "expm",
    "floquet_exponent",
    "frobenius_bounds_static",
    "kolotilina_bound_static",
    "monodromy",
    "pairwise_bound_static",
    "propagate",
    "random_ml_matrix",
    "sample_jump_path",
    "solve_trajectory",
    "stationary_distribution",
    "time_average_bound",
    "top_exponent_matrix",
    "top_exponent_vector",
    "validate_ml",
]

"""Exact stationary analysis of Cox(k)/M^Y/1 queues and quasi-skip-free processes."""

from .errors import (
    CapacityExceeded,
    DimensionMismatch,
    InvalidBlocks,
    ModelError,
    NegativeEntries,
    NoConvergence,
    NoExitState,
    NotErgodic,
    NotTransient,
    QsfError,
    SingularMatrix,
)
from .model import (
    BatchService,
    CoxianArrival,
    InfiniteCoxianArrival,
    QueueModel,
    is_ergodic,
    mean_interarrival,
    model_from_dict,
    model_to_dict,
    phi_Y,
)
from .product import (
    Method,
    SpectralSolution,
    StationaryDistribution,
    boundary_distribution,
    fixpoint_F,
    solve_gamma,
    stationary_distribution,
)
from .finite import FiniteSolution, VariableRatePlan, solve_finite, solve_variable_rates
from .analysis import calibrate, dm1_distribution, gamma_star, metrics, monotonicity_sweep
from .oracle import compare_with_product_form, oracle_stationary

__version__ = "0.1.0"

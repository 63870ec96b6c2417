"""LPV state-space models with general noise and their innovation form."""

__version__ = "0.1.0"

from .core import (AffineMatrixFunction, BasisFunction, LpvSsModel, ModelError,
                   NoiseSpec, NumericalError, SchedulingSet, SchedulingTrajectory,
                   constant_basis, decorrelate, eval_matrix, identity_basis,
                   monomial_basis, validate_model)
from .innovation import (FilterTrace, compute_trace, riccati_step, run_filter,
                         suboptimal_covariance)
from .simulate import (SimConfig, gen_scheduling, sample_noise, simulate_general,
                       simulate_innovation)
from .convergence import (ConditionConstants, estimate_condition_constants,
                          lyapunov_decay_check, restart_experiment, covariance_bound)
from .gainapprox import decay_study, truncated_gain_trace
from .io import load_model, save_model

__all__ = [
    "AffineMatrixFunction", "BasisFunction", "LpvSsModel", "ModelError", "NoiseSpec",
    "NumericalError", "SchedulingSet", "SchedulingTrajectory", "constant_basis",
    "decorrelate", "eval_matrix", "identity_basis", "monomial_basis", "validate_model",
    "FilterTrace", "compute_trace", "riccati_step", "run_filter", "suboptimal_covariance",
    "SimConfig", "gen_scheduling", "sample_noise", "simulate_general", "simulate_innovation",
    "ConditionConstants", "estimate_condition_constants", "lyapunov_decay_check",
    "restart_experiment", "covariance_bound", "decay_study", "truncated_gain_trace",
    "load_model", "save_model",
]

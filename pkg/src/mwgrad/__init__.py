"""Particle algorithms for multi-target sampling.

Minimizes several objectives over probability distributions at once by
moving a particle ensemble along a simplex-optimal convex combination of
per-objective update directions, optionally with Nesterov-style
momentum.  Includes kernel-based direction estimators (SVGD and Blob
forms), the simplex weight solver, convergence diagnostics with a
brute-force merit oracle for the single-particle reduction, and an
experiment harness with a CLI.
"""

__version__ = "0.1.0"

from .core import (
    Method,
    MomentumSchedule,
    ParticleEnsemble,
    Regime,
    RunConfig,
    SimplexWeights,
    derive_trial_seed,
    init_ensemble,
    standard_normal,
)
from .kernels import (
    RbfKernel,
    kernel_eval,
    kernel_grad_second,
    kernel_matrix,
    median_bandwidth,
)
from .objectives import (
    OBJECTIVE_REGISTRY,
    GaussianMixtureTarget,
    ObjectiveSet,
    QuadraticTarget,
    potential_grad,
    potential_value,
    toy4_objectives,
)
from .estimators import (
    EstimateBatch,
    EstimatorTag,
    estimate_blob,
    estimate_potential_only,
    estimate_svgd,
)
from .weights import (
    GramMatrix,
    QpResult,
    aggregate_direction,
    frank_wolfe_simplex,
    gram_matrix,
    qp_objective,
    solve_simplex_qp,
)
from .dynamics import amwgrad_step, momentum_coefficient, mwgrad_step
from .diagnostics import (
    EuclideanMeritGrid,
    InsufficientDataError,
    TrialRecord,
    fit_exp_rate,
    fit_rate_slope,
    grad_norm,
    merit_euclidean,
)
from .config import (
    ConfigError,
    ExperimentConfig,
    Scenario,
    bundled_config_path,
    load_config,
    resolve_config_path,
)
from .harness import (
    ExperimentResult,
    RateFit,
    RateReport,
    run_experiment,
    run_rate_scenario,
    run_trial,
)

__all__ = [
    "__version__",
    "Method",
    "MomentumSchedule",
    "ParticleEnsemble",
    "Regime",
    "RunConfig",
    "SimplexWeights",
    "derive_trial_seed",
    "init_ensemble",
    "standard_normal",
    "RbfKernel",
    "kernel_eval",
    "kernel_grad_second",
    "kernel_matrix",
    "median_bandwidth",
    "OBJECTIVE_REGISTRY",
    "GaussianMixtureTarget",
    "ObjectiveSet",
    "QuadraticTarget",
    "potential_grad",
    "potential_value",
    "toy4_objectives",
    "EstimateBatch",
    "EstimatorTag",
    "estimate_blob",
    "estimate_potential_only",
    "estimate_svgd",
    "GramMatrix",
    "QpResult",
    "aggregate_direction",
    "frank_wolfe_simplex",
    "gram_matrix",
    "qp_objective",
    "solve_simplex_qp",
    "amwgrad_step",
    "momentum_coefficient",
    "mwgrad_step",
    "EuclideanMeritGrid",
    "InsufficientDataError",
    "TrialRecord",
    "fit_exp_rate",
    "fit_rate_slope",
    "grad_norm",
    "merit_euclidean",
    "ConfigError",
    "ExperimentConfig",
    "Scenario",
    "bundled_config_path",
    "load_config",
    "resolve_config_path",
    "ExperimentResult",
    "RateFit",
    "RateReport",
    "run_experiment",
    "run_rate_scenario",
    "run_trial",
]

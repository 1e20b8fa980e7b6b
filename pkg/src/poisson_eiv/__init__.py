"""Naive and bias-corrected estimation for Poisson regression with a mismeasured covariate."""

__version__ = "0.1.0"

from .bias import BiasReport, EivModel, big_g, forward_map_g, naive_limit
from .corrected import (
    CorrectedEstimate,
    correct_estimate,
    estimate_nuisance_gamma_error,
    estimate_nuisance_normal_error,
    fit_corrected,
    inverse_map_h,
)
from .dists import DegenerateZero, Gamma, MgfDomain, Normal, convolve, parse_law
from .errors import (
    AllZeroCountsError,
    ConfigError,
    DegenerateMomentError,
    DomainError,
    EivError,
    InvalidDatasetError,
    NoRootError,
    NonConvergenceError,
    SimulationError,
)
from .naive import Dataset, ModelParams, NaiveEstimate, fit_naive, score, score_jacobian
from .simulation import SimConfig, SimReport, compare_with_theory, generate_dataset, run_monte_carlo

__all__ = [
    "AllZeroCountsError", "BiasReport", "ConfigError", "CorrectedEstimate", "Dataset", "DegenerateMomentError",
    "DegenerateZero", "DomainError", "EivError", "EivModel", "Gamma", "InvalidDatasetError", "MgfDomain",
    "ModelParams", "NaiveEstimate", "NoRootError", "NonConvergenceError", "Normal", "SimConfig", "SimReport",
    "SimulationError", "big_g", "compare_with_theory", "convolve", "correct_estimate",
    "estimate_nuisance_gamma_error", "estimate_nuisance_normal_error", "fit_corrected", "fit_naive",
    "forward_map_g", "generate_dataset", "inverse_map_h", "naive_limit", "parse_law", "run_monte_carlo",
    "score", "score_jacobian",
]

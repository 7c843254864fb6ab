"""Sparse partial-correlation networks by l1-penalized asymmetric pseudolikelihood."""

__version__ = "0.1.0"

from .linalg import DenseData, center_columns, gram, spdm, spectral_bound
from .solver import (
    FitResult,
    Masked,
    SolverConfig,
    Uniform,
    kkt_residual,
    objective,
    omega_to_theta,
    partial_correlations,
    solve,
    theta_to_omega,
)
from .selection import PathResult, debias, epbic, fit_path, lambda_grid

__all__ = [
    "DenseData", "center_columns", "gram", "spdm", "spectral_bound",
    "FitResult", "Masked", "SolverConfig", "Uniform", "kkt_residual", "objective",
    "omega_to_theta", "partial_correlations", "solve", "theta_to_omega",
    "PathResult", "debias", "epbic", "fit_path", "lambda_grid",
]

"""Kernel truncated randomized ridge regression (KTR3).

Incremental ridge solver, the minimum-norm ``lambda = 0`` path, the periodic
spline benchmark and checks of the identities behind the risk bounds.
"""

from .datagen import Dataset, ProblemSpec, make_spline_problem, zero_noise_h_problem
from .kernels import KernelSpec, gram_matrix, kernel_eval
from .ktr3 import Predictor, krr_fit, online_pass, predict, run_ktr3, truncate
from .solver import SolverState, log_det_ratio, min_norm_solve

__all__ = [
    "Dataset",
    "KernelSpec",
    "Predictor",
    "ProblemSpec",
    "SolverState",
    "gram_matrix",
    "kernel_eval",
    "krr_fit",
    "log_det_ratio",
    "make_spline_problem",
    "min_norm_solve",
    "online_pass",
    "predict",
    "run_ktr3",
    "truncate",
    "zero_noise_h_problem",
]

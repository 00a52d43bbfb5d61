"""Least squares estimation of elementary chirp signals.

The model is ``y(t) = sum_k A_k exp(i beta_k t^2) + noise`` for ``t = 1..N``.
"""
__version__ = "0.1.0"

from .signal import ChirpComponent, ChirpModel, NoiseSpec, generate_noise, synthesize_clean
from .optimizer import SimplexConfig, minimize
from .periodogram import GridSpec, ScanResult, ptf_value, scan, top_peaks
from .estimators import (FitResult, alse_one, lse_joint, lse_one, profile_amplitudes,
                         sequential_fit)
from .baselines import cpf_estimate, dechirp_estimate, pcpf_estimate, sequential_baseline
from .asymptotics import finite_n_variances, multi_covariance, sigma_inv_matrix, sigma_matrix
from .experiments import ExperimentConfig, fit_real, ljung_box, run_experiment, select_order

__all__ = [
    "ChirpComponent", "ChirpModel", "NoiseSpec", "generate_noise", "synthesize_clean",
    "SimplexConfig", "minimize", "GridSpec", "ScanResult", "ptf_value", "scan", "top_peaks",
    "FitResult", "alse_one", "lse_joint", "lse_one", "profile_amplitudes", "sequential_fit",
    "cpf_estimate", "dechirp_estimate", "pcpf_estimate", "sequential_baseline",
    "finite_n_variances", "multi_covariance", "sigma_inv_matrix", "sigma_matrix",
    "ExperimentConfig", "fit_real", "ljung_box", "run_experiment", "select_order",
]

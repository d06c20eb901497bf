"""Copula density neural estimation.

Pseudo-observations are obtained with an empirical probability integral
transform; a small neural critic then maximizes a variational f-divergence
bound between them and independent uniforms, which yields the copula
density directly. Around that core sit Gaussian-channel ground truth,
self-consistency diagnostics, copula-based mutual information and Gibbs
sampling for data generation.
"""

__version__ = "0.1.0"

from .fgen import FGenerator, make_generator, density_from_t
from .marginals import MarginalModel, fit_marginals, pit, inverse_pit, gaussian_marginals, uniform_marginals
from .net import MlpParams, TrainConfig
from .trainer import CopulaModel, TrainingError, train, evaluate_density, value_function
from .oracle import AwgnSpec, sample_channel, sample_copula, true_copula_density, kl_to_flat, true_mi, spiral_toy
from .diagnostics import check_mass, check_moments, check_spearman, q_c, diagnose, DiagnosticsReport
from .mi import MiConfig, MiEstimate, mi_three_copula, mi_direct_ratio, mi_sweep
from .gibbs import GibbsConfig, conditional_slice, gibbs_sample, generate

__all__ = [
    "FGenerator", "make_generator", "density_from_t",
    "MarginalModel", "fit_marginals", "pit", "inverse_pit", "gaussian_marginals", "uniform_marginals",
    "MlpParams", "TrainConfig",
    "CopulaModel", "TrainingError", "train", "evaluate_density", "value_function",
    "AwgnSpec", "sample_channel", "sample_copula", "true_copula_density", "kl_to_flat", "true_mi", "spiral_toy",
    "check_mass", "check_moments", "check_spearman", "q_c", "diagnose", "DiagnosticsReport",
    "MiConfig", "MiEstimate", "mi_three_copula", "mi_direct_ratio", "mi_sweep",
    "GibbsConfig", "conditional_slice", "gibbs_sample", "generate",
]

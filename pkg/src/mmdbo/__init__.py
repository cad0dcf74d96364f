"""Robust Bayesian optimization with MMD kernels over input distributions."""
from .kernel import BaseKernelParams, eval_base, median_heuristic
from .mmd import EstimatorConfig, mmd2_biased, mmd2_empirical, mmd2_nystrom, mmd_gram
from .surrogate import BaselineGPRegressor, MMDGPRegressor, Posterior, baseline_kernel, kernel_dist
from .udist import InputDistribution, SampleBatch, moment_match, sample, sample_many

__all__ = [
    "BaseKernelParams",
    "BaselineGPRegressor",
    "EstimatorConfig",
    "InputDistribution",
    "MMDGPRegressor",
    "Posterior",
    "SampleBatch",
    "baseline_kernel",
    "eval_base",
    "kernel_dist",
    "median_heuristic",
    "mmd2_biased",
    "mmd2_empirical",
    "mmd2_nystrom",
    "mmd_gram",
    "moment_match",
    "sample",
    "sample_many",
]
__version__ = "0.1.0"

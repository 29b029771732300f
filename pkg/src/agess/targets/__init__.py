"""Target densities and data simulators."""

from .dataset import Dataset
from .deepgp import deep_gp_data, deep_gp_function, deep_gp_target, deep_gp_transform, student_t_marginal_loglik
from .regression import (
    half_cauchy_logprior_logscale,
    horseshoe_data,
    horseshoe_target,
    horseshoe_transform,
    relu_data,
    relu_regression_target,
    zero_fraction,
)
from .simple import (
    banana_data,
    banana_target,
    gaussian_target,
    twin_banana_data,
    twin_banana_mean,
    twin_banana_target,
    volcano_target,
)

__all__ = [
    "Dataset",
    "banana_data",
    "banana_target",
    "deep_gp_data",
    "deep_gp_function",
    "deep_gp_target",
    "deep_gp_transform",
    "gaussian_target",
    "half_cauchy_logprior_logscale",
    "horseshoe_data",
    "horseshoe_target",
    "horseshoe_transform",
    "relu_data",
    "relu_regression_target",
    "student_t_marginal_loglik",
    "twin_banana_data",
    "twin_banana_mean",
    "twin_banana_target",
    "volcano_target",
    "zero_fraction",
]

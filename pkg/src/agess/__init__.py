"""Adaptive generalized elliptical slice sampling.

Set ``AGESS_BACKEND=numpy`` before import to bypass numba compilation.
"""

from ._backend import BACKEND
from .adaptation import (
    AdaptConfig,
    AdaptiveEstimator,
    SupportTransform,
    background_update,
    commit_adaptation,
    commit_times,
    run_agess,
    run_agess_full,
)
from .diagnostics import (
    Grid2D,
    acf,
    chain_report,
    gaussian_kl_bound,
    gaussian_kl_estimate,
    gelman_rubin,
    multivariate_ess,
    relative_kl_2d,
)
from .elliptical import (
    EllipticalFamily,
    EllipticalParams,
    conditional_covariance,
    log_density,
    quadratic_form,
    sample_conditional_aux,
    sample_conditional_aux_many,
    sample_marginal,
)
from .errors import (
    AgessError,
    ChainInitializationError,
    ConfigurationError,
    ContractViolation,
    DiagnosticsError,
    FactorizationError,
    MomentError,
    ShrinkageError,
)
from .kernels import ARWState, KernelTag, StepStats, TargetDensity, agess_step, arw_step, coord_sweep, ess_step, run_arw
from .shrinkage import EllipseProposal, shrink
from .trace import Trace

__version__ = "0.1.0"

__all__ = [
    "ARWState", "AdaptConfig", "AdaptiveEstimator", "AgessError", "BACKEND", "ChainInitializationError",
    "ConfigurationError", "ContractViolation", "DiagnosticsError", "EllipseProposal", "EllipticalFamily",
    "EllipticalParams", "FactorizationError", "Grid2D", "KernelTag", "MomentError", "ShrinkageError",
    "StepStats", "SupportTransform", "TargetDensity", "Trace", "acf", "agess_step", "arw_step",
    "background_update", "chain_report", "commit_adaptation", "commit_times", "conditional_covariance",
    "coord_sweep", "ess_step", "gaussian_kl_bound", "gaussian_kl_estimate", "gelman_rubin", "log_density",
    "multivariate_ess", "quadratic_form", "relative_kl_2d", "run_agess", "run_agess_full", "run_arw",
    "sample_conditional_aux", "sample_conditional_aux_many", "sample_marginal", "shrink",
]

"""Low-dimensional test targets: Gaussian, volcano, banana and twin banana."""

from __future__ import annotations

import math

import numpy as np

from .._backend import jit
from .._linalg import forward_solve
from ..errors import ContractViolation, FactorizationError
from ..kernels import TargetDensity


@jit
def gaussian_logpdf(x, mean, chol):
    w = forward_solve(chol, x - mean)
    return -0.5 * np.dot(w, w)


def gaussian_target(mean, cov) -> TargetDensity:
    """Unnormalized ``N(mean, cov)``."""
    mean = np.array(mean, dtype=float).reshape(-1)
    cov = np.array(cov, dtype=float)
    if cov.ndim == 0:
        cov = cov * np.eye(mean.size)
    try:
        chol = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError as exc:
        raise FactorizationError("target covariance is not positive definite") from exc
    return TargetDensity(mean.size, kernel=gaussian_logpdf, args=(mean, chol), name=f"gaussian{mean.size}",
                         reference_point=mean, meta={"mean": mean, "cov": cov})


@jit
def volcano_logpdf(x):
    r = math.sqrt(np.dot(x, x))
    return r - 0.5 * r * r


def volcano_target(dim: int) -> TargetDensity:
    """``log p(x) = |x| - |x|^2 / 2``: a ridge on the unit sphere."""
    if dim < 1:
        raise ContractViolation("volcano dimension must be positive")
    ref = np.zeros(dim)
    ref[0] = 1.0
    return TargetDensity(dim, kernel=volcano_logpdf, name=f"volcano{dim}", reference_point=ref)


# ---------------------------------------------------------------------------
# banana family; priors are given as variances


@jit
def banana_logpdf(theta, y, mu1, mu2):
    m = (theta[0] - mu1) + (theta[1] - mu2) ** 2
    s = 0.0
    for i in range(y.shape[0]):
        r = y[i] - m
        s += r * r
    return -0.5 * s - theta[0] ** 2 / 8.0 - (theta[1] - 0.5) ** 2 / 8.0


def banana_data(n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` observations from ``N(0.1, 1)``."""
    return rng.normal(0.1, 1.0, size=n)


def banana_target(y, mu1: float, mu2: float) -> TargetDensity:
    """Posterior of ``Y_i ~ N((t1 - mu1) + (t2 - mu2)^2, 1)``, ``t1 ~ N(0, 4)``, ``t2 ~ N(0.5, 4)``."""
    y = np.asarray(y, dtype=float).reshape(-1)
    return TargetDensity(2, kernel=banana_logpdf, args=(y, float(mu1), float(mu2)), name="banana",
                         reference_point=np.array([0.0, 0.5]), meta={"mu1": mu1, "mu2": mu2, "n": y.size})


@jit
def twin_banana_mean(a, b):
    return 0.1 * a * a - 0.5 * b ** 4 - 10.0 * a * b


@jit
def twin_banana_logpdf(theta, y, mu1, mu2):
    m = twin_banana_mean(theta[0] - mu1, theta[1] - mu2)
    s = 0.0
    for i in range(y.shape[0]):
        r = y[i] - m
        s += r * r
    return -s / 200.0 - theta[0] ** 2 / 8.0 - theta[1] ** 2 / 8.0


def twin_banana_data(n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` observations from ``N(100, 100)``."""
    return rng.normal(100.0, 10.0, size=n)


def twin_banana_target(y, mu1: float, mu2: float) -> TargetDensity:
    """Posterior with likelihood ``N(0.1 a^2 - 0.5 b^4 - 10 a b, 100)``, ``a = t1 - mu1``,
    ``b = t2 - mu2`` and ``N(0, 4)`` priors on both coordinates."""
    y = np.asarray(y, dtype=float).reshape(-1)
    return TargetDensity(2, kernel=twin_banana_logpdf, args=(y, float(mu1), float(mu2)), name="twinbanana",
                         reference_point=np.zeros(2), meta={"mu1": mu1, "mu2": mu2, "n": y.size})

"""ReLU-logistic regression and horseshoe linear regression posteriors."""

from __future__ import annotations

import math

import numpy as np

from .._backend import jit
from ..errors import ContractViolation
from ..kernels import TargetDensity
from .dataset import Dataset

_LOG_2_OVER_PI = math.log(2.0 / math.pi)


@jit
def _softplus(z):
    # log(1 + e^z), stable for large |z|
    if z > 0.0:
        return z + math.log1p(math.exp(-z))
    return math.log1p(math.exp(z))


# ---------------------------------------------------------------------------
# ReLU regression


@jit
def relu_logpdf(beta, X, y):
    eta = X @ beta
    ll = 0.0
    for i in range(eta.shape[0]):
        mu = eta[i] if eta[i] > 0.0 else 0.0
        ll += y[i] * mu - _softplus(mu)
    return ll - 0.5 * np.dot(beta, beta)


def relu_data(n: int, d: int, rng: np.random.Generator) -> Dataset:
    """Simulate ``Y_i ~ Bernoulli(logistic(max(0, x_i' beta)))``.

    ``beta`` is multivariate t with 6 degrees of freedom and scale matrix
    ``sqrt(2 log D) I``; ``x_i ~ N(mu_x 1, I)`` with ``mu_x ~ N(0, 0.25)``.
    """
    if n < 1 or d < 1:
        raise ContractViolation("relu_data needs n >= 1 and d >= 1")
    nu = 6.0
    scale = math.sqrt(2.0 * math.log(d))
    beta = math.sqrt(scale) * rng.standard_normal(d) * math.sqrt(nu / rng.chisquare(nu))
    mu_x = rng.normal(0.0, 0.5)
    X = mu_x + rng.standard_normal((n, d))
    eta = np.maximum(0.0, X @ beta)
    y = (rng.random(n) < 1.0 / (1.0 + np.exp(-eta))).astype(float)
    meta = {"model": "relu", "beta": beta, "mu_x": mu_x, "n": n, "d": d,
            "zero_fraction": float(np.mean(X @ beta <= 0.0))}
    return Dataset(X, y, meta)


def relu_regression_target(data: Dataset) -> TargetDensity:
    """Posterior of ``beta`` with a ``N(0, I)`` prior."""
    X = np.ascontiguousarray(data.X)
    return TargetDensity(data.d, kernel=relu_logpdf, args=(X, data.y), name=f"relu{data.d}",
                         reference_point=np.zeros(data.d), meta=dict(data.meta))


def zero_fraction(data: Dataset, beta) -> float:
    """Fraction of observations with ``x_i' beta <= 0`` (inactive ReLU)."""
    return float(np.mean(data.X @ np.asarray(beta, float) <= 0.0))


# ---------------------------------------------------------------------------
# horseshoe regression on the log scale


@jit
def half_cauchy_logprior_logscale(s):
    """Log density of ``log(lambda)`` when ``lambda ~ C+(0, 1)``."""
    return _LOG_2_OVER_PI - _softplus(2.0 * s) + s


@jit
def horseshoe_logpdf(theta, X, y):
    D = X.shape[1]
    N = y.shape[0]
    beta = theta[:D]
    log_sig2 = theta[2 * D + 1]
    log_tau = theta[2 * D]
    resid = y - X @ beta
    lp = -0.5 * N * log_sig2 - 0.5 * np.dot(resid, resid) * math.exp(-log_sig2)
    for j in range(D):
        s = theta[D + j]
        log_var = log_sig2 + 2.0 * log_tau + 2.0 * s
        lp += -0.5 * log_var - 0.5 * beta[j] * beta[j] * math.exp(-log_var)
        lp += half_cauchy_logprior_logscale(s)
    lp += half_cauchy_logprior_logscale(log_tau)
    # p(sigma^2) ~ 1/sigma^2 is flat in log sigma^2
    return lp


def horseshoe_data(n: int, d: int, rng: np.random.Generator, *, rho=0.8, p_nonzero=0.05) -> Dataset:
    """Correlated design ``Cov_jk = rho^|j-k|``; sparse signs-alternating ``beta*``; ``sigma^2 = 1``."""
    if n < 1 or d < 1:
        raise ContractViolation("horseshoe_data needs n >= 1 and d >= 1")
    idx = np.arange(d)
    cov = rho ** np.abs(idx[:, None] - idx[None, :])
    L = np.linalg.cholesky(cov)
    while True:
        active = rng.random(d) < p_nonzero
        z = rng.normal(1.0, 3.0, size=d)
        if active.any():
            break
    signs = np.where((idx + 1) % 2 == 0, 1.0, -1.0)  # (-1)^j with j counted from 1
    beta = np.where(active, signs * z, 0.0)
    X = rng.standard_normal((n, d)) @ L.T
    y = X @ beta + rng.standard_normal(n)
    meta = {"model": "horseshoe", "beta": beta, "sigma2": 1.0, "rho": rho, "n": n, "d": d}
    return Dataset(X, y, meta)


def horseshoe_target(data: Dataset) -> TargetDensity:
    """Posterior over ``(beta, log lambda_1..D, log tau, log sigma^2)`` (dimension 2D + 2).

    Densities are written directly in these log coordinates (Jacobians
    included); see :func:`horseshoe_transform` for the map back.
    """
    X = np.ascontiguousarray(data.X)
    D = data.d
    return TargetDensity(2 * D + 2, kernel=horseshoe_logpdf, args=(X, data.y), name=f"horseshoe{D}",
                         reference_point=np.zeros(2 * D + 2), meta=dict(data.meta), space="sampler")


def horseshoe_transform(d: int):
    from ..adaptation import SupportTransform

    return SupportTransform.log_positive([False] * d + [True] * (d + 2))

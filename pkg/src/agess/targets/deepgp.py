"""Two-layer deep Gaussian process surrogate posterior (one-dimensional input).

Parameters are ``(W_1..W_N, log theta_y1, log theta_y2, log theta_w1)``.  The
output precision is integrated out, giving a multivariate-t marginal for ``y``.
"""

from __future__ import annotations

import math

import numpy as np

from .._backend import jit, overload
from .._linalg import chol_or_fail, forward_solve
from ..errors import ContractViolation
from ..kernels import TargetDensity
from .dataset import Dataset


def _sq_exp_kernel(x, w, inv_lx, inv_lw, nugget):
    dx = x[:, None] - x[None, :]
    dw = w[:, None] - w[None, :]
    K = np.exp(-dx * dx * inv_lx - dw * dw * inv_lw)
    K[np.diag_indices_from(K)] = 1.0 + nugget
    return K


@overload(_sq_exp_kernel)
def _sq_exp_kernel_nb(x, w, inv_lx, inv_lw, nugget):
    def impl(x, w, inv_lx, inv_lw, nugget):
        n = x.shape[0]
        K = np.empty((n, n))
        for i in range(n):
            K[i, i] = 1.0 + nugget
            for j in range(i):
                dx = x[i] - x[j]
                dw = w[i] - w[j]
                v = math.exp(-dx * dx * inv_lx - dw * dw * inv_lw)
                K[i, j] = v
                K[j, i] = v
        return K

    return impl


@jit
def _chol_terms(K, v):
    """``(logdet K, v' K^{-1} v, ok)``."""
    L, ok = chol_or_fail(K)
    if not ok:
        return 0.0, 0.0, False
    logdet = 0.0
    for i in range(L.shape[0]):
        logdet += math.log(L[i, i])
    a = forward_solve(L, v)
    return 2.0 * logdet, np.dot(a, a), True


@jit
def student_t_marginal_loglik(y, K, nu):
    """``-0.5 log|K| - (nu + N)/2 log(1 + y' K^{-1} y / nu)`` (unnormalized)."""
    logdet, q, ok = _chol_terms(K, y)
    if not ok:
        return -math.inf
    return -0.5 * logdet - 0.5 * (nu + y.shape[0]) * math.log1p(q / nu)


@jit
def deep_gp_logpdf(theta, x, y, g_w, g_y, nu, prior_mean, prior_sd):
    N = x.shape[0]
    W = theta[:N]
    log_ly1 = theta[N]
    log_ly2 = theta[N + 1]
    log_lw = theta[N + 2]
    if max(abs(log_ly1), abs(log_ly2), abs(log_lw)) > 700.0:
        return -math.inf
    Ky = _sq_exp_kernel(x, W, math.exp(-log_ly1), math.exp(-log_ly2), g_y)
    lp = student_t_marginal_loglik(y, Ky, nu)
    if lp == -math.inf:
        return lp
    zeros = np.zeros(N)
    Kw = _sq_exp_kernel(x, zeros, math.exp(-log_lw), 0.0, g_w)
    logdet, q, ok = _chol_terms(Kw, W)
    if not ok:
        return -math.inf
    lp += -0.5 * logdet - 0.5 * q
    # LogNormal lengthscale priors: normal on the log scale once the Jacobian is included
    for k in range(3):
        z = (theta[N + k] - prior_mean) / prior_sd
        lp -= 0.5 * z * z
    return lp


def deep_gp_function(x):
    x = np.asarray(x, dtype=float)
    return np.sin(x) + 2.0 * np.exp(-30.0 * x ** 2)


def deep_gp_data(n: int = 50, lo: float = -5.0, hi: float = 5.0) -> Dataset:
    """``f(x) = sin(x) + 2 exp(-30 x^2)`` on a uniform grid of ``n`` points."""
    x = np.linspace(lo, hi, n)
    return Dataset(x[:, None], deep_gp_function(x), {"model": "deepgp", "n": n, "lo": lo, "hi": hi,
                                                     "function": "sin(x) + 2*exp(-30*x^2)"})


def deep_gp_target(X, y, g_w: float = 1e-8, g_y: float = 1e-8, nu: float = 6.0, *,
                   prior_mean: float = 0.0, prior_sd: float = 1.0) -> TargetDensity:
    """Posterior of the latent layer and three log-lengthscales (dimension N + 3).

    ``prior_mean``/``prior_sd`` set the LogNormal lengthscale priors.
    Non-positive-definite kernels give ``-inf``.
    """
    x = np.asarray(X, dtype=float).reshape(-1)
    y = np.asarray(y, dtype=float).reshape(-1)
    if x.size != y.size:
        raise ContractViolation("deep GP inputs and outputs differ in length")
    if not (g_w > 0 and g_y > 0 and nu > 0 and prior_sd > 0):
        raise ContractViolation("nuggets, nu and prior_sd must be positive")
    N = x.size
    return TargetDensity(
        N + 3,
        kernel=deep_gp_logpdf,
        args=(x, y, float(g_w), float(g_y), float(nu), float(prior_mean), float(prior_sd)),
        name=f"deepgp{N}",
        reference_point=np.concatenate([x, np.zeros(3)]),
        meta={"g_w": g_w, "g_y": g_y, "nu": nu, "prior_mean": prior_mean, "prior_sd": prior_sd},
        space="sampler",
    )


def deep_gp_transform(n: int):
    from ..adaptation import SupportTransform

    return SupportTransform.log_positive([False] * n + [True] * 3)

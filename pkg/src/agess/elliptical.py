"""Gaussian and Pearson type VII (multivariate t) elliptical families.

The sampler works with a 2P-dimensional joint ``(X, Z)`` whose scale matrix is
``Sigma (x) I_2``.  ``Z | X = x`` is what generates the ellipse; its law is
the Gaussian marginal for the Gaussian family and a Pearson VII law with a
data-dependent radius for the heavy-tailed family.

A Pearson VII family is stored by the parameters ``(m, M)`` of its joint
density generator ``g(t) = (1 + t/m)^(-M)``.  Its P-dimensional marginal has
generator exponent ``M - P/2``.  The multivariate t with ``nu`` degrees of
freedom is ``m = nu``, ``M = (2P + nu) / 2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ._backend import jit
from ._linalg import cholesky_with_jitter, forward_solve, log_det_chol
from .errors import ConfigurationError, ContractViolation, FactorizationError, MomentError

GAUSSIAN = 0
PEARSON = 1

_LOG_2PI = math.log(2.0 * math.pi)
_LOG_PI = math.log(math.pi)


@dataclass(frozen=True)
class EllipticalFamily:
    """Family tag for the auxiliary elliptical distribution.

    Use :meth:`gaussian` or :meth:`student_t`.  :meth:`pearson_vii` takes the
    raw joint parameters and is meant for experts; ``M`` refers to the joint
    2P-dimensional distribution and must exceed ``P``.
    """

    kind: str
    nu: float | None = None
    m: float | None = None
    M: float | None = None

    @classmethod
    def gaussian(cls) -> "EllipticalFamily":
        return cls("gaussian")

    @classmethod
    def student_t(cls, nu: float = 6.0) -> "EllipticalFamily":
        if not nu > 2.0:
            raise ConfigurationError(f"StudentT needs nu > 2 so the conditional covariance exists, got {nu}")
        return cls("student_t", nu=float(nu))

    @classmethod
    def pearson_vii(cls, m: float, M: float) -> "EllipticalFamily":
        if not m > 0.0:
            raise ConfigurationError(f"PearsonVII needs m > 0, got {m}")
        return cls("pearson_vii", m=float(m), M=float(M))

    @property
    def is_gaussian(self) -> bool:
        return self.kind == "gaussian"

    def joint(self, dim: int) -> tuple[int, float, float]:
        """``(code, m, M)`` of the 2*dim joint; Gaussian carries NaN placeholders."""
        if self.kind == "gaussian":
            return GAUSSIAN, math.nan, math.nan
        if self.kind == "student_t":
            return PEARSON, self.nu, (2.0 * dim + self.nu) / 2.0
        if not self.M > dim:
            raise ConfigurationError(
                f"PearsonVII joint exponent M={self.M} must exceed P={dim} (improper radial law)"
            )
        return PEARSON, self.m, self.M

    def for_coordinate(self, dim: int) -> "EllipticalFamily":
        """The 1-D family used by coordinate sweeps of a ``dim``-dimensional chain.

        Student-t keeps its degrees of freedom; raw Pearson VII keeps the excess
        ``M - P`` of its joint exponent.
        """
        if self.kind == "pearson_vii":
            return EllipticalFamily.pearson_vii(self.m, self.M - dim + 1.0)
        return self

    def __str__(self) -> str:
        if self.kind == "student_t":
            return f"t{self.nu:g}"
        if self.kind == "pearson_vii":
            return f"pearson7(m={self.m:g},M={self.M:g})"
        return "gaussian"


class EllipticalParams:
    """Center, scale matrix and family of the working elliptical distribution.

    The Cholesky factor of ``scale`` is computed once at construction.  Pass
    ``repair=True`` to add diagonal jitter when the factorization fails.
    """

    __slots__ = ("mean", "scale", "chol", "logdet", "family", "code", "m", "M")

    def __init__(self, mean, scale, family: EllipticalFamily | None = None, *, repair: bool = False):
        mean = np.array(mean, dtype=float).reshape(-1)
        scale = np.array(scale, dtype=float)
        if scale.ndim == 0:
            scale = scale * np.eye(mean.size)
        P = mean.size
        if scale.shape != (P, P):
            raise ContractViolation(f"scale must be {P}x{P}, got {scale.shape}")
        if not np.allclose(scale, scale.T, rtol=1e-10, atol=1e-12):
            raise ContractViolation("scale matrix is not symmetric")
        scale = 0.5 * (scale + scale.T)
        if repair:
            scale, L = cholesky_with_jitter(scale)
        else:
            try:
                L = np.linalg.cholesky(scale)
            except np.linalg.LinAlgError as exc:
                raise FactorizationError("scale matrix is not positive definite") from exc
        family = family or EllipticalFamily.gaussian()
        self.mean = mean
        self.scale = scale
        self.chol = L
        self.logdet = log_det_chol(L)
        self.family = family
        self.code, self.m, self.M = family.joint(P)
        for arr in (self.mean, self.scale, self.chol):
            arr.setflags(write=False)

    @property
    def dim(self) -> int:
        return self.mean.size

    def with_family(self, family: EllipticalFamily) -> "EllipticalParams":
        return EllipticalParams(self.mean, self.scale, family)

    def kernel_args(self):
        """Positional arguments consumed by the compiled kernels."""
        return self.mean, self.chol, self.logdet, self.code, self.m, self.M

    def __repr__(self) -> str:
        return f"EllipticalParams(dim={self.dim}, family={self.family})"


def _check_dim(params: EllipticalParams, x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    if x.shape != (params.dim,):
        raise ContractViolation(f"expected a vector of length {params.dim}, got shape {x.shape}")
    return x


# ---------------------------------------------------------------------------
# compiled kernels


@jit
def quad_form_kernel(x, mean, chol):
    w = forward_solve(chol, x - mean)
    return np.dot(w, w)


@jit
def log_density_kernel(x, mean, chol, logdet, code, m, M):
    P = x.shape[0]
    q = quad_form_kernel(x, mean, chol)
    if code == 0:
        return -0.5 * q - 0.5 * logdet - 0.5 * P * 1.8378770664093453
    a = M - 0.5 * P  # marginal generator exponent
    return (
        math.lgamma(a)
        - math.lgamma(a - 0.5 * P)
        - 0.5 * P * (math.log(m) + 1.1447298858494002)
        - 0.5 * logdet
        - a * math.log1p(q / m)
    )


@jit
def draw_aux_kernel(x, mean, chol, code, m, M, rng):
    """Draw Z | X = x.  Random stream order: normals, then (Pearson) two gammas."""
    P = x.shape[0]
    eta = rng.standard_normal(P)
    if code == 0:
        return mean + chol @ eta
    q = quad_form_kernel(x, mean, chol)
    g1 = rng.gamma(0.5 * P, 1.0)
    g2 = rng.gamma(M - 0.5 * P, 1.0)
    radius = math.sqrt((m + q) * g1 / g2)
    return mean + (radius / math.sqrt(np.dot(eta, eta))) * (chol @ eta)


# ---------------------------------------------------------------------------
# public operations


def quadratic_form(params: EllipticalParams, x) -> float:
    """``(x - mean)^T scale^{-1} (x - mean)`` via one triangular solve."""
    x = _check_dim(params, x)
    return float(quad_form_kernel(x, params.mean, params.chol))


def log_density(params: EllipticalParams, x) -> float:
    """Normalized log density of the P-dimensional marginal at ``x``."""
    x = _check_dim(params, x)
    return float(log_density_kernel(x, *params.kernel_args()))


def sample_marginal(params: EllipticalParams, rng: np.random.Generator) -> np.ndarray:
    """One draw from the marginal ``E_P(mean, scale, g)``."""
    P = params.dim
    eta = rng.standard_normal(P)
    fam = params.family
    if fam.kind == "gaussian":
        return params.mean + params.chol @ eta
    if fam.kind == "student_t":
        w = rng.chisquare(fam.nu)
        return params.mean + (params.chol @ eta) * math.sqrt(fam.nu / w)
    # raw Pearson VII: R^2 / m ~ BetaPrime(P/2, a - P/2) with a the marginal exponent
    a = params.M - 0.5 * P
    g1 = rng.gamma(0.5 * P)
    g2 = rng.gamma(a - 0.5 * P)
    radius = math.sqrt(params.m * g1 / g2)
    return params.mean + (radius / math.sqrt(eta @ eta)) * (params.chol @ eta)


def sample_conditional_aux(params: EllipticalParams, x, rng: np.random.Generator) -> np.ndarray:
    """Draw the auxiliary ``Z`` given ``X = x`` under the block-diagonal joint."""
    x = _check_dim(params, x)
    return draw_aux_kernel(x, params.mean, params.chol, params.code, params.m, params.M, rng)


@jit
def _draw_aux_many(x, mean, chol, code, m, M, n, rng):
    out = np.empty((n, x.shape[0]))
    for i in range(n):
        out[i] = draw_aux_kernel(x, mean, chol, code, m, M, rng)
    return out


def sample_conditional_aux_many(params: EllipticalParams, x, n: int, rng: np.random.Generator) -> np.ndarray:
    """``n`` independent draws of ``Z | X = x`` (rows), same stream as ``n`` single calls."""
    x = _check_dim(params, x)
    return _draw_aux_many(x, params.mean, params.chol, params.code, params.m, params.M, int(n), rng)


def conditional_covariance(params: EllipticalParams, x) -> np.ndarray:
    """Covariance of ``Z | X = x``."""
    x = _check_dim(params, x)
    if params.code == GAUSSIAN:
        return np.array(params.scale)
    P = params.dim
    if not params.M - 0.5 * P > 1.0:
        raise MomentError(f"conditional covariance needs M - P/2 > 1 (M={params.M}, P={P})")
    q = quadratic_form(params, x)
    return (params.m + q) / (2.0 * params.M - P - 2.0) * params.scale

"""Adaptive driver: increasingly rare parameter commits, background moment
estimation, kernel mixture and burn-in coordinate sweeps.

The chain is run in segments between commit times.  Each segment is one call
into a compiled loop (or its pure-numpy twin), so Python overhead is paid per
commit rather than per iteration.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass, field
from typing import Iterator

import numpy as np

from ._backend import jit, overload
from .elliptical import EllipticalFamily, EllipticalParams
from .errors import ConfigurationError, ContractViolation, ShrinkageError
from .kernels import (
    KernelTag,
    TargetDensity,
    _impl,
    _initial_logp,
    coord_sweep_kernel,
    slice_step_kernel,
)
from .shrinkage import DEFAULT_MAX_ITER
from .trace import Trace

FULL_COVARIANCE = "full"
SCALAR_SCALE = "scalar"
SWEEP_MIN_DIM = 10


@dataclass
class AdaptConfig:
    """Settings of :func:`run_agess`.

    ``eps_a=None`` picks 0.1 below dimension 10 and 0.05 otherwise.  With
    ``adapt=False`` no commits happen and the chain keeps ``(mu0, Sigma0)``.
    ``min_eig`` optionally floors the eigenvalues of committed scales.
    """

    n_iter: int
    n_burn: int = 0
    beta: float = 0.5
    eps_a: float | None = None
    eps_b: float = 0.05
    burn_1d_fraction: float = 0.1
    seed: int | None = None
    variant: str = FULL_COVARIANCE
    adapt: bool = True
    min_eig: float | None = None
    max_iter: int = DEFAULT_MAX_ITER

    def __post_init__(self):
        if self.n_iter < 1:
            raise ConfigurationError(f"n_iter must be >= 1, got {self.n_iter}")
        if not 0 <= self.n_burn <= self.n_iter:
            raise ConfigurationError(f"n_burn must lie in [0, n_iter], got {self.n_burn}")
        if not 0.0 < self.beta <= 1.0:
            raise ConfigurationError(f"beta must lie in (0, 1], got {self.beta}")
        if not 0.0 <= self.burn_1d_fraction <= 1.0:
            raise ConfigurationError("burn_1d_fraction must lie in [0, 1]")
        if self.variant not in (FULL_COVARIANCE, SCALAR_SCALE):
            raise ConfigurationError(f"variant must be {FULL_COVARIANCE!r} or {SCALAR_SCALE!r}")
        for name in ("eps_a", "eps_b"):
            v = getattr(self, name)
            if v is not None and not 0.0 <= v <= 1.0:
                raise ConfigurationError(f"{name} must lie in [0, 1], got {v}")

    def resolved_eps(self, dim: int) -> tuple[float, float]:
        eps_a = self.eps_a if self.eps_a is not None else (0.1 if dim < SWEEP_MIN_DIM else 0.05)
        eps_b = self.eps_b if dim >= SWEEP_MIN_DIM else 0.0
        if eps_a + eps_b > 1.0:
            raise ConfigurationError(f"eps_a + eps_b must not exceed 1, got {eps_a + eps_b}")
        return eps_a, eps_b


# ---------------------------------------------------------------------------
# schedule and estimator


def air_schedule(beta: float) -> Iterator[int]:
    """Commit times ``N_j = sum_{i<=j} floor(i**beta)``."""
    if not 0.0 < beta <= 1.0:
        raise ConfigurationError(f"beta must lie in (0, 1], got {beta}")
    total = 0
    j = 0
    while True:
        j += 1
        total += math.floor(j ** beta)
        yield total


def commit_times(beta: float, n: int) -> list[int]:
    """All commit times ``<= n``."""
    out = []
    for t in air_schedule(beta):
        if t > n:
            return out
        out.append(t)


def weight_exponent(dim: int) -> float:
    """``max(2/3, (P^(1/3) - 1) / P^(1/3))``."""
    if dim < 1:
        raise ContractViolation("dimension must be positive")
    c = dim ** (1.0 / 3.0)
    if round(c) ** 3 == dim:  # exact cube roots avoid 0.666...6 vs 2/3 noise
        c = float(round(c))
    return max(2.0 / 3.0, (c - 1.0) / c)


def _bg_update_inplace(mean, cov, x, w):
    mean *= 1.0 - w
    mean += w * x
    d = x - mean
    cov *= 1.0 - w
    cov += w * np.outer(d, d)


@overload(_bg_update_inplace)
def _bg_update_inplace_nb(mean, cov, x, w):
    def impl(mean, cov, x, w):
        P = x.shape[0]
        for a in range(P):
            mean[a] = mean[a] * (1.0 - w) + w * x[a]
        d = x - mean
        for a in range(P):
            for b in range(P):
                cov[a, b] = cov[a, b] * (1.0 - w) + w * (d[a] * d[b])

    return impl


@dataclass
class AdaptiveEstimator:
    """Background weighted mean and covariance."""

    mean: np.ndarray
    cov: np.ndarray
    i: int = 1
    d_w: float = 2.0 / 3.0

    @classmethod
    def initial(cls, mu0, sigma0) -> "AdaptiveEstimator":
        mu0 = np.array(mu0, dtype=float)
        return cls(mu0, np.array(sigma0, dtype=float), 1, weight_exponent(mu0.size))


def background_update(est: AdaptiveEstimator, x, i: int) -> AdaptiveEstimator:
    """One weighted update with ``w_i = i**(-d_w)``; the covariance uses the new mean."""
    if i < 2:
        raise ContractViolation("background updates start at i = 2")
    mean, cov = est.mean.copy(), est.cov.copy()
    _bg_update_inplace(mean, cov, np.asarray(x, dtype=float), float(i) ** (-est.d_w))
    return AdaptiveEstimator(mean, cov, i, est.d_w)


def commit_adaptation(est: AdaptiveEstimator, gamma: EllipticalParams, *, variant=FULL_COVARIANCE,
                      mu0=None, min_eig=None) -> EllipticalParams:
    """New elliptical parameters from the background estimate.

    ``variant="scalar"`` keeps the center at ``mu0`` (default: the current
    center) and uses ``trace(cov)/P`` times the identity.
    """
    P = est.mean.size
    if variant == SCALAR_SCALE:
        center = gamma.mean if mu0 is None else mu0
        return EllipticalParams(center, (np.trace(est.cov) / P) * np.eye(P), gamma.family, repair=True)
    scale = 0.5 * (est.cov + est.cov.T)
    if min_eig is not None:
        vals, vecs = np.linalg.eigh(scale)
        if vals.min() < min_eig:
            scale = (vecs * np.maximum(vals, min_eig)) @ vecs.T
            scale = 0.5 * (scale + scale.T)
    return EllipticalParams(est.mean, scale, gamma.family, repair=True)


# ---------------------------------------------------------------------------
# support transforms

IDENTITY = "identity"
LOG_POSITIVE = "log"


class SupportTransform:
    """Per-coordinate map between sampler space and the original space.

    ``LogPositive`` coordinates are sampled as ``y = log x``; the sampler-space
    density gains the Jacobian ``+ y``.
    """

    def __init__(self, tags):
        tags = list(tags)
        for t in tags:
            if t not in (IDENTITY, LOG_POSITIVE):
                raise ConfigurationError(f"unknown transform tag {t!r}")
        self.tags = tags
        self.mask = np.array([t == LOG_POSITIVE for t in tags], dtype=bool)

    @classmethod
    def identity(cls, dim: int) -> "SupportTransform":
        return cls([IDENTITY] * dim)

    @classmethod
    def log_positive(cls, mask) -> "SupportTransform":
        return cls([LOG_POSITIVE if m else IDENTITY for m in mask])

    @property
    def dim(self) -> int:
        return len(self.tags)

    @property
    def is_identity(self) -> bool:
        return not self.mask.any()

    def to_original(self, y):
        y = np.asarray(y, dtype=float)
        if self.is_identity:
            return y
        x = np.array(y, copy=True)
        x[..., self.mask] = np.exp(x[..., self.mask])
        return x

    def to_sampler(self, x):
        x = np.asarray(x, dtype=float)
        if self.is_identity:
            return x
        y = np.array(x, copy=True)
        with np.errstate(divide="ignore", invalid="ignore"):
            y[..., self.mask] = np.log(y[..., self.mask])
        return y

    def log_jacobian(self, y) -> float:
        return float(np.sum(np.asarray(y)[self.mask]))

    def wrap(self, target: TargetDensity) -> TargetDensity:
        """Sampler-space density ``log target(to_original(y)) + log|J|``."""
        if self.is_identity:
            return target

        def log_density(y):
            lp = target.fn(self.to_original(y), *target.args)
            return lp + self.log_jacobian(y)

        return TargetDensity(target.dim, log_density, name=f"{target.name}[log]", meta=target.meta)


# ---------------------------------------------------------------------------
# compiled segment loop


@jit
def _agess_segment(logtarget, args, x, logp, i_first, i_last,
                   mu_a, chol_a, logdet_a, sd_a, mu_0, chol_0, logdet_0,
                   code, m, M, m1, M1, eps_a, eps_b, allow_sweeps, sweep_until,
                   bg_mean, bg_cov, d_w, states, loops, tags, rng, max_iter):
    """Run iterations ``i_first..i_last`` (state ``i`` is stored in row ``i - 1``).

    Returns ``(x, logp, last_done, failed_iteration, failed_tag, loop_count)``;
    ``failed_iteration`` is 0 on success.
    """
    eps = eps_a + eps_b
    empty = np.empty(0)
    for i in range(i_first, i_last + 1):
        if allow_sweeps and i <= sweep_until:
            tag = 3
        elif allow_sweeps:
            v = rng.random() if 0.0 < eps < 1.0 else (0.0 if eps >= 1.0 else 1.0)
            if eps > 0.0 and v <= eps:
                pb = eps_b / eps
                if 0.0 < pb < 1.0:
                    tag = 3 if rng.random() < pb else 2
                else:
                    tag = 3 if pb >= 1.0 else 2
            else:
                tag = 1
        else:
            if 0.0 < eps_a < 1.0:
                tag = 2 if rng.random() < eps_a else 1
            else:
                tag = 2 if eps_a >= 1.0 else 1
        if tag == 3:
            xn, lp, n, bad = coord_sweep_kernel(logtarget, args, x, logp, mu_a, sd_a, code, m1, M1, rng, max_iter)
            failed = bad >= 0
        elif tag == 2:
            xn, lp, n, failed = slice_step_kernel(logtarget, args, x, logp, mu_0, chol_0, logdet_0, code, m, M,
                                                  True, empty, -1, rng, max_iter)
        else:
            xn, lp, n, failed = slice_step_kernel(logtarget, args, x, logp, mu_a, chol_a, logdet_a, code, m, M,
                                                  True, empty, -1, rng, max_iter)
        if failed:
            return x, logp, i - 1, i, tag, n
        x = xn
        logp = lp
        states[i - 1, :] = x
        loops[i - 1] = n
        tags[i - 1] = tag
        if i >= 2:
            _bg_update_inplace(bg_mean, bg_cov, x, float(i) ** (-d_w))
    return x, logp, i_last, 0, 0, 0


@dataclass
class AgessResult:
    trace: Trace
    gamma: EllipticalParams
    estimator: AdaptiveEstimator
    extra: dict = field(default_factory=dict)


def run_agess(target: TargetDensity, transform: SupportTransform | None, family: EllipticalFamily | None,
              mu0, sigma0, config: AdaptConfig, rng: np.random.Generator, *, x0=None) -> Trace:
    """Run one adaptive chain of ``config.n_iter`` states (``x0`` counts as the first).

    ``x0`` and ``mu0``/``sigma0`` live in sampler space; ``x0`` defaults to
    ``mu0``.  A target whose ``space`` is ``"sampler"`` is taken to already
    include the transform's Jacobian.  Returned states are in original space.
    On a kernel failure the raised :class:`ShrinkageError` carries the partial
    trace as ``err.trace``.
    """
    return run_agess_full(target, transform, family, mu0, sigma0, config, rng, x0=x0).trace


def run_agess_full(target, transform, family, mu0, sigma0, config: AdaptConfig, rng, *, x0=None) -> AgessResult:
    """:func:`run_agess` returning the final parameters and estimator as well."""
    family = family or EllipticalFamily.student_t(6.0)
    mu0 = np.array(mu0, dtype=float).reshape(-1)
    P = mu0.size
    if target.dim != P:
        raise ContractViolation(f"target dimension {target.dim} does not match mu0 length {P}")
    transform = transform or SupportTransform.identity(P)
    if transform.dim != P:
        raise ContractViolation("transform dimension mismatch")
    if getattr(target, "space", "original") == "sampler" or transform.is_identity:
        sampler_target = target
    else:
        sampler_target = transform.wrap(target)

    gamma0 = EllipticalParams(mu0, sigma0, family)
    gamma = gamma0
    est = AdaptiveEstimator.initial(mu0, gamma0.scale)
    eps_a, eps_b = config.resolved_eps(P)
    allow_sweeps = P >= SWEEP_MIN_DIM
    sweep_until = int(math.floor(config.burn_1d_fraction * config.n_burn)) if allow_sweeps else 0
    code, m, M = gamma0.code, gamma0.m, gamma0.M
    _, m1, M1 = family.for_coordinate(P).joint(1)

    x = np.array(mu0 if x0 is None else x0, dtype=float).reshape(-1)
    if x.shape != (P,):
        raise ContractViolation(f"x0 must have length {P}")
    evals0 = sampler_target.eval_counter
    logp = _initial_logp(sampler_target, x, None)

    N = config.n_iter
    states = np.empty((N, P))
    loops = np.zeros(N, dtype=np.int64)
    tags = np.zeros(N, dtype=np.int8)
    states[0] = x

    stops = set([N])
    if config.n_burn > 1:
        stops.add(min(config.n_burn, N))
    commits_at = commit_times(config.beta, N) if config.adapt else []
    stops.update(t for t in commits_at if t >= 2)
    stops = sorted(stops)
    commit_set = set(commits_at)

    segment = _impl(_agess_segment, sampler_target)
    commits = []
    timings = {"burn_in": 0.0, "sampling": 0.0}
    bg_mean, bg_cov = est.mean, est.cov
    seg_args = (code, m, M, m1, M1, eps_a, eps_b, allow_sweeps, sweep_until)
    # empty-range call: triggers compilation for this target outside the timed region
    sd = np.sqrt(np.diag(gamma.scale))
    segment(sampler_target.fn, sampler_target.args, x, logp, 2, 1, gamma.mean, gamma.chol, gamma.logdet, sd,
            gamma0.mean, gamma0.chol, gamma0.logdet, *seg_args, bg_mean, bg_cov, est.d_w, states, loops, tags,
            rng, config.max_iter)
    i = 2
    t0 = time.perf_counter()
    for stop in stops:
        if stop < i:
            continue
        sd = np.sqrt(np.diag(gamma.scale))
        x, logp, done, fail_i, fail_tag, fail_n = segment(
            sampler_target.fn, sampler_target.args, x, logp, i, stop,
            gamma.mean, gamma.chol, gamma.logdet, sd, gamma0.mean, gamma0.chol, gamma0.logdet, *seg_args,
            bg_mean, bg_cov, est.d_w, states, loops, tags, rng, config.max_iter,
        )
        sampler_target.eval_counter += int(loops[i - 1 : done].sum()) + int(fail_n)
        if fail_i:
            trace = _finish(states[:done], loops[:done], tags[:done], transform, config, commits, timings,
                            sampler_target.eval_counter - evals0, fail_i)
            err = ShrinkageError(
                f"{target.name}: shrinkage hit max_iter={config.max_iter} at iteration {fail_i} "
                f"({_tag_name(fail_tag)}); the target is probably -inf or NaN near the current state",
                loop_count=int(fail_n),
                state=transform.to_original(x),
            )
            err.trace = trace
            raise err
        i = stop + 1
        if stop == config.n_burn:
            now = time.perf_counter()
            timings["burn_in"] = now - t0
            t0 = now
        if stop in commit_set:
            est = AdaptiveEstimator(bg_mean, bg_cov, stop, est.d_w)
            gamma = commit_adaptation(est, gamma, variant=config.variant, mu0=mu0, min_eig=config.min_eig)
            commits.append((stop, gamma.mean.copy(), np.diag(gamma.scale).copy()))
    phase = "sampling" if config.n_burn < N else "burn_in"
    timings[phase] = time.perf_counter() - t0
    est = AdaptiveEstimator(bg_mean, bg_cov, N, est.d_w)
    trace = _finish(states, loops, tags, transform, config, commits, timings,
                    sampler_target.eval_counter - evals0, 0)
    trace.meta["final_gamma"] = {"mean": gamma.mean.tolist(), "scale": gamma.scale.tolist()}
    return AgessResult(trace, gamma, est)


def _tag_name(code: int) -> str:
    return {1: KernelTag.ADAPTIVE_FULL, 2: KernelTag.NONADAPTIVE_FULL, 3: KernelTag.COORD_SWEEP}[code].value


def _finish(states, loops, tags, transform, config, commits, timings, n_evals, failed_at):
    if not config.adapt:
        # parameters never move off gamma_0, so every full step is nonadaptive
        tags = np.where(tags == 1, 2, tags).astype(np.int8)
    meta = {"sampler": "agess", "variant": config.variant, "adapt": config.adapt}
    if failed_at:
        meta["failed_iteration"] = int(failed_at)
    return Trace(
        transform.to_original(states),
        loops,
        tags,
        burn_in=min(config.n_burn, len(states)),
        commits=commits,
        timings=timings,
        n_evals=n_evals,
        meta=meta,
    )

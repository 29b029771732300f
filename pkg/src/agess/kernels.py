"""One-step Markov transition kernels.

* :func:`ess_step` -- classical elliptical slice sampling with a Gaussian prior.
* :func:`agess_step` -- generalized elliptical slice step at fixed parameters:
  the slice is taken on the transformed likelihood ``target / elliptical``
  and the auxiliary point is drawn conditionally on the current state.
* :func:`coord_sweep` -- the same step applied to one coordinate at a time.
* :func:`arw_step` -- adaptive random-walk Metropolis baseline.

Compiled fast paths are used when the target carries a compiled log density
(see :class:`TargetDensity`) and the numba backend is active.
"""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from enum import Enum

import numpy as np

from ._backend import USE_NUMBA, is_compiled, jit, overload, python_version
from .elliptical import EllipticalFamily, EllipticalParams, draw_aux_kernel, log_density_kernel
from .errors import ChainInitializationError, ContractViolation, ShrinkageError
from .shrinkage import DEFAULT_MAX_ITER, TWO_PI, ellipse_point
from .trace import TAG_CODE, Trace

_TINY = 5e-324  # smallest positive double; replaces u == 0


class KernelTag(str, Enum):
    ADAPTIVE_FULL = "adaptive_full"
    NONADAPTIVE_FULL = "nonadaptive_full"
    COORD_SWEEP = "coord_sweep"
    ARW = "arw"

    @property
    def code(self) -> int:
        return TAG_CODE[self.value]


@dataclass
class StepStats:
    loop_count: int
    kernel_tag: KernelTag
    accepted: bool | None = None
    log_density: float = math.nan  # target log density at the returned state


class TargetDensity:
    """Unnormalized log density on an open subset of R^P.

    Either pass a Python callable ``log_density(x)``, or a ``kernel`` with
    extra positional ``args`` so that the density is ``kernel(x, *args)``.
    A kernel produced by :func:`agess._backend.jit` lets the samplers run
    their compiled loops.  NaN values are reported as ``-inf``.

    ``space="sampler"`` marks a density already written in the coordinates of
    a :class:`~agess.adaptation.SupportTransform` (Jacobian included).
    """

    def __init__(self, dim, log_density=None, *, kernel=None, args=(), name="target",
                 reference_point=None, meta=None, space="original"):
        if (log_density is None) == (kernel is None):
            raise ContractViolation("give exactly one of log_density or kernel")
        self.dim = int(dim)
        self.fn = kernel if kernel is not None else log_density
        self.args = tuple(args)
        self.name = name
        self.eval_counter = 0
        self.reference_point = None if reference_point is None else np.asarray(reference_point, float)
        self.meta = dict(meta or {})
        self.space = space

    @property
    def compiled(self) -> bool:
        return is_compiled(self.fn)

    def __call__(self, x) -> float:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ContractViolation(f"{self.name}: expected length-{self.dim} vector, got {x.shape}")
        self.eval_counter += 1
        v = float(self.fn(x, *self.args))
        return -math.inf if math.isnan(v) else v

    log_density = __call__

    def __repr__(self):
        return f"TargetDensity({self.name!r}, dim={self.dim})"


# ---------------------------------------------------------------------------
# compiled kernels


def _eval_at(logtarget, args, xp, buf, coord):
    if coord < 0:
        return logtarget(xp, *args)
    buf[coord] = xp[0]
    return logtarget(buf, *args)


@overload(_eval_at)
def _eval_at_nb(logtarget, args, xp, buf, coord):
    return _eval_at


@jit
def slice_step_kernel(logtarget, args, x, logp_x, mean, chol, logdet, code, m, M,
                      subtract, buf, coord, rng, max_iter):
    """One elliptical slice move.

    With ``subtract`` the slice is taken on ``logtarget - log E(mean, chol)``,
    otherwise on ``logtarget`` itself (classical ESS).  ``coord >= 0`` means
    ``x`` is the single coordinate ``coord`` of the full vector ``buf``.
    Returns ``(x_new, logp_new, loop_count, failed)``.
    """
    z = draw_aux_kernel(x, mean, chol, code, m, M, rng)
    if subtract:
        level = logp_x - log_density_kernel(x, mean, chol, logdet, code, m, M)
    else:
        level = logp_x
    u = rng.random()
    if u <= 0.0:
        u = _TINY
    level += math.log(u)
    theta = TWO_PI * rng.random()
    lo = theta - TWO_PI
    hi = theta
    n = 0
    while True:
        n += 1
        xp = ellipse_point(x, z, mean, theta)
        lp = _eval_at(logtarget, args, xp, buf, coord)
        if subtract:
            ls = lp - log_density_kernel(xp, mean, chol, logdet, code, m, M)
        else:
            ls = lp
        if ls > level:
            return xp, lp, n, False
        if n >= max_iter:
            if coord >= 0:
                buf[coord] = x[0]
            return x.copy(), logp_x, n, True
        if theta < 0.0:
            lo = theta
        else:
            hi = theta
        theta = lo + (hi - lo) * rng.random()


@jit
def coord_sweep_kernel(logtarget, args, x, logp_x, mean, sd, code, m, M, rng, max_iter):
    """Sequential 1-D slice moves over all coordinates (scale ``sd[p]**2``)."""
    P = x.shape[0]
    buf = x.copy()
    total = 0
    lp = logp_x
    for p in range(P):
        mu1 = mean[p:p + 1].copy()
        chol1 = np.empty((1, 1))
        chol1[0, 0] = sd[p]
        logdet1 = 2.0 * math.log(sd[p])
        x1 = buf[p:p + 1].copy()
        x1_new, lp, n, failed = slice_step_kernel(
            logtarget, args, x1, lp, mu1, chol1, logdet1, code, m, M, True, buf, p, rng, max_iter
        )
        total += n
        if failed:
            return buf, lp, total, p
        buf[p] = x1_new[0]
    return buf, lp, total, -1


# ---------------------------------------------------------------------------
# dispatch helpers


def _impl(kernel, target: TargetDensity):
    if USE_NUMBA and target.compiled:
        return kernel
    return python_version(kernel)


def _initial_logp(target: TargetDensity, x, logp_x):
    if logp_x is None:
        logp_x = target(x)
    if not logp_x > -math.inf:
        raise ChainInitializationError(
            f"{target.name}: log density is -inf/NaN at the current state; start inside the support"
        )
    return float(logp_x)


def _as_target(obj, dim) -> TargetDensity:
    if isinstance(obj, TargetDensity):
        return obj
    return TargetDensity(dim, obj, name=getattr(obj, "__name__", "loglik"))


def _check_state(x, dim):
    x = np.asarray(x, dtype=float)
    if x.shape != (dim,):
        raise ContractViolation(f"state must have shape ({dim},), got {x.shape}")
    return x


def _raise_stuck(target, n, x, where=""):
    raise ShrinkageError(
        f"{target.name}: shrinkage hit max_iter={n}{where}; the target is probably "
        "-inf or NaN near the current state",
        loop_count=n,
        state=np.array(x),
    )


_EMPTY = np.empty(0)


def _full_move(target, params, x, logp_x, rng, max_iter, subtract):
    step = _impl(slice_step_kernel, target)
    x_new, lp, n, failed = step(
        target.fn, target.args, x, logp_x, *params.kernel_args(), subtract, _EMPTY, -1, rng, max_iter
    )
    target.eval_counter += n
    if failed:
        _raise_stuck(target, n, x)
    return x_new, float(lp), int(n)


# ---------------------------------------------------------------------------
# public kernels


def transformed_loglik(target: TargetDensity, params: EllipticalParams, x) -> float:
    """``log target(x) - log E_P(x; mean, scale, g)``; -inf where the target is -inf."""
    x = _check_state(x, params.dim)
    lp = target(x)
    if lp == -math.inf:
        return -math.inf
    return lp - float(log_density_kernel(x, *params.kernel_args()))


def ess_step(loglik, prior: EllipticalParams, x, rng, *, loglik_x=None, max_iter=DEFAULT_MAX_ITER):
    """Classical elliptical slice sampling step for ``prior(x) * exp(loglik(x))``.

    ``loglik`` is a :class:`TargetDensity` or callable returning the log
    likelihood; ``prior`` must be Gaussian.
    """
    if not prior.family.is_gaussian:
        raise ContractViolation("ess_step needs a Gaussian prior")
    x = _check_state(x, prior.dim)
    target = _as_target(loglik, prior.dim)
    ll = _initial_logp(target, x, loglik_x)
    x_new, lp, n = _full_move(target, prior, x, ll, rng, max_iter, subtract=False)
    return x_new, StepStats(n, KernelTag.NONADAPTIVE_FULL, log_density=lp)


def agess_step(target: TargetDensity, family: EllipticalFamily | None, params: EllipticalParams, x, rng,
               *, logp_x=None, max_iter=DEFAULT_MAX_ITER, tag=KernelTag.ADAPTIVE_FULL):
    """Generalized elliptical slice step at fixed parameters ``params``.

    ``family`` overrides ``params.family`` when given.  Leaves the target
    invariant for any fixed ``params``.
    """
    if family is not None and family != params.family:
        params = params.with_family(family)
    x = _check_state(x, params.dim)
    lp0 = _initial_logp(target, x, logp_x)
    x_new, lp, n = _full_move(target, params, x, lp0, rng, max_iter, subtract=True)
    return x_new, StepStats(n, tag, log_density=lp)


def coord_sweep(target: TargetDensity, family: EllipticalFamily | None, params: EllipticalParams, x, rng,
                *, logp_x=None, max_iter=DEFAULT_MAX_ITER):
    """One pass of 1-D generalized slice moves over every coordinate in order.

    Coordinate ``p`` uses center ``mean[p]`` and scale ``scale[p, p]``.
    """
    family = family or params.family
    x = _check_state(x, params.dim)
    lp0 = _initial_logp(target, x, logp_x)
    code, m, M = family.for_coordinate(params.dim).joint(1)
    sd = np.sqrt(np.diag(params.scale))
    sweep = _impl(coord_sweep_kernel, target)
    x_new, lp, n, bad = sweep(target.fn, target.args, x, lp0, params.mean, sd, code, m, M, rng, max_iter)
    target.eval_counter += n
    if bad >= 0:
        _raise_stuck(target, n, x, where=f" at coordinate {bad}")
    return np.asarray(x_new), StepStats(int(n), KernelTag.COORD_SWEEP, log_density=float(lp))


# ---------------------------------------------------------------------------
# adaptive random walk


@dataclass
class ARWState:
    """Running moments and proposal settings of the adaptive random walk."""

    mean: np.ndarray
    m2: np.ndarray  # sum of centered outer products (Welford)
    count: int
    cov0: np.ndarray
    s_d: float
    eps_reg: float = 1e-6
    t0: int = 0

    @classmethod
    def initial(cls, x0, cov0, eps_reg=1e-6, t0=None) -> "ARWState":
        x0 = np.asarray(x0, dtype=float)
        P = x0.size
        return cls(
            mean=x0.copy(),
            m2=np.zeros((P, P)),
            count=1,
            cov0=np.array(np.broadcast_to(cov0, (P, P)) if np.ndim(cov0) == 2 else cov0 * np.eye(P)),
            s_d=2.38 ** 2 / P,
            eps_reg=eps_reg,
            t0=2 * P if t0 is None else t0,
        )

    @property
    def covariance(self) -> np.ndarray:
        if self.count < 2:
            return np.zeros_like(self.m2)
        return self.m2 / (self.count - 1)

    def proposal_cov(self) -> np.ndarray:
        if self.count <= self.t0:
            return self.cov0
        return self.s_d * (self.covariance + self.eps_reg * np.eye(self.mean.size))

    def updated(self, x) -> "ARWState":
        n = self.count + 1
        delta = x - self.mean
        mean = self.mean + delta / n
        m2 = self.m2 + np.outer(delta, x - mean)
        return ARWState(mean, m2, n, self.cov0, self.s_d, self.eps_reg, self.t0)


def arw_step(target: TargetDensity, state: ARWState, x, rng, *, logp_x=None):
    """Gaussian random-walk Metropolis step; returns ``(x', stats, state')``."""
    x = _check_state(x, target.dim)
    lp0 = _initial_logp(target, x, logp_x)
    L = np.linalg.cholesky(state.proposal_cov())
    prop = x + L @ rng.standard_normal(x.size)
    lp = target(prop)
    accepted = bool(math.log(max(rng.random(), _TINY)) < lp - lp0)
    if accepted:
        x, lp0 = prop, lp
    return x, StepStats(1, KernelTag.ARW, accepted=accepted, log_density=lp0), state.updated(x)


def run_arw(target: TargetDensity, x0, cov0, n_iter: int, rng, *, burn_in: int = 0, eps_reg=1e-6) -> Trace:
    """Run the adaptive random walk for ``n_iter`` states (initial state included)."""
    x = _check_state(x0, target.dim)
    lp = _initial_logp(target, x, None)
    state = ARWState.initial(x, cov0, eps_reg=eps_reg)
    states = np.empty((n_iter, target.dim))
    accepted = np.zeros(n_iter, dtype=bool)
    states[0] = x
    evals0 = target.eval_counter
    timings = {"burn_in": 0.0, "sampling": 0.0}
    t_start = time.perf_counter()
    for i in range(1, n_iter):
        if i == burn_in:
            timings["burn_in"] = time.perf_counter() - t_start
            t_start = time.perf_counter()
        x, st, state = arw_step(target, state, x, rng, logp_x=lp)
        lp = st.log_density
        states[i] = x
        accepted[i] = st.accepted
    timings["sampling" if burn_in < n_iter else "burn_in"] = time.perf_counter() - t_start
    loops = np.ones(n_iter, dtype=np.int64)
    loops[0] = 0
    tags = np.full(n_iter, KernelTag.ARW.code, dtype=np.int8)
    tags[0] = 0
    return Trace(states, loops, tags, burn_in=burn_in, accepted=accepted, timings=timings,
                 n_evals=target.eval_counter - evals0, meta={"sampler": "arw"})

"""Angle-bracket shrinkage on the ellipse through the current state.

The bracket starts as ``[theta - 2*pi, theta]`` around a uniform first angle
and shrinks towards zero (the current state) on every rejection.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from ._backend import USE_NUMBA, jit
from .errors import ContractViolation, ShrinkageError

TWO_PI = 2.0 * math.pi
DEFAULT_MAX_ITER = 10_000


@dataclass(frozen=True)
class EllipseProposal:
    """Current state ``x``, auxiliary draw ``z`` and ellipse center."""

    x: np.ndarray
    z: np.ndarray
    center: np.ndarray

    def __post_init__(self):
        for name in ("x", "z", "center"):
            object.__setattr__(self, name, np.asarray(getattr(self, name), dtype=float))
        if not (self.x.shape == self.z.shape == self.center.shape) or self.x.ndim != 1:
            raise ContractViolation(
                f"x, z and center must be equal-length vectors, got {self.x.shape}, "
                f"{self.z.shape}, {self.center.shape}"
            )


@dataclass
class ShrinkResult:
    theta: float
    x: np.ndarray
    loop_count: int
    evals: int
    brackets: list[tuple[float, float]] = field(default_factory=list)


@jit
def ellipse_point(x, z, center, theta):
    # written so that theta = 0 reproduces x bit-for-bit
    c = math.cos(theta)
    s = math.sin(theta)
    return x * c + z * s + center * (1.0 - c - s)


def point_on_ellipse(prop: EllipseProposal, theta: float) -> np.ndarray:
    """``(x - c) cos(theta) + (z - c) sin(theta) + c``."""
    if theta == 0.0:
        return prop.x.copy()
    return ellipse_point(prop.x, prop.z, prop.center, float(theta))


def shrink(
    prop: EllipseProposal,
    accept: Callable[[np.ndarray], bool],
    rng: np.random.Generator,
    max_iter: int = DEFAULT_MAX_ITER,
    record_brackets: bool = False,
) -> ShrinkResult:
    """Return the first point on the ellipse that satisfies ``accept``.

    ``accept`` must hold at the current state (theta = 0); the loop then
    terminates almost surely.  Raises :class:`ShrinkageError` after
    ``max_iter`` rejected proposals.
    """
    theta = TWO_PI * rng.random()
    lo, hi = theta - TWO_PI, theta
    brackets = [(lo, hi)] if record_brackets else []
    n = 0
    while True:
        n += 1
        y = point_on_ellipse(prop, theta)
        if accept(y):
            return ShrinkResult(theta, y, n, n, brackets)
        if n >= max_iter:
            raise ShrinkageError(
                f"shrinkage did not terminate after {n} proposals; is the current "
                "state inside the slice (finite density)?",
                loop_count=n,
                bracket=(lo, hi),
                state=prop.x,
            )
        if theta < 0.0:
            lo = theta
        else:
            hi = theta
        if record_brackets:
            brackets.append((lo, hi))
        theta = lo + (hi - lo) * rng.random()


# ---------------------------------------------------------------------------
# Shrinkage restricted to a union of arcs of the circle.  Used to check the
# reversibility of the angle kernel by simulation.


def _in_arcs(theta, arcs):
    t = np.mod(theta, TWO_PI)
    inside = np.zeros(t.shape, dtype=bool)
    for a, b in arcs:
        inside |= (t >= a) & (t < b)
    return inside


def _arc_transitions_numpy(theta_in, arcs, rng):
    n = theta_in.size
    theta = TWO_PI * rng.random(n)
    lo = theta - TWO_PI
    hi = theta.copy()
    out = np.empty(n)
    loops = np.zeros(n, dtype=np.int64)
    active = np.arange(n)
    while active.size:
        loops[active] += 1
        ok = _in_arcs(theta_in[active] + theta[active], arcs)
        done = active[ok]
        out[done] = np.mod(theta_in[done] + theta[done], TWO_PI)
        active = active[~ok]
        th = theta[active]
        neg = th < 0.0
        lo[active[neg]] = th[neg]
        hi[active[~neg]] = th[~neg]
        theta[active] = lo[active] + (hi[active] - lo[active]) * rng.random(active.size)
    return out, loops


@jit
def _arc_transitions_numba(theta_in, arcs, rng):
    n = theta_in.shape[0]
    out = np.empty(n)
    loops = np.zeros(n, dtype=np.int64)
    for i in range(n):
        theta = TWO_PI * rng.random()
        lo = theta - TWO_PI
        hi = theta
        while True:
            loops[i] += 1
            t = (theta_in[i] + theta) % TWO_PI
            hit = False
            for k in range(arcs.shape[0]):
                if arcs[k, 0] <= t < arcs[k, 1]:
                    hit = True
                    break
            if hit:
                out[i] = t
                break
            if theta < 0.0:
                lo = theta
            else:
                hi = theta
            theta = lo + (hi - lo) * rng.random()
    return out, loops


def arc_transitions(theta_in, arcs, rng: np.random.Generator):
    """Apply one shrinkage transition to each angle in ``theta_in``.

    ``arcs`` is a ``(k, 2)`` array of half-open arcs ``[a, b)`` inside
    ``[0, 2*pi)`` whose union is the slice; every ``theta_in`` must lie in
    it.  Returns ``(theta_out, loop_counts)``.
    """
    theta_in = np.asarray(theta_in, dtype=float)
    arcs = np.asarray(arcs, dtype=float).reshape(-1, 2)
    if not _in_arcs(theta_in, arcs).all():
        raise ContractViolation("every starting angle must lie inside the slice")
    if USE_NUMBA:
        return _arc_transitions_numba(theta_in, arcs, rng)
    return _arc_transitions_numpy(theta_in, arcs, rng)

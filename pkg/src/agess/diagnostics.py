"""Chain diagnostics: multivariate ESS, Gelman-Rubin, autocorrelation, the
Gaussian-target KL bound, and 2-D relative KL against a gridded target."""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy.signal import fftconvolve

from .errors import ContractViolation, DiagnosticsError
from .trace import Trace

DEFAULT_GR_THRESHOLD = 1.01
KDE_FLOOR = 1e-12
MIN_GRID = 50


def _as_states(chain) -> np.ndarray:
    if isinstance(chain, Trace):
        return chain.sampling_states()
    x = np.asarray(chain, dtype=float)
    return x[:, None] if x.ndim == 1 else x


def _window(x: np.ndarray, window: float) -> np.ndarray:
    if not 0.0 < window <= 1.0:
        raise ContractViolation(f"window must lie in (0, 1], got {window}")
    k = int(round(x.shape[0] * window))
    return x[x.shape[0] - k :]


def _logdet(S: np.ndarray, name: str) -> float:
    try:
        L = np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        raise DiagnosticsError(f"{name} is singular or not positive definite") from None
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def batch_means_cov(x: np.ndarray) -> np.ndarray:
    """Long-run covariance by non-overlapping batch means (batch size ``floor(sqrt(n))``)."""
    n = x.shape[0]
    b = int(math.isqrt(n))
    a = n // b
    if a < 2:
        raise DiagnosticsError("too few samples for batch means")
    y = x[: a * b].reshape(a, b, -1).mean(axis=1)
    return b * np.atleast_2d(np.cov(y, rowvar=False))


def multivariate_ess(chain, window: float = 1.0) -> float:
    """``n (|Lambda| / |Sigma|)^(1/P)`` on the final ``window`` fraction of the chain.

    ``Lambda`` is the sample covariance and ``Sigma`` the batch-means
    estimate of the Monte Carlo covariance.  For a :class:`Trace` only
    post-burn-in states are used.
    """
    x = _window(_as_states(chain), window)
    n, P = x.shape
    if n < 4 * math.isqrt(max(n, 1)) or n < 4:
        raise DiagnosticsError(f"window of {n} states is too short for batch means")
    lam = np.atleast_2d(np.cov(x, rowvar=False))
    sig = batch_means_cov(x)
    ld_lam = _logdet(lam, "sample covariance Lambda")
    ld_sig = _logdet(sig, "Monte Carlo covariance Sigma")
    return float(n * math.exp((ld_lam - ld_sig) / P))


def ess(values, window: float = 1.0) -> float:
    """Univariate batch-means ESS of a scalar series."""
    v = np.asarray(values, dtype=float).reshape(-1, 1)
    return multivariate_ess(v, window)


def squared_norm(chain) -> np.ndarray:
    x = _as_states(chain)
    return np.einsum("ij,ij->i", x, x)


def acf(series, max_lag: int) -> np.ndarray:
    """Biased autocorrelation estimates at lags ``0..max_lag`` (FFT based)."""
    x = np.asarray(series, dtype=float).reshape(-1)
    n = x.size
    if not 0 <= max_lag < n / 4:
        raise ContractViolation(f"max_lag must be below n/4 = {n / 4:g}")
    x = x - x.mean()
    size = 1 << int(math.ceil(math.log2(2 * n)))
    f = np.fft.rfft(x, size)
    r = np.fft.irfft(f * np.conj(f), size)[: max_lag + 1]
    if r[0] == 0.0:
        raise DiagnosticsError("constant series has no autocorrelation")
    return r / r[0]


def lag_acfs(chain, max_lag: int = 1) -> np.ndarray:
    """Per-coordinate autocorrelations, shape ``(P, max_lag + 1)``."""
    x = _as_states(chain)
    return np.array([acf(x[:, p], max_lag) for p in range(x.shape[1])])


def gelman_rubin(chains) -> float:
    """Multivariate potential scale reduction factor (largest-eigenvalue form).

    ``R = (n-1)/n + (1 + 1/m) * lambda_max(W^{-1} B/n)`` with ``W`` the mean
    within-chain covariance and ``B/n`` the covariance of chain means.
    """
    xs = [_as_states(c) for c in chains]
    m = len(xs)
    if m < 2:
        raise ContractViolation("Gelman-Rubin needs at least two chains")
    n = xs[0].shape[0]
    if any(x.shape != xs[0].shape for x in xs):
        raise ContractViolation("chains must have equal length and dimension")
    if n < 100:
        raise ContractViolation("chains must have at least 100 states")
    if not all(np.isfinite(x).all() for x in xs):
        raise DiagnosticsError("chains contain non-finite states")
    P = xs[0].shape[1]
    W = np.zeros((P, P))
    for x in xs:
        W += np.atleast_2d(np.cov(x, rowvar=False))
    W /= m
    means = np.array([x.mean(axis=0) for x in xs])
    B_n = np.atleast_2d(np.cov(means, rowvar=False))
    try:
        L = np.linalg.cholesky(W)
    except np.linalg.LinAlgError:
        raise DiagnosticsError("within-chain covariance is singular") from None
    Li = np.linalg.inv(L)
    lam = float(np.linalg.eigvalsh(Li @ B_n @ Li.T)[-1])
    return (n - 1) / n + (1.0 + 1.0 / m) * lam


# ---------------------------------------------------------------------------
# Gaussian target, Gaussian prior: distance to stationarity after n steps


def _q_plus_p(x0, cov, P) -> float:
    x0 = np.asarray(x0, dtype=float).reshape(-1)
    cov = np.asarray(cov, dtype=float)
    if cov.ndim == 0:
        cov = cov * np.eye(x0.size)
    if x0.size != P or cov.shape != (P, P):
        raise ContractViolation("x0 and Sigma must match the dimension P")
    q = float(x0 @ np.linalg.solve(cov, x0))
    return q + P


def gaussian_kl_bound(n: int, x0, cov, P: int) -> float:
    """``(x0' Sigma^{-1} x0 + P) (2^-(n+1) + pi^(-n/2))``, valid for ``n >= 3``."""
    if n < 3:
        raise ContractViolation("the KL bound holds for n >= 3")
    return _q_plus_p(x0, cov, P) * (2.0 ** (-(n + 1)) + math.pi ** (-n / 2.0))


def gaussian_kl_estimate(n: int, x0, cov, P: int, reps: int, rng: np.random.Generator, *,
                         return_se: bool = False):
    """Monte Carlo mean over ``psi = prod cos(theta_j)`` of the conditional KL
    ``(P/2) log(1 - psi^2) + (q + P)/2 * psi^2 / (1 - psi^2)``.
    """
    if n < 1:
        raise ContractViolation("n must be at least 1")
    if reps < 10_000:
        raise ContractViolation("use at least 1e4 repetitions")
    qp = _q_plus_p(x0, cov, P)
    psi2 = np.ones(reps)
    for _ in range(n):
        psi2 *= np.cos(2.0 * math.pi * rng.random(reps)) ** 2
    psi2 = np.minimum(psi2, 1.0 - 1e-16)
    vals = 0.5 * P * np.log1p(-psi2) + 0.5 * qp * psi2 / (1.0 - psi2)
    est = float(vals.mean())
    if return_se:
        return est, float(vals.std(ddof=1) / math.sqrt(reps))
    return est


# ---------------------------------------------------------------------------
# 2-D exploration score


@dataclass(frozen=True)
class Grid2D:
    """Rectangular evaluation grid ``[lo1, hi1] x [lo2, hi2]`` with ``n1 x n2`` nodes."""

    lo1: float
    hi1: float
    lo2: float
    hi2: float
    n1: int = 200
    n2: int = 200

    def __post_init__(self):
        if self.n1 < MIN_GRID or self.n2 < MIN_GRID:
            raise ContractViolation(f"grid needs at least {MIN_GRID} points per axis")
        if not (self.hi1 > self.lo1 and self.hi2 > self.lo2):
            raise ContractViolation("grid bounds are empty")

    @property
    def axes(self):
        return np.linspace(self.lo1, self.hi1, self.n1), np.linspace(self.lo2, self.hi2, self.n2)

    @classmethod
    def from_target(cls, target, box=(-30.0, 30.0, -30.0, 30.0), *, drop=30.0, coarse=241, n=200, margin=0.1):
        """Bounding box of ``{log p > max - drop}`` found by a coarse scan of ``box``."""
        a1 = np.linspace(box[0], box[1], coarse)
        a2 = np.linspace(box[2], box[3], coarse)
        lp = grid_log_density(target, a1, a2)
        keep = lp > lp.max() - drop
        i1 = np.nonzero(keep.any(axis=1))[0]
        i2 = np.nonzero(keep.any(axis=0))[0]
        s1, s2 = a1[1] - a1[0], a2[1] - a2[0]
        lo1, hi1 = a1[i1[0]] - s1, a1[i1[-1]] + s1
        lo2, hi2 = a2[i2[0]] - s2, a2[i2[-1]] + s2
        w1, w2 = hi1 - lo1, hi2 - lo2
        return cls(lo1 - margin * w1, hi1 + margin * w1, lo2 - margin * w2, hi2 + margin * w2, n, n)


def grid_log_density(target, a1, a2) -> np.ndarray:
    """``log p`` on the tensor grid ``a1 x a2`` (shape ``(len(a1), len(a2))``)."""
    out = np.empty((len(a1), len(a2)))
    pt = np.empty(2)
    for i, u in enumerate(a1):
        pt[0] = u
        for j, v in enumerate(a2):
            pt[1] = v
            out[i, j] = target(pt)
    return out


def grid_probabilities(target, grid: Grid2D) -> np.ndarray:
    a1, a2 = grid.axes
    lp = grid_log_density(target, a1, a2)
    p = np.exp(lp - lp.max())
    return p / p.sum()


def kde_on_grid(samples, grid: Grid2D) -> np.ndarray:
    """Gaussian KDE (Scott's rule, full bandwidth matrix) evaluated at the grid nodes.

    Samples are linearly binned on the grid spacing, extended by a margin of
    five kernel standard deviations, and convolved with the kernel by FFT.
    Returns density values (not normalized over the grid).
    """
    x = np.asarray(samples, dtype=float)
    n = x.shape[0]
    if x.ndim != 2 or x.shape[1] != 2 or n < 3:
        raise ContractViolation("need an (n, 2) array of samples with n >= 3")
    H = np.cov(x, rowvar=False) * n ** (-2.0 / 6.0)  # Scott: factor n^(-1/(d+4)), d = 2
    try:
        Hinv = np.linalg.inv(np.linalg.cholesky(H))
    except np.linalg.LinAlgError:
        raise DiagnosticsError("sample covariance is singular; cannot set a KDE bandwidth") from None
    d1 = (grid.hi1 - grid.lo1) / (grid.n1 - 1)
    d2 = (grid.hi2 - grid.lo2) / (grid.n2 - 1)
    r1 = int(math.ceil(5.0 * math.sqrt(H[0, 0]) / d1))
    r2 = int(math.ceil(5.0 * math.sqrt(H[1, 1]) / d2))
    m1, m2 = grid.n1 + 2 * r1, grid.n2 + 2 * r2
    # fractional indices on the padded grid
    f1 = (x[:, 0] - grid.lo1) / d1 + r1
    f2 = (x[:, 1] - grid.lo2) / d2 + r2
    inside = (f1 >= 0) & (f1 <= m1 - 1) & (f2 >= 0) & (f2 <= m2 - 1)
    f1, f2 = f1[inside], f2[inside]
    i1 = np.minimum(np.floor(f1).astype(int), m1 - 2)
    i2 = np.minimum(np.floor(f2).astype(int), m2 - 2)
    t1, t2 = f1 - i1, f2 - i2
    counts = np.zeros((m1, m2))
    np.add.at(counts, (i1, i2), (1 - t1) * (1 - t2))
    np.add.at(counts, (i1 + 1, i2), t1 * (1 - t2))
    np.add.at(counts, (i1, i2 + 1), (1 - t1) * t2)
    np.add.at(counts, (i1 + 1, i2 + 1), t1 * t2)
    o1 = np.arange(-r1, r1 + 1) * d1
    o2 = np.arange(-r2, r2 + 1) * d2
    D = np.stack(np.meshgrid(o1, o2, indexing="ij"), axis=-1) @ Hinv.T
    kern = np.exp(-0.5 * np.sum(D * D, axis=-1)) / (2.0 * math.pi * math.sqrt(np.linalg.det(H)))
    dens = fftconvolve(counts, kern, mode="same") / n
    return np.maximum(dens[r1 : r1 + grid.n1, r2 : r2 + grid.n2], 0.0)


def relative_kl_2d(chain, target, grid: Grid2D) -> float:
    """``KL(P_grid || Q_kde)`` over the grid nodes.

    ``P_grid`` is the target normalized on the grid, ``Q_kde`` the sample KDE
    on the same nodes, floored at 1e-12 and renormalized.
    """
    x = _as_states(chain)
    if x.shape[1] != 2:
        raise ContractViolation("relative_kl_2d needs a two-dimensional chain")
    p = grid_probabilities(target, grid)
    q = kde_on_grid(x, grid)
    q = q / q.sum() if q.sum() > 0 else q
    q = np.maximum(q, KDE_FLOOR)
    q /= q.sum()
    mask = p > 0
    return float(np.sum(p[mask] * (np.log(p[mask]) - np.log(q[mask]))))


def sample_from_grid(target, grid: Grid2D, n: int, rng: np.random.Generator) -> np.ndarray:
    """Multinomial resampling of grid nodes with uniform jitter inside each cell."""
    p = grid_probabilities(target, grid).ravel()
    idx = rng.choice(p.size, size=n, p=p)
    a1, a2 = grid.axes
    i1, i2 = np.unravel_index(idx, (grid.n1, grid.n2))
    d1, d2 = a1[1] - a1[0], a2[1] - a2[0]
    return np.column_stack([a1[i1] + d1 * (rng.random(n) - 0.5), a2[i2] + d2 * (rng.random(n) - 0.5)])


# ---------------------------------------------------------------------------
# reports


@dataclass
class DiagnosticsReport:
    n_states: int
    dim: int
    mess: float
    mess_per_second: float
    mean_loop_count: float
    kernel_mix_counts: dict
    lag1_acf: list
    sampling_seconds: float
    n_evals: int
    gelman_rubin: float | None = None
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        d = asdict(self)
        extra = d.pop("extra")
        d.update(extra)
        return d


def chain_report(trace: Trace, window: float = 1.0) -> DiagnosticsReport:
    x = trace.sampling_states()
    try:
        m = multivariate_ess(x, window)
    except DiagnosticsError:
        m = float("nan")
    secs = float(trace.timings.get("sampling", float("nan")))
    lag1 = [float(v) for v in lag_acfs(x, 1)[:, 1]] if x.shape[0] >= 8 else []
    return DiagnosticsReport(
        n_states=int(trace.n),
        dim=int(trace.dim),
        mess=m,
        mess_per_second=m / secs if secs and secs > 0 else float("nan"),
        mean_loop_count=trace.mean_loop_count(),
        kernel_mix_counts=trace.tag_counts(),
        lag1_acf=lag1,
        sampling_seconds=secs,
        n_evals=int(trace.n_evals),
    )

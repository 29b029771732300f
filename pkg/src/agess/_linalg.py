"""Small dense linear-algebra helpers used inside the sampling kernels."""

from __future__ import annotations

import numpy as np
from scipy.linalg import solve_triangular

from ._backend import overload
from .errors import FactorizationError

JITTER_REL = 1e-10
JITTER_ATTEMPTS = 10


def forward_solve(L, b):
    """Solve ``L w = b`` for lower-triangular ``L``."""
    return solve_triangular(L, b, lower=True, check_finite=False)


@overload(forward_solve)
def _forward_solve_nb(L, b):
    def impl(L, b):
        n = b.shape[0]
        w = np.empty(n)
        for i in range(n):
            acc = b[i]
            for j in range(i):
                acc -= L[i, j] * w[j]
            w[i] = acc / L[i, i]
        return w

    return impl


def log_det_chol(L):
    return 2.0 * float(np.sum(np.log(np.diag(L))))


def cholesky_with_jitter(S, rel=JITTER_REL, attempts=JITTER_ATTEMPTS):
    """Cholesky factor of ``S``, adding ``delta * I`` until it succeeds.

    ``delta`` starts at ``rel * mean(diag(S))`` and doubles on each failure.
    Returns ``(S_repaired, L)``; ``S_repaired is S`` when no jitter was needed.
    """
    S = np.asarray(S, dtype=float)
    try:
        return S, np.linalg.cholesky(S)
    except np.linalg.LinAlgError:
        pass
    scale = float(np.mean(np.diag(S)))
    if not np.isfinite(scale) or scale <= 0.0:
        raise FactorizationError("scale matrix has non-positive or non-finite diagonal")
    delta = rel * scale
    eye = np.eye(S.shape[0])
    for _ in range(attempts):
        S_try = S + delta * eye
        try:
            return S_try, np.linalg.cholesky(S_try)
        except np.linalg.LinAlgError:
            delta *= 2.0
    raise FactorizationError(
        f"Cholesky failed after {attempts} jitter attempts (last delta={delta / 2:.3g})"
    )


def chol_or_fail(A):
    """``(L, ok)``; ``ok`` is False when ``A`` is not numerically positive definite."""
    try:
        return np.linalg.cholesky(A), True
    except np.linalg.LinAlgError:
        return np.zeros_like(A), False


@overload(chol_or_fail)
def _chol_or_fail_nb(A):
    def impl(A):
        n = A.shape[0]
        L = np.zeros((n, n))
        for j in range(n):
            s = A[j, j]
            for k in range(j):
                s -= L[j, k] * L[j, k]
            if not s > 0.0:
                return L, False
            d = np.sqrt(s)
            L[j, j] = d
            for i in range(j + 1, n):
                t = A[i, j]
                for k in range(j):
                    t -= L[i, k] * L[j, k]
                L[i, j] = t / d
        return L, True

    return impl

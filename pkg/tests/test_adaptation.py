import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy import stats

from agess import (
    AdaptConfig,
    AdaptiveEstimator,
    ConfigurationError,
    ContractViolation,
    EllipticalFamily,
    EllipticalParams,
    ShrinkageError,
    SupportTransform,
    TargetDensity,
    agess_step,
    background_update,
    commit_adaptation,
    commit_times,
    run_agess,
    run_agess_full,
)
from agess.adaptation import air_schedule, weight_exponent
from agess.diagnostics import ess
from agess.targets import banana_target, gaussian_target
from agess.trace import TAG_CODE

T6 = EllipticalFamily.student_t(6.0)


def first(it, n):
    return [next(it) for _ in range(n)]


def fixed_config(n, **kw):
    return AdaptConfig(n_iter=n, eps_a=0.0, eps_b=0.0, burn_1d_fraction=0.0, adapt=False, **kw)


# --- schedule ---------------------------------------------------------------------


def test_air_schedule_examples():
    assert first(air_schedule(0.5), 9) == [1, 2, 3, 5, 7, 9, 11, 13, 16]
    assert first(air_schedule(1.0), 6) == [1, 3, 6, 10, 15, 21]


@given(st.floats(0.05, 1.0))
def test_air_schedule_gaps_non_decreasing(beta):
    n = first(air_schedule(beta), 60)
    gaps = np.diff([0] + n)
    assert np.all(gaps >= 1)
    assert np.all(np.diff(gaps) >= 0)


def _sqrt_floor_partial_sum(j):
    # sum_{i<=j} floor(sqrt(i)) in closed form
    a = math.isqrt(j)
    return (a - 1) * a * (4 * a + 1) // 6 + a * (j - a * a + 1)


def test_commit_count_matches_closed_form_inverse():
    n = 10 ** 6
    lo, hi = 1, n
    while lo < hi:  # largest j with N_j <= n
        mid = (lo + hi + 1) // 2
        if _sqrt_floor_partial_sum(mid) <= n:
            lo = mid
        else:
            hi = mid - 1
    count = len(commit_times(0.5, n))
    assert abs(count - lo) <= 2
    # Theta(n^(1/(1+beta))): (3n/2)^(2/3) to leading order
    assert count == pytest.approx((1.5 * n) ** (2 / 3), rel=0.02)


def test_air_schedule_rejects_bad_beta():
    with pytest.raises(ConfigurationError):
        next(air_schedule(0.0))


@pytest.mark.parametrize("P,expected", [(1, 2 / 3), (27, 2 / 3), (1000, 0.9), (8, 2 / 3)])
def test_weight_exponent(P, expected):
    assert weight_exponent(P) == pytest.approx(expected, abs=1e-15)


# --- background estimator ------------------------------------------------------------


def test_background_update_zero_innovation():
    est = AdaptiveEstimator(np.array([1.0, 2.0]), np.array([[2.0, 0.5], [0.5, 1.0]]), 1, 2 / 3)
    new = background_update(est, est.mean, 5)
    w = 5 ** (-2 / 3)
    np.testing.assert_allclose(new.mean, est.mean)
    np.testing.assert_allclose(new.cov, (1 - w) * est.cov)
    assert new.i == 5


def test_background_update_uses_post_update_mean():
    est = AdaptiveEstimator(np.zeros(2), np.eye(2), 1, 2 / 3)
    x = np.array([3.0, -1.0])
    w = 2 ** (-2 / 3)
    m = (1 - w) * est.mean + w * x
    expected = (1 - w) * est.cov + w * np.outer(x - m, x - m)
    new = background_update(est, x, 2)
    np.testing.assert_allclose(new.mean, m)
    np.testing.assert_allclose(new.cov, expected)
    np.testing.assert_array_equal(new.cov, new.cov.T)


def test_background_update_vanishing_weight():
    est = AdaptiveEstimator(np.zeros(2), np.eye(2), 1, 2 / 3)
    new = background_update(est, np.array([1.0, 1.0]), 10 ** 30)
    np.testing.assert_allclose(new.mean, est.mean, atol=1e-19)
    np.testing.assert_allclose(new.cov, est.cov, atol=1e-19)


def test_background_update_requires_i_ge_2():
    est = AdaptiveEstimator.initial(np.zeros(1), np.eye(1))
    with pytest.raises(ContractViolation):
        background_update(est, np.zeros(1), 1)


def test_background_estimator_consistency(rng):
    m = np.array([1.0, -2.0])
    S = np.array([[2.0, 0.5], [0.5, 1.0]])
    n = 100_000
    xs = rng.multivariate_normal(m, S, size=n)
    est = AdaptiveEstimator(np.zeros(2), np.eye(2), 1, 2 / 3)
    for i, x in enumerate(xs[1:], start=2):
        est = background_update(est, x, i)
    # exact weights of each draw in the final mean give its standard error
    w = np.arange(2, n + 1) ** (-2 / 3)
    keep = np.concatenate([np.cumprod((1 - w)[::-1])[::-1][1:], [1.0]])
    a = w * keep
    se = np.sqrt(np.sum(a ** 2) * np.diag(S))
    assert np.all(np.abs(est.mean - m) < 4 * se)
    assert np.linalg.norm(est.cov - S) / np.linalg.norm(S) < 0.05


# --- commit ----------------------------------------------------------------------------


def test_commit_spd_exact():
    S = np.array([[2.0, 0.3], [0.3, 1.0]])
    est = AdaptiveEstimator(np.array([1.0, 1.0]), S, 10, 2 / 3)
    g = commit_adaptation(est, EllipticalParams(np.zeros(2), np.eye(2), T6))
    np.testing.assert_array_equal(g.scale, S)
    np.testing.assert_array_equal(g.mean, est.mean)
    assert g.family == T6


def test_commit_repairs_singular_scale():
    S = np.array([[1.0, 1.0], [1.0, 1.0]])
    g = commit_adaptation(AdaptiveEstimator(np.zeros(2), S, 10, 2 / 3), EllipticalParams(np.zeros(2), np.eye(2)))
    delta = g.scale - S
    assert np.allclose(delta, delta[0, 0] * np.eye(2))
    assert 0 < delta[0, 0] < 1e-6
    np.linalg.cholesky(g.scale)


def test_commit_scalar_variant():
    est = AdaptiveEstimator(np.array([5.0, 5.0]), np.diag([1.0, 3.0]), 10, 2 / 3)
    g = commit_adaptation(est, EllipticalParams(np.zeros(2), np.eye(2)), variant="scalar", mu0=np.zeros(2))
    np.testing.assert_allclose(g.scale, 2.0 * np.eye(2))
    np.testing.assert_array_equal(g.mean, np.zeros(2))


def test_commit_eigenvalue_floor():
    est = AdaptiveEstimator(np.zeros(2), np.diag([1e-8, 4.0]), 10, 2 / 3)
    g = commit_adaptation(est, EllipticalParams(np.zeros(2), np.eye(2)), min_eig=0.01)
    assert np.linalg.eigvalsh(g.scale).min() == pytest.approx(0.01)


# --- config --------------------------------------------------------------------------


def test_adapt_config_defaults_and_validation():
    c = AdaptConfig(n_iter=100)
    assert c.resolved_eps(5) == (0.1, 0.0)
    assert c.resolved_eps(10) == (0.05, 0.05)
    with pytest.raises(ConfigurationError):
        AdaptConfig(n_iter=10, n_burn=20)
    with pytest.raises(ConfigurationError):
        AdaptConfig(n_iter=10, eps_a=1.5)
    with pytest.raises(ConfigurationError):
        AdaptConfig(n_iter=10, eps_a=0.98, eps_b=0.05).resolved_eps(20)
    with pytest.raises(ConfigurationError):
        AdaptConfig(n_iter=10, variant="diag")


# --- driver ---------------------------------------------------------------------------


def test_fixed_kernel_reproduces_agess_step_loop():
    P = 3
    target = gaussian_target(np.ones(P), np.diag([1.0, 2.0, 3.0]))
    mu0, S0 = np.zeros(P), 2 * np.eye(P)
    n = 2000
    tr = run_agess(target, None, T6, mu0, S0, fixed_config(n), np.random.default_rng(11))
    rng = np.random.default_rng(11)
    params = EllipticalParams(mu0, S0, T6)
    x = mu0.copy()
    lp = target(x)
    assert np.array_equal(tr.states[0], x)
    for i in range(1, n):
        x, st = agess_step(target, None, params, x, rng, logp_x=lp)
        lp = st.log_density
        assert np.array_equal(tr.states[i], x)
        assert tr.loop_counts[i] == st.loop_count


def test_eps_a_one_equals_nonadaptive_sampler():
    target = banana_target(np.array([0.3]), 0.5, -0.5)
    mu0, S0 = np.array([0.0, 0.5]), 4 * np.eye(2)
    a = run_agess(target, None, T6, mu0, S0, AdaptConfig(n_iter=3000, eps_a=1.0), np.random.default_rng(4))
    b = run_agess(target, None, T6, mu0, S0, fixed_config(3000), np.random.default_rng(4))
    np.testing.assert_array_equal(a.states, b.states)
    assert set(a.kernel_tags[1:]) == {TAG_CODE["nonadaptive_full"]}
    assert len(a.commits) > 0


def test_trace_layout_and_commits():
    P = 2
    target = gaussian_target(np.zeros(P), np.eye(P))
    cfg = AdaptConfig(n_iter=500, n_burn=100)
    res = run_agess_full(target, None, T6, np.zeros(P), 3 * np.eye(P), cfg, np.random.default_rng(0))
    tr = res.trace
    assert tr.n == 500 and tr.burn_in == 100
    assert tr.kernel_tags[0] == TAG_CODE["init"] and tr.loop_counts[0] == 0
    assert np.all(tr.loop_counts[1:] >= 1)
    assert [c[0] for c in tr.commits] == [t for t in commit_times(0.5, 500) if t >= 2]
    np.testing.assert_array_equal(tr.commits[-1][1], res.gamma.mean)
    assert tr.n_evals == tr.loop_counts.sum() + 1
    assert set(tr.timings) == {"burn_in", "sampling"}


def test_kernel_mixture_high_dim():
    P = 10
    target = gaussian_target(np.zeros(P), np.eye(P))
    cfg = AdaptConfig(n_iter=20_001, n_burn=10_000)
    tr = run_agess(target, None, T6, np.zeros(P), np.eye(P), cfg, np.random.default_rng(2))
    tags = tr.kernel_tags
    sweep, nonad, adapt = TAG_CODE["coord_sweep"], TAG_CODE["nonadaptive_full"], TAG_CODE["adaptive_full"]
    # state i sits in row i-1; the first floor(0.1 * 10000) = 1000 transitions are forced sweeps
    assert np.all(tags[1:1000] == sweep)
    rest = tags[1000:]
    n = rest.size
    for code, p in ((sweep, 0.05), (nonad, 0.05), (adapt, 0.90)):
        frac = np.mean(rest == code)
        assert abs(frac - p) < 4 * math.sqrt(p * (1 - p) / n)


def test_kernel_mixture_low_dim_has_no_sweeps():
    target = gaussian_target(np.zeros(3), np.eye(3))
    tr = run_agess(target, None, T6, np.zeros(3), np.eye(3), AdaptConfig(n_iter=20_000, n_burn=5000),
                   np.random.default_rng(1))
    tags = tr.kernel_tags[1:]
    assert not np.any(tags == TAG_CODE["coord_sweep"])
    frac = np.mean(tags == TAG_CODE["nonadaptive_full"])
    assert abs(frac - 0.1) < 4 * math.sqrt(0.09 / tags.size)


def test_log_transform_recovers_lognormal_marginal():
    # coordinate 0 is LogNormal(0, 1) on (0, inf); coordinate 1 standard normal
    def logp(v):
        if v[0] <= 0:
            return -math.inf
        return -math.log(v[0]) - 0.5 * math.log(v[0]) ** 2 - 0.5 * v[1] ** 2

    target = TargetDensity(2, logp)
    tf = SupportTransform.log_positive([True, False])
    cfg = AdaptConfig(n_iter=40_000, n_burn=2000)
    tr = run_agess(target, tf, T6, np.zeros(2), np.eye(2), cfg, np.random.default_rng(8))
    assert np.all(tr.states[:, 0] > 0)
    x = tr.sampling_states()[::8, 0]
    assert stats.kstest(x, stats.lognorm(s=1.0).cdf).pvalue > 0.001


def test_support_transform_roundtrip():
    tf = SupportTransform.log_positive([True, False, True])
    y = np.array([0.5, -2.0, -1.0])
    x = tf.to_original(y)
    assert x[0] == pytest.approx(math.exp(0.5)) and x[1] == -2.0
    np.testing.assert_allclose(tf.to_sampler(x), y)
    assert tf.log_jacobian(y) == pytest.approx(-0.5)
    with pytest.raises(ConfigurationError):
        SupportTransform(["sqrt"])


def test_banana_posterior_mean_matches_quadrature():
    target = banana_target(np.array([0.1]), 1.0, -1.0)
    g1 = np.linspace(-8, 8, 801)
    g2 = np.linspace(-8, 8, 801)
    lp = np.array([[target(np.array([a, b])) for b in g2] for a in g1])
    w = np.exp(lp - lp.max())
    w /= w.sum()
    ref = np.array([(w.sum(1) * g1).sum(), (w.sum(0) * g2).sum()])
    cfg = AdaptConfig(n_iter=120_000, n_burn=20_000)
    tr = run_agess(target, None, T6, np.array([0.0, 0.5]), 4 * np.eye(2), cfg, np.random.default_rng(21))
    x = tr.sampling_states()
    se = np.array([math.sqrt(x[:, j].var() / ess(x[:, j])) for j in range(2)])
    assert np.all(np.abs(x.mean(0) - ref) < 4 * se)


def test_shrinkage_failure_carries_partial_trace():
    calls = {"n": 0}

    def logp(v):
        calls["n"] += 1
        # after 200 evaluations only the exact current state keeps finite density
        return -0.5 * v @ v if calls["n"] < 200 else -math.inf

    target = TargetDensity(2, logp)
    cfg = AdaptConfig(n_iter=1000, max_iter=50)
    with pytest.raises(ShrinkageError) as info:
        run_agess(target, None, T6, np.zeros(2), np.eye(2), cfg, np.random.default_rng(0))
    tr = info.value.trace
    assert 1 <= tr.n < 1000
    assert tr.meta["failed_iteration"] == tr.n + 1

import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from agess import ContractViolation, DiagnosticsError, Trace
from agess.diagnostics import (
    Grid2D,
    acf,
    batch_means_cov,
    chain_report,
    ess,
    gaussian_kl_bound,
    gaussian_kl_estimate,
    gelman_rubin,
    kde_on_grid,
    lag_acfs,
    multivariate_ess,
    relative_kl_2d,
    sample_from_grid,
)
from agess.targets import gaussian_target, twin_banana_data, twin_banana_target


def ar1(n, rho, rng, P=1):
    e = rng.standard_normal((n, P))
    x = np.empty((n, P))
    x[0] = e[0] / math.sqrt(1 - rho ** 2)
    for t in range(1, n):
        x[t] = rho * x[t - 1] + e[t]
    return x


# --- mESS --------------------------------------------------------------------------------


@pytest.mark.parametrize("P", [2, 10])
def test_mess_iid(P, rng):
    # one chain's ratio has sd ~0.1 at 100 batches; the mean over replicates is the estimator's centre
    ratios = [multivariate_ess(rng.standard_normal((10_000, P))) / 10_000 for _ in range(20)]
    assert 0.9 <= np.mean(ratios) <= 1.1


def test_mess_ar1_spectral_oracle():
    vals = [ess(ar1(100_000, 0.9, np.random.default_rng(s))[:, 0]) / 100_000 for s in range(3)]
    assert np.mean(vals) == pytest.approx(1 / 19, rel=0.3)


def test_mess_duplication_halves(rng):
    x = rng.standard_normal((20_000, 3))
    d = np.repeat(x, 2, axis=0)
    ratio = (multivariate_ess(d) / d.shape[0]) / (multivariate_ess(x) / x.shape[0])
    assert ratio == pytest.approx(0.5, rel=0.2)


@settings(max_examples=15)
@given(st.integers(0, 10 ** 6))
def test_mess_affine_invariance(seed):
    rng = np.random.default_rng(seed)
    x = ar1(4000, 0.5, rng, P=3)
    A = rng.normal(size=(3, 3)) + 3 * np.eye(3)
    b = rng.normal(size=3)
    assert multivariate_ess(x @ A.T + b) == pytest.approx(multivariate_ess(x), rel=1e-6)


def test_mess_window_and_errors(rng):
    x = rng.standard_normal((1000, 2))
    assert multivariate_ess(x, 0.4) == multivariate_ess(x[-400:])
    with pytest.raises(DiagnosticsError, match="Lambda"):
        multivariate_ess(np.column_stack([x[:, 0], x[:, 0]]))
    with pytest.raises(DiagnosticsError):
        multivariate_ess(x[:10])
    with pytest.raises(ContractViolation):
        multivariate_ess(x, 0.0)


def test_batch_means_layout(rng):
    x = rng.standard_normal((103, 2))
    b = 10
    y = x[:100].reshape(10, b, 2).mean(axis=1)
    np.testing.assert_allclose(batch_means_cov(x), b * np.cov(y, rowvar=False))


# --- acf ---------------------------------------------------------------------------------


def test_acf_iid_and_lag0(rng):
    x = rng.standard_normal(10_000)
    r = acf(x, 20)
    assert r[0] == 1.0
    assert np.all(np.abs(r[1:]) < 4 / math.sqrt(x.size))


def test_acf_ar1(rng):
    r = acf(ar1(50_000, 0.5, rng)[:, 0], 5)
    np.testing.assert_allclose(r, 0.5 ** np.arange(6), atol=0.05)


def test_acf_matches_direct_sum(rng):
    x = rng.standard_normal(200)
    c = x - x.mean()
    direct = [np.dot(c[: 200 - k], c[k:]) / np.dot(c, c) for k in range(5)]
    np.testing.assert_allclose(acf(x, 4), direct, atol=1e-12)


def test_acf_contract(rng):
    with pytest.raises(ContractViolation):
        acf(rng.standard_normal(40), 10)
    assert lag_acfs(rng.standard_normal((100, 3)), 2).shape == (3, 3)


# --- Gelman-Rubin --------------------------------------------------------------------------


def test_gr_identical_chains(rng):
    x = rng.standard_normal((1000, 3))
    assert abs(gelman_rubin([x, x.copy(), x.copy()]) - 1.0) <= 1 / 1000 + 1e-12


def test_gr_disjoint_modes(rng):
    a = rng.standard_normal((1000, 2)) + 10
    b = rng.standard_normal((1000, 2)) - 10
    assert gelman_rubin([a, b]) > 1.2


def test_gr_iid_same_target(rng):
    chains = [rng.standard_normal((10_000, 4)) for _ in range(4)]
    assert gelman_rubin(chains) < 1.01


def test_gr_errors(rng):
    x = rng.standard_normal((200, 2))
    with pytest.raises(ContractViolation):
        gelman_rubin([x])
    with pytest.raises(ContractViolation):
        gelman_rubin([x, x[:150]])
    with pytest.raises(ContractViolation):
        gelman_rubin([x[:50], x[:50]])
    z = np.column_stack([x[:, 0], np.ones(200)])
    with pytest.raises(DiagnosticsError):
        gelman_rubin([z, z])


# --- Gaussian KL bound -----------------------------------------------------------------------


def test_kl_bound_value():
    assert gaussian_kl_bound(3, [0.0], [[1.0]], 1) == pytest.approx(2 ** -4 + math.pi ** -1.5)
    assert gaussian_kl_bound(3, [0.0], [[1.0]], 1) == pytest.approx(0.24208, abs=1e-5)
    x0 = np.array([1.0, 2.0])
    S = np.array([[2.0, 0.5], [0.5, 1.0]])
    q = x0 @ np.linalg.solve(S, x0)
    assert gaussian_kl_bound(5, x0, S, 2) == pytest.approx((q + 2) * (2 ** -6 + math.pi ** -2.5))


@given(st.integers(3, 40), st.integers(1, 20))
def test_kl_bound_monotone_and_linear(n, P):
    z = np.zeros(P)
    assert gaussian_kl_bound(n + 1, z, np.eye(P), P) < gaussian_kl_bound(n, z, np.eye(P), P)
    assert gaussian_kl_bound(n, z, np.eye(P), P) == pytest.approx(P * gaussian_kl_bound(n, [0.0], [[1.0]], 1))


def test_kl_bound_domain():
    with pytest.raises(ContractViolation):
        gaussian_kl_bound(2, [0.0], [[1.0]], 1)


def test_kl_estimate_n1_finite_positive(rng):
    v = gaussian_kl_estimate(1, [0.0], [[1.0]], 1, 10_000, rng)
    assert math.isfinite(v) and v > 0


def test_kl_estimate_below_bound():
    for s in range(5):
        est, se = gaussian_kl_estimate(10, [0.0], [[1.0]], 1, 100_000, np.random.default_rng(s), return_se=True)
        assert est <= gaussian_kl_bound(10, [0.0], [[1.0]], 1) + 3 * se


def test_kl_estimate_below_bound_all_n():
    x0, S = np.array([1.0, -0.5]), np.eye(2)
    for n in range(3, 16):
        est, se = gaussian_kl_estimate(n, x0, S, 2, 100_000, np.random.default_rng(n), return_se=True)
        assert est <= gaussian_kl_bound(n, x0, S, 2) + 3 * se


def test_kl_estimate_decreasing():
    vals = [gaussian_kl_estimate(n, [0.0], [[1.0]], 1, 100_000, np.random.default_rng(100 + n)) for n in range(3, 16)]
    assert np.all(np.diff(vals) < 0)


def test_kl_estimate_contract(rng):
    with pytest.raises(ContractViolation):
        gaussian_kl_estimate(3, [0.0], [[1.0]], 1, 100, rng)


# --- relative KL --------------------------------------------------------------------------------


def test_kde_integrates_to_one(rng):
    g = Grid2D(-8, 8, -8, 8, 161, 161)
    dens = kde_on_grid(rng.standard_normal((5000, 2)), g)
    assert dens.sum() * (16 / 160) ** 2 == pytest.approx(1.0, abs=1e-3)


def test_kde_matches_exact_sum(rng):
    from scipy.stats import gaussian_kde

    x = rng.standard_normal((400, 2)) * [1.0, 2.0]
    g = Grid2D(-4, 4, -6, 6, 81, 121)
    a1, a2 = g.axes
    pts = np.stack(np.meshgrid(a1, a2, indexing="ij"), axis=0).reshape(2, -1)
    exact = gaussian_kde(x.T, bw_method="scott")(pts).reshape(81, 121)
    np.testing.assert_allclose(kde_on_grid(x, g), exact, atol=2e-3 * exact.max())


def test_relative_kl_exact_samples(rng):
    t = gaussian_target([0.0, 0.0], [[1.0, 0.8], [0.8, 1.0]])
    g = Grid2D.from_target(t)
    x = sample_from_grid(t, g, 100_000, rng)
    kl = relative_kl_2d(x, t, g)
    assert 0 <= kl < 0.02


def test_relative_kl_mode_deletion(rng):
    t = twin_banana_target(twin_banana_data(10, np.random.default_rng(5)), 0.0, 0.0)
    g = Grid2D.from_target(t)
    both = sample_from_grid(t, g, 100_000, rng)
    one = both[both[:, 0] < 0]
    assert relative_kl_2d(one, t, g) - relative_kl_2d(both, t, g) >= 0.5


@settings(max_examples=10)
@given(st.integers(0, 10 ** 6))
def test_relative_kl_nonnegative(seed):
    rng = np.random.default_rng(seed)
    t = gaussian_target([0.0, 0.0], np.eye(2))
    x = rng.standard_normal((300, 2)) * rng.uniform(0.2, 3) + rng.normal(size=2)
    assert relative_kl_2d(x, t, Grid2D(-6, 6, -6, 6, 60, 60)) >= 0


def test_grid_contract():
    with pytest.raises(ContractViolation):
        Grid2D(-1, 1, -1, 1, 20, 200)
    with pytest.raises(ContractViolation):
        relative_kl_2d(np.zeros((10, 3)), gaussian_target([0.0, 0.0], np.eye(2)), Grid2D(-1, 1, -1, 1))


# --- reports ----------------------------------------------------------------------------------


def test_chain_report_fields(rng):
    n = 2000
    tr = Trace(rng.standard_normal((n, 2)), np.r_[0, np.full(n - 1, 3)], np.r_[0, np.full(n - 1, 1)].astype(np.int8),
               burn_in=500, timings={"sampling": 2.0, "burn_in": 1.0})
    rep = chain_report(tr, 0.4).to_dict()
    assert rep["mean_loop_count"] == 3.0
    assert rep["kernel_mix_counts"]["adaptive_full"] == n - 1
    assert rep["mess_per_second"] == pytest.approx(rep["mess"] / 2.0)
    assert 0 < rep["mess"] <= 1.5 * 0.4 * 1500
    assert len(rep["lag1_acf"]) == 2
    json.dumps(rep)

import logging

import numpy as np
import pytest
from scipy import linalg
from sklearn.base import clone

from mmdbo.kernel import BaseKernelParams, eval_base
from mmdbo.mmd import EstimatorConfig
from mmdbo.surrogate import (BaselineGPRegressor, MMDGPRegressor, baseline_kernel, cholesky_with_jitter,
                             erbf_kernel, kernel_dist)
from mmdbo.udist import dirac, gaussian, sample

from oracles import naive_gp, rbf_elementwise, rq_elementwise

NYS = EstimatorConfig("nystrom", m=20, h=5)
EMP = EstimatorConfig("empirical", m=20, h=None)
RBF1 = BaseKernelParams.rbf(1.0)


def _fixed(model, **kw):
    return model.set_params(optimizer=None, **kw)


# -- MMD kernel -----------------------------------------------------------------


def test_kernel_dist_examples():
    a, b = np.zeros((6, 1)), np.ones((6, 1))
    for cfg in (EstimatorConfig("empirical", m=6, h=None), EstimatorConfig("nystrom", m=6, h=3)):
        assert kernel_dist(RBF1, 1.0, cfg, a, a) == 1.0
        assert kernel_dist(RBF1, 1.0, cfg, a, b) == pytest.approx(np.exp(-(2 - 2 * np.exp(-0.5))), abs=1e-12)
        d = np.sqrt(-2 * np.log(1 - np.log(2) / 2))
        assert kernel_dist(RBF1, 1.0, cfg, a, a + d) == pytest.approx(0.5, abs=1e-12)
    assert np.exp(-(2 - 2 * np.exp(-0.5))) == pytest.approx(0.4553, abs=1e-4)


def test_model_kernel_dist_uses_fitted_values():
    X = np.array([[0.1], [0.5], [0.9]])
    model = _fixed(MMDGPRegressor(dirac(), EMP, alpha=0.7, base_kernel=RBF1)).fit(X, [0.0, 1.0, 0.0])
    a, b = np.zeros((20, 1)), np.ones((20, 1))
    assert model.kernel_dist(a, b) == pytest.approx(np.exp(-0.7 * (2 - 2 * np.exp(-0.5))), abs=1e-12)


# -- posterior ------------------------------------------------------------------


@pytest.mark.parametrize("est", [NYS, EMP])
def test_prior_without_data(est):
    post = MMDGPRegressor(gaussian(0.05), est).posterior(np.linspace(0, 1, 7)[:, None])
    np.testing.assert_array_equal(post.mean, 0.0)
    np.testing.assert_array_equal(post.variance, 1.0)


@pytest.mark.parametrize("est", [NYS, EMP])
def test_single_observation_closed_form(est):
    model = _fixed(MMDGPRegressor(dirac(), est, noise_var=0.01, base_kernel=RBF1)).fit([[0.3]], [1.0])
    post = model.posterior([[0.3]])
    assert post.mean[0] == pytest.approx(1 / 1.01, abs=1e-12)
    assert post.variance[0] == pytest.approx(1 - 1 / 1.01, abs=1e-12)


@pytest.mark.parametrize("est", [NYS, EMP])
def test_dirac_reduction_to_vanilla_gp(est):
    rng = np.random.default_rng(0)
    X = rng.uniform(0, 1, (12, 1))
    y = np.sin(6 * X[:, 0])
    Xq = np.linspace(0, 1, 100)[:, None]
    ls, alpha, noise = 0.2, 0.8, 0.01
    model = _fixed(MMDGPRegressor(dirac(), est, alpha=alpha, noise_var=noise,
                                  base_kernel=BaseKernelParams.rq(ls))).fit(X, y)
    post = model.posterior(Xq)

    def induced(A, B):
        d2 = 10.0 - 2.0 * rq_elementwise(A[:, None, :], B[None, :, :], ls)
        return np.exp(-alpha * d2)

    mean, var = naive_gp(induced(X, X), y, induced(Xq, X), np.ones(100), noise)
    np.testing.assert_allclose(post.mean, mean, atol=1e-6)
    np.testing.assert_allclose(post.variance, var, atol=1e-6)


def test_variance_bounded_and_shrinks_with_observations():
    law = gaussian(0.02)
    X = np.array([[0.2], [0.5], [0.8]])
    xq = np.array([[0.5]])
    prev = 1.0
    for n in range(1, 4):
        Xn = np.vstack([X, np.repeat(xq, n, axis=0)])
        model = _fixed(MMDGPRegressor(law, EstimatorConfig("nystrom", m=50, h=10), base_kernel=BaseKernelParams.rq(0.1)))
        model.fit(Xn, np.zeros(len(Xn)))
        var = model.posterior(np.linspace(0, 1, 25)[:, None]).variance
        assert np.all(var <= 1 + 1e-8) and np.all(var >= 0)
        v = model.posterior(xq, query_seed=123).variance[0]
        assert v <= prev + 1e-12
        prev = v


def test_factorization_reconstructs_gram():
    rng = np.random.default_rng(1)
    X = rng.uniform(0, 1, (10, 1))
    model = MMDGPRegressor(gaussian(0.02), NYS, random_state=3).fit(X, np.cos(5 * X[:, 0]))
    K = np.exp(-model.alpha_ * model.mmd2_train()) + (model.noise_var_ + model.jitter_) * np.eye(10)
    L = model.L_
    assert np.linalg.norm(L @ L.T - K) <= 1e-8 * np.linalg.norm(K)


# -- hyperparameters ------------------------------------------------------------


def test_lml_maximizer_beats_perturbed_truth():
    rng = np.random.default_rng(2)
    X = rng.uniform(0, 1, (30, 1))
    base = BaseKernelParams.rq(0.1)
    true = dict(alpha=2.0, noise_var=0.01)
    probe = _fixed(MMDGPRegressor(dirac(), EMP, base_kernel=base, length_scale_bounds="fixed", **true)).fit(X, np.zeros(30))
    K = np.exp(-2.0 * probe.mmd2_train()) + 0.01 * np.eye(30)
    y = np.linalg.cholesky(K) @ rng.normal(size=30)
    fitted = MMDGPRegressor(dirac(), EMP, base_kernel=base, length_scale_bounds="fixed", n_restarts=4, **true).fit(X, y)
    best = fitted.log_marginal_likelihood()
    for fa in (0.5, 1.0, 2.0):
        for fn in (0.5, 1.0, 2.0):
            theta = np.log([2.0 * fa, 0.01 * fn])
            assert best >= fitted.log_marginal_likelihood(theta) - 1e-9


def test_alpha_within_one_grid_cell_of_grid_argmax():
    rng = np.random.default_rng(3)
    X = rng.uniform(0, 1, (15, 1))
    y = np.sin(8 * X[:, 0]) + 0.05 * rng.normal(size=15)
    kw = dict(input_dist=gaussian(0.02), estimator=NYS, base_kernel=BaseKernelParams.rq(0.1),
              length_scale_bounds="fixed", noise_var=0.01, noise_var_bounds="fixed", alpha_bounds=(1e-2, 1e3))
    model = MMDGPRegressor(**kw).fit(X, y)
    grid = np.linspace(np.log(1e-2), np.log(1e3), 50)
    lml = [model.log_marginal_likelihood([g]) for g in grid]
    k = int(np.argmax(lml))
    step = grid[1] - grid[0]
    assert abs(np.log(model.alpha_) - grid[k]) <= step + 1e-9


def test_noise_lower_bound():
    X = np.linspace(0, 1, 8)[:, None]
    model = MMDGPRegressor(dirac(), NYS, noise_var_bounds=(1e-6, 1.0)).fit(X, np.sin(3 * X[:, 0]))
    assert model.noise_var_ >= 1e-6


def test_sklearn_protocol():
    model = MMDGPRegressor(gaussian(0.02), NYS, alpha=3.0)
    assert model.get_params()["alpha"] == 3.0
    twin = clone(model)
    assert twin.get_params()["alpha"] == 3.0 and twin is not model
    X = np.linspace(0, 1, 6)[:, None]
    y = X[:, 0] ** 2
    model.fit(X, y)
    mean, std = model.predict(X, return_std=True)
    assert mean.shape == std.shape == (6,)
    assert np.isfinite(model.score(X, y))
    frozen = model.with_fitted_hyperparameters()
    assert frozen.optimizer is None and frozen.alpha == model.alpha_
    assert "alpha" in model.hyperparameters()


def test_input_validation():
    model = MMDGPRegressor(gaussian(0.02), NYS)
    with pytest.raises(ValueError):
        model.fit([[0.1], [0.2]], [1.0])
    with pytest.raises(ValueError):
        model.fit([[0.1], [np.nan]], [1.0, 2.0])
    with pytest.raises(ValueError):
        model.fit([[0.1, 0.2]], [1.0])


# -- jitter ------------------------------------------------------------------------


def test_jitter_ladder_escalates_and_fails_with_eigenvalue(caplog):
    v = np.ones(3) / np.sqrt(3)
    K = np.outer(v, v)  # rank one
    with caplog.at_level(logging.INFO, logger="mmdbo.surrogate"):
        L, jitter = cholesky_with_jitter(K)
    assert jitter > 0 and "escalating" in caplog.text
    np.testing.assert_allclose(L @ L.T, K + jitter * np.eye(3), atol=1e-12)
    with pytest.raises(linalg.LinAlgError, match="minimum eigenvalue -1"):
        cholesky_with_jitter(np.diag([1.0, -1.0]))


# -- baselines -----------------------------------------------------------------------


def test_baseline_kernel_examples():
    g = (np.array([0.3]), np.array([[0.01]]))
    assert baseline_kernel("skl", {"alpha": 1.0}, g, g) == pytest.approx(1.0, abs=1e-15)
    tiny = (np.array([0.0]), np.array([[1e-14]]))
    other = (np.array([0.7]), np.array([[1e-14]]))
    assert baseline_kernel("erbf", {"lengthscale": 0.5}, tiny, other) == pytest.approx(
        np.exp(-0.5 * 0.49 / 0.25), abs=1e-9)
    rq = BaseKernelParams.rq(0.4)
    a, b = np.full((5, 1), 0.1), np.full((5, 1), 0.6)
    assert baseline_kernel("ugp", {"base_kernel": rq}, a, b) == eval_base(rq, a[:1], b[:1])[0, 0]
    # degenerate covariances fall back to the point kernel
    zero = (np.array([0.0]), np.zeros((1, 1)))
    one = (np.array([1.0]), np.zeros((1, 1)))
    assert baseline_kernel("skl", {"alpha": 1.0, "lengthscale": 1.0}, zero, one) == pytest.approx(np.exp(-0.5))


def test_erbf_matches_sampled_expectation():
    m, ls = 10_000, 0.3
    mu_a, mu_b = np.array([[0.2, -0.1]]), np.array([[0.5, 0.3]])
    cov_a, cov_b = np.diag([0.04, 0.01])[None], np.diag([0.02, 0.09])[None]
    closed = erbf_kernel(mu_a, cov_a, mu_b, cov_b, ls)[0, 0]
    rng = np.random.default_rng(4)
    U = rng.multivariate_normal(mu_a[0], cov_a[0], m)
    V = rng.multivariate_normal(mu_b[0], cov_b[0], m)
    from mmdbo.kernel import pair_sums
    sampled = pair_sums(BaseKernelParams.rbf(ls), U[None], V[None])[0, 0] / m**2
    sd = rbf_elementwise(U, V, ls).std()
    assert abs(sampled - closed) <= 3 * sd * np.sqrt(2.0 / m)


@pytest.mark.parametrize("kind", ["vanilla_gp", "skl", "erbf", "ugp"])
def test_baselines_fit_and_predict(kind):
    X = np.linspace(0.05, 0.95, 8)[:, None]
    y = np.sin(5 * X[:, 0])
    model = BaselineGPRegressor(kind, gaussian(0.03), ugp_m=20, normalize_y=True, domain=[[0, 1]]).fit(X, y)
    post = model.posterior(np.linspace(0, 1, 11)[:, None])
    assert np.all(np.isfinite(post.mean)) and np.all(post.variance >= 0)
    frozen = model.with_fitted_hyperparameters().fit(X, y)
    np.testing.assert_allclose(frozen.posterior(X).mean, model.posterior(X).mean, atol=1e-8)


def test_vanilla_gp_interpolates_dirac_data():
    X = np.linspace(0, 1, 6)[:, None]
    y = np.cos(4 * X[:, 0])
    model = BaselineGPRegressor("vanilla_gp", dirac(), noise_var=1e-6, noise_var_bounds="fixed").fit(X, y)
    np.testing.assert_allclose(model.predict(X), y, atol=1e-3)


def test_unknown_baseline_kind():
    with pytest.raises(ValueError):
        BaselineGPRegressor("rbfx", dirac()).fit([[0.0], [1.0]], [0.0, 1.0])

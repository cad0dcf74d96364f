"""Gaussian-process surrogates whose inputs are probability distributions.

Inputs to ``fit``/``predict`` are design points (centers) ``X`` of shape
(n, d); each center is turned into a distribution through the estimator's
``input_dist`` law.  The models follow the scikit-learn estimator protocol.
"""
from __future__ import annotations

import logging
from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy import linalg, optimize
from sklearn.base import BaseEstimator, RegressorMixin, clone
from sklearn.utils.validation import check_is_fitted

from .kernel import BaseKernelParams, batched_row_means, eval_base, median_heuristic
from .mmd import EstimatorConfig, block_sums, mmd2_between, mmd2_empirical, mmd2_nystrom, summarize
from .udist import InputDistribution, moment_match, rng_for, sample_many
from .validation import check_centers, check_targets

logger = logging.getLogger(__name__)

JITTER_LADDER = (0.0, 1e-8, 1e-7, 1e-6, 1e-5, 1e-4)


@dataclass
class Posterior:
    mean: np.ndarray
    variance: np.ndarray

    def __post_init__(self):
        self.mean = np.asarray(self.mean, dtype=float)
        self.variance = np.asarray(self.variance, dtype=float)

    def __len__(self):
        return self.mean.shape[0]


def cholesky_with_jitter(K: np.ndarray, ladder=JITTER_LADDER, log_level=logging.INFO):
    """Lower Cholesky factor of ``K``, escalating diagonal jitter on failure.

    Returns ``(L, jitter)``; raises ``LinAlgError`` with the minimum eigenvalue
    when the last rung still fails.
    """
    n = K.shape[0]
    for jitter in ladder:
        try:
            L = linalg.cholesky(K + jitter * np.eye(n), lower=True, check_finite=False)
        except linalg.LinAlgError:
            logger.log(log_level, "Cholesky failed with jitter %.0e; escalating", jitter)
            continue
        if np.all(np.isfinite(L)):
            return L, jitter
    min_eig = float(np.linalg.eigvalsh(K).min()) if np.all(np.isfinite(K)) else float("nan")
    raise linalg.LinAlgError(
        f"Gram matrix is not positive definite after jitter {ladder[-1]:.0e} "
        f"(minimum eigenvalue {min_eig:.3e})"
    )


def _log_bounds(bounds, scale=1.0):
    lo, hi = bounds
    return np.log(lo * scale), np.log(hi * scale)


class _DistributionalGP(RegressorMixin, BaseEstimator):
    """Shared GP machinery: likelihood, fitting, factorization, prediction.

    Subclasses describe their hyperparameters with ``_hyper_spec`` and supply
    the Gram matrix and cross-covariances in terms of a log-parameter vector.
    """

    # -- subclass interface --------------------------------------------

    def _hyper_spec(self):
        """List of (name, log_initial, log_bounds or None if fixed)."""
        raise NotImplementedError

    def _prepare_training(self, X):
        raise NotImplementedError

    def _gram(self, params: dict) -> np.ndarray:
        raise NotImplementedError

    def _cross(self, params: dict, Xq, query_seed):
        """Return (K_qn, k_qq) for query centers."""
        raise NotImplementedError

    def _prior_diag(self, params: dict, Xq, query_seed) -> np.ndarray:
        raise NotImplementedError

    # -- parameter plumbing ---------------------------------------------

    def _split(self, theta, spec):
        params, k = {}, 0
        for name, init, bounds in spec:
            if bounds is None:
                params[name] = init
            else:
                params[name] = theta[k]
                k += 1
        return params

    def _free(self, spec):
        return [(name, init, bounds) for name, init, bounds in spec if bounds is not None]

    # -- likelihood ------------------------------------------------------

    def _lml(self, params, y, log_level=logging.DEBUG):
        K = self._gram(params)
        noise = np.exp(params["noise_var"])
        try:
            L, _ = cholesky_with_jitter(K + noise * np.eye(K.shape[0]), log_level=log_level)
        except linalg.LinAlgError:
            return -np.inf
        a = linalg.cho_solve((L, True), y, check_finite=False)
        return float(
            -0.5 * y @ a - np.log(np.diag(L)).sum() - 0.5 * len(y) * np.log(2 * np.pi)
        )

    def log_marginal_likelihood(self, theta=None):
        """Log marginal likelihood at log-hyperparameters ``theta`` (free ones only)."""
        check_is_fitted(self, "L_")
        if theta is None:
            return self.log_marginal_likelihood_value_
        params = self._split(np.asarray(theta, dtype=float), self.hyper_spec_)
        return self._lml(params, self._y_train)

    # -- estimator API -----------------------------------------------------

    def fit(self, X, y):
        X = check_centers(X, self._dim())
        y = check_targets(y, X.shape[0])
        self.X_train_ = X
        if self.normalize_y and len(y) > 1:
            self._y_mean = float(y.mean())
            self._y_std = float(y.std()) or 1.0
        else:
            self._y_mean, self._y_std = 0.0, 1.0
        self._y_train = (y - self._y_mean) / self._y_std
        self._cache = OrderedDict()
        self._prepare_training(X)
        spec = self._hyper_spec()
        free = self._free(spec)
        theta0 = np.array([init for _, init, _ in free])
        params = self._split(theta0, spec)
        if self.optimizer is not None and free and len(y) >= 2:
            params, spec = self._optimize(spec, free, theta0)
        self.hyper_spec_ = spec
        self._store(params)
        K = self._gram(params)
        noise = np.exp(params["noise_var"])
        self.L_, self.jitter_ = cholesky_with_jitter(K + noise * np.eye(len(y)))
        self.alpha_vec_ = linalg.cho_solve((self.L_, True), self._y_train)
        self.params_ = params
        self.log_marginal_likelihood_value_ = self._lml(params, self._y_train)
        return self

    def _optimize(self, spec, free, theta0):
        bounds = np.array([b for _, _, b in free])
        rng = np.random.default_rng(rng_for(self.random_state, "hyper").integers(2**32))
        starts = [np.clip(theta0, bounds[:, 0], bounds[:, 1])]
        for _ in range(self.n_restarts):
            starts.append(rng.uniform(bounds[:, 0], bounds[:, 1]))

        def objective(theta):
            value = self._lml(self._split(theta, spec), self._y_train)
            return -value if np.isfinite(value) else 1e25

        best_theta, best_val = starts[0], objective(starts[0])
        if not best_val < 1e25:
            # exp(-alpha D) with a noisy, non-metric D can be indefinite at large alpha;
            # small alpha with large noise always factorizes
            names = [name for name, _, _ in free]
            safe = starts[0].copy()
            for key, pick in (("alpha", 0), ("noise_var", 1)):
                if key in names:
                    safe[names.index(key)] = bounds[names.index(key), pick]
            starts.insert(1, safe)
        for x0 in starts:
            res = optimize.minimize(objective, x0, method="L-BFGS-B", bounds=bounds)
            if res.fun < best_val:
                best_theta, best_val = res.x, float(res.fun)
        if not best_val < 1e25:
            # every candidate failed; surface the factorization error
            K = self._gram(self._split(best_theta, spec))
            cholesky_with_jitter(K + np.exp(self._split(best_theta, spec)["noise_var"]) * np.eye(len(K)))
        return self._split(best_theta, spec), spec

    def _store(self, params):
        """Expose fitted hyperparameters as public attributes."""
        self.noise_var_ = float(np.exp(params["noise_var"]))

    def _predict_raw(self, X, query_seed=None):
        X = check_centers(X, self._dim())
        if not hasattr(self, "L_"):
            # unfitted: prior at the initial hyperparameters
            spec = self._hyper_spec_unfitted()
            params = self._split(np.array([i for _, i, _ in self._free(spec)]), spec)
            var = self._prior_diag(params, X, query_seed)
            return np.zeros(X.shape[0]), var
        Kq, kqq = self._cross(self.params_, X, query_seed)
        mean = Kq @ self.alpha_vec_
        v = linalg.solve_triangular(self.L_, Kq.T, lower=True, check_finite=False)
        var = np.maximum(kqq - (v**2).sum(axis=0), 0.0)
        return mean, var

    def posterior(self, X, query_seed=None) -> Posterior:
        """Posterior mean and variance at the distributions centered on ``X``.

        Query batches use seeds derived from (random_state, query index) unless
        ``query_seed`` is given, in which case every query shares that seed.
        """
        mean, var = self._predict_raw(X, query_seed)
        return Posterior(mean * self._scale()[1] + self._scale()[0], var * self._scale()[1] ** 2)

    def predict(self, X, return_std=False, query_seed=None):
        post = self.posterior(X, query_seed)
        if return_std:
            return post.mean, np.sqrt(post.variance)
        return post.mean

    def training_mean(self) -> np.ndarray:
        """Posterior mean at the training distributions, on their own cached batches.

        Uses K alpha = y - (noise + jitter) alpha, so no fresh query batches are drawn.
        """
        check_is_fitted(self, "L_")
        mean = self._y_train - (np.exp(self.params_["noise_var"]) + self.jitter_) * self.alpha_vec_
        return mean * self._scale()[1] + self._scale()[0]

    def _scale(self):
        if hasattr(self, "_y_mean"):
            return self._y_mean, self._y_std
        return 0.0, 1.0

    def _hyper_spec_unfitted(self):
        self._cache = getattr(self, "_cache", OrderedDict())
        return self._hyper_spec(prior_only=True)

    def _dim(self):
        return self.input_dist.dim if self.input_dist is not None else None

    def _query_seeds(self, n, query_seed):
        if query_seed is not None:
            return int(query_seed)
        return [int(rng_for(self.random_state, "query", j).integers(2**31)) for j in range(n)]

    def _cached(self, key, fn):
        cache = self._cache
        if key in cache:
            cache.move_to_end(key)
            return cache[key]
        value = fn()
        cache[key] = value
        if len(cache) > 16:
            cache.popitem(last=False)
        return value


def _training_seed(random_state, i):
    return int(rng_for(random_state, "train", i).integers(2**31))


def _domain_diameter(domain, samples):
    if domain is not None:
        b = np.asarray(domain, dtype=float).reshape(-1, 2)
        diam = float(np.linalg.norm(b[:, 1] - b[:, 0]))
    else:
        pts = np.asarray(samples).reshape(-1, np.shape(samples)[-1])
        diam = float(np.linalg.norm(pts.max(axis=0) - pts.min(axis=0)))
    return diam if diam > 0 else 1.0


class MMDGPRegressor(_DistributionalGP):
    """GP over input distributions with covariance ``exp(-alpha * MMD^2(P, Q))``.

    Parameters
    ----------
    input_dist : InputDistribution
        Perturbation law attached to every design point.
    estimator : EstimatorConfig
        MMD^2 estimator (``empirical`` or ``nystrom``) with its sampling sizes.
    alpha : float
        Initial MMD-kernel scale.
    base_kernel : BaseKernelParams or None
        Point kernel inside the MMD; ``None`` uses the rational-quadratic
        mixture with every lengthscale set by the median heuristic.
    length_scale_bounds : (float, float) or "fixed"
        Bounds as multiples of the domain diameter.
    tie_lengthscales : bool
        Optimize one shared lengthscale instead of five.
    noise_var, noise_var_bounds, alpha_bounds
        Observation-noise variance and search boxes (``"fixed"`` disables).
    optimizer : "multistart" or None
        ``None`` keeps the given hyperparameters.
    n_restarts : int
        Random restarts besides the initial point.
    normalize_y : bool
        Standardize targets before fitting.
    domain : array-like (d, 2) or None
        Box used for the lengthscale search range.
    random_state : int
        Root seed for training batches, query batches and landmarks.
    """

    def __init__(
        self,
        input_dist=None,
        estimator=None,
        alpha=1.0,
        alpha_bounds=(1e-2, 1e3),
        base_kernel=None,
        length_scale_bounds=(1e-3, 1e1),
        tie_lengthscales=True,
        noise_var=1e-2,
        noise_var_bounds=(1e-6, 1.0),
        optimizer="multistart",
        n_restarts=2,
        normalize_y=False,
        domain=None,
        random_state=0,
    ):
        self.input_dist = input_dist
        self.estimator = estimator
        self.alpha = alpha
        self.alpha_bounds = alpha_bounds
        self.base_kernel = base_kernel
        self.length_scale_bounds = length_scale_bounds
        self.tie_lengthscales = tie_lengthscales
        self.noise_var = noise_var
        self.noise_var_bounds = noise_var_bounds
        self.optimizer = optimizer
        self.n_restarts = n_restarts
        self.normalize_y = normalize_y
        self.domain = domain
        self.random_state = random_state

    @property
    def estimator_(self) -> EstimatorConfig:
        return self.estimator if self.estimator is not None else EstimatorConfig()

    def _prepare_training(self, X):
        cfg = self.estimator_
        seeds = [_training_seed(self.random_state, i) for i in range(X.shape[0])]
        self.train_batches_ = sample_many(self.input_dist, X, cfg.m, seeds)
        if self.base_kernel is None:
            ls = median_heuristic(self.train_batches_, seed=self.random_state)
            self._base0 = BaseKernelParams.rq(ls)
        else:
            self._base0 = self.base_kernel
        self._diameter = _domain_diameter(self.domain, self.train_batches_)

    def _hyper_spec(self, prior_only=False):
        if prior_only:
            base = self.base_kernel or BaseKernelParams.rq(1.0)
        else:
            base = self._base0
        ls = np.log(np.asarray(base.lengthscales))
        fixed_ls = self.length_scale_bounds == "fixed" or prior_only
        ls_bounds = None if fixed_ls else _log_bounds(self.length_scale_bounds, self._diameter)
        spec = [("alpha", np.log(self.alpha), None if self.alpha_bounds == "fixed" else _log_bounds(self.alpha_bounds))]
        if self.tie_lengthscales and base.kind == "rq_mixture":
            # a single scale factor on the (possibly unequal) initial lengthscales
            spec.append(("ls_shift", 0.0, None if fixed_ls else (ls_bounds[0] - ls.max(), ls_bounds[1] - ls.min())))
        else:
            for i, v in enumerate(ls):
                spec.append((f"ls{i}", v, ls_bounds))
        nb = None if self.noise_var_bounds == "fixed" else _log_bounds(self.noise_var_bounds)
        spec.append(("noise_var", np.log(self.noise_var), nb))
        self._spec_base = base
        return spec

    def _kernel_from(self, params) -> BaseKernelParams:
        base = self._spec_base
        if "ls_shift" in params:
            ls = np.asarray(base.lengthscales) * np.exp(params["ls_shift"])
        else:
            ls = np.exp([params[f"ls{i}"] for i in range(len(base.lengthscales))])
        return base.with_lengthscales(ls)

    def _train_summary(self, kernel):
        cfg = self.estimator_
        tags = range(self.train_batches_.shape[0])
        return self._cached(
            ("summary",) + kernel.lengthscales,
            lambda: summarize(kernel, self.train_batches_, cfg, tags, self.random_state),
        )

    def mmd2_train(self, kernel=None) -> np.ndarray:
        """Pairwise MMD^2 matrix of the training distributions (zero diagonal)."""
        kernel = kernel or self.base_kernel_

        def compute():
            S = self._train_summary(kernel)
            D = mmd2_between(kernel, S)
            np.fill_diagonal(D, 0.0)
            return D

        return self._cached(("D",) + kernel.lengthscales, compute)

    def _gram(self, params):
        D = self.mmd2_train(self._kernel_from(params))
        return np.exp(-np.exp(params["alpha"]) * np.maximum(D, 0.0))

    def _query_summary(self, kernel, Xq, query_seed):
        cfg = self.estimator_
        seeds = self._query_seeds(Xq.shape[0], query_seed)
        batches = sample_many(self.input_dist, Xq, cfg.m, seeds)
        tags = np.arange(Xq.shape[0]) + 1_000_003
        return summarize(kernel, batches, cfg, tags, self.random_state)

    def _cross(self, params, Xq, query_seed):
        kernel = self._kernel_from(params)
        Sq = self._query_summary(kernel, Xq, query_seed)
        D = mmd2_between(kernel, Sq, self._train_summary(kernel))
        Kq = np.exp(-np.exp(params["alpha"]) * np.maximum(D, 0.0))
        return Kq, np.ones(Xq.shape[0])

    def _prior_diag(self, params, Xq, query_seed):
        return np.ones(Xq.shape[0])

    def _store(self, params):
        super()._store(params)
        self.alpha_ = float(np.exp(params["alpha"]))
        self.base_kernel_ = self._kernel_from(params)

    def kernel_dist(self, P, Q) -> float:
        """MMD kernel value between two sample batches under the fitted parameters."""
        cfg = self.estimator_
        kernel = getattr(self, "base_kernel_", None) or self.base_kernel or BaseKernelParams.rq(1.0)
        alpha = getattr(self, "alpha_", self.alpha)
        return kernel_dist(kernel, alpha, cfg, P, Q, seed=self.random_state)

    def with_fitted_hyperparameters(self):
        """Unfitted clone with every hyperparameter frozen at its fitted value."""
        check_is_fitted(self, "L_")
        return clone(self).set_params(
            alpha=self.alpha_, base_kernel=self.base_kernel_, noise_var=self.noise_var_, optimizer=None
        )

    def warm_start(self, refit_lengthscale: bool):
        """Unfitted clone initialized at the fitted values, lengthscale optionally frozen."""
        check_is_fitted(self, "L_")
        est = clone(self).set_params(alpha=self.alpha_, base_kernel=self.base_kernel_, noise_var=self.noise_var_)
        if not refit_lengthscale:
            est.set_params(length_scale_bounds="fixed")
        return est

    def hyperparameters(self) -> dict:
        """JSON-serializable fitted state for run reproducibility."""
        check_is_fitted(self, "L_")
        return {
            "alpha": self.alpha_,
            "noise_var": self.noise_var_,
            "base_kernel": self.base_kernel_.to_json(),
            "estimator": self.estimator_.to_json(),
            "random_state": self.random_state,
        }


def kernel_dist(kernel: BaseKernelParams, alpha: float, cfg: EstimatorConfig, P, Q, seed: int = 0) -> float:
    """``exp(-alpha * max(0, MMD^2(P, Q)))`` with MMD^2 from ``cfg``'s estimator.

    Identical batches get exactly 1, matching the zero diagonal of the Gram.
    """
    if np.array_equal(getattr(P, "points", P), getattr(Q, "points", Q)):
        return 1.0
    if cfg.kind == "empirical":
        d2 = mmd2_empirical(kernel, P, Q)
    else:
        d2 = mmd2_nystrom(kernel, P, Q, cfg.h, cfg.pinv_tolerance, seed, cfg.landmark_replace)
    return float(np.exp(-alpha * max(0.0, d2)))


# -- baseline kernels -----------------------------------------------------------

_DEGENERATE = 1e-12


def _degenerate(covs) -> np.ndarray:
    covs = np.asarray(covs)
    return np.array([np.linalg.eigvalsh(c).min() <= _DEGENERATE for c in covs])


def rbf_centers(A, B, lengthscale) -> np.ndarray:
    A, B = np.atleast_2d(A), np.atleast_2d(B)
    d2 = ((A[:, None, :] - B[None, :, :]) ** 2).sum(-1)
    return np.exp(-d2 / (2.0 * lengthscale**2))


def skl_divergence(mu_a, cov_a, mu_b, cov_b) -> np.ndarray:
    """Symmetrized Gaussian KL divergence KL(a||b) + KL(b||a), all pairs."""
    mu_a, mu_b = np.atleast_2d(mu_a), np.atleast_2d(mu_b)
    d = mu_a.shape[1]
    inv_a, inv_b = np.linalg.inv(cov_a), np.linalg.inv(cov_b)
    tr = np.einsum("jpq,iqp->ij", inv_b, cov_a) + np.einsum("ipq,jqp->ij", inv_a, cov_b)
    # (mu_i - mu_j)^T (A_i + B_j) (mu_i - mu_j), expanded to avoid an (na, nb, d) temp per matrix
    qa = np.einsum("ip,ipq,iq->i", mu_a, inv_a, mu_a)[:, None] \
        - 2 * np.einsum("jp,ipq,iq->ij", mu_b, inv_a, mu_a) \
        + np.einsum("jp,ipq,jq->ij", mu_b, inv_a, mu_b)
    qb = np.einsum("jp,jpq,jq->j", mu_b, inv_b, mu_b)[None, :] \
        - 2 * np.einsum("ip,jpq,jq->ij", mu_a, inv_b, mu_b) \
        + np.einsum("ip,jpq,iq->ij", mu_a, inv_b, mu_a)
    return 0.5 * (tr - 2 * d + qa + qb)


def skl_kernel(mu_a, cov_a, mu_b, cov_b, alpha, lengthscale) -> np.ndarray:
    """exp(-alpha * SKL); pairs with a zero-variance side use the RBF Dirac limit."""
    mu_a, mu_b = np.atleast_2d(mu_a), np.atleast_2d(mu_b)
    cov_a, cov_b = np.asarray(cov_a), np.asarray(cov_b)
    deg_a, deg_b = _degenerate(cov_a), _degenerate(cov_b)
    out = rbf_centers(mu_a, mu_b, lengthscale)
    ia, ib = np.flatnonzero(~deg_a), np.flatnonzero(~deg_b)
    if ia.size and ib.size:
        skl = skl_divergence(mu_a[ia], cov_a[ia], mu_b[ib], cov_b[ib])
        out[np.ix_(ia, ib)] = np.exp(-alpha * np.maximum(skl, 0.0))
    return out


def erbf_kernel(mu_a, cov_a, mu_b, cov_b, lengthscale) -> np.ndarray:
    """Expected RBF kernel E[k(u, v)] for independent u ~ N(mu_a, cov_a), v ~ N(mu_b, cov_b)."""
    mu_a, mu_b = np.atleast_2d(mu_a), np.atleast_2d(mu_b)
    cov_a, cov_b = np.asarray(cov_a), np.asarray(cov_b)
    d = mu_a.shape[1]
    l2 = lengthscale**2
    if np.array_equal(cov_a, np.broadcast_to(cov_a[:1], cov_a.shape)) and np.array_equal(
        cov_b, np.broadcast_to(cov_a[:1], cov_b.shape)
    ):
        S = cov_a[0] + cov_b[0]
        M = l2 * np.eye(d) + S
        scale = 1.0 / np.sqrt(np.linalg.det(np.eye(d) + S / l2))
        diff = mu_a[:, None, :] - mu_b[None, :, :]
        q = np.einsum("ijp,pq,ijq->ij", diff, np.linalg.inv(M), diff)
        return scale * np.exp(-0.5 * q)
    out = np.empty((mu_a.shape[0], mu_b.shape[0]))
    for i in range(mu_a.shape[0]):
        S = cov_a[i][None] + cov_b
        M = l2 * np.eye(d)[None] + S
        scale = 1.0 / np.sqrt(np.linalg.det(np.eye(d)[None] + S / l2))
        diff = mu_a[i][None, :] - mu_b
        q = np.einsum("jp,jp->j", diff, np.linalg.solve(M, diff[..., None])[..., 0])
        out[i] = scale * np.exp(-0.5 * q)
    return out


def erbf_diag(cov, lengthscale) -> np.ndarray:
    """E[k(u, u')] for two independent draws from the same Gaussian."""
    cov = np.asarray(cov)
    d = cov.shape[-1]
    return 1.0 / np.sqrt(np.linalg.det(np.eye(d)[None] + 2.0 * cov / lengthscale**2))


def ugp_kernel(base: BaseKernelParams, U, V) -> float:
    """Sampled expected kernel (1/m^2) sum_ij k(u_i, v_j)."""
    U = getattr(U, "points", U)
    V = getattr(V, "points", V)
    return float(eval_base(base, U, V).mean())


def baseline_kernel(kind: str, params: dict, P, Q) -> float:
    """Covariance between two inputs under one of the baseline kernels.

    ``skl``/``erbf`` take Gaussian descriptors ``(mean, cov)``; ``ugp`` takes
    sample batches; ``vanilla_gp`` takes centers.
    """
    if kind == "vanilla_gp":
        return float(rbf_centers(P, Q, params["lengthscale"])[0, 0])
    if kind == "ugp":
        return ugp_kernel(params["base_kernel"], P, Q)
    (mp, cp), (mq, cq) = P, Q
    mp, mq = np.atleast_2d(mp), np.atleast_2d(mq)
    cp = np.asarray(cp, dtype=float).reshape(1, mp.shape[1], mp.shape[1])
    cq = np.asarray(cq, dtype=float).reshape(1, mq.shape[1], mq.shape[1])
    if kind == "skl":
        return float(skl_kernel(mp, cp, mq, cq, params["alpha"], params.get("lengthscale", 1.0))[0, 0])
    if kind == "erbf":
        return float(erbf_kernel(mp, cp, mq, cq, params["lengthscale"])[0, 0])
    raise ValueError(f"unknown baseline kind {kind!r}")


BASELINE_KINDS = ("vanilla_gp", "skl", "erbf", "ugp")


class BaselineGPRegressor(_DistributionalGP):
    """The comparison surrogates: plain GP, SKL, expected-RBF and uGP kernels.

    ``skl`` and ``erbf`` see every input law through its moment-matched
    Gaussian; ``ugp`` uses ``ugp_m`` draws per distribution and the
    rational-quadratic mixture as its point kernel.
    """

    def __init__(
        self,
        kind="vanilla_gp",
        input_dist=None,
        alpha=1.0,
        alpha_bounds=(1e-2, 1e3),
        length_scale=None,
        length_scale_bounds=(1e-3, 1e1),
        ugp_m=40,
        moment_samples=10_000,
        noise_var=1e-2,
        noise_var_bounds=(1e-6, 1.0),
        optimizer="multistart",
        n_restarts=2,
        normalize_y=False,
        domain=None,
        random_state=0,
    ):
        self.kind = kind
        self.input_dist = input_dist
        self.alpha = alpha
        self.alpha_bounds = alpha_bounds
        self.length_scale = length_scale
        self.length_scale_bounds = length_scale_bounds
        self.ugp_m = ugp_m
        self.moment_samples = moment_samples
        self.noise_var = noise_var
        self.noise_var_bounds = noise_var_bounds
        self.optimizer = optimizer
        self.n_restarts = n_restarts
        self.normalize_y = normalize_y
        self.domain = domain
        self.random_state = random_state

    def _dim(self):
        if self.input_dist is not None:
            return self.input_dist.dim
        return None

    def _moments(self, X):
        if self.input_dist is None:
            d = X.shape[1]
            return X.copy(), np.zeros((X.shape[0], d, d))
        return moment_match(self.input_dist, X, self.moment_samples, self.random_state)

    def _prepare_training(self, X):
        if self.kind not in BASELINE_KINDS:
            raise ValueError(f"unknown baseline kind {self.kind!r}; expected one of {BASELINE_KINDS}")
        self._diameter = _domain_diameter(self.domain, X)
        if self.kind in ("skl", "erbf"):
            self._mu, self._cov = self._moments(X)
            self._deg = _degenerate(self._cov)
        if self.kind == "ugp":
            seeds = [_training_seed(self.random_state, i) for i in range(X.shape[0])]
            self.train_batches_ = sample_many(self.input_dist, X, self.ugp_m, seeds)
            pooled = self.train_batches_
        else:
            pooled = X[:, None, :]
        if self.length_scale is not None:
            self._ls0 = float(self.length_scale)
        elif self.kind == "ugp":
            self._ls0 = median_heuristic(pooled, seed=self.random_state)
        else:
            self._ls0 = 0.2 * self._diameter

    def _hyper_spec(self, prior_only=False):
        if prior_only:
            ls0 = self.length_scale or 1.0
        else:
            ls0 = self._ls0
        fixed_ls = self.length_scale_bounds == "fixed" or prior_only
        diam = 1.0 if prior_only else self._diameter
        ls_b = None if fixed_ls else _log_bounds(self.length_scale_bounds, diam)
        a_b = None if self.alpha_bounds == "fixed" or prior_only else _log_bounds(self.alpha_bounds)
        spec = []
        if self.kind == "skl":
            deg = getattr(self, "_deg", np.array([True]))
            spec.append(("alpha", np.log(self.alpha), a_b if not deg.all() else None))
            spec.append(("ls", np.log(ls0), ls_b if deg.any() else None))
        else:
            spec.append(("ls", np.log(ls0), ls_b))
        nb = None if self.noise_var_bounds == "fixed" else _log_bounds(self.noise_var_bounds)
        spec.append(("noise_var", np.log(self.noise_var), nb))
        return spec

    def _ugp_base(self, params):
        return BaseKernelParams.rq(np.exp(params["ls"]))

    def _gram(self, params):
        ls = float(np.exp(params["ls"]))
        if self.kind == "vanilla_gp":
            return rbf_centers(self.X_train_, self.X_train_, ls)
        if self.kind == "skl":
            return skl_kernel(self._mu, self._cov, self._mu, self._cov, np.exp(params["alpha"]), ls)
        if self.kind == "erbf":
            K = erbf_kernel(self._mu, self._cov, self._mu, self._cov, ls)
            np.fill_diagonal(K, erbf_diag(self._cov, ls))
            return K
        base = self._ugp_base(params)
        B = self.train_batches_

        def compute():
            return block_sums(base, B) / B.shape[1] ** 2

        return self._cached(("ugp", ls), compute)

    def _query_batches(self, Xq, query_seed):
        seeds = self._query_seeds(Xq.shape[0], query_seed)
        return sample_many(self.input_dist, Xq, self.ugp_m, seeds)

    def _cross(self, params, Xq, query_seed):
        ls = float(np.exp(params["ls"]))
        if self.kind == "vanilla_gp":
            return rbf_centers(Xq, self.X_train_, ls), np.ones(Xq.shape[0])
        if self.kind in ("skl", "erbf"):
            mu, cov = self._moments(Xq)
            if self.kind == "skl":
                Kq = skl_kernel(mu, cov, self._mu, self._cov, np.exp(params["alpha"]), ls)
                return Kq, np.ones(Xq.shape[0])
            return erbf_kernel(mu, cov, self._mu, self._cov, ls), erbf_diag(cov, ls)
        base = self._ugp_base(params)
        Bq = self._query_batches(Xq, query_seed)
        m = self.ugp_m
        Kq = block_sums(base, Bq, self.train_batches_) / m**2
        diag = batched_row_means(base, Bq, Bq).mean(axis=1)
        return Kq, diag

    def _prior_diag(self, params, Xq, query_seed):
        ls = float(np.exp(params["ls"]))
        if self.kind == "erbf":
            return erbf_diag(self._moments(Xq)[1], ls)
        if self.kind == "ugp":
            base = self._ugp_base(params)
            return batched_row_means(base, *(2 * [self._query_batches(Xq, query_seed)])).mean(axis=1)
        return np.ones(Xq.shape[0])

    def _store(self, params):
        super()._store(params)
        self.length_scale_ = float(np.exp(params["ls"]))
        if "alpha" in params:
            self.alpha_ = float(np.exp(params["alpha"]))

    def _fitted_values(self):
        vals = {"length_scale": self.length_scale_, "noise_var": self.noise_var_}
        if hasattr(self, "alpha_"):
            vals["alpha"] = self.alpha_
        return vals

    def with_fitted_hyperparameters(self):
        """Unfitted clone with every hyperparameter frozen at its fitted value."""
        check_is_fitted(self, "L_")
        return clone(self).set_params(optimizer=None, **self._fitted_values())

    def warm_start(self, refit_lengthscale: bool):
        """Unfitted clone initialized at the fitted values, lengthscale optionally frozen."""
        check_is_fitted(self, "L_")
        est = clone(self).set_params(**self._fitted_values())
        if not refit_lengthscale:
            est.set_params(length_scale_bounds="fixed")
        return est

    def hyperparameters(self) -> dict:
        check_is_fitted(self, "L_")
        out = {"kind": self.kind, "length_scale": self.length_scale_, "noise_var": self.noise_var_}
        if hasattr(self, "alpha_"):
            out["alpha"] = self.alpha_
        return out

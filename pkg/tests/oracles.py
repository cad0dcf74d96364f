"""Independent reference computations used by the tests.

These deliberately avoid the package's kernel and estimator code paths.
"""
import numpy as np

RQ_ALPHAS = (0.2, 0.5, 1.0, 2.0, 5.0)


def rq_elementwise(x, y, ls):
    """RQ-mixture k(x_i, y_i) for paired rows."""
    d2 = np.sum((np.asarray(x) - np.asarray(y)) ** 2, axis=-1)
    return sum((1.0 + d2 / (2.0 * a * ls**2)) ** (-a) for a in RQ_ALPHAS)


def rbf_elementwise(x, y, ls):
    d2 = np.sum((np.asarray(x) - np.asarray(y)) ** 2, axis=-1)
    return np.exp(-0.5 * d2 / ls**2)


def linear_time_mmd2(draw_p, draw_q, kfun, n, seed=0):
    """Linear-time MMD^2 estimate from n independent quadruples, with its standard error.

    ``draw_p(rng, n)`` / ``draw_q(rng, n)`` return (n, d) samples.
    """
    rng = np.random.default_rng(seed)
    x, x2 = draw_p(rng, n), draw_p(rng, n)
    y, y2 = draw_q(rng, n), draw_q(rng, n)
    h = kfun(x, x2) + kfun(y, y2) - kfun(x, y2) - kfun(x2, y)
    return float(h.mean()), float(h.std(ddof=1) / np.sqrt(n)), float(h.std(ddof=1))


def beta_draws(alpha, beta, scale, shift):
    return lambda rng, n: shift + scale * rng.beta(alpha, beta, (n, 1))


def naive_gp(K, y, Kq, kqq, noise):
    """Textbook GP posterior through an explicit inverse."""
    A = np.linalg.inv(K + noise * np.eye(len(y)))
    return Kq @ A @ y, kqq - np.einsum("ij,jk,ik->i", Kq, A, Kq)

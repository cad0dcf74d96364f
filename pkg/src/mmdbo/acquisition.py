"""UCB acquisition over distributional posteriors, its maximizer and the outcome rule."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import qmc

from .udist import rng_for
from .validation import check_domain


@dataclass(frozen=True)
class AcquisitionConfig:
    beta: float = 2.0
    restarts: int = 3
    prescan_grid: int = 64
    max_local_steps: int = 30
    max_prescan: int = 4096

    def __post_init__(self):
        if not self.beta >= 0:
            raise ValueError(f"beta must be >= 0, got {self.beta}")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.prescan_grid < 2:
            raise ValueError("prescan_grid must be >= 2")
        if self.max_local_steps < 1:
            raise ValueError("max_local_steps must be >= 1")

    def to_json(self) -> dict:
        return dict(self.__dict__)

    @classmethod
    def from_json(cls, obj) -> "AcquisitionConfig":
        unknown = set(obj) - set(cls.__dataclass_fields__)
        if unknown:
            raise ValueError(f"unknown keys in acquisition config: {sorted(unknown)}")
        return cls(**obj)


def ucb(post, beta: float) -> np.ndarray:
    """mean + beta * sqrt(variance)."""
    var = np.asarray(post.variance, dtype=float)
    if np.any(var < 0):
        raise ValueError(f"negative posterior variance {var.min():.3e}")
    return np.asarray(post.mean, dtype=float) + beta * np.sqrt(var)


def prescan_points(domain, cfg: AcquisitionConfig, seed: int) -> np.ndarray:
    """Evenly spaced grid in 1D, scrambled Sobol points otherwise."""
    b = check_domain(domain)
    d = b.shape[0]
    n = int(min(cfg.prescan_grid**d, cfg.max_prescan))
    if d == 1:
        return np.linspace(b[0, 0], b[0, 1], n)[:, None]
    sobol = qmc.Sobol(d, scramble=True, seed=rng_for(seed, "prescan"))
    u = sobol.random_base2(int(np.ceil(np.log2(n))))[:n]
    return qmc.scale(u, b[:, 0], b[:, 1]) if np.any(b[:, 1] > b[:, 0]) else np.repeat(b[:, :1].T, n, 0)


def _coordinate_search(f, x0, v0, lo, hi, max_steps):
    """Bounded compass search; each sweep evaluates all 2d moves in one call."""
    d = x0.size
    width = hi - lo
    step = 0.1 * width
    x, v = x0.copy(), v0
    for _ in range(max_steps):
        if not np.any(step > 1e-6 * np.maximum(width, 1e-300)):
            break
        moves = np.concatenate([np.diag(step), -np.diag(step)])
        cand = np.clip(x[None, :] + moves, lo, hi)
        vals = f(cand)
        k = int(np.argmax(vals))
        if vals[k] > v:
            x, v = cand[k], float(vals[k])
        else:
            step = step / 2
    return x, v


def maximize_acquisition(model, domain, cfg: AcquisitionConfig = AcquisitionConfig(), seed: int = 0):
    """Maximize UCB over the box; returns (x, acquisition value).

    All evaluations in one call share a single query-batch seed, so candidate
    scores differ only through their centers.
    """
    b = check_domain(domain)
    lo, hi = b[:, 0], b[:, 1]
    query_seed = int(rng_for(seed, "acq_query").integers(2**31))

    def acq(X):
        X = np.atleast_2d(X)
        try:
            vals = ucb(model.posterior(X, query_seed=query_seed), cfg.beta)
        except Exception as exc:
            raise RuntimeError(f"acquisition evaluation failed near x={X[0].tolist()}: {exc}") from exc
        return vals

    if np.all(lo == hi):
        return lo.copy(), float(acq(lo[None, :])[0])
    P = prescan_points(b, cfg, seed)
    vals = acq(P)
    order = np.argsort(-vals, kind="stable")
    best_x, best_v = P[order[0]].copy(), float(vals[order[0]])
    for k in order[: cfg.restarts]:
        x, v = _coordinate_search(acq, P[k], float(vals[k]), lo, hi, cfg.max_local_steps)
        if v > best_v:
            best_x, best_v = x, v
    return np.clip(best_x, lo, hi), best_v


def outcome(model, observed_centers, return_index=False):
    """Observed center with the largest posterior mean (earliest index on ties).

    When the centers are exactly the model's training inputs, the in-sample
    mean is used, so each center is scored on the batch the model was fit on.
    """
    X = np.asarray(observed_centers, dtype=float)
    if X.size == 0:
        raise ValueError("outcome needs at least one observation")
    X = X.reshape(X.shape[0], -1)
    train = getattr(model, "X_train_", None)
    if hasattr(model, "training_mean") and train is not None and np.array_equal(X, train):
        mean = model.training_mean()
    else:
        mean = model.posterior(X).mean
    idx = int(np.argmax(mean))
    return (X[idx].copy(), idx) if return_index else X[idx].copy()

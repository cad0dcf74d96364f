"""Squared MMD between sample batches.

Two estimators are provided:

* ``empirical`` -- the unbiased U-statistic over all m^2 kernel entries.
* ``nystrom`` -- the V-statistic with each batch's kernel block replaced by
  its Nystrom approximation ``K_mh K_h^+ K_mh^T`` built on h landmarks.

Both reduce a batch to a small summary (its self-similarity term, and for
Nystrom the landmarks plus the weight vector ``K_h^+ K_hm 1 / m``), so a
pairwise MMD^2 costs one cross term: O(m^2) kernel evaluations for the
empirical estimator, O(h^2) for Nystrom once the summaries exist.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from functools import lru_cache

from .kernel import (BaseKernelParams, batched_blocks, batched_row_means, eval_base, pair_sums,
                     weighted_pair_sums)
from .udist import SampleBatch, rng_for

@dataclass(frozen=True)
class EstimatorConfig:
    kind: str = "nystrom"
    m: int = 100
    h: int | None = 10
    pinv_tolerance: float = 1e-10
    # sampling landmarks without replacement makes h == m reproduce the full block
    landmark_replace: bool = False

    def __post_init__(self):
        if self.kind not in ("empirical", "nystrom"):
            raise ValueError(f"unknown estimator kind {self.kind!r}")
        if int(self.m) != self.m or self.m < 2:
            raise ValueError(f"m must be an integer >= 2, got {self.m!r}")
        if self.kind == "nystrom":
            if self.h is None or int(self.h) != self.h or not 2 <= self.h <= self.m:
                raise ValueError(f"nystrom needs 2 <= h <= m, got h={self.h!r}, m={self.m}")
        if not 0.0 < self.pinv_tolerance < 1.0:
            raise ValueError("pinv_tolerance must lie in (0, 1)")

    def to_json(self) -> dict:
        return {
            "kind": self.kind,
            "m": int(self.m),
            "h": None if self.h is None else int(self.h),
            "pinv_tolerance": self.pinv_tolerance,
            "landmark_replace": self.landmark_replace,
        }

    @classmethod
    def from_json(cls, obj) -> "EstimatorConfig":
        unknown = set(obj) - {"kind", "m", "h", "pinv_tolerance", "landmark_replace"}
        if unknown:
            raise ValueError(f"unknown keys in estimator config: {sorted(unknown)}")
        return cls(**obj)


def _as_points(batch) -> np.ndarray:
    if isinstance(batch, SampleBatch):
        return batch.points
    pts = np.atleast_2d(np.asarray(batch, dtype=float))
    if pts.shape[0] < 2:
        raise ValueError("MMD estimation needs at least 2 draws per batch")
    return pts


def _stack(batches) -> np.ndarray:
    arrays = [_as_points(b) for b in batches]
    shapes = {a.shape for a in arrays}
    if len(shapes) != 1:
        raise ValueError(f"all batches must share (m, d); got {sorted(shapes)}")
    return np.stack(arrays)


# -- batch summaries --------------------------------------------------------


@dataclass
class EmpiricalSummary:
    points: np.ndarray  # (n, m, d)
    self_terms: np.ndarray  # (n,) U-statistic self similarity

    @property
    def m(self) -> int:
        return self.points.shape[1]

    def __len__(self):
        return self.points.shape[0]


@dataclass
class NystromSummary:
    landmarks: np.ndarray  # (n, h, d)
    weights: np.ndarray  # (n, h)
    self_terms: np.ndarray  # (n,) w^T K_h w

    def __len__(self):
        return self.landmarks.shape[0]


def summarize_empirical(kernel: BaseKernelParams, points) -> EmpiricalSummary:
    points = np.asarray(points, dtype=float)
    n, m, _ = points.shape
    if m < 2:
        raise ValueError("the unbiased estimator needs m >= 2")
    diag = eval_base(kernel, points[0, :1], points[0, :1])[0, 0]
    full = batched_row_means(kernel, points, points).sum(axis=1) * m
    return EmpiricalSummary(points, (full - m * diag) / (m * (m - 1)))


@lru_cache(maxsize=65536)
def _landmark_index(seed: int, tag: int, m: int, h: int, replace: bool) -> np.ndarray:
    idx = rng_for(seed, "landmarks", tag).choice(m, size=h, replace=replace)
    idx.setflags(write=False)
    return idx


def _pinv_psd_stack(K: np.ndarray, tol: float) -> np.ndarray:
    w, V = np.linalg.eigh(K)
    top = w.max(axis=-1)
    bad = np.flatnonzero(~(top > 0))
    if bad.size:
        raise np.linalg.LinAlgError(
            f"batch {int(bad[0])}: landmark block is numerically zero; cannot pseudo-invert")
    keep = w > tol * top[:, None]
    inv = np.where(keep, 1.0 / np.where(keep, w, 1.0), 0.0)
    return np.einsum("nik,nk,njk->nij", V, inv, V)


def summarize_nystrom(
    kernel: BaseKernelParams,
    points,
    h: int,
    tags,
    seed: int = 0,
    pinv_tolerance: float = 1e-10,
    replace: bool = False,
) -> NystromSummary:
    """Landmarks and mean-embedding weights for every batch.

    Batch ``i`` draws its landmarks from ``rng_for(seed, "landmarks", tags[i])``.
    """
    points = np.asarray(points, dtype=float)
    n, m, d = points.shape
    if not 2 <= h <= m:
        raise ValueError(f"need 2 <= h <= m, got h={h}, m={m}")
    idx = np.stack([_landmark_index(int(seed), int(t), m, int(h), bool(replace)) for t in tags])
    L = np.take_along_axis(points, idx[:, :, None], axis=1)
    K_h = batched_blocks(kernel, L, L)
    mean_col = batched_row_means(kernel, L, points)
    w = np.einsum("nij,nj->ni", _pinv_psd_stack(K_h, pinv_tolerance), mean_col)
    self_terms = np.einsum("ni,nij,nj->n", w, K_h, w)
    return NystromSummary(L, w, self_terms)


def summarize(kernel, points, cfg: EstimatorConfig, tags, seed: int = 0):
    if cfg.kind == "empirical":
        return summarize_empirical(kernel, points)
    return summarize_nystrom(
        kernel, points, cfg.h, tags, seed, cfg.pinv_tolerance, cfg.landmark_replace
    )


# -- cross terms ------------------------------------------------------------


def block_sums(kernel, A, B=None) -> np.ndarray:
    """Sum of every kernel block: out[i, j] = sum_{p,q} k(A[i, p], B[j, q]).

    Leaving ``B`` out computes the symmetric A-vs-A matrix, each unordered
    pair once. Blocks are accumulated in place, so no m x m matrix is stored.
    """
    return pair_sums(kernel, A, B)


def weighted_cross(kernel, SA: NystromSummary, SB: NystromSummary | None = None) -> np.ndarray:
    """out[i, j] = w_i^T K(L_i, L_j) w_j (symmetric when SB is omitted)."""
    if SB is None:
        return weighted_pair_sums(kernel, SA.landmarks, SA.weights)
    return weighted_pair_sums(kernel, SA.landmarks, SA.weights, SB.landmarks, SB.weights)


def mmd2_between(kernel, SA, SB=None) -> np.ndarray:
    """MMD^2 matrix between two sets of summaries of the same estimator kind.

    With ``SB`` omitted the matrix of ``SA`` against itself is returned,
    exactly symmetric.

    Empirical values are returned unclamped; Nystrom values are clamped at 0.
    """
    other = SA if SB is None else SB
    if isinstance(SA, EmpiricalSummary):
        if SA.m != other.m:
            raise ValueError(f"batch size mismatch: {SA.m} vs {other.m}")
        cross = block_sums(kernel, SA.points, None if SB is None else SB.points) / SA.m**2
        return SA.self_terms[:, None] + other.self_terms[None, :] - 2.0 * cross
    cross = weighted_cross(kernel, SA, SB)
    out = SA.self_terms[:, None] + other.self_terms[None, :] - 2.0 * cross
    return np.maximum(out, 0.0)


# -- public estimators ------------------------------------------------------


def mmd2_empirical(kernel: BaseKernelParams, U, V) -> float:
    """Unbiased U-statistic estimate of MMD^2 (may be slightly negative)."""
    P = _stack([U, V])
    S = summarize_empirical(kernel, P)
    return float(mmd2_between(kernel, _slice(S, 0), _slice(S, 1))[0, 0])


def mmd2_biased(kernel: BaseKernelParams, U, V) -> float:
    """Biased V-statistic estimate of MMD^2 (diagonal terms included)."""
    U, V = _as_points(U), _as_points(V)
    return float(
        eval_base(kernel, U, U).mean() + eval_base(kernel, V, V).mean()
        - 2.0 * eval_base(kernel, U, V).mean()
    )


def mmd2_nystrom(
    kernel: BaseKernelParams,
    U,
    V,
    h: int,
    pinv_tolerance: float = 1e-10,
    seed: int = 0,
    replace: bool = False,
) -> float:
    """Nystrom estimate of the V-statistic MMD^2, clamped at 0.

    U and V take landmark tags 0 and 1, matching entry (0, 1) of
    ``mmd_gram([U, V], cfg, seed)``.
    """
    P = _stack([U, V])
    if not 2 <= h <= P.shape[1]:
        raise ValueError(f"need 2 <= h <= m, got h={h}, m={P.shape[1]}")
    S = summarize_nystrom(kernel, P, h, [0, 1], seed, pinv_tolerance, replace)
    return float(mmd2_between(kernel, _slice(S, 0), _slice(S, 1))[0, 0])


def _slice(S, i):
    if isinstance(S, EmpiricalSummary):
        return EmpiricalSummary(S.points[i : i + 1], S.self_terms[i : i + 1])
    return NystromSummary(S.landmarks[i : i + 1], S.weights[i : i + 1], S.self_terms[i : i + 1])


def mmd_gram(kernel: BaseKernelParams, batches, cfg: EstimatorConfig, seed: int = 0) -> np.ndarray:
    """Symmetric matrix of pairwise MMD^2 values with an exactly zero diagonal."""
    P = _stack(batches)
    S = summarize(kernel, P, cfg, range(P.shape[0]), seed)
    D = mmd2_between(kernel, S)
    np.fill_diagonal(D, 0.0)
    return D

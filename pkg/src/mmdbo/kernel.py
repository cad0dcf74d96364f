"""Point kernels on R^d used inside the MMD estimators."""
from __future__ import annotations

from dataclasses import dataclass, field, replace

import numba
import numpy as np

RQ_ALPHAS = (0.2, 0.5, 1.0, 2.0, 5.0)


@dataclass(frozen=True)
class BaseKernelParams:
    """Base kernel: ``rq_mixture`` (five rational-quadratic terms) or ``rbf``.

    ``lengthscales`` holds one entry per mixture component for ``rq_mixture``
    and a single entry for ``rbf``.
    """

    kind: str = "rq_mixture"
    lengthscales: tuple = (1.0,) * 5
    alphas: tuple = field(default=RQ_ALPHAS)

    def __post_init__(self):
        ls = tuple(float(v) for v in np.atleast_1d(self.lengthscales))
        object.__setattr__(self, "lengthscales", ls)
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        if self.kind == "rq_mixture":
            if self.alphas != RQ_ALPHAS:
                raise ValueError(f"rq_mixture uses the fixed exponents {RQ_ALPHAS}")
            if len(ls) == 1:
                object.__setattr__(self, "lengthscales", ls * 5)
            elif len(ls) != 5:
                raise ValueError("rq_mixture needs 1 or 5 lengthscales")
        elif self.kind == "rbf":
            if len(ls) != 1:
                raise ValueError("rbf takes a single lengthscale")
        else:
            raise ValueError(f"unknown base kernel kind {self.kind!r}")
        if not all(np.isfinite(v) and v > 0 for v in self.lengthscales):
            raise ValueError(f"lengthscales must be finite and > 0, got {self.lengthscales}")

    @classmethod
    def rq(cls, lengthscale=1.0) -> "BaseKernelParams":
        return cls("rq_mixture", lengthscale)

    @classmethod
    def rbf(cls, lengthscale=1.0) -> "BaseKernelParams":
        return cls("rbf", (lengthscale,), ())

    @property
    def diag_value(self) -> float:
        """k(u, u); constant because both kernels are stationary."""
        return 5.0 if self.kind == "rq_mixture" else 1.0

    def with_lengthscales(self, lengthscales) -> "BaseKernelParams":
        return replace(self, lengthscales=tuple(np.atleast_1d(lengthscales)))

    def to_json(self) -> dict:
        return {"kind": self.kind, "lengthscales": list(self.lengthscales)}

    @classmethod
    def from_json(cls, obj) -> "BaseKernelParams":
        unknown = set(obj) - {"kind", "lengthscales"}
        if unknown:
            raise ValueError(f"unknown keys in base_kernel: {sorted(unknown)}")
        kind = obj.get("kind", "rq_mixture")
        ls = obj.get("lengthscales", 1.0)
        return cls.rbf(np.atleast_1d(ls)[0]) if kind == "rbf" else cls.rq(ls)


@numba.njit(cache=True, fastmath=False)
def _rq_block(U, V, coef, out):
    # coef[a] = 1 / (2 * alpha_a * l_a^2) for alphas (0.2, 0.5, 1, 2, 5)
    n, p, d = U.shape[0], V.shape[0], U.shape[1]
    for i in range(n):
        for j in range(p):
            d2 = 0.0
            for k in range(d):
                t = U[i, k] - V[j, k]
                d2 += t * t
            r1 = 1.0 / (1.0 + d2 * coef[2])
            r2 = 1.0 / (1.0 + d2 * coef[3])
            r5 = 1.0 / (1.0 + d2 * coef[4])
            r5sq = r5 * r5
            out[i, j] = (
                np.exp(-0.2 * np.log1p(d2 * coef[0]))
                + 1.0 / np.sqrt(1.0 + d2 * coef[1])
                + r1
                + r2 * r2
                + r5sq * r5sq * r5
            )


@numba.njit(cache=True, fastmath=False)
def _rbf_block(U, V, coef, out):
    n, p, d = U.shape[0], V.shape[0], U.shape[1]
    for i in range(n):
        for j in range(p):
            d2 = 0.0
            for k in range(d):
                t = U[i, k] - V[j, k]
                d2 += t * t
            out[i, j] = np.exp(-d2 * coef[0])


@numba.njit(cache=True, inline="always")
def _kval(d2, coef, kind):
    if kind == 1:
        return np.exp(-d2 * coef[0])
    r1 = 1.0 / (1.0 + d2 * coef[2])
    r2 = 1.0 / (1.0 + d2 * coef[3])
    r5 = 1.0 / (1.0 + d2 * coef[4])
    r5sq = r5 * r5
    return np.exp(-0.2 * np.log1p(d2 * coef[0])) + 1.0 / np.sqrt(1.0 + d2 * coef[1]) + r1 + r2 * r2 + r5sq * r5sq * r5


@numba.njit(cache=True)
def _pair_sums(A, B, coef, kind, symmetric, out):
    # out[i, j] = sum_{p, q} k(A[i, p], B[j, q]); upper triangle only when symmetric
    na, ma, d = A.shape
    nb, mb = B.shape[0], B.shape[1]
    for i in range(na):
        j0 = i if symmetric else 0
        for j in range(j0, nb):
            acc = 0.0
            for p in range(ma):
                for q in range(mb):
                    d2 = 0.0
                    for k in range(d):
                        t = A[i, p, k] - B[j, q, k]
                        d2 += t * t
                    acc += _kval(d2, coef, kind)
            out[i, j] = acc
            if symmetric:
                out[j, i] = acc


@numba.njit(cache=True)
def _weighted_pair_sums(A, wA, B, wB, coef, kind, symmetric, out):
    # out[i, j] = sum_{p, q} wA[i, p] k(A[i, p], B[j, q]) wB[j, q]
    na, ha, d = A.shape
    nb, hb = B.shape[0], B.shape[1]
    for i in range(na):
        j0 = i if symmetric else 0
        for j in range(j0, nb):
            acc = 0.0
            for p in range(ha):
                inner = 0.0
                for q in range(hb):
                    d2 = 0.0
                    for k in range(d):
                        t = A[i, p, k] - B[j, q, k]
                        d2 += t * t
                    inner += _kval(d2, coef, kind) * wB[j, q]
                acc += wA[i, p] * inner
            out[i, j] = acc
            if symmetric:
                out[j, i] = acc


@numba.njit(cache=True)
def _batched_blocks(A, B, coef, kind, out):
    # out[i] = K(A[i], B[i])
    n, pa, d = A.shape
    pb = B.shape[1]
    for i in range(n):
        for p in range(pa):
            for q in range(pb):
                d2 = 0.0
                for k in range(d):
                    t = A[i, p, k] - B[i, q, k]
                    d2 += t * t
                out[i, p, q] = _kval(d2, coef, kind)


@numba.njit(cache=True)
def _batched_row_means(A, B, coef, kind, out):
    # out[i, p] = mean_q k(A[i, p], B[i, q])
    n, pa, d = A.shape
    pb = B.shape[1]
    for i in range(n):
        for p in range(pa):
            acc = 0.0
            for q in range(pb):
                d2 = 0.0
                for k in range(d):
                    t = A[i, p, k] - B[i, q, k]
                    d2 += t * t
                acc += _kval(d2, coef, kind)
            out[i, p] = acc / pb


def _coefficients(params: BaseKernelParams) -> np.ndarray:
    ls = np.asarray(params.lengthscales)
    if params.kind == "rq_mixture":
        return 1.0 / (2.0 * np.asarray(RQ_ALPHAS) * ls**2)
    return np.array([1.0 / (2.0 * ls[0] ** 2)])


def eval_base(params: BaseKernelParams, U, V) -> np.ndarray:
    """Kernel matrix between the rows of ``U`` (m, d) and ``V`` (p, d)."""
    U = np.ascontiguousarray(np.atleast_2d(np.asarray(U, dtype=float)))
    V = np.ascontiguousarray(np.atleast_2d(np.asarray(V, dtype=float)))
    if U.shape[1] != V.shape[1]:
        raise ValueError(f"dimension mismatch: {U.shape[1]} vs {V.shape[1]}")
    if not (np.all(np.isfinite(U)) and np.all(np.isfinite(V))):
        raise ValueError("kernel inputs must be finite")
    out = np.empty((U.shape[0], V.shape[0]))
    block = _rq_block if params.kind == "rq_mixture" else _rbf_block
    block(U, V, _coefficients(params), out)
    return out


def median_heuristic(points, max_points: int = 1000, seed: int = 0) -> float:
    """Median pairwise Euclidean distance of a pooled point set (1.0 if degenerate)."""
    X = np.asarray(points, dtype=float).reshape(-1, np.shape(points)[-1])
    if X.shape[0] > max_points:
        idx = np.random.default_rng(seed).choice(X.shape[0], max_points, replace=False)
        X = X[idx]
    diff = X[:, None, :] - X[None, :, :]
    dist = np.sqrt((diff**2).sum(-1))[np.triu_indices(X.shape[0], 1)]
    dist = dist[dist > 0]
    return float(np.median(dist)) if dist.size else 1.0


def _kind_code(params: BaseKernelParams) -> int:
    return 0 if params.kind == "rq_mixture" else 1


def _stack3(A) -> np.ndarray:
    A = np.ascontiguousarray(np.asarray(A, dtype=float))
    if A.ndim != 3:
        raise ValueError(f"expected an array of shape (n, m, d), got {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("kernel inputs must be finite")
    return A


def pair_sums(params: BaseKernelParams, A, B=None) -> np.ndarray:
    """out[i, j] = sum_{p, q} k(A[i, p], B[j, q]) for stacks of point sets.

    With ``B`` omitted the result is computed once per unordered pair and is
    exactly symmetric.
    """
    symmetric = B is None
    A = _stack3(A)
    B = A if symmetric else _stack3(B)
    if A.shape[2] != B.shape[2]:
        raise ValueError(f"dimension mismatch: {A.shape[2]} vs {B.shape[2]}")
    out = np.empty((A.shape[0], B.shape[0]))
    _pair_sums(A, B, _coefficients(params), _kind_code(params), symmetric, out)
    return out


def weighted_pair_sums(params: BaseKernelParams, A, wA, B=None, wB=None) -> np.ndarray:
    """out[i, j] = wA[i]^T K(A[i], B[j]) wB[j]."""
    symmetric = B is None
    A = _stack3(A)
    wA = np.ascontiguousarray(wA, dtype=float)
    B, wB = (A, wA) if symmetric else (_stack3(B), np.ascontiguousarray(wB, dtype=float))
    out = np.empty((A.shape[0], B.shape[0]))
    _weighted_pair_sums(A, wA, B, wB, _coefficients(params), _kind_code(params), symmetric, out)
    return out


def batched_blocks(params: BaseKernelParams, A, B) -> np.ndarray:
    """Stack of kernel matrices K(A[i], B[i]) -> (n, p, q)."""
    A, B = _stack3(A), _stack3(B)
    out = np.empty((A.shape[0], A.shape[1], B.shape[1]))
    _batched_blocks(A, B, _coefficients(params), _kind_code(params), out)
    return out


def batched_row_means(params: BaseKernelParams, A, B) -> np.ndarray:
    """out[i, p] = mean_q k(A[i, p], B[i, q]) without forming the blocks."""
    A, B = _stack3(A), _stack3(B)
    out = np.empty((A.shape[0], A.shape[1]))
    _batched_row_means(A, B, _coefficients(params), _kind_code(params), out)
    return out

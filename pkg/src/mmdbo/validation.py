"""Input validation helpers shared by the estimators and the harness."""
from __future__ import annotations

import numpy as np
from sklearn.utils.validation import check_array


def check_centers(X, dim=None) -> np.ndarray:
    """Design points as a finite float array of shape (n, d)."""
    X = check_array(X, dtype=float, ensure_2d=False, ensure_min_samples=1)
    if X.ndim == 1:
        X = X.reshape(-1, 1) if dim in (None, 1) else X.reshape(1, -1)
    if dim is not None and X.shape[1] != dim:
        raise ValueError(f"expected centers with {dim} columns, got shape {X.shape}")
    return X


def check_targets(y, n) -> np.ndarray:
    y = check_array(y, dtype=float, ensure_2d=False).ravel()
    if y.shape[0] != n:
        raise ValueError(f"got {y.shape[0]} targets for {n} centers")
    return y


def check_domain(domain) -> np.ndarray:
    """Box bounds as a (d, 2) array with lower <= upper."""
    b = np.asarray(domain, dtype=float)
    if b.ndim == 1 and b.size == 2:
        b = b.reshape(1, 2)
    if b.ndim != 2 or b.shape[1] != 2 or b.shape[0] < 1:
        raise ValueError(f"domain must have shape (d, 2), got {b.shape}")
    if not np.all(np.isfinite(b)) or np.any(b[:, 0] > b[:, 1]):
        raise ValueError(f"invalid box bounds {b.tolist()}")
    return b


def check_in_domain(x, domain, atol=1e-12) -> np.ndarray:
    x = np.atleast_1d(np.asarray(x, dtype=float))
    b = check_domain(domain)
    if x.shape != (b.shape[0],):
        raise ValueError(f"point of shape {x.shape} does not match a {b.shape[0]}-d domain")
    if np.any(x < b[:, 0] - atol) or np.any(x > b[:, 1] + atol):
        raise ValueError(f"point {x.tolist()} lies outside the domain {b.tolist()}")
    return x

"""Input-uncertainty laws and seeded samplers.

Every law is an additive perturbation of a design point ``x``: a draw is
``x' = x + scale(x) * z`` where ``z`` comes from a unit law.  A seed fixes a
block of base draws (uniforms, or unit beta variates for the beta families)
that does not depend on the center, so reusing one seed for many centers
(common random numbers) gives draws that move smoothly with the center.
"""
from __future__ import annotations

import json
import zlib
from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy import stats

FAMILIES = (
    "dirac",
    "gaussian_iso",
    "beta_shift",
    "beta_varying",
    "chi2_step",
    "circular_concat",
    "gmm",
)

_REQUIRED = {
    "dirac": (),
    "gaussian_iso": ("sigma",),
    "beta_shift": ("alpha", "beta", "scale"),
    "beta_varying": ("alpha", "beta", "scale"),
    "chi2_step": ("g_low", "g_high", "threshold", "scale"),
    "circular_concat": ("radius", "tail_var"),
    "gmm": ("means", "covariances", "weights"),
}

# keeps inverse CDFs finite at the ends of [0, 1)
_U_EPS = 2.0**-53


def _key(part) -> int:
    if isinstance(part, str):
        return zlib.crc32(part.encode())
    return int(part) & 0xFFFFFFFF


def rng_for(*keys) -> np.random.Generator:
    """Counter-based generator keyed by a tuple of ints/strings."""
    ss = np.random.SeedSequence([_key(k) for k in keys])
    return np.random.Generator(np.random.Philox(ss))


@dataclass(frozen=True, eq=False)
class InputDistribution:
    """Declarative descriptor of the perturbation law attached to a design point."""

    family: str
    params: dict = field(default_factory=dict)
    dim: int = 1

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"unknown input family {self.family!r}; expected one of {FAMILIES}")
        if int(self.dim) != self.dim or self.dim < 1:
            raise ValueError(f"dim must be a positive integer, got {self.dim!r}")
        missing = [p for p in _REQUIRED[self.family] if p not in self.params]
        if missing:
            raise ValueError(f"{self.family} is missing parameters {missing}")
        extra = set(self.params) - set(_REQUIRED[self.family])
        if extra:
            raise ValueError(f"{self.family} got unexpected parameters {sorted(extra)}")
        getattr(self, f"_check_{self.family}")()

    def _check_dirac(self):
        pass

    def _positive(self, *names):
        for name in names:
            value = float(self.params[name])
            if not np.isfinite(value) or value <= 0:
                raise ValueError(f"{self.family}.{name} must be > 0, got {value}")

    def _check_gaussian_iso(self):
        self._positive("sigma")

    def _check_beta_shift(self):
        self._positive("alpha", "beta", "scale")

    _check_beta_varying = _check_beta_shift

    def _check_chi2_step(self):
        self._positive("g_low", "g_high", "scale")

    def _check_circular_concat(self):
        self._positive("radius")
        if self.dim < 2:
            raise ValueError("circular_concat needs dim >= 2")
        if self.dim > 2:
            self._positive("tail_var")

    def _check_gmm(self):
        means = np.asarray(self.params["means"], dtype=float)
        weights = np.asarray(self.params["weights"], dtype=float)
        covs = np.asarray(self.params["covariances"], dtype=float)
        if means.ndim != 2 or means.shape[1] != self.dim:
            raise ValueError(f"gmm means must be (K, {self.dim}), got {means.shape}")
        k = means.shape[0]
        if weights.shape != (k,):
            raise ValueError(f"gmm weights must have shape ({k},), got {weights.shape}")
        if np.any(weights < 0) or abs(weights.sum() - 1.0) > 1e-12:
            raise ValueError("gmm weights must be nonnegative and sum to 1")
        if covs.shape == (self.dim, self.dim):
            covs = np.broadcast_to(covs, (k, self.dim, self.dim))
        if covs.shape != (k, self.dim, self.dim):
            raise ValueError(f"gmm covariances must be ({k}, {self.dim}, {self.dim}) or shared")
        for c in covs:
            if not np.allclose(c, c.T) or np.linalg.eigvalsh(c).min() <= 0:
                raise ValueError("gmm covariances must be symmetric positive definite")

    # -- serialization -------------------------------------------------

    def to_json(self) -> dict:
        params = {k: np.asarray(v).tolist() for k, v in self.params.items()}
        return {"family": self.family, "params": params, "dim": int(self.dim)}

    @classmethod
    def from_json(cls, obj) -> "InputDistribution":
        if isinstance(obj, str):
            obj = json.loads(obj)
        unknown = set(obj) - {"family", "params", "dim"}
        if unknown:
            raise ValueError(f"unknown keys in distribution descriptor: {sorted(unknown)}")
        return cls(obj["family"], dict(obj.get("params", {})), int(obj.get("dim", 1)))

    def key(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True)

    def __eq__(self, other):
        return isinstance(other, InputDistribution) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    def __repr__(self):
        return f"InputDistribution({self.family!r}, {self.params!r}, dim={self.dim})"

    @property
    def shift_invariant(self) -> bool:
        """True when the perturbation law does not depend on the center."""
        return self.family not in ("beta_varying", "chi2_step")


@dataclass
class SampleBatch:
    """An m x d block of draws from one input distribution."""

    points: np.ndarray
    center: np.ndarray
    seed_tag: int = 0

    def __post_init__(self):
        self.points = np.atleast_2d(np.asarray(self.points, dtype=float))
        self.center = np.atleast_1d(np.asarray(self.center, dtype=float))
        if self.points.shape[0] < 2:
            raise ValueError(f"a SampleBatch needs m >= 2 draws, got {self.points.shape[0]}")
        if self.points.shape[1] != self.center.shape[0]:
            raise ValueError(
                f"points have dimension {self.points.shape[1]} but center has {self.center.shape[0]}"
            )
        if not np.all(np.isfinite(self.points)):
            raise ValueError("SampleBatch points must be finite")

    @property
    def m(self) -> int:
        return self.points.shape[0]

    @property
    def dim(self) -> int:
        return self.points.shape[1]


def _check_center(dist: InputDistribution, center) -> np.ndarray:
    center = np.atleast_1d(np.asarray(center, dtype=float))
    if center.ndim != 1 or center.shape[0] != dist.dim:
        raise ValueError(f"center has shape {center.shape}, expected ({dist.dim},)")
    if not np.all(np.isfinite(center)):
        raise ValueError("center must be finite")
    return center


def _uniforms(rng: np.random.Generator, m: int, width: int) -> np.ndarray:
    return np.clip(rng.random((m, width)), _U_EPS, 1.0 - _U_EPS)


def _base_draws(dist: InputDistribution, rng: np.random.Generator, m: int) -> np.ndarray:
    """Center-free randomness consumed by ``_perturb``."""
    if dist.family in ("beta_shift", "beta_varying"):
        # the native sampler is much faster than the beta inverse CDF
        return rng.beta(float(dist.params["alpha"]), float(dist.params["beta"]), (m, dist.dim))
    return _uniforms(rng, m, _unit_width(dist))


def _unit_width(dist: InputDistribution) -> int:
    # gmm spends one extra uniform per draw on the component choice
    return dist.dim + 1 if dist.family == "gmm" else dist.dim


def _perturb(dist: InputDistribution, centers: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Map base draws to draws around every center -> (k, m, d).

    ``u`` is (m, w), shared by all centers, or (k, m, w) with one block per
    center; it holds uniforms, except for the beta families where it holds
    unit beta variates.
    """
    p = dist.params
    k = centers.shape[0]
    c = centers[:, None, :]
    u = u[None] if u.ndim == 2 else u
    m = u.shape[1]
    fam = dist.family
    if fam == "dirac":
        return np.broadcast_to(c, (k, m, dist.dim)).copy()
    if fam == "gaussian_iso":
        z = float(p["sigma"]) * stats.norm.ppf(u)
    elif fam == "beta_shift":
        z = float(p["scale"]) * u
    elif fam == "beta_varying":
        scale = float(p["scale"]) * (np.sin(4.0 * np.pi * centers) + 1.0)
        z = scale[:, None, :] * u
    elif fam == "chi2_step":
        high = (centers >= float(p["threshold"]))[:, None, :]
        z_low = stats.chi2.ppf(u, float(p["g_low"]))
        z_high = stats.chi2.ppf(u, float(p["g_high"]))
        z = float(p["scale"]) * np.where(high, z_high, z_low)
    elif fam == "circular_concat":
        theta = 2.0 * np.pi * u[..., 0]
        z = np.empty_like(u)
        z[..., 0] = float(p["radius"]) * np.cos(theta)
        z[..., 1] = float(p["radius"]) * np.sin(theta)
        if dist.dim > 2:
            z[..., 2:] = np.sqrt(float(p["tail_var"])) * stats.norm.ppf(u[..., 2:])
    elif fam == "gmm":
        means = np.asarray(p["means"], dtype=float)
        covs = np.asarray(p["covariances"], dtype=float)
        weights = np.asarray(p["weights"], dtype=float)
        covs = np.broadcast_to(covs, (means.shape[0], dist.dim, dist.dim))
        comp = np.searchsorted(np.cumsum(weights)[:-1], u[..., 0], side="right")
        chol = np.linalg.cholesky(covs)
        g = stats.norm.ppf(u[..., 1:])
        z = means[comp] + np.einsum("...ij,...j->...i", chol[comp], g)
    else:
        raise ValueError(f"unknown input family {fam!r}")
    return np.broadcast_to(c + z, (k, m, dist.dim)).copy()


def sample(dist: InputDistribution, center, m: int, seed: int) -> SampleBatch:
    """Draw ``m`` i.i.d. perturbed inputs around ``center``; deterministic per seed."""
    if int(m) != m or m < 2:
        raise ValueError(f"m must be an integer >= 2, got {m!r}")
    center = _check_center(dist, center)
    u = _base_draws(dist, rng_for(seed), int(m))
    points = _perturb(dist, center[None, :], u)[0]
    return SampleBatch(points, center, seed_tag=int(seed))


def sample_many(dist: InputDistribution, centers, m: int, seeds) -> np.ndarray:
    """Draw batches for many centers -> array of shape (k, m, d).

    ``seeds`` is either one int shared by all centers (common random numbers)
    or a sequence with one seed per center.
    """
    if int(m) != m or m < 2:
        raise ValueError(f"m must be an integer >= 2, got {m!r}")
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    if centers.shape[1] != dist.dim:
        raise ValueError(f"centers have dimension {centers.shape[1]}, expected {dist.dim}")
    if np.ndim(seeds) == 0:
        u = _base_draws(dist, rng_for(int(seeds)), int(m))
        return _perturb(dist, centers, u)
    seeds = list(seeds)
    if len(seeds) != centers.shape[0]:
        raise ValueError("need one seed per center")
    u = np.stack([_base_draws(dist, rng_for(int(s)), int(m)) for s in seeds])
    return _perturb(dist, centers, u)


@lru_cache(maxsize=64)
def _unit_moments(key: str, variant: float, n: int, seed: int):
    dist = InputDistribution.from_json(key)
    u = _base_draws(dist, rng_for(seed, "moments"), n)
    # a center at `variant` selects the chi2 regime; shift is removed below
    c = np.full((1, dist.dim), variant)
    z = _perturb(dist, c, u)[0] - c[0]
    return z.mean(axis=0), np.cov(z, rowvar=False).reshape(dist.dim, dist.dim)


def moment_match(dist: InputDistribution, centers, n: int = 10_000, seed: int = 0):
    """Gaussian moment matching: returns means (k, d) and covariances (k, d, d).

    Gaussian and Dirac laws are matched exactly; the others from ``n`` draws of
    the unit law, transformed affinely per center.
    """
    centers = np.atleast_2d(np.asarray(centers, dtype=float))
    k, d = centers.shape
    if d != dist.dim:
        raise ValueError(f"centers have dimension {d}, expected {dist.dim}")
    fam = dist.family
    if fam == "dirac":
        return centers.copy(), np.zeros((k, d, d))
    if fam == "gaussian_iso":
        var = float(dist.params["sigma"]) ** 2
        return centers.copy(), np.broadcast_to(var * np.eye(d), (k, d, d)).copy()
    if fam == "beta_varying":
        unit = InputDistribution("beta_shift", {**dist.params, "scale": 1.0}, d)
        mu, cov = _unit_moments(unit.key(), 0.0, n, seed)
        s = float(dist.params["scale"]) * (np.sin(4.0 * np.pi * centers) + 1.0)
        means = centers + s * mu
        covs = s[:, :, None] * cov[None] * s[:, None, :]
        return means, covs
    if fam == "chi2_step":
        thr = float(dist.params["threshold"])
        mu_lo, cov_lo = _unit_moments(dist.key(), thr - 1.0, n, seed)
        mu_hi, cov_hi = _unit_moments(dist.key(), thr, n, seed)
        if d != 1:
            raise ValueError("moment matching for chi2_step is defined for dim 1")
        high = centers[:, 0] >= thr
        means = centers + np.where(high[:, None], mu_hi, mu_lo)
        covs = np.where(high[:, None, None], cov_hi, cov_lo)
        return means, covs
    mu, cov = _unit_moments(dist.key(), 0.0, n, seed)
    return centers + mu, np.broadcast_to(cov, (k, d, d)).copy()


def dirac(dim: int = 1) -> InputDistribution:
    return InputDistribution("dirac", {}, dim)


def gaussian(sigma: float, dim: int = 1) -> InputDistribution:
    return InputDistribution("gaussian_iso", {"sigma": sigma}, dim)


def beta_shift(alpha: float, beta: float, scale: float, dim: int = 1) -> InputDistribution:
    return InputDistribution("beta_shift", {"alpha": alpha, "beta": beta, "scale": scale}, dim)


def chi2_step(g_low=0.5, g_high=7.0, threshold=0.6, scale=0.01) -> InputDistribution:
    params = {"g_low": g_low, "g_high": g_high, "threshold": threshold, "scale": scale}
    return InputDistribution("chi2_step", params, 1)

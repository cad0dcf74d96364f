"""Synthetic robust-optimization problems, Monte-Carlo oracle and regret."""
from __future__ import annotations

import csv
import json
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

import numpy as np
from scipy import linalg, optimize

from .udist import InputDistribution, moment_match, rng_for, sample_many
from .validation import check_domain, check_in_domain

PROBLEM_NAMES = ("rkhs_1d", "double_peak_1d", "bumped_bowl_10d")


# -- objectives ------------------------------------------------------------------


def bumps(x, centers, heights, widths) -> np.ndarray:
    """Weighted sum of Gaussian bumps evaluated on the last axis (1D inputs)."""
    x = np.asarray(x, dtype=float)[..., 0]
    c, a, w = (np.asarray(v, dtype=float) for v in (centers, heights, widths))
    return (a * np.exp(-0.5 * ((x[..., None] - c) / w) ** 2)).sum(-1)


def bumped_bowl(x) -> np.ndarray:
    x = np.asarray(x, dtype=float)
    r2 = (x[..., :2] ** 2).sum(-1)
    g = 2.0 * np.log(0.8 * r2 + np.exp(-10.0 * r2)) + 2.54
    h = 5.0 * (x[..., 2:] ** 2).sum(-1) + 1.0
    return g * h


@dataclass
class BenchmarkProblem:
    """A black-box objective with its input law and precomputed robust optimum.

    ``sense`` is +1 for maximization and -1 for minimization; the optimizer
    always maximizes ``sense * f``.
    """

    name: str
    domain: np.ndarray
    objective: dict
    input_law: InputDistribution
    observation_noise_sd: float = 0.0
    sense: int = 1
    robust_optimum: np.ndarray | None = None
    robust_optimum_value: float | None = None
    oracle_settings: dict = field(default_factory=dict)
    extras: dict = field(default_factory=dict)

    def __post_init__(self):
        self.domain = check_domain(self.domain)
        if self.input_law.dim != self.dim:
            raise ValueError(f"input law has dim {self.input_law.dim}, domain has {self.dim}")
        if self.sense not in (1, -1):
            raise ValueError("sense must be +1 or -1")
        if self.observation_noise_sd < 0:
            raise ValueError("observation_noise_sd must be >= 0")
        if self.robust_optimum is not None:
            self.robust_optimum = check_in_domain(self.robust_optimum, self.domain)

    @property
    def dim(self) -> int:
        return self.domain.shape[0]

    def f(self, x) -> np.ndarray:
        """Noiseless objective on points of shape (..., d); no domain check (perturbed inputs may leave the box)."""
        kind = self.objective["kind"]
        if kind == "bumps":
            o = self.objective
            return bumps(x, o["centers"], o["heights"], o["widths"])
        if kind == "bumped_bowl":
            return bumped_bowl(x)
        raise ValueError(f"unknown objective kind {kind!r}")

    def to_json(self) -> dict:
        out = {
            "name": self.name,
            "domain": self.domain.tolist(),
            "objective": self.objective,
            "input_law": self.input_law.to_json(),
            "observation_noise_sd": self.observation_noise_sd,
            "sense": self.sense,
            "robust_optimum": None if self.robust_optimum is None else self.robust_optimum.tolist(),
            "robust_optimum_value": self.robust_optimum_value,
            "oracle_settings": self.oracle_settings,
        }
        if self.extras:
            out["extras"] = self.extras
        return out

    @classmethod
    def from_json(cls, obj) -> "BenchmarkProblem":
        allowed = {"name", "domain", "objective", "input_law", "observation_noise_sd", "sense",
                   "robust_optimum", "robust_optimum_value", "oracle_settings", "extras", "notes"}
        unknown = set(obj) - allowed
        if unknown:
            raise ValueError(f"unknown keys in problem definition: {sorted(unknown)}")
        return cls(
            name=obj["name"],
            domain=np.asarray(obj["domain"], dtype=float),
            objective=obj["objective"],
            input_law=InputDistribution.from_json(obj["input_law"]),
            observation_noise_sd=float(obj.get("observation_noise_sd", 0.0)),
            sense=int(obj.get("sense", 1)),
            robust_optimum=None if obj.get("robust_optimum") is None else np.asarray(obj["robust_optimum"]),
            robust_optimum_value=obj.get("robust_optimum_value"),
            oracle_settings=obj.get("oracle_settings", {}),
            extras=obj.get("extras", {}),
        )


def _asset_dir():
    return resources.files("mmdbo") / "problems"


def load_problem(name: str, input_law=None, observation_noise_sd=None, recompute=True) -> BenchmarkProblem:
    """Load a stored problem, optionally overriding its input law or noise.

    Changing the input law invalidates the stored optimum; it is recomputed
    with the stored oracle settings unless ``recompute`` is False.
    """
    path = _asset_dir() / f"{name}.json"
    if not path.is_file():
        raise ValueError(f"unknown problem {name!r}; available: {list(PROBLEM_NAMES)}")
    problem = BenchmarkProblem.from_json(json.loads(path.read_text()))
    if observation_noise_sd is not None:
        problem.observation_noise_sd = float(observation_noise_sd)
    if input_law is not None:
        law = input_law if isinstance(input_law, InputDistribution) else InputDistribution.from_json(input_law)
        if law != problem.input_law:
            problem = replace(problem, input_law=law, robust_optimum=None, robust_optimum_value=None, extras={})
            if recompute:
                s = problem.oracle_settings
                x, v = precompute_robust_optimum(problem, s["grid_density"], s["n_mc"], s["seed"])
                problem.robust_optimum, problem.robust_optimum_value = x, v
    return problem


def save_problem(problem: BenchmarkProblem, path) -> None:
    Path(path).write_text(json.dumps(problem.to_json(), indent=2) + "\n")


# -- evaluation ---------------------------------------------------------------------


def eval_objective(problem: BenchmarkProblem, x) -> float:
    x = check_in_domain(x, problem.domain)
    return float(problem.f(x))


def observe(problem: BenchmarkProblem, x, seed: int) -> float:
    """Noisy evaluation at a perturbed input; only y leaves this function."""
    x = check_in_domain(x, problem.domain)
    x_perturbed = sample_many(problem.input_law, x[None, :], 2, int(seed))[0, 0]
    noise = problem.observation_noise_sd * rng_for(seed, "obs_noise").standard_normal()
    return float(problem.f(x_perturbed) + noise)


def _perturbed(problem, X, n_mc, seed):
    return sample_many(problem.input_law, X, n_mc, int(seed))


def expected_values(problem: BenchmarkProblem, X, n_mc: int, seed: int, chunk: int = 2**22):
    """Monte-Carlo E[f(x')] and standard errors at many centers.

    All centers share the same uniforms (common random numbers), which makes
    comparisons between centers far less noisy than independent draws.
    """
    X = np.atleast_2d(np.asarray(X, dtype=float))
    if n_mc < 2:
        raise ValueError("n_mc must be >= 2")
    mean = np.empty(X.shape[0])
    se = np.empty(X.shape[0])
    step = max(1, chunk // max(n_mc * problem.dim, 1))
    for i in range(0, X.shape[0], step):
        vals = problem.f(_perturbed(problem, X[i : i + step], n_mc, seed))
        mean[i : i + step] = vals.mean(axis=1)
        se[i : i + step] = vals.std(axis=1, ddof=1) / np.sqrt(n_mc)
    return mean, se


def expected_value_oracle(problem: BenchmarkProblem, x, n_mc: int = 10_000, seed: int = 0):
    """(estimate, standard error) of E[f(x')] with x' drawn from the input law at x."""
    if n_mc < 1000:
        raise ValueError("the oracle needs n_mc >= 1000")
    x = check_in_domain(x, problem.domain)
    m, s = expected_values(problem, x[None, :], n_mc, seed)
    return float(m[0]), float(s[0])


def gaussian_expected_values(problem: BenchmarkProblem, X, n_mc: int, seed: int, moment_samples=10_000):
    """E[f] when the input law is replaced by its moment-matched Gaussian."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    mu, cov = moment_match(problem.input_law, X, moment_samples, seed)
    z = rng_for(seed, "gauss_oracle").standard_normal((n_mc, problem.dim))
    out = np.empty(X.shape[0])
    for i in range(X.shape[0]):
        w, V = np.linalg.eigh(cov[i])
        root = V * np.sqrt(np.maximum(w, 0.0))
        out[i] = problem.f(mu[i] + z @ root.T).mean()
    return out


def robust_regret(problem: BenchmarkProblem, x, n_mc: int = 10_000, seed: int = 0) -> float:
    """Gap in expected utility between the robust optimum and ``x`` (>= 0 up to oracle noise)."""
    if problem.robust_optimum_value is None:
        raise ValueError(f"problem {problem.name!r} has no precomputed robust optimum")
    est, _ = expected_value_oracle(problem, x, n_mc, seed)
    return float(problem.sense * (problem.robust_optimum_value - est))


def _refine_1d(fun, lo, hi, xatol):
    res = optimize.minimize_scalar(fun, bounds=(lo, hi), method="bounded", options={"xatol": xatol})
    return float(res.x), float(res.fun)


def precompute_robust_optimum(problem: BenchmarkProblem, grid_density: int = 2001, n_mc: int = 20_000,
                              seed: int = 0, tol: float = 1e-3):
    """Argmax of the oracle expectation (in the problem's sense) -> (x*, E f(x*)).

    1D problems use a dense grid plus bounded refinement; the bumped bowl uses
    its structure (radial in the first two coordinates, origin in the rest).
    """
    s = problem.sense

    def neg_utility(X):
        return -s * expected_values(problem, X, n_mc, seed)[0]

    if problem.objective["kind"] == "bumped_bowl":
        # the best radial profile is searched along the first axis; remaining coordinates at 0
        r_max = float(min(abs(problem.domain[0]).max(), abs(problem.domain[1]).max()))
        radii = np.linspace(0.0, r_max, grid_density)
        X = np.zeros((grid_density, problem.dim))
        X[:, 0] = radii
        vals = neg_utility(X)
        k = int(np.argmin(vals))
        lo, hi = radii[max(k - 1, 0)], radii[min(k + 1, grid_density - 1)]

        def radial(r):
            x = np.zeros((1, problem.dim))
            x[0, 0] = r
            return neg_utility(x)[0]

        r_best, val = _refine_1d(radial, lo, hi, tol / 10) if hi > lo else (lo, vals[k])
        if vals[k] <= val:
            r_best, val = radii[k], vals[k]
        x_best = np.zeros(problem.dim)
        x_best[0] = r_best
    elif problem.dim == 1:
        grid = np.linspace(problem.domain[0, 0], problem.domain[0, 1], grid_density)[:, None]
        vals = neg_utility(grid)
        k = int(np.argmin(vals))
        _check_ranking(problem, grid, vals, k, n_mc, seed)
        lo, hi = grid[max(k - 1, 0), 0], grid[min(k + 1, grid_density - 1), 0]
        x_r, v_r = _refine_1d(lambda t: neg_utility(np.array([[t]]))[0], lo, hi, tol / 10)
        x_best, val = (np.array([x_r]), v_r) if v_r < vals[k] else (grid[k], vals[k])
    else:
        raise NotImplementedError("dense-grid precomputation is implemented for 1D problems and the bumped bowl")
    return np.asarray(x_best, dtype=float), float(-s * val)


def _check_ranking(problem, grid, vals, k, n_mc, seed):
    """Fail with guidance when the best far-away rival is within paired oracle noise."""
    far = np.abs(grid[:, 0] - grid[k, 0]) > 0.05 * np.ptp(problem.domain)
    if not far.any():
        return
    j = np.flatnonzero(far)[np.argmin(vals[far])]
    draws = problem.f(_perturbed(problem, grid[[k, j]], n_mc, seed))
    diff = draws[0] - draws[1]
    se = diff.std(ddof=1) / np.sqrt(n_mc)
    if abs(diff.mean()) < 2 * se:
        raise ValueError(
            f"robust optimum of {problem.name!r} is not resolved at n_mc={n_mc} "
            f"(gap {abs(diff.mean()):.2e} vs paired standard error {se:.2e}); increase n_mc"
        )


def basins(curve_x, curve_y, x_peak):
    """Interval of monotone ascent towards the local maximum nearest ``x_peak``."""
    x, y = np.asarray(curve_x), np.asarray(curve_y)
    k = int(np.argmin(np.abs(x - x_peak)))
    while 0 < k < len(y) - 1 and (y[k - 1] > y[k] or y[k + 1] > y[k]):
        k = k - 1 if y[k - 1] > y[k + 1] else k + 1
    i = k
    while i > 0 and y[i - 1] <= y[i]:
        i -= 1
    j = k
    while j < len(y) - 1 and y[j + 1] <= y[j]:
        j += 1
    return float(x[i]), float(x[j])


# -- information gain -----------------------------------------------------------------


def information_gain(K, noise_var: float, tol: float = 1e-8) -> float:
    """0.5 * log det(I + K / noise_var) via a Cholesky factor."""
    K = np.asarray(K, dtype=float)
    if K.ndim != 2 or K.shape[0] != K.shape[1]:
        raise ValueError("K must be square")
    if not noise_var > 0:
        raise ValueError("noise_var must be > 0")
    if K.size == 0:
        return 0.0
    K = 0.5 * (K + K.T)
    min_eig = float(np.linalg.eigvalsh(K).min())
    if min_eig < -tol * max(1.0, np.abs(K).max()):
        raise ValueError(f"K is not positive semidefinite (minimum eigenvalue {min_eig:.3e})")
    L = linalg.cholesky(np.eye(K.shape[0]) + K / noise_var, lower=True)
    return float(np.log(np.diag(L)).sum())


# -- traces ---------------------------------------------------------------------------


@dataclass
class RegretTrace:
    run_id: str
    algo: str
    problem: str
    seed: int
    dim: int
    records: list = field(default_factory=list)
    error: str | None = None

    def add(self, iter, x_query, y, x_outcome, regret, inference_ms, acquisition_ms):
        if self.records and iter <= self.records[-1]["iter"]:
            raise ValueError("iterations must be strictly increasing")
        self.records.append(
            dict(iter=int(iter), x=np.asarray(x_query, float).tolist(), y=float(y),
                 x_out=np.asarray(x_outcome, float).tolist(), regret=float(regret),
                 inference_ms=float(inference_ms), acquisition_ms=float(acquisition_ms))
        )

    @property
    def regrets(self) -> np.ndarray:
        return np.array([r["regret"] for r in self.records])

    def header(self):
        return (["run_id", "algo", "problem", "seed", "iter"]
                + [f"x{i}" for i in range(self.dim)] + ["y"]
                + [f"x_out{i}" for i in range(self.dim)]
                + ["regret", "inference_ms", "acquisition_ms", "error"])

    def rows(self):
        for r in self.records:
            yield ([self.run_id, self.algo, self.problem, self.seed, r["iter"]]
                   + [repr(v) for v in r["x"]] + [repr(r["y"])]
                   + [repr(v) for v in r["x_out"]]
                   + [repr(r["regret"]), f"{r['inference_ms']:.3f}", f"{r['acquisition_ms']:.3f}", ""])
        if self.error is not None:
            nxt = self.records[-1]["iter"] + 1 if self.records else 0
            yield ([self.run_id, self.algo, self.problem, self.seed, nxt]
                   + [""] * (2 * self.dim + 4) + [self.error])

    def write_csv(self, path, append=False, timings=True):
        """Write rows; ``timings=False`` blanks wall-clock columns for byte-stable output."""
        path = Path(path)
        new = not (append and path.exists())
        with path.open("a" if append else "w", newline="") as fh:
            w = csv.writer(fh)
            if new:
                w.writerow(self.header())
            for row in self.rows():
                if not timings and row[-1] == "":
                    row = row[:-3] + ["", "", ""]
                w.writerow(row)


def read_traces(path) -> list[RegretTrace]:
    """Parse a trace CSV back into RegretTrace objects (error rows become ``error``)."""
    traces: dict = {}
    with Path(path).open() as fh:
        reader = csv.DictReader(fh)
        dim = sum(1 for c in reader.fieldnames if c.startswith("x") and c[1:].isdigit())
        for row in reader:
            key = row["run_id"]
            if key not in traces:
                traces[key] = RegretTrace(key, row["algo"], row["problem"], int(row["seed"]), dim)
            t = traces[key]
            if row.get("error"):
                t.error = row["error"]
                continue
            t.records.append(dict(
                iter=int(row["iter"]), x=[float(row[f"x{i}"]) for i in range(dim)], y=float(row["y"]),
                x_out=[float(row[f"x_out{i}"]) for i in range(dim)], regret=float(row["regret"]),
                inference_ms=float(row["inference_ms"] or "nan"), acquisition_ms=float(row["acquisition_ms"] or "nan"),
            ))
    return list(traces.values())

"""Experiment harness: configuration, the BO loop, timing and diagnostics."""
from __future__ import annotations

import csv
import json
import logging
import math
import time
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

import numpy as np
from scipy.stats import qmc

from .acquisition import AcquisitionConfig, maximize_acquisition, outcome
from .bench import BenchmarkProblem, RegretTrace, load_problem, observe, robust_regret
from .kernel import BaseKernelParams
from .mmd import EstimatorConfig
from .surrogate import BaselineGPRegressor, MMDGPRegressor
from .udist import InputDistribution, beta_shift, rng_for

logger = logging.getLogger(__name__)

ALGORITHMS = ("mmdgp_empirical", "mmdgp_nystrom", "gp_ucb", "skl_ucb", "erbf_ucb", "ugp_ucb")
_BASELINE_KIND = {"gp_ucb": "vanilla_gp", "skl_ucb": "skl", "erbf_ucb": "erbf", "ugp_ucb": "ugp"}


def _strict(cls, obj, where):
    unknown = set(obj) - {f.name for f in fields(cls)}
    if unknown:
        raise ValueError(f"unknown keys in {where}: {sorted(unknown)}")


@dataclass
class ExperimentConfig:
    problem: str
    algorithm: str
    label: str | None = None
    problem_overrides: dict = field(default_factory=dict)
    estimator: dict = field(default_factory=lambda: {"m": 100, "h": 10})
    ugp_m: int | None = None
    acquisition: dict = field(default_factory=dict)
    budget: int = 50
    init_points: int = 5
    repeats: int = 1
    base_seed: int = 0
    n_mc_regret: int = 10_000
    lengthscale_refit_every: int = 1
    n_restarts: int = 2
    record_timings: bool = True
    output: str | None = None

    def __post_init__(self):
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {self.algorithm!r}; expected one of {ALGORITHMS}")
        if self.budget < 1 or self.repeats < 1:
            raise ValueError("budget and repeats must be >= 1")
        if self.init_points < 2:
            raise ValueError("init_points must be >= 2")
        if self.lengthscale_refit_every < 1:
            raise ValueError("lengthscale_refit_every must be >= 1")
        unknown = set(self.problem_overrides) - {"input_law", "observation_noise_sd"}
        if unknown:
            raise ValueError(f"unknown problem overrides: {sorted(unknown)}")
        unknown = set(self.estimator) - {"m", "h", "pinv_tolerance", "landmark_replace"}
        if unknown:
            raise ValueError(f"unknown keys in estimator: {sorted(unknown)}")
        self.acquisition_config  # validates
        self.estimator_config

    @property
    def name(self) -> str:
        return self.label or self.algorithm

    @property
    def acquisition_config(self) -> AcquisitionConfig:
        return AcquisitionConfig.from_json(self.acquisition)

    @property
    def estimator_config(self) -> EstimatorConfig:
        kind = "empirical" if self.algorithm == "mmdgp_empirical" else "nystrom"
        est = dict(self.estimator)
        if kind == "empirical":
            est.pop("h", None)
            est["h"] = None
        else:
            est.setdefault("h", 10)
        return EstimatorConfig(kind=kind, **est)

    @property
    def ugp_samples(self) -> int:
        if self.ugp_m is not None:
            return int(self.ugp_m)
        # equal per-pair cost: m_ugp^2 = m * h
        m, h = self.estimator.get("m", 100), self.estimator.get("h", 10) or 10
        return max(2, int(round(math.sqrt(m * h))))

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, obj) -> "ExperimentConfig":
        _strict(cls, obj, "experiment config")
        return cls(**obj)

    @classmethod
    def load(cls, path) -> "ExperimentConfig":
        return cls.from_json(json.loads(Path(path).read_text()))

    def load_problem(self) -> BenchmarkProblem:
        return load_problem(self.problem, **self.problem_overrides)


def make_model(cfg: ExperimentConfig, problem: BenchmarkProblem, seed: int):
    common = dict(
        input_dist=problem.input_law,
        normalize_y=True,
        domain=problem.domain,
        random_state=seed,
        n_restarts=cfg.n_restarts,
    )
    if cfg.algorithm.startswith("mmdgp"):
        return MMDGPRegressor(estimator=cfg.estimator_config, **common)
    kind = _BASELINE_KIND[cfg.algorithm]
    return BaselineGPRegressor(kind=kind, ugp_m=cfg.ugp_samples, **common)


def initial_design(problem: BenchmarkProblem, n: int, seed: int) -> np.ndarray:
    lo, hi = problem.domain[:, 0], problem.domain[:, 1]
    sobol = qmc.Sobol(problem.dim, scramble=True, seed=rng_for(seed, "init"))
    u = sobol.random_base2(int(np.ceil(np.log2(n))))[:n]
    return qmc.scale(u, lo, hi) if np.all(hi > lo) else np.tile(lo, (n, 1))


def _obs_seed(seed, i):
    return int(rng_for(seed, "observe", i).integers(2**31))


def run_bo(cfg: ExperimentConfig, repeat_index: int, problem: BenchmarkProblem | None = None) -> RegretTrace:
    """One BO repeat; failures end the trace with an error row instead of raising."""
    problem = problem or cfg.load_problem()
    seed = cfg.base_seed + repeat_index
    run_id = f"{cfg.name}-{problem.name}-{seed}"
    trace = RegretTrace(run_id, cfg.name, problem.name, seed, problem.dim)
    acq_cfg = cfg.acquisition_config
    oracle_seed = problem.oracle_settings.get("seed", 0) + 1
    try:
        X = initial_design(problem, cfg.init_points, seed)
        y = np.array([problem.sense * observe(problem, x, _obs_seed(seed, i)) for i, x in enumerate(X)])
        prev = None
        for it in range(1, cfg.budget + 1):
            t0 = time.perf_counter()
            if prev is None:
                model = make_model(cfg, problem, seed)
            else:
                model = prev.warm_start(refit_lengthscale=(it - 1) % cfg.lengthscale_refit_every == 0)
            model.fit(X, y)
            t1 = time.perf_counter()
            x_next, _ = maximize_acquisition(
                model, problem.domain, acq_cfg, seed=int(rng_for(seed, "acq", it).integers(2**31))
            )
            t2 = time.perf_counter()
            y_next = observe(problem, x_next, _obs_seed(seed, len(X)))
            X = np.vstack([X, x_next])
            y = np.append(y, problem.sense * y_next)
            t3 = time.perf_counter()
            try:
                frozen = model.with_fitted_hyperparameters().fit(X, y)
            except np.linalg.LinAlgError as exc:
                # the new point made the Gram indefinite at the old values; re-optimize alpha and noise
                logger.info("%s iter %d: frozen refit failed (%s); re-optimizing", run_id, it, exc)
                frozen = model.warm_start(refit_lengthscale=False).fit(X, y)
            x_out = outcome(frozen, X)
            t4 = time.perf_counter()
            regret = robust_regret(problem, x_out, cfg.n_mc_regret, oracle_seed)
            trace.add(it, x_next, y_next, x_out, regret, 1e3 * (t1 - t0 + t4 - t3), 1e3 * (t2 - t1))
            prev = model
    except Exception as exc:  # noqa: BLE001 - recorded as a machine-readable row
        logger.exception("repeat %s failed", run_id)
        trace.error = f"{type(exc).__name__}: {exc}".replace("\n", " ")
    return trace


def run_experiment(cfg: ExperimentConfig, output=None, repeats=None) -> list[RegretTrace]:
    """All repeats of ``cfg``; traces are appended to ``output`` as they finish."""
    output = output or cfg.output
    problem = cfg.load_problem()
    traces = []
    n = cfg.repeats if repeats is None else repeats
    if output:
        Path(output).parent.mkdir(parents=True, exist_ok=True)
        Path(output).unlink(missing_ok=True)
    for r in range(n):
        trace = run_bo(cfg, r, problem)
        traces.append(trace)
        if output:
            trace.write_csv(output, append=True, timings=cfg.record_timings)
        final = trace.regrets[-1] if trace.records else float("nan")
        logger.info("%s repeat %d: final regret %.4g%s", cfg.name, r, final,
                    f" (error: {trace.error})" if trace.error else "")
    return traces


# -- aggregation ---------------------------------------------------------------------------


def summarize(traces) -> list[dict]:
    """Per-algorithm, per-iteration median/IQR and mean/sd of regret."""
    traces = list(traces)
    if not traces:
        raise ValueError("summarize needs at least one trace")
    problems = {t.problem for t in traces}
    if len(problems) > 1:
        raise ValueError(f"traces mix problems {sorted(problems)}")
    rows = []
    for algo in sorted({t.algo for t in traces}):
        group = [t for t in traces if t.algo == algo]
        iters = sorted({r["iter"] for t in group for r in t.records})
        for it in iters:
            vals = np.array([r["regret"] for t in group for r in t.records if r["iter"] == it])
            q25, q50, q75 = np.percentile(vals, [25, 50, 75])
            rows.append(dict(algo=algo, problem=group[0].problem, iter=it, n=len(vals), median=q50,
                             q25=q25, q75=q75, mean=vals.mean(), sd=vals.std(ddof=1) if len(vals) > 1 else 0.0))
    return rows


def write_rows(rows, path, columns=None):
    columns = columns or list(rows[0])
    with Path(path).open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=columns)
        w.writeheader()
        for r in rows:
            w.writerow({k: (repr(v) if isinstance(v, float) else v) for k, v in r.items()})


def final_regrets(traces, algo) -> np.ndarray:
    return np.array([t.regrets[-1] for t in traces if t.algo == algo and t.records])


# -- inference timing ---------------------------------------------------------------------

TABLE_ROWS = (("empirical", 20, None), ("empirical", 100, None), ("empirical", 1000, None),
              ("nystrom", 100, 10), ("nystrom", 1000, 100))


def query_bytes(kind, m, h, n_train, dim=1) -> int:
    """Bytes held per query during posterior inference.

    Kernel blocks are accumulated in place, so a query costs its sample
    batch, its summary and one row of the cross matrix.
    """
    if kind == "empirical":
        return 8 * (m * dim + n_train + 1)
    return 8 * (m * dim + m + h * (dim + 2) + h * h + n_train + 1)


def bench_inference(rows=TABLE_ROWS, n_train=10, n_test=512, seed=0, repeats=5,
                    memory_budget=2 * 2**30, law: InputDistribution | None = None):
    """Wall-clock of posterior inference at ``n_test`` query distributions.

    Each configuration processes queries in batches of the largest size whose
    working memory fits ``memory_budget``. A single-query warm-up compiles
    the kernels before timing starts.
    """
    law = law or beta_shift(0.4, 0.2, 0.1)
    rng = rng_for(seed, "bench_inference")
    X = rng.uniform(0.0, 1.0, (n_train, 1))
    y = np.sin(6.0 * X[:, 0])
    Xq = rng.uniform(0.0, 1.0, (n_test, 1))
    out = []
    for kind, m, h in rows:
        per_query = query_bytes(kind, m, h, n_train)
        batch = int(memory_budget // per_query)
        row = dict(method=kind, m=m, h=h if h is not None else "", seconds_mean=float("nan"),
                   seconds_sd=float("nan"), batch=min(batch, n_test))
        if batch < 1:
            row["note"] = "memory budget exceeded at batch=1"
            out.append(row)
            continue
        est = EstimatorConfig(kind, m=m, h=h)
        model = MMDGPRegressor(input_dist=law, estimator=est, base_kernel=BaseKernelParams.rq(0.05),
                               optimizer=None, random_state=seed).fit(X, y)
        model.posterior(Xq[:1])
        times = []
        for _ in range(repeats):
            t0 = time.perf_counter()
            for i in range(0, n_test, batch):
                model.posterior(Xq[i : i + batch])
            times.append(time.perf_counter() - t0)
        row["seconds_mean"] = float(np.mean(times))
        row["seconds_sd"] = float(np.std(times, ddof=1)) if len(times) > 1 else 0.0
        out.append(row)
    return out


# -- posterior diagnostics ---------------------------------------------------------------


@dataclass
class DiagnoseConfig:
    problem: str = "rkhs_1d"
    input_law: dict | None = None
    models: list = field(default_factory=lambda: [{"algorithm": "mmdgp_nystrom", "estimator": {"m": 160, "h": 10}}])
    n_train: int = 10
    grid_points: int = 201
    seed: int = 0
    optimize: bool = True

    @classmethod
    def from_json(cls, obj) -> "DiagnoseConfig":
        _strict(cls, obj, "diagnose config")
        return cls(**obj)


def _diagnose_model(spec: dict, problem, seed):
    allowed = {"algorithm", "label", "estimator", "ugp_m"}
    unknown = set(spec) - allowed
    if unknown:
        raise ValueError(f"unknown keys in diagnose model: {sorted(unknown)}")
    cfg = ExperimentConfig(problem=problem.name, algorithm=spec["algorithm"], label=spec.get("label"),
                           estimator=spec.get("estimator", {"m": 100, "h": 10}), ugp_m=spec.get("ugp_m"))
    return cfg.name, make_model(cfg, problem, seed)


def diagnose_posterior(cfg: DiagnoseConfig, grid=None) -> dict:
    """Fit every configured surrogate on one seeded 10-point design; posterior over a grid."""
    problem = load_problem(cfg.problem, input_law=cfg.input_law, recompute=False)
    if problem.dim != 1:
        raise ValueError("diagnose_posterior supports 1D problems only")
    rng = rng_for(cfg.seed, "diagnose")
    lo, hi = problem.domain[0]
    X = np.sort(rng.uniform(lo, hi, cfg.n_train))[:, None]
    y = np.array([problem.sense * observe(problem, x, _obs_seed(cfg.seed, i)) for i, x in enumerate(X)])
    grid = np.linspace(lo, hi, cfg.grid_points) if grid is None else np.asarray(grid, dtype=float)
    results = {}
    for spec in cfg.models:
        name, model = _diagnose_model(spec, problem, cfg.seed)
        if not cfg.optimize:
            model.set_params(optimizer=None)
        model.fit(X, y)
        post = model.posterior(grid[:, None])
        results[name] = dict(x=grid, mean=post.mean, var=post.variance, X_train=X[:, 0], y_train=y, model=model)
    return results


def write_diagnostics(results: dict, out_dir) -> list[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, r in results.items():
        path = out_dir / f"{name}.csv"
        write_rows([dict(x=float(a), mean=float(b), var=float(c)) for a, b, c in zip(r["x"], r["mean"], r["var"])], path)
        paths.append(path)
    return paths

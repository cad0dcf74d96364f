import csv
import json

import numpy as np
import pytest

from mmdbo import bench, experiment
from mmdbo.bench import RegretTrace, read_traces
from mmdbo.cli import main
from mmdbo.experiment import (DiagnoseConfig, ExperimentConfig, bench_inference, diagnose_posterior, run_bo,
                              summarize)
from mmdbo.udist import dirac

DIRAC = dirac().to_json()


def _cfg(**kw):
    base = dict(problem="rkhs_1d", algorithm="gp_ucb", budget=2, init_points=3, n_mc_regret=1000,
                record_timings=False, acquisition={"prescan_grid": 16, "restarts": 1, "max_local_steps": 5})
    base.update(kw)
    return ExperimentConfig.from_json(base)


def test_config_rejects_unknown_keys_and_bad_values():
    with pytest.raises(ValueError, match="unknown keys"):
        ExperimentConfig.from_json({"problem": "rkhs_1d", "algorithm": "gp_ucb", "budjet": 3})
    with pytest.raises(ValueError):
        _cfg(algorithm="random_search")
    with pytest.raises(ValueError):
        _cfg(budget=0)
    with pytest.raises(ValueError):
        _cfg(init_points=1)
    with pytest.raises(ValueError, match="unknown keys"):
        _cfg(acquisition={"beta": 2.0, "restart": 3})


def test_budget_one_bookkeeping():
    cfg = _cfg(budget=1, problem_overrides={"input_law": DIRAC})
    trace = run_bo(cfg, 0)
    assert trace.error is None
    assert len(trace.records) == 1
    # one acquisition on top of the initial design: the trace records that single observation
    assert trace.records[0]["iter"] == 1 and len(trace.records[0]["x"]) == 1


def test_budget_one_observation_count(monkeypatch):
    calls = []
    real = bench.observe

    def counting(problem, x, seed):
        calls.append(seed)
        return real(problem, x, seed)

    monkeypatch.setattr(experiment, "observe", counting)
    cfg = _cfg(budget=1, init_points=4, problem_overrides={"input_law": DIRAC})
    run_bo(cfg, 0)
    assert len(calls) == 4 + 1


@pytest.mark.parametrize("algorithm", ["gp_ucb", "mmdgp_nystrom"])
def test_runs_are_byte_identical(tmp_path, algorithm):
    cfg = _cfg(algorithm=algorithm, estimator={"m": 20, "h": 5})
    a, b = tmp_path / "a.csv", tmp_path / "b.csv"
    experiment.run_experiment(cfg, a)
    experiment.run_experiment(cfg, b)
    assert a.read_bytes() == b.read_bytes()


def test_failed_repeat_writes_error_row_and_nonzero_exit(tmp_path, monkeypatch):
    def broken(*args, **kwargs):
        raise RuntimeError("acquisition exploded")

    monkeypatch.setattr(experiment, "maximize_acquisition", broken)
    cfg_path = tmp_path / "cfg.json"
    cfg_path.write_text(json.dumps(_cfg().to_json()))
    out = tmp_path / "out.csv"
    assert main(["run", "--config", str(cfg_path), "--repeats", "2", "--output", str(out)]) == 1
    traces = read_traces(out)
    assert len(traces) == 2
    assert all("acquisition exploded" in t.error for t in traces)


def test_cli_run_summarize_roundtrip(tmp_path, capsys):
    out = tmp_path / "trace.csv"
    code = main(["run", "--problem", "rkhs_1d", "--algorithm", "gp_ucb", "--budget", "2", "--init-points", "3",
                 "--repeats", "2", "--n-mc-regret", "1000", "--no-timings", "--output", str(out)])
    assert code == 0
    rows = list(csv.DictReader(out.open()))
    assert len(rows) == 4 and rows[0]["inference_ms"] == ""
    summary = tmp_path / "summary.csv"
    assert main(["summarize", str(out), "--output", str(summary)]) == 0
    srows = list(csv.DictReader(summary.open()))
    assert [int(r["iter"]) for r in srows] == [1, 2]
    assert main(["run", "--problem", "nope", "--algorithm", "gp_ucb", "--output", str(out)]) == 2


def _trace(name, problem, regrets, seed=0):
    t = RegretTrace(f"{name}-{seed}", name, problem, seed, 1)
    for i, r in enumerate(regrets, 1):
        t.add(i, [0.0], 0.0, [0.0], r, 0.0, 0.0)
    return t


def test_summarize_arithmetic():
    (row,) = [r for r in summarize([_trace("a", "p", [0.5])]) if r["iter"] == 1]
    assert row["median"] == 0.5 and row["n"] == 1
    r, c = np.array([0.4, 0.3]), 0.05
    rows = summarize([_trace("a", "p", r, 0), _trace("a", "p", r + 2 * c, 1)])
    np.testing.assert_allclose([x["median"] for x in rows], r + c)
    np.testing.assert_allclose([x["mean"] for x in rows], r + c)
    with pytest.raises(ValueError, match="mix problems"):
        summarize([_trace("a", "p", r), _trace("a", "q", r)])
    with pytest.raises(ValueError):
        summarize([])


def test_bench_inference_rows_and_cli(tmp_path):
    rows = bench_inference([("empirical", 20, None), ("nystrom", 20, 20)], n_test=128, repeats=3)
    emp, nys = rows
    assert nys["seconds_mean"] >= emp["seconds_mean"]
    assert emp["batch"] == 128
    tiny = bench_inference([("empirical", 20, None)], n_test=16, repeats=1, memory_budget=8)
    assert "memory budget exceeded" in tiny[0]["note"]
    out = tmp_path / "t.csv"
    assert main(["bench-inference", "--rows", "nystrom:20:5", "--n-test", "32", "--repeats", "2",
                 "--output", str(out)]) == 0
    header = out.read_text().splitlines()[0]
    assert header == "method,m,h,seconds_mean,seconds_sd,batch"


def test_diagnose_gp_interpolates_dirac_data(tmp_path):
    cfg = DiagnoseConfig(problem="rkhs_1d", input_law=DIRAC, models=[{"algorithm": "gp_ucb"}], grid_points=51)
    res = diagnose_posterior(cfg)["gp_ucb"]
    model = res["model"]
    fitted = model.predict(res["X_train"][:, None])
    tol = 4 * np.sqrt(model.noise_var_) * np.std(res["y_train"]) + 1e-6
    assert np.all(np.abs(fitted - res["y_train"]) <= tol)
    cfg_path = tmp_path / "d.json"
    cfg_path.write_text(json.dumps({"problem": "rkhs_1d", "input_law": DIRAC, "models": [{"algorithm": "gp_ucb"}],
                                    "grid_points": 11}))
    assert main(["diagnose", "--config", str(cfg_path), "--output", str(tmp_path / "diag")]) == 0
    lines = (tmp_path / "diag" / "gp_ucb.csv").read_text().splitlines()
    assert lines[0] == "x,mean,var" and len(lines) == 12


def test_diagnose_skl_has_no_variance_jump_under_chi2():
    law = {"family": "chi2_step", "params": {"g_low": 0.5, "g_high": 7.0, "threshold": 0.6, "scale": 0.01}, "dim": 1}
    cfg = DiagnoseConfig(problem="rkhs_1d", input_law=law, models=[{"algorithm": "skl_ucb"}], grid_points=401)
    res = diagnose_posterior(cfg)["skl_ucb"]
    sd = np.sqrt(res["var"])
    jumps = np.abs(np.diff(sd))
    k = int(np.argmin(np.abs(res["x"] - 0.6)))
    assert jumps[k - 1 : k + 1].max() <= 3 * np.median(jumps) + 1e-3


def test_precompute_cli(capsys, tmp_path):
    assert main(["precompute", "--problem", "double_peak_1d", "--grid-density", "401", "--n-mc", "5000",
                 "--output", str(tmp_path / "dp.json")]) == 0
    out = json.loads(capsys.readouterr().out)
    assert abs(out["robust_optimum"][0] - 0.25) < 0.02
    assert json.loads((tmp_path / "dp.json").read_text())["oracle_settings"]["grid_density"] == 401

"""Regenerate the stored benchmark definitions and their oracle-computed optima.

Usage: python3 scripts/build_problems.py [output_dir]
"""
import sys
from pathlib import Path

import numpy as np

from mmdbo.bench import (BenchmarkProblem, basins, expected_values, gaussian_expected_values,
                         precompute_robust_optimum, save_problem)
from mmdbo.udist import InputDistribution, beta_shift, gaussian

OUT = Path(sys.argv[1]) if len(sys.argv) > 1 else Path(__file__).resolve().parents[1] / "src/mmdbo/problems"
ORACLE_1D = {"grid_density": 2001, "n_mc": 20000, "seed": 0}


def finish(p):
    s = p.oracle_settings
    p.robust_optimum, p.robust_optimum_value = precompute_robust_optimum(p, s["grid_density"], s["n_mc"], s["seed"])
    return p


def rkhs():
    obj = {
        "kind": "bumps",
        "centers": [0.08, 0.30, 0.52, 0.87, 0.83, 0.86, 0.892, 0.92, 0.955],
        "heights": [1.0, 0.45, 0.35, 0.35, 0.3, 0.35, 1.2, 0.4, 0.3],
        "widths": [0.06, 0.05, 0.07, 0.06, 0.005, 0.005, 0.004, 0.005, 0.004],
    }
    p = finish(BenchmarkProblem("rkhs_1d", [[0.0, 1.0]], obj, gaussian(0.01), 0.01, 1, oracle_settings=dict(ORACLE_1D)))
    grid = np.linspace(0, 1, ORACLE_1D["grid_density"])[:, None]
    f = p.f(grid)
    x_global = float(grid[f.argmax(), 0])
    e_global, se = expected_values(p, [[x_global]], ORACLE_1D["n_mc"], ORACLE_1D["seed"])
    p.extras = {
        "noiseless_optimum": [x_global],
        "noiseless_optimum_expectation": float(e_global[0]),
        "stagnation_regret": float(p.robust_optimum_value - e_global[0]),
    }
    return p


def double_peak():
    obj = {"kind": "bumps", "centers": [0.35, 0.45], "heights": [1.0, 0.32], "widths": [0.006, 0.05]}
    p = finish(BenchmarkProblem("double_peak_1d", [[0.0, 1.0]], obj, beta_shift(0.4, 0.2, 0.1), 0.01, 1,
                                oracle_settings=dict(ORACLE_1D)))
    s = p.oracle_settings
    grid = np.linspace(0, 1, 501)[:, None]
    e_true, _ = expected_values(p, grid, s["n_mc"], s["seed"])
    e_gauss = gaussian_expected_values(p, grid, s["n_mc"], s["seed"])
    x_pseudo = float(grid[e_gauss.argmax(), 0])
    p.extras = {
        "pseudo_optimum": [x_pseudo],
        "robust_basin": list(basins(grid[:, 0], e_true, p.robust_optimum[0])),
        "pseudo_basin": list(basins(grid[:, 0], e_gauss, x_pseudo)),
        "basin_grid": 501,
    }
    return p


def bumped_bowl():
    law = InputDistribution("circular_concat", {"radius": 0.5, "tail_var": 0.01}, 10)
    p = BenchmarkProblem("bumped_bowl_10d", [[-1.0, 1.0]] * 10, {"kind": "bumped_bowl"}, law, 0.01, -1,
                         oracle_settings={"grid_density": 201, "n_mc": 20000, "seed": 0})
    return finish(p)


if __name__ == "__main__":
    OUT.mkdir(parents=True, exist_ok=True)
    for build in (rkhs, double_peak, bumped_bowl):
        p = build()
        save_problem(p, OUT / f"{p.name}.json")
        print(p.name, p.robust_optimum.round(4).tolist(), round(p.robust_optimum_value, 5), p.extras)

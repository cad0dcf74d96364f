"""Command-line entry point: run, bench-inference, diagnose, summarize, precompute."""
from __future__ import annotations

import argparse
import json
import logging
import sys
from pathlib import Path

from . import bench
from .experiment import (TABLE_ROWS, DiagnoseConfig, ExperimentConfig, bench_inference, diagnose_posterior,
                         run_experiment, summarize, write_diagnostics, write_rows)


def _cmd_run(args) -> int:
    cfg = json.loads(Path(args.config).read_text()) if args.config else {}
    for key in ("problem", "algorithm", "label", "budget", "init_points", "repeats", "base_seed",
                "n_mc_regret", "ugp_m", "lengthscale_refit_every"):
        value = getattr(args, key)
        if value is not None:
            cfg[key] = value
    if args.m is not None or args.h is not None:
        est = dict(cfg.get("estimator", {}))
        if args.m is not None:
            est["m"] = args.m
        if args.h is not None:
            est["h"] = args.h
        cfg["estimator"] = est
    if args.beta is not None:
        cfg.setdefault("acquisition", {})["beta"] = args.beta
    if args.no_timings:
        cfg["record_timings"] = False
    cfg = ExperimentConfig.from_json(cfg)
    output = args.output or cfg.output
    if not output:
        print("error: an output path is required (--output or config 'output')", file=sys.stderr)
        return 2
    traces = run_experiment(cfg, output)
    failed = [t for t in traces if t.error]
    for t in traces:
        status = f"ERROR {t.error}" if t.error else f"final regret {t.regrets[-1]:.6g}"
        print(f"{t.run_id}: {status}")
    return 1 if failed else 0


def _parse_rows(text):
    rows = []
    for item in text.split(","):
        parts = item.split(":")
        kind, m = parts[0], int(parts[1])
        h = int(parts[2]) if len(parts) > 2 else None
        rows.append((kind, m, h))
    return tuple(rows)


def _cmd_bench(args) -> int:
    rows = _parse_rows(args.rows) if args.rows else TABLE_ROWS
    out = bench_inference(rows, n_train=args.n_train, n_test=args.n_test, seed=args.seed,
                          repeats=args.repeats, memory_budget=int(args.memory_budget_gib * 2**30))
    cols = ["method", "m", "h", "seconds_mean", "seconds_sd", "batch"]
    write_rows([{k: r[k] for k in cols} for r in out], args.output, cols)
    for r in out:
        print(f"{r['method']:>9} m={r['m']:<5} h={r['h']!s:<4} {r['seconds_mean']:.4f} ± {r['seconds_sd']:.4f} s  batch={r['batch']}"
              + (f"  ({r['note']})" if "note" in r else ""))
    return 0


def _cmd_diagnose(args) -> int:
    cfg = DiagnoseConfig.from_json(json.loads(Path(args.config).read_text())) if args.config else DiagnoseConfig()
    results = diagnose_posterior(cfg)
    for path in write_diagnostics(results, args.output):
        print(path)
    return 0


def _cmd_summarize(args) -> int:
    traces = [t for path in args.traces for t in bench.read_traces(path)]
    rows = summarize(traces)
    write_rows(rows, args.output)
    print(f"wrote {len(rows)} rows to {args.output}")
    return 0


def _cmd_precompute(args) -> int:
    problem = bench.load_problem(args.problem, recompute=False)
    s = dict(problem.oracle_settings)
    for key in ("grid_density", "n_mc", "seed"):
        if getattr(args, key) is not None:
            s[key] = getattr(args, key)
    x, v = bench.precompute_robust_optimum(problem, s["grid_density"], s["n_mc"], s["seed"])
    problem.robust_optimum, problem.robust_optimum_value, problem.oracle_settings = x, v, s
    if args.output:
        bench.save_problem(problem, args.output)
    print(json.dumps({"problem": problem.name, "robust_optimum": x.tolist(), "robust_optimum_value": v,
                      "oracle_settings": s}))
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="mmdbo", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    r = sub.add_parser("run", help="run a BO study and write per-iteration regret CSV")
    r.add_argument("--config", help="experiment JSON document")
    r.add_argument("--problem")
    r.add_argument("--algorithm")
    r.add_argument("--label")
    r.add_argument("--budget", type=int)
    r.add_argument("--init-points", dest="init_points", type=int)
    r.add_argument("--repeats", type=int)
    r.add_argument("--base-seed", dest="base_seed", type=int)
    r.add_argument("--n-mc-regret", dest="n_mc_regret", type=int)
    r.add_argument("--m", type=int)
    r.add_argument("--h", type=int)
    r.add_argument("--ugp-m", dest="ugp_m", type=int)
    r.add_argument("--lengthscale-refit-every", dest="lengthscale_refit_every", type=int)
    r.add_argument("--beta", type=float)
    r.add_argument("--no-timings", action="store_true", help="blank timing columns for byte-stable output")
    r.add_argument("--output")
    r.set_defaults(func=_cmd_run)

    b = sub.add_parser("bench-inference", help="posterior inference timing table")
    b.add_argument("--rows", help="comma list of kind:m[:h], e.g. empirical:100,nystrom:100:10")
    b.add_argument("--n-train", dest="n_train", type=int, default=10)
    b.add_argument("--n-test", dest="n_test", type=int, default=512)
    b.add_argument("--repeats", type=int, default=5)
    b.add_argument("--seed", type=int, default=0)
    b.add_argument("--memory-budget-gib", dest="memory_budget_gib", type=float, default=2.0)
    b.add_argument("--output", required=True)
    b.set_defaults(func=_cmd_bench)

    d = sub.add_parser("diagnose", help="dump posterior mean/variance over a 1D grid")
    d.add_argument("--config", help="diagnose JSON document")
    d.add_argument("--output", required=True, help="directory for one x,mean,var CSV per model")
    d.set_defaults(func=_cmd_diagnose)

    s = sub.add_parser("summarize", help="median/IQR regret per iteration and algorithm")
    s.add_argument("traces", nargs="+")
    s.add_argument("--output", required=True)
    s.set_defaults(func=_cmd_summarize)

    pc = sub.add_parser("precompute", help="recompute a problem's robust optimum")
    pc.add_argument("--problem", required=True, choices=bench.PROBLEM_NAMES)
    pc.add_argument("--grid-density", dest="grid_density", type=int)
    pc.add_argument("--n-mc", dest="n_mc", type=int)
    pc.add_argument("--seed", type=int)
    pc.add_argument("--output", help="write the updated problem JSON here")
    pc.set_defaults(func=_cmd_precompute)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(asctime)s %(name)s %(levelname)s %(message)s")
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())

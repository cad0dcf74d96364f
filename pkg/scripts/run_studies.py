"""Run the regret studies in configs/ and write traces plus summaries under results/.

Usage: python3 scripts/run_studies.py [--force] [--only STUDY ...]

A config is skipped when its trace file already exists, unless --force.
"""
import argparse
import logging
from pathlib import Path

from mmdbo.bench import read_traces
from mmdbo.experiment import ExperimentConfig, run_experiment, summarize, write_rows

ROOT = Path(__file__).resolve().parents[1]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--force", action="store_true")
    ap.add_argument("--only", nargs="*", help="study prefixes, e.g. rkhs ablation")
    args = ap.parse_args()
    logging.basicConfig(level=logging.INFO, format="%(asctime)s %(message)s")
    configs = sorted((ROOT / "configs").glob("*.json"))
    studies = {}
    for path in configs:
        study = path.stem.split("__")[0]
        if args.only and study not in args.only:
            continue
        cfg = ExperimentConfig.load(path)
        out = ROOT / cfg.output
        studies.setdefault(study, []).append(out)
        if out.exists() and not args.force:
            logging.info("skip %s (exists)", path.name)
            continue
        logging.info("run %s", path.name)
        tmp = out.with_suffix(".partial")
        run_experiment(cfg, tmp)
        tmp.replace(out)
    for study, outs in studies.items():
        traces = [t for o in outs if o.exists() for t in read_traces(o)]
        if traces:
            write_rows(summarize(traces), ROOT / "results" / study / "summary.csv")


if __name__ == "__main__":
    main()

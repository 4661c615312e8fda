#!/usr/bin/env python3
"""Run the repeated train/test protocol from a JSON config.

    python3 scripts/run_experiment.py configs/kronecker_s3.json --out runs/kronecker
"""
import argparse
import json
from pathlib import Path

from cltlearn.experiment import ExperimentConfig, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("config", type=Path)
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--jobs", type=int, default=1)
    ap.add_argument("--reps", type=int, help="override the number of repetitions")
    args = ap.parse_args()
    cfg = ExperimentConfig.from_dict(json.loads(args.config.read_text()))
    cfg.jobs = args.jobs
    if args.reps:
        cfg.reps = args.reps
    run_experiment(cfg, args.out)


if __name__ == "__main__":
    main()

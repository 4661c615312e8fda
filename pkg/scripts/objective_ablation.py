#!/usr/bin/env python3
"""Held-out scores of each LP objective on one split of a config's pool."""
import argparse
import json
from dataclasses import replace
from pathlib import Path

from cltlearn.experiment import ExperimentConfig, run_experiment


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("config", type=Path)
    ap.add_argument("--out", type=Path, required=True)
    ap.add_argument("--objectives", default="feasibility,margin,sparse,group")
    args = ap.parse_args()
    base = ExperimentConfig.from_dict(json.loads(args.config.read_text()))
    for obj in args.objectives.split(","):
        cfg = replace(base, objective=obj, reps=1, check_witness=False)
        res = run_experiment(cfg, args.out / obj, log=lambda *_: None)
        rep = res.reps[0].ours["micro"]
        print(f"{obj:<12} F1 {rep.f1:.4f} accuracy {rep.accuracy:.4f} edges {res.reps[0].learned_edges}")


if __name__ == "__main__":
    main()

#!/usr/bin/env python3
"""Compile random instances and compare against the simulator step by step."""
import argparse
import sys

from cltlearn.sweeps import equivalence_sweep


def main():
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--seed", type=int, default=0)
    ap.add_argument("--per-cell", type=int, default=7, help="instances per (N, S, scheme) cell")
    ap.add_argument("--trials", type=int, default=10, help="initial statuses per instance")
    ap.add_argument("--out", default="equivalence.csv")
    args = ap.parse_args()
    r = equivalence_sweep(args.seed, args.per_cell, args.trials, out=args.out)
    print(f"{r.instances} instances, {r.trials} trials: {r.final_mismatches} final, "
          f"{r.step_mismatches} per-step mismatches -> {args.out}")
    if r.first:
        print(r.first)
    sys.exit(1 if r.final_mismatches or r.step_mismatches else 0)


if __name__ == "__main__":
    main()

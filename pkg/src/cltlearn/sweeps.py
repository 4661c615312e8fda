"""Randomized sweeps: compiled net vs simulator, and zero training error.

Both write a deterministic CSV (one row per instance) so reruns can be
compared byte for byte.
"""
from __future__ import annotations

import csv
import itertools
import warnings
from dataclasses import dataclass, field
from fractions import Fraction
from pathlib import Path

import numpy as np

from .erm import ErmConfig, fit, training_mismatches, witness_violations
from .forge import (DEFAULT_INITIATOR, SAMPLE, IsolatedTargetUnderUniformScheme, gen_kronecker, gen_power_law,
                    generate_dataset, make_instance, sample_initial, stream)
from .metrics import zero_one_loss
from .model import CltInstance, Dataset
from .netcompile import compare_with_simulator, compile_net, unroll_forward
from .diffusion import influence_function

SCHEMES = ("weighted-cascade", "uniform-normalized")


def sweep_instance(n: int, s: int, scheme: str, seed: int) -> CltInstance:
    """Kronecker graphs for even seeds, preferential attachment for odd ones."""
    if seed % 2 == 0:
        g = gen_kronecker(DEFAULT_INITIATOR, int(np.log2(n)), seed)
    else:
        g = gen_power_law(n, 2, seed)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IsolatedTargetUnderUniformScheme)
        return make_instance(g, s, 3, scheme, seed)


@dataclass
class EquivalenceResult:
    instances: int = 0
    trials: int = 0
    final_mismatches: int = 0
    step_mismatches: int = 0
    first: str | None = None
    rows: list = field(default_factory=list)


def equivalence_sweep(seed: int = 0, per_cell: int = 7, trials: int = 10, sizes=(8, 16, 32, 64),
                      cascades=(2, 3, 4, 8), out: str | Path | None = None) -> EquivalenceResult:
    """Compile random instances and compare final and per-step statuses."""
    res = EquivalenceResult()
    k = 0
    for n, s, scheme in itertools.product(sizes, cascades, SCHEMES):
        for _ in range(per_cell):
            inst_seed = seed * 1_000_003 + k
            k += 1
            inst = sweep_instance(n, s, scheme, inst_seed)
            net = compile_net(inst)
            inits = [sample_initial(n, s, stream(inst_seed, SAMPLE, j)) for j in range(trials)]
            bad_final = sum(not np.array_equal(unroll_forward(net, x), influence_function(inst, x)) for x in inits)
            bad_steps, first = compare_with_simulator(net, inst, inits)
            res.instances += 1
            res.trials += trials
            res.final_mismatches += bad_final
            res.step_mismatches += bad_steps
            if first is not None and res.first is None:
                res.first = f"instance {inst_seed}: " + first.describe()
            res.rows.append([inst_seed, n, s, scheme, inst.graph.m, net.depth, trials, bad_final, bad_steps])
    if out is not None:
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["seed", "n", "s", "scheme", "edges", "layers", "trials", "final_mismatches",
                        "step_mismatches"])
            w.writerows(res.rows)
    return res


@dataclass
class RealizabilityResult:
    instances: int = 0
    infeasible_nodes: int = 0
    flagged_nodes: int = 0
    mismatched_samples: int = 0
    loss: Fraction = Fraction(0)
    witness_violations: int = 0
    witness_rows: int = 0
    rows: list = field(default_factory=list)
    datasets: list = field(default_factory=list)


def realizability_sweep(seed: int = 0, count: int = 20, k: int = 50, sizes=(16, 32, 64, 128),
                        cascades=(1, 2, 3, 4), config: ErmConfig | None = None,
                        out: str | Path | None = None, keep: bool = False) -> RealizabilityResult:
    """Fit on simulated data and replay the training set exactly."""
    cfg = config or ErmConfig()
    res = RealizabilityResult()
    for r in range(count):
        n, s = sizes[r % len(sizes)], cascades[(r // len(sizes)) % len(cascades)]
        scheme = SCHEMES[(r + r // 8) % 2]
        inst_seed = seed * 1_000_003 + r
        inst = sweep_instance(n, s, scheme, inst_seed)
        ds = generate_dataset(inst, k, inst_seed)
        learned = fit(ds, cfg, strict=False)
        infeasible = sum(d.status != "Feasible" for d in learned.diagnostics)
        mism = training_mismatches(learned, ds)
        loss = sum((zero_one_loss(smp.final(), influence_function(learned.instance, smp.initial)) for smp in ds),
                   Fraction(0))
        wit = witness_violations(inst, ds, cfg)
        nviol = sum(len(v["rows"]) + len(v["bounds"]) for v in wit["violations"].values())
        res.instances += 1
        res.infeasible_nodes += infeasible
        res.flagged_nodes += len(learned.flagged)
        res.mismatched_samples += len(mism)
        res.loss += loss
        res.witness_violations += nviol
        res.witness_rows += wit["rows"]
        res.rows.append([inst_seed, n, s, scheme, inst.graph.m, k, infeasible, len(learned.flagged), len(mism),
                         str(loss), learned.instance.q, learned.instance.graph.m, wit["rows"], nviol])
        if keep:
            res.datasets.append((inst, ds))
    if out is not None:
        with open(out, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["seed", "n", "s", "scheme", "edges", "samples", "infeasible_nodes", "flagged_nodes",
                        "mismatched_samples", "training_loss", "learned_q", "learned_edges", "witness_rows",
                        "witness_violations"])
            w.writerows(res.rows)
    return res

"""Train/test protocol over a sample pool, repeated with split seeds."""
from __future__ import annotations

import csv
import json
import time
import warnings
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from .erm import ErmConfig, fit, training_mismatches, witness_violations
from .fixed import ScaledValue
from .forge import SPLIT, GenSpec, IsolatedTargetUnderUniformScheme, generate_dataset, make_graph, make_instance, stream
from .lp import SolverConfig
from .metrics import MetricsReport, aggregate, evaluate, evaluate_random, format_table, write_report_csv


@dataclass
class ExperimentConfig:
    gen: GenSpec = field(default_factory=GenSpec)
    pool: int = 2000
    train: int = 100
    test: int = 500
    reps: int = 5
    objective: str = "group"
    eps: str | None = None
    candidates: str = "all"
    lp_method: str = "auto"
    lp_max_iters: int = 100_000
    lp_tol: float = 1e-9
    steps: int = 5  # step-matching depth
    check_witness: bool = False
    jobs: int = 1

    def __post_init__(self):
        if isinstance(self.gen, dict):
            gen = dict(self.gen)
            if "initiator" in gen:
                gen["initiator"] = tuple(tuple(r) for r in gen["initiator"])
            if "seed_fraction" in gen:
                gen["seed_fraction"] = tuple(gen["seed_fraction"])
            self.gen = GenSpec(**gen)
        if self.train + self.test > self.pool:
            raise ValueError("train + test exceeds the pool")
        if self.reps < 1:
            raise ValueError("need at least one repetition")

    @classmethod
    def from_dict(cls, d: dict) -> "ExperimentConfig":
        return cls(**d)

    def to_dict(self) -> dict:
        return asdict(self)

    def erm(self, q: int, graph=None) -> ErmConfig:
        eps = ScaledValue.from_decimal_string(self.eps, q) if self.eps else None
        return ErmConfig(eps=eps, candidates=self.candidates, graph=graph if self.candidates == "known-graph" else None,
                         objective=self.objective,
                         solver=SolverConfig(max_iters=self.lp_max_iters, tol=self.lp_tol, method=self.lp_method))


@dataclass
class RepResult:
    rep: int
    ours: dict[str, MetricsReport]
    random: dict[str, MetricsReport]
    train_mismatches: int
    witness_violations: int | None
    flagged_nodes: int
    learned_edges: int
    learned_q: int
    seconds: dict[str, float]


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    reps: list[RepResult]
    pool_steps: float
    pool_active: float

    def summary(self) -> dict[str, tuple[float, float, int]]:
        out = {}
        for method in ("ours", "random"):
            for avg in ("micro", "node"):
                agg = aggregate(getattr(r, method)[avg] for r in self.reps)
                for key, val in agg.items():
                    if method == "random" and key.startswith("step_"):
                        continue
                    out[f"{method}_{avg}_{key}"] = val
        return out


def run_experiment(cfg: ExperimentConfig, outdir: str | Path | None = None, log=print) -> ExperimentResult:
    t0 = time.perf_counter()
    seed = cfg.gen.seed
    graph = make_graph(cfg.gen)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IsolatedTargetUnderUniformScheme)
        inst = make_instance(graph, cfg.gen.s, cfg.gen.q, cfg.gen.scheme, seed)
    pool = generate_dataset(inst, cfg.pool, seed, jobs=cfg.jobs, fraction=cfg.gen.seed_fraction)
    steps = float(np.mean([smp.n_changing for smp in pool])) if len(pool) else 0.0
    active = float(np.mean([smp.final().sum() for smp in pool])) if len(pool) else 0.0
    log(f"graph: {graph.n} nodes, {graph.m} edges; pool of {len(pool)}: "
        f"{steps:.2f} steps, {active:.1f} active on average")
    t_gen = time.perf_counter() - t0
    erm = cfg.erm(cfg.gen.q, graph)
    reps = []
    for r in range(cfg.reps):
        perm = stream(seed, SPLIT, r).permutation(cfg.pool)
        train = pool.subset(perm[: cfg.train])
        test = pool.subset(perm[cfg.train: cfg.train + cfg.test])
        t1 = time.perf_counter()
        learned = fit(train, erm, jobs=cfg.jobs)
        t2 = time.perf_counter()
        ours = {avg: evaluate(learned.instance, test, avg, cfg.steps) for avg in ("micro", "node")}
        rand = {avg: evaluate_random(test, seed, avg, rep=r) for avg in ("micro", "node")}
        t3 = time.perf_counter()
        wit = None
        if cfg.check_witness:
            wit = sum(len(v["rows"]) + len(v["bounds"])
                      for v in witness_violations(inst, train, erm)["violations"].values())
        res = RepResult(r, ours, rand, len(training_mismatches(learned, train)), wit, len(learned.flagged),
                        learned.instance.graph.m, learned.instance.q,
                        {"fit": t2 - t1, "evaluate": t3 - t2, "witness": time.perf_counter() - t3})
        reps.append(res)
        log(f"rep {r + 1}/{cfg.reps}: F1 {ours['micro'].f1:.4f} accuracy {ours['micro'].accuracy:.4f} "
            f"(random F1 {rand['micro'].f1:.4f}) fit {t2 - t1:.1f}s")
    result = ExperimentResult(cfg, reps, steps, active)
    if outdir is not None:
        write_outputs(result, Path(outdir), {"generate": t_gen})
    log(format_table(result.summary()))
    return result


def write_outputs(result: ExperimentResult, outdir: Path, extra_times: dict | None = None) -> None:
    """Deterministic reports plus a separate wall-time file."""
    outdir.mkdir(parents=True, exist_ok=True)
    (outdir / "config.json").write_text(json.dumps(result.config.to_dict(), indent=1, sort_keys=True) + "\n")
    write_report_csv(outdir / "report.csv", result.summary())
    with open(outdir / "per_rep.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        steps = result.config.steps
        w.writerow(["rep", "method", "average", "loss", "precision", "recall", "f1", "accuracy"]
                   + [f"step_{t + 1}" for t in range(steps)])
        for r in result.reps:
            for method in ("ours", "random"):
                for avg, rep in getattr(r, method).items():
                    rates = [f"{x:.6f}" for x in rep.step_rates] + [""] * (steps - len(rep.step_rates))
                    w.writerow([r.rep + 1, method, avg] + [f"{v:.6f}" for v in rep.row().values()] + rates)
    with open(outdir / "training.csv", "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["rep", "train_mismatches", "witness_violations", "flagged_nodes", "learned_edges", "learned_q"])
        for r in result.reps:
            w.writerow([r.rep + 1, r.train_mismatches, "" if r.witness_violations is None else r.witness_violations,
                        r.flagged_nodes, r.learned_edges, r.learned_q])
    times = dict(extra_times or {})
    times["reps"] = [r.seconds for r in result.reps]
    (outdir / "timings.json").write_text(json.dumps(times, indent=1) + "\n")

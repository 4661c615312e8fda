"""``clt``: generate, train, predict, evaluate and verify CLT models.

Exit codes: 0 success, 1 verification failure, 2 invalid input, 3 infeasible LP.
"""
from __future__ import annotations

import argparse
import json
import os
import secrets
import sys
import time
import warnings
from pathlib import Path

import numpy as np

from . import __version__
from .io import (dump_dataset, load_dataset, load_graph, load_instance, read_edge_list, read_json, sample_from_dict,
                 save_dataset, save_graph, save_instance, write_json, _bits, _unbits)

EXIT_OK, EXIT_VERIFY, EXIT_INPUT, EXIT_INFEASIBLE = 0, 1, 2, 3


class InputError(Exception):
    pass


def _jobs_default() -> int:
    try:
        return max(1, int(os.environ.get("CLT_JOBS", "1")))
    except ValueError:
        return 1


def _seed(args) -> int:
    if getattr(args, "seed", None) is None:
        args.seed = secrets.randbits(63)
        print(f"seed: {args.seed}", file=sys.stderr)
    return args.seed


def _pair(text: str, cast=float) -> tuple:
    parts = [cast(x) for x in text.replace(" ", "").split(",") if x]
    if len(parts) != 2:
        raise argparse.ArgumentTypeError(f"expected two comma-separated values, got {text!r}")
    return tuple(parts)


def _initiator(text: str):
    vals = [float(x) for x in text.replace(" ", "").split(",") if x]
    if len(vals) != 4:
        raise argparse.ArgumentTypeError("initiator needs four comma-separated probabilities")
    return ((vals[0], vals[1]), (vals[2], vals[3]))


def _provenance(args, out: str | Path) -> None:
    """Write the resolved arguments next to an output."""
    cfg = {k: (str(v) if isinstance(v, Path) else v) for k, v in vars(args).items() if k != "func"}
    cfg["version"] = __version__
    path = Path(out)
    target = path / "config.json" if path.is_dir() else path.with_name(path.name + ".config.json")
    write_json(cfg, target)


# ---------------------------------------------------------------- generators


def cmd_gen_graph(args) -> int:
    from .forge import DEFAULT_INITIATOR, gen_kronecker, gen_power_law
    seed = _seed(args)
    if args.kind == "kronecker":
        g = gen_kronecker(args.initiator or DEFAULT_INITIATOR, args.power, seed)
    elif args.kind == "powerlaw":
        g = gen_power_law(args.n, args.m, seed)
    else:
        if not args.path:
            raise InputError("--path is required for import")
        g = read_edge_list(args.path)
    save_graph(g, args.out)
    _provenance(args, args.out)
    print(f"{g.n} nodes, {g.m} edges -> {args.out}")
    return EXIT_OK


def cmd_gen_instance(args) -> int:
    from .forge import make_instance
    from .model import validate_instance
    seed = _seed(args)
    g = load_graph(args.graph)
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always")
        inst = make_instance(g, args.s, args.q, args.scheme, seed)
    for w in caught:
        print(f"warning: {w.message}", file=sys.stderr)
    problems = validate_instance(inst)
    if problems:
        raise InputError(f"generated instance is invalid: {problems[0]}")
    save_instance(inst, args.out)
    _provenance(args, args.out)
    print(f"instance with S={inst.s}, Q={inst.q} -> {args.out}")
    return EXIT_OK


def cmd_gen_data(args) -> int:
    from .forge import generate_dataset
    seed = _seed(args)
    inst = load_instance(args.instance)
    ds = generate_dataset(inst, args.k, seed, jobs=args.jobs, fraction=args.seed_fraction, start=args.start)
    save_dataset(ds, args.out)
    _provenance(args, args.out)
    steps = np.mean([s.n_changing for s in ds]) if len(ds) else 0.0
    print(f"{len(ds)} samples ({steps:.2f} steps on average) -> {args.out}")
    return EXIT_OK


# ---------------------------------------------------------------- learning


def _erm_config(args, q: int):
    from .erm import ErmConfig
    from .fixed import ScaledValue
    from .lp import SolverConfig
    graph = load_graph(args.known_graph) if args.known_graph else None
    eps = ScaledValue.from_decimal_string(args.eps, q) if args.eps else None
    return ErmConfig(eps=eps, candidates="known-graph" if graph is not None else "all", graph=graph,
                     objective=args.objective,
                     solver=SolverConfig(max_iters=args.lp_max_iters, tol=args.lp_tol, method=args.lp_method))


def cmd_train(args) -> int:
    from .erm import NodeLpInfeasible, build_node_lp, fit, step_table, training_mismatches
    from .lp import export_lp_format
    ds = load_dataset(args.data)
    cfg = _erm_config(args, ds.q)
    if args.export_lp:
        out = Path(args.export_lp)
        out.mkdir(parents=True, exist_ok=True)
        tab = step_table(ds)
        for v in range(ds.n):
            (out / f"node_{v + 1}.lp").write_text(export_lp_format(build_node_lp(tab, v, cfg).problem, f"node {v + 1}"))
    t0 = time.perf_counter()
    try:
        learned = fit(ds, cfg, jobs=args.jobs)
    except NodeLpInfeasible as exc:
        print(f"error: {exc}; certificate rows {exc.certificate[:20]}", file=sys.stderr)
        return EXIT_INFEASIBLE
    save_instance(learned.instance, args.out)
    _provenance(args, args.out)
    diag = Path(args.out).with_name(Path(args.out).name + ".diagnostics.json")
    write_json({"nodes": [vars(d) for d in learned.diagnostics], "seconds": time.perf_counter() - t0}, diag)
    bad = training_mismatches(learned, ds)
    print(f"learned {learned.instance.graph.m} edges at Q={learned.instance.q}; "
          f"{len(learned.flagged)} flagged nodes; training mismatches: {len(bad)} -> {args.out}")
    return EXIT_OK


def _read_initials(path, n: int, s: int) -> list[np.ndarray]:
    out = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                out.append(_unbits(rec["i0"], n, s))
    return out


def cmd_predict(args) -> int:
    from .erm import predict
    inst = load_instance(args.instance)
    inits = _read_initials(args.seeds, inst.n, inst.s)
    with open(args.out, "w") as fh:
        for init in inits:
            fh.write(json.dumps({"i0": _bits(init), "final": _bits(predict(inst, init))}, separators=(",", ":")) + "\n")
    _provenance(args, args.out)
    print(f"{len(inits)} predictions -> {args.out}")
    return EXIT_OK


def cmd_eval(args) -> int:
    from .metrics import evaluate, evaluate_random, format_table, write_report_csv
    inst = load_instance(args.instance)
    ds = load_dataset(args.data)
    if (ds.n, ds.s) != (inst.n, inst.s):
        raise InputError(f"data is {ds.n}x{ds.s}, instance is {inst.n}x{inst.s}")
    rep = evaluate(inst, ds, args.average, args.step_matching)
    summary = {k: (v, 0.0, 1) for k, v in rep.row().items()}
    for t, r in enumerate(rep.step_rates):
        summary[f"step_{t + 1}"] = (r, 0.0, 1)
    if args.random_seed is not None:
        rnd = evaluate_random(ds, args.random_seed, args.average)
        summary.update({f"random_{k}": (v, 0.0, 1) for k, v in rnd.row().items()})
    write_report_csv(args.out, summary)
    _provenance(args, args.out)
    print(format_table(summary))
    return EXIT_OK


# ---------------------------------------------------------------- networks


def cmd_verify(args) -> int:
    from .forge import SAMPLE, sample_initial, stream
    from .netcompile import compare_with_simulator, compile_net, net_from_dict
    seed = _seed(args)
    inst = load_instance(args.instance)
    net = net_from_dict(read_json(args.net)) if args.net else compile_net(inst)
    if (net.n, net.s) != (inst.n, inst.s):
        raise InputError("net and instance sizes differ")
    inits = [sample_initial(inst.n, inst.s, stream(seed, SAMPLE, k)) for k in range(args.trials)]
    bad, first = compare_with_simulator(net, inst, inits)
    print(f"{args.trials} trials, {bad} mismatches ({net.depth} layers per step)")
    if first is not None:
        print(first.describe())
        return EXIT_VERIFY
    return EXIT_OK


def cmd_net_dump(args) -> int:
    from .netcompile import audit, compile_net, net_to_dict
    inst = load_instance(args.instance)
    net = compile_net(inst, fast_s2=not args.no_fast_path)
    write_json(net_to_dict(net), args.out)
    _provenance(args, args.out)
    a = audit(net)
    print(f"{a['layers']} layers, {a['adjustable_weights']} adjustable weights, "
          f"at most {a['max_pieces']} pieces per activation -> {args.out}")
    return EXIT_OK


def cmd_export_lp(args) -> int:
    from .erm import build_node_lp, step_table
    from .lp import export_lp_format
    ds = load_dataset(args.data)
    cfg = _erm_config(args, ds.q)
    tab = step_table(ds)
    nodes = [v - 1 for v in args.node] if args.node else range(ds.n)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for v in nodes:
        if not 0 <= v < ds.n:
            raise InputError(f"node {v + 1} out of range 1..{ds.n}")
        nlp = build_node_lp(tab, v, cfg, reduce=args.reduce)
        (out / f"node_{v + 1}.lp").write_text(export_lp_format(nlp.problem, f"node {v + 1}"))
    _provenance(args, out)
    print(f"{len(nodes)} LP files -> {out}")
    return EXIT_OK


def cmd_experiment(args) -> int:
    from .experiment import ExperimentConfig, run_experiment
    cfg = ExperimentConfig.from_dict(read_json(args.config))
    if args.jobs:
        cfg.jobs = args.jobs
    run_experiment(cfg, args.out)
    return EXIT_OK


# ---------------------------------------------------------------- parser


def _add_lp_flags(p):
    p.add_argument("--eps", help="strict-inequality margin as a decimal (default: one grid unit)")
    p.add_argument("--known-graph", help="restrict candidate in-neighbors to this graph's edges")
    p.add_argument("--objective", default="group", choices=["feasibility", "margin", "sparse", "group"],
                   help="LP objective; every choice has zero training error (default: group)")
    p.add_argument("--lp-method", default="auto", choices=["auto", "simplex", "highs"], help="LP backend")
    p.add_argument("--lp-max-iters", type=int, default=100_000, help="iteration limit per LP")
    p.add_argument("--lp-tol", type=float, default=1e-9, help="feasibility tolerance before snapping")


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="clt", description=__doc__.splitlines()[0])
    ap.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-graph", help="generate or import a graph")
    p.add_argument("--kind", choices=["kronecker", "powerlaw", "import"], default="kronecker")
    p.add_argument("--power", type=int, default=10, help="Kronecker power k (2^k nodes)")
    p.add_argument("--initiator", type=_initiator, help="2x2 initiator as a,b,c,d")
    p.add_argument("--n", type=int, default=768, help="power-law node count")
    p.add_argument("--m", type=int, default=2, help="power-law out-degree")
    p.add_argument("--path", help="edge list for --kind import")
    p.add_argument("--seed", type=int, help="master seed (random if omitted)")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_graph)

    p = sub.add_parser("gen-instance", help="draw weights and thresholds for a graph")
    p.add_argument("--graph", required=True)
    p.add_argument("--s", type=int, default=3, help="number of cascades")
    p.add_argument("--q", type=int, default=3, help="decimal digits of precision")
    p.add_argument("--scheme", choices=["weighted-cascade", "uniform-normalized"], default="weighted-cascade")
    p.add_argument("--seed", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_instance)

    p = sub.add_parser("gen-data", help="simulate a sample pool")
    p.add_argument("--instance", required=True)
    p.add_argument("--k", type=int, default=2000, help="number of samples")
    p.add_argument("--start", type=int, default=0, help="index of the first sample substream")
    p.add_argument("--seed-fraction", type=_pair, default=(0.1, 0.5), help="seed share range lo,hi")
    p.add_argument("--seed", type=int)
    p.add_argument("--jobs", type=int, default=_jobs_default())
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_gen_data)

    p = sub.add_parser("train", help="fit an instance by per-node LPs")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True)
    p.add_argument("--jobs", type=int, default=_jobs_default())
    p.add_argument("--export-lp", help="also write every node LP to this directory")
    _add_lp_flags(p)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("predict", help="final statuses for initial statuses")
    p.add_argument("--instance", required=True)
    p.add_argument("--seeds", required=True, help="JSON lines with an 'i0' field")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("eval", help="score an instance on recorded samples")
    p.add_argument("--instance", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="CSV report")
    p.add_argument("--average", choices=["micro", "macro", "node"], default="micro")
    p.add_argument("--step-matching", type=int, nargs="?", const=5, default=0, metavar="STEPS",
                   help="also report per-step match rates (default depth 5)")
    p.add_argument("--random-seed", type=int, help="also score the random baseline")
    p.set_defaults(func=cmd_eval)

    p = sub.add_parser("verify", help="check the compiled network against the simulator")
    p.add_argument("--instance", required=True)
    p.add_argument("--trials", type=int, default=100)
    p.add_argument("--net", help="verify this network dump instead of compiling")
    p.add_argument("--seed", type=int)
    p.set_defaults(func=cmd_verify)

    p = sub.add_parser("net", help="network utilities")
    nsub = p.add_subparsers(dest="net_command", required=True)
    d = nsub.add_parser("dump", help="compile an instance and write the network")
    d.add_argument("--instance", required=True)
    d.add_argument("--out", required=True)
    d.add_argument("--no-fast-path", action="store_true", help="use the general construction for S=2")
    d.set_defaults(func=cmd_net_dump)

    p = sub.add_parser("export-lp", help="write node LPs in LP file format")
    p.add_argument("--data", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--node", type=int, action="append", help="1-based node (repeatable; default all)")
    p.add_argument("--reduce", action="store_true", help="apply the equivalence-preserving reductions")
    _add_lp_flags(p)
    p.set_defaults(func=cmd_export_lp)

    p = sub.add_parser("experiment", help="run the repeated train/test protocol from a JSON config")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="output directory")
    p.add_argument("--jobs", type=int, default=None)
    p.set_defaults(func=cmd_experiment)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (InputError, ValueError, KeyError, FileNotFoundError, json.JSONDecodeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT


if __name__ == "__main__":
    sys.exit(main())

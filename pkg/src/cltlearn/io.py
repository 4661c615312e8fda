"""JSON / JSON-lines serialization (1-based indices, decimal strings)."""
from __future__ import annotations

import json
from pathlib import Path
from typing import IO, Iterable

import numpy as np

from .fixed import format_units, parse_units
from .model import CltInstance, Dataset, Graph, Trajectory


def graph_to_dict(g: Graph) -> dict:
    return {"n": g.n, "edges": (g.edges + 1).tolist()}


def graph_from_dict(d: dict) -> Graph:
    edges = np.asarray(d.get("edges", []), dtype=np.int64).reshape(-1, 2) - 1
    return Graph(int(d["n"]), edges)


def instance_to_dict(inst: CltInstance) -> dict:
    e = inst.graph.edges
    weights = [
        [int(e[k, 0]) + 1, int(e[k, 1]) + 1, s + 1, format_units(int(inst.weights[k, s]), inst.q)]
        for k in range(inst.graph.m) for s in range(inst.s)
    ]
    thresholds = [
        [i + 1, s + 1, format_units(int(inst.thresholds[i, s]), inst.q)]
        for i in range(inst.n) for s in range(inst.s)
    ]
    return {"q": inst.q, "s": inst.s, "graph": graph_to_dict(inst.graph),
            "weights": weights, "thresholds": thresholds}


def instance_from_dict(d: dict) -> CltInstance:
    q, s = int(d["q"]), int(d["s"])
    g = graph_from_dict(d["graph"])
    w = np.zeros((g.m, s), dtype=np.int64)
    for src, dst, c, val in d.get("weights", []):
        k = g.edge_index(int(src) - 1, int(dst) - 1)
        if k < 0:
            raise ValueError(f"weight on missing edge {src}->{dst}")
        w[k, int(c) - 1] = parse_units(str(val), q, allow_negative=False)
    th = np.zeros((g.n, s), dtype=np.int64)
    for i, c, val in d.get("thresholds", []):
        th[int(i) - 1, int(c) - 1] = parse_units(str(val), q, allow_negative=False)
    return CltInstance(g, s, q, w, th)


def _bits(a: np.ndarray) -> list[list[int]]:
    return [[int(i) + 1, int(s) + 1] for i, s in zip(*np.nonzero(a))]


def _unbits(pairs: Iterable, n: int, s: int) -> np.ndarray:
    a = np.zeros((n, s), dtype=bool)
    for i, c in pairs:
        a[int(i) - 1, int(c) - 1] = True
    return a


def sample_to_dict(traj: Trajectory) -> dict:
    return {
        "n": traj.n, "s": traj.s, "horizon": traj.horizon,
        "i0": _bits(traj.initial),
        "steps": [{"p1": _bits(p1), "p2": _bits(p2)} for p1, p2 in traj.steps],
    }


def sample_from_dict(d: dict, n: int | None = None, s: int | None = None) -> Trajectory:
    n = int(d.get("n", n))
    s = int(d.get("s", s))
    init = _unbits(d["i0"], n, s)
    steps = [(_unbits(st["p1"], n, s), _unbits(st["p2"], n, s)) for st in d.get("steps", [])]
    # explicit fixed-point repeats are folded into the run-length tail
    prev = steps[-2][1] if len(steps) > 1 else init
    while steps and np.array_equal(steps[-1][1], prev) and np.array_equal(steps[-1][0], prev):
        steps.pop()
        prev = steps[-2][1] if len(steps) > 1 else init
    return Trajectory(init, tuple(steps), int(d.get("horizon", n)))


def write_json(obj: dict, path: str | Path) -> None:
    Path(path).write_text(json.dumps(obj, indent=1, sort_keys=True) + "\n")


def read_json(path: str | Path) -> dict:
    return json.loads(Path(path).read_text())


def save_graph(g: Graph, path) -> None:
    write_json(graph_to_dict(g), path)


def load_graph(path) -> Graph:
    return graph_from_dict(read_json(path))


def save_instance(inst: CltInstance, path) -> None:
    write_json(instance_to_dict(inst), path)


def load_instance(path) -> CltInstance:
    return instance_from_dict(read_json(path))


def dump_dataset(ds: Dataset, fh: IO[str]) -> None:
    for smp in ds:
        rec = sample_to_dict(smp)
        rec["q"] = ds.q
        fh.write(json.dumps(rec, separators=(",", ":"), sort_keys=True) + "\n")


def save_dataset(ds: Dataset, path) -> None:
    with open(path, "w") as fh:
        dump_dataset(ds, fh)


def load_dataset(path, n: int | None = None, s: int | None = None, q: int = 3) -> Dataset:
    samples = []
    with open(path) as fh:
        for line in fh:
            if line.strip():
                rec = json.loads(line)
                q = int(rec.get("q", q))
                samples.append(sample_from_dict(rec, n, s))
    if samples:
        n, s = samples[0].n, samples[0].s
    if n is None or s is None:
        raise ValueError("empty dataset file: pass n and s explicitly")
    return Dataset(n, s, q, tuple(samples))


def read_edge_list(path) -> Graph:
    """Whitespace or comma separated ``src dst`` lines; 0/1-based autodetected."""
    pairs = []
    with open(path) as fh:
        for line in fh:
            line = line.split("#", 1)[0].replace(",", " ").split()
            if len(line) >= 2:
                pairs.append((int(line[0]), int(line[1])))
    if not pairs:
        return Graph(0, np.zeros((0, 2), dtype=np.int64))
    e = np.asarray(pairs, dtype=np.int64)
    if e.min() >= 1:
        e = e - 1
    return Graph.from_edges(int(e.max()) + 1, e, dedupe=True)

"""Synthetic graphs, CLT instances and sample pools.

Randomness comes from Philox (a counter-based generator) keyed through
``numpy.random.SeedSequence``.  Every stage draws from its own substream,
``stream(master, purpose, index)``, so splitting work across processes never
changes the outputs.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np

from .diffusion import run
from .model import CltInstance, Dataset, Graph

# substream purposes
GRAPH, INSTANCE, SAMPLE, SPLIT, BASELINE = 1, 2, 3, 4, 5

DEFAULT_INITIATOR = ((0.9, 0.5), (0.5, 0.3))  # 2.2**10 ~ 2656 expected entries at k=10


class IsolatedTargetUnderUniformScheme(UserWarning):
    """A node without in-edges cannot get weights summing to one."""


def stream(master: int, *key: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(master, spawn_key=tuple(key))))


@dataclass
class GenSpec:
    graph: str = "kronecker"  # kronecker | powerlaw | import
    initiator: tuple[tuple[float, float], tuple[float, float]] = DEFAULT_INITIATOR
    power: int = 10
    n: int = 768
    m: int = 2
    path: str | None = None
    s: int = 3
    q: int = 3
    scheme: str = "weighted-cascade"  # weighted-cascade | uniform-normalized
    seed_fraction: tuple[float, float] = (0.1, 0.5)
    seed: int = 0

    def __post_init__(self):
        p = np.asarray(self.initiator, dtype=float)
        if p.shape != (2, 2) or np.any(p < 0) or np.any(p > 1):
            raise ValueError("initiator must be a 2x2 matrix of probabilities")
        if self.s < 1 or self.q < 1:
            raise ValueError("need S >= 1 and Q >= 1")
        if self.scheme not in ("weighted-cascade", "uniform-normalized"):
            raise ValueError(f"unknown weight scheme {self.scheme!r}")


def kronecker_probabilities(initiator, k: int) -> np.ndarray:
    p = np.asarray(initiator, dtype=float)
    out = p
    for _ in range(k - 1):
        out = np.kron(out, p)
    return out


def gen_kronecker(initiator, k: int, rng_seed: int) -> Graph:
    """Stochastic Kronecker graph on ``2**k`` nodes, one Bernoulli per entry."""
    if k < 1:
        raise ValueError("k must be >= 1")
    probs = kronecker_probabilities(initiator, k)
    rng = stream(rng_seed, GRAPH, 0)
    hit = rng.random(probs.shape) < probs
    np.fill_diagonal(hit, False)
    src, dst = np.nonzero(hit)
    return Graph(probs.shape[0], np.stack([src, dst], axis=1))


def kronecker_expected_edges(initiator, k: int) -> float:
    p = np.asarray(initiator, dtype=float)
    return float(p.sum() ** k - np.trace(p) ** k)


def gen_power_law(n: int, m: int, rng_seed: int) -> Graph:
    """Directed preferential attachment.

    Nodes ``0..m-1`` start unconnected; each later node sends ``m`` edges to
    distinct earlier nodes drawn with probability proportional to
    ``in-degree + 1``.
    """
    if not n > m >= 1:
        raise ValueError("need n > m >= 1")
    rng = stream(rng_seed, GRAPH, 1)
    weight = np.ones(n, dtype=float)
    edges = np.empty((m * (n - m), 2), dtype=np.int64)
    r = 0
    for v in range(m, n):
        w = weight[:v]
        targets = rng.choice(v, size=m, replace=False, p=w / w.sum())
        for u in np.sort(targets):
            edges[r] = (v, u)
            r += 1
        weight[targets] += 1.0
    return Graph(n, edges)


def make_graph(spec: GenSpec) -> Graph:
    if spec.graph == "kronecker":
        return gen_kronecker(spec.initiator, spec.power, spec.seed)
    if spec.graph == "powerlaw":
        return gen_power_law(spec.n, spec.m, spec.seed)
    if spec.graph == "import":
        from .io import read_edge_list
        return read_edge_list(spec.path)
    raise ValueError(f"unknown graph recipe {spec.graph!r}")


def weighted_cascade_units(indeg: int, s: int, q: int) -> int:
    """``floor(10**q / (indeg + s/7))`` with 1-based cascade ``s``."""
    return (7 * 10**q) // (7 * indeg + s)


def largest_remainder(raw: np.ndarray, total: int) -> np.ndarray:
    """Integers proportional to ``raw`` that sum exactly to ``total``."""
    raw = np.asarray(raw, dtype=float)
    if raw.sum() <= 0:
        raw = np.ones_like(raw)
    share = raw / raw.sum() * total
    base = np.floor(share).astype(np.int64)
    short = total - int(base.sum())
    # ties broken by position for determinism
    order = np.lexsort((np.arange(len(raw)), -(share - base)))
    base[order[:short]] += 1
    return base


def make_instance(graph: Graph, s: int, q: int, scheme: str, rng_seed: int) -> CltInstance:
    rng = stream(rng_seed, INSTANCE, 0)
    one = 10**q
    indeg = graph.in_degrees()
    w = np.zeros((graph.m, s), dtype=np.int64)
    if scheme == "weighted-cascade":
        dst = graph.edges[:, 1]
        for c in range(s):
            w[:, c] = (7 * one) // (7 * indeg[dst] + (c + 1))
    elif scheme == "uniform-normalized":
        isolated = 0
        for v in range(graph.n):
            eids = graph.in_edge_ids(v)
            if eids.size == 0:
                isolated += 1
                continue
            for c in range(s):
                w[eids, c] = largest_remainder(rng.random(eids.size), one)
        if isolated:
            warnings.warn(f"{isolated} nodes have no in-edges; their weights stay empty",
                          IsolatedTargetUnderUniformScheme, stacklevel=2)
    else:
        raise ValueError(f"unknown weight scheme {scheme!r}")
    th = rng.integers(1, one, size=(graph.n, s), endpoint=True, dtype=np.int64)
    return CltInstance(graph, s, q, w, th)


def seed_count_range(n: int, lo: float = 0.1, hi: float = 0.5) -> tuple[int, int]:
    a, b = math.ceil(lo * n - 1e-9), math.floor(hi * n + 1e-9)
    return max(a, 0), max(b, max(a, 0))


def sample_initial(n: int, s: int, rng: np.random.Generator, count: int | None = None,
                   fraction: tuple[float, float] = (0.1, 0.5)) -> np.ndarray:
    """Random disjoint seed sets: uniform count, uniform subset, uniform cascade."""
    if count is None:
        lo, hi = seed_count_range(n, *fraction)
        count = int(rng.integers(lo, hi, endpoint=True))
    nodes = rng.choice(n, size=count, replace=False)
    casc = rng.integers(0, s, size=count)
    init = np.zeros((n, s), dtype=bool)
    init[nodes, casc] = True
    return init


def generate_sample(instance: CltInstance, rng_seed: int, k: int,
                    fraction: tuple[float, float] = (0.1, 0.5)):
    rng = stream(rng_seed, SAMPLE, k)
    return run(instance, sample_initial(instance.n, instance.s, rng, fraction=fraction))


def generate_dataset(instance: CltInstance, K: int, rng_seed: int, jobs: int = 1,
                     fraction: tuple[float, float] = (0.1, 0.5), start: int = 0) -> Dataset:
    """``K`` samples; sample ``k`` uses substream ``(SAMPLE, start + k)``."""
    idx = range(start, start + K)
    if jobs > 1 and K > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(jobs) as ex:
            samples = list(ex.map(generate_sample, [instance] * K, [rng_seed] * K, idx, [fraction] * K,
                                  chunksize=max(1, K // (4 * jobs))))
    else:
        samples = [generate_sample(instance, rng_seed, k, fraction) for k in idx]
    return Dataset(instance.n, instance.s, instance.q, tuple(samples))

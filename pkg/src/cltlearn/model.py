"""Domain types: graphs, CLT instances, diffusion trajectories, datasets.

Indices are 0-based in memory (nodes and cascades); the JSON formats in
:mod:`cltlearn.io` are 1-based.  Parameters are integer arrays of ``10**-q``
units; :class:`~cltlearn.fixed.ScaledValue` is used at the scalar API.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Iterator, Sequence

import numpy as np
import scipy.sparse as sp

from .fixed import ScaledValue


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.array(a, copy=True)
    a.flags.writeable = False
    return a


class InvariantViolation(ValueError):
    """A status or instance breaks a structural invariant."""


@dataclass(frozen=True, eq=False)
class Graph:
    n: int
    edges: np.ndarray  # (M, 2) int64, rows (src, dst), lexicographically sorted

    def __post_init__(self):
        e = np.asarray(self.edges, dtype=np.int64).reshape(-1, 2)
        if e.size:
            if e.min() < 0 or e.max() >= self.n:
                raise ValueError("edge endpoint out of range")
            if np.any(e[:, 0] == e[:, 1]):
                raise ValueError("self-loops are not allowed")
            order = np.lexsort((e[:, 1], e[:, 0]))
            e = e[order]
            if np.any(np.all(e[1:] == e[:-1], axis=1)):
                raise ValueError("duplicate edges")
        object.__setattr__(self, "edges", _frozen(e))

    @classmethod
    def from_edges(cls, n: int, edges: Sequence[tuple[int, int]] | np.ndarray, dedupe: bool = False) -> "Graph":
        e = np.asarray(edges, dtype=np.int64).reshape(-1, 2)
        if dedupe and e.size:
            e = e[e[:, 0] != e[:, 1]]
            e = np.unique(e, axis=0)
        return cls(n, e)

    @property
    def m(self) -> int:
        return len(self.edges)

    @cached_property
    def _in_csr(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        # edges sorted by (dst, src); ptr indexes into that order
        order = np.lexsort((self.edges[:, 0], self.edges[:, 1]))
        ptr = np.zeros(self.n + 1, dtype=np.int64)
        np.add.at(ptr, self.edges[:, 1] + 1, 1)
        return np.cumsum(ptr), self.edges[order, 0], order

    def in_neighbors(self, v: int) -> np.ndarray:
        ptr, src, _ = self._in_csr
        return src[ptr[v]:ptr[v + 1]]

    def in_edge_ids(self, v: int) -> np.ndarray:
        ptr, _, order = self._in_csr
        return order[ptr[v]:ptr[v + 1]]

    def in_degrees(self) -> np.ndarray:
        return np.bincount(self.edges[:, 1], minlength=self.n)

    def edge_index(self, src: int, dst: int) -> int:
        """Row of ``(src, dst)`` in :attr:`edges`, or -1."""
        key = src * self.n + dst
        keys = self.edges[:, 0] * self.n + self.edges[:, 1]
        pos = int(np.searchsorted(keys, key))
        return pos if pos < len(keys) and keys[pos] == key else -1

    def __eq__(self, other: object) -> bool:
        return isinstance(other, Graph) and self.n == other.n and np.array_equal(self.edges, other.edges)

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True, eq=False)
class CltInstance:
    """Graph plus per-cascade edge weights and per-node thresholds.

    ``weights[e, s]`` belongs to ``graph.edges[e]``; ``thresholds[i, s]`` to
    node ``i``.  Both are integer counts of ``10**-q``.
    """

    graph: Graph
    s: int
    q: int
    weights: np.ndarray
    thresholds: np.ndarray

    def __post_init__(self):
        w = np.asarray(self.weights, dtype=np.int64).reshape(self.graph.m, self.s)
        th = np.asarray(self.thresholds, dtype=np.int64).reshape(self.graph.n, self.s)
        object.__setattr__(self, "weights", _frozen(w))
        object.__setattr__(self, "thresholds", _frozen(th))

    @property
    def n(self) -> int:
        return self.graph.n

    @property
    def one(self) -> int:
        return 10**self.q

    def weight(self, src: int, dst: int, s: int) -> ScaledValue:
        e = self.graph.edge_index(src, dst)
        return ScaledValue(int(self.weights[e, s]) if e >= 0 else 0, self.q)

    def threshold(self, i: int, s: int) -> ScaledValue:
        return ScaledValue(int(self.thresholds[i, s]), self.q)

    @cached_property
    def weight_matrices(self) -> tuple[sp.csr_matrix, ...]:
        """Per cascade, an (N, N) matrix with entry [dst, src] = weight units."""
        e = self.graph.edges
        return tuple(
            sp.csr_matrix((self.weights[:, s], (e[:, 1], e[:, 0])), shape=(self.n, self.n), dtype=np.int64)
            for s in range(self.s)
        )

    def rescale(self, q: int) -> "CltInstance":
        if q < self.q:
            raise ValueError("can only increase precision")
        f = 10 ** (q - self.q)
        return CltInstance(self.graph, self.s, q, self.weights * f, self.thresholds * f)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, CltInstance)
            and self.graph == other.graph
            and (self.s, self.q) == (other.s, other.q)
            and np.array_equal(self.weights, other.weights)
            and np.array_equal(self.thresholds, other.thresholds)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass(frozen=True)
class Violation:
    kind: str  # normalization | threshold_range | weight_range
    node: int
    cascade: int
    detail: str


def validate_instance(instance: CltInstance) -> list[Violation]:
    """Every violated instance invariant; empty iff the instance is valid."""
    out: list[Violation] = []
    one = instance.one
    w, th, e = instance.weights, instance.thresholds, instance.graph.edges
    for k, s in zip(*np.nonzero((w < 0) | (w > one))):
        out.append(Violation("weight_range", int(e[k, 1]), int(s),
                             f"w({e[k, 0]}->{e[k, 1]})={ScaledValue(int(w[k, s]), instance.q)}"))
    col = np.zeros((instance.n, instance.s), dtype=np.int64)
    np.add.at(col, e[:, 1], w)
    for i, s in zip(*np.nonzero(col > one)):
        out.append(Violation("normalization", int(i), int(s),
                             f"in-weight sum {ScaledValue(int(col[i, s]), instance.q)} > 1"))
    for i, s in zip(*np.nonzero((th < 1) | (th > one))):
        out.append(Violation("threshold_range", int(i), int(s),
                             f"theta={ScaledValue(int(th[i, s]), instance.q)} outside [10^-{instance.q}, 1]"))
    return out


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Initial status plus per-step (phase-1, phase-2) statuses.

    Only steps up to the last change are stored; logically the trajectory has
    ``horizon`` steps and every later step repeats the fixed point, with
    phase 1 equal to phase 2 (no new candidates, active nodes carried).
    """

    initial: np.ndarray  # (N, S) bool
    steps: tuple[tuple[np.ndarray, np.ndarray], ...]
    horizon: int

    def __post_init__(self):
        object.__setattr__(self, "initial", _frozen(np.asarray(self.initial, dtype=bool)))
        object.__setattr__(self, "steps", tuple(
            (_frozen(np.asarray(p1, dtype=bool)), _frozen(np.asarray(p2, dtype=bool))) for p1, p2 in self.steps))

    @property
    def n(self) -> int:
        return self.initial.shape[0]

    @property
    def s(self) -> int:
        return self.initial.shape[1]

    @property
    def n_changing(self) -> int:
        return len(self.steps)

    def final(self) -> np.ndarray:
        return self.steps[-1][1] if self.steps else self.initial

    def phase(self, t: int, p: int) -> np.ndarray:
        """Status after phase ``p`` of logical step ``t`` (``t=0`` is ``I_0``)."""
        if t == 0:
            return self.initial
        if not 1 <= t <= self.horizon or p not in (1, 2):
            raise IndexError(f"step {t} phase {p} outside 1..{self.horizon}")
        if t <= len(self.steps):
            return self.steps[t - 1][p - 1]
        return self.final()

    def phase2_series(self) -> Iterator[np.ndarray]:
        for t in range(1, self.horizon + 1):
            yield self.phase(t, 2)

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Trajectory)
            and self.horizon == other.horizon
            and np.array_equal(self.initial, other.initial)
            and len(self.steps) == len(other.steps)
            and all(np.array_equal(a1, b1) and np.array_equal(a2, b2)
                    for (a1, a2), (b1, b2) in zip(self.steps, other.steps))
        )

    __hash__ = None  # type: ignore[assignment]


StatusTensor = Trajectory
Sample = Trajectory


def status_problems(traj: Trajectory) -> list[str]:
    """Structural invariant violations of a trajectory (empty when sound)."""
    probs = []
    if np.any(traj.initial.sum(axis=1) > 1):
        probs.append("I_0 has a node seeded in two cascades")
    prev = traj.initial
    for t, (p1, p2) in enumerate(traj.steps, start=1):
        if p1.shape != prev.shape or p2.shape != prev.shape:
            probs.append(f"step {t}: shape mismatch")
            break
        if np.any(p2.sum(axis=1) > 1):
            probs.append(f"step {t}: node active in two cascades")
        if np.any(prev & ~p2):
            probs.append(f"step {t}: activation lost")
        if np.any(prev & ~p1):
            probs.append(f"step {t}: phase 1 drops an active node")
        newly = p2 & ~prev
        if np.any(newly & ~p1):
            probs.append(f"step {t}: phase-2 activation without phase-1 candidacy")
        was_active = prev.any(axis=1)
        if np.any(p1[was_active] != prev[was_active]):
            probs.append(f"step {t}: active node changed in phase 1")
        cand = p1 & ~prev
        cand_nodes = cand.any(axis=1) & ~was_active
        if np.any(cand_nodes != newly.any(axis=1)):
            probs.append(f"step {t}: candidate node not resolved in phase 2")
        prev = p2
    if len(traj.steps) > traj.horizon:
        probs.append("more stored steps than the horizon")
    return probs


@dataclass(frozen=True, eq=False)
class Dataset:
    n: int
    s: int
    q: int
    samples: tuple[Trajectory, ...] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "samples", tuple(self.samples))
        for k, smp in enumerate(self.samples):
            if smp.initial.shape != (self.n, self.s):
                raise ValueError(f"sample {k}: shape {smp.initial.shape} != {(self.n, self.s)}")

    def __len__(self) -> int:
        return len(self.samples)

    def __iter__(self) -> Iterator[Trajectory]:
        return iter(self.samples)

    def __getitem__(self, k):
        if isinstance(k, slice):
            return Dataset(self.n, self.s, self.q, self.samples[k])
        return self.samples[k]

    def subset(self, idx: Sequence[int]) -> "Dataset":
        return Dataset(self.n, self.s, self.q, tuple(self.samples[int(k)] for k in idx))

    def __eq__(self, other: object) -> bool:
        return (
            isinstance(other, Dataset)
            and (self.n, self.s, self.q) == (other.n, other.s, other.q)
            and len(self) == len(other)
            and all(a == b for a, b in zip(self.samples, other.samples))
        )

    __hash__ = None  # type: ignore[assignment]

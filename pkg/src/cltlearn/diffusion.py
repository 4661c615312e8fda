"""Exact competitive linear threshold diffusion.

Phase 1 marks every inactive node whose s-influence sum reaches its
s-threshold as an s-candidate; phase 2 assigns each newly activated node to
the candidate cascade with the largest sum, ties going to the smaller index.
Activation is permanent: nodes active before the step keep their cascade.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fixed import ScaledValue
from .model import CltInstance, InvariantViolation, Trajectory


@dataclass(frozen=True, eq=False)
class StepOutcome:
    phase1: np.ndarray  # (N, S) bool
    phase2: np.ndarray  # (N, S) bool


def _as_status(instance: CltInstance, status: np.ndarray) -> np.ndarray:
    a = np.asarray(status, dtype=bool)
    if a.shape != (instance.n, instance.s):
        raise ValueError(f"status shape {a.shape} != {(instance.n, instance.s)}")
    return a


def influence_sum(instance: CltInstance, prev_phase2: np.ndarray, node: int, cascade: int) -> ScaledValue:
    """Sum of ``cascade`` weights over in-neighbors active in ``cascade``."""
    if not (0 <= node < instance.n and 0 <= cascade < instance.s):
        raise IndexError(f"node {node} / cascade {cascade} out of range")
    prev = _as_status(instance, prev_phase2)
    eids = instance.graph.in_edge_ids(node)
    src = instance.graph.edges[eids, 0]
    return ScaledValue(int(instance.weights[eids, cascade][prev[src, cascade]].sum()), instance.q)


def influence_sums(instance: CltInstance, prev_phase2: np.ndarray) -> np.ndarray:
    """All sums at once, (N, S) int64 units."""
    prev = _as_status(instance, prev_phase2)
    z = np.empty((instance.n, instance.s), dtype=np.int64)
    for s, W in enumerate(instance.weight_matrices):
        z[:, s] = W @ prev[:, s].astype(np.int64)
    return z


def step(instance: CltInstance, prev_phase2: np.ndarray) -> StepOutcome:
    prev = _as_status(instance, prev_phase2)
    if np.any(prev.sum(axis=1) > 1):
        raise InvariantViolation("a node is active in more than one cascade")
    active = prev.any(axis=1)
    z = influence_sums(instance, prev)
    cand = (z >= instance.thresholds) & ~active[:, None]
    phase1 = prev | cand
    phase2 = prev.copy()
    newly = np.flatnonzero(cand.any(axis=1))
    if newly.size:
        zc = np.where(cand[newly], z[newly], -1)
        # argmax returns the first maximum, i.e. the smallest cascade index
        phase2[newly, np.argmax(zc, axis=1)] = True
    return StepOutcome(phase1, phase2)


def run(instance: CltInstance, initial: np.ndarray, horizon: int | None = None) -> Trajectory:
    """Diffuse for ``horizon`` (default N) steps, stopping at the fixed point."""
    init = _as_status(instance, initial)
    if np.any(init.sum(axis=1) > 1):
        raise InvariantViolation("seed sets overlap")
    horizon = instance.n if horizon is None else horizon
    steps = []
    cur = init
    for _ in range(horizon):
        out = step(instance, cur)
        if np.array_equal(out.phase2, cur):
            break
        steps.append((out.phase1, out.phase2))
        cur = out.phase2
    return Trajectory(init, tuple(steps), horizon)


def influence_function(instance: CltInstance, initial: np.ndarray) -> np.ndarray:
    return run(instance, initial).final().copy()


def replay_problems(instance: CltInstance, traj: Trajectory) -> list[str]:
    """Differences between a recorded trajectory and re-simulation."""
    redo = run(instance, traj.initial, traj.horizon)
    if redo == traj:
        return []
    probs = []
    for t in range(1, traj.horizon + 1):
        for p in (1, 2):
            if not np.array_equal(redo.phase(t, p), traj.phase(t, p)):
                probs.append(f"step {t} phase {p} differs")
                return probs
    return ["trajectory storage differs"]

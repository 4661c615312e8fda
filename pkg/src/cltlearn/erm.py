"""Empirical risk minimization by per-node linear feasibility.

For node ``i`` the unknowns are its in-weights ``w[j, i, s]`` (over a candidate
set of sources) and thresholds ``theta[i, s]``.  Every step at which ``i`` was
inactive yields rows:

* phase 1, per cascade: ``sum_j w[j,i,s] * prev[j,s] - theta[i,s]`` is ``>= 0``
  when ``i`` became an s-candidate and ``<= -eps`` otherwise;
* phase 2, per rival candidate ``s`` of the winner ``s*``: winner sum minus
  rival sum is ``>= 0`` (``s > s*``) or ``>= eps`` (``s < s*``);

plus ``sum_j w[j,i,s] <= 1``.  Rows of different nodes share no variables, so
the global program splits into N independent LPs.
"""
from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

import numpy as np
import scipy.sparse as sp

from .diffusion import influence_function, run
from .fixed import ScaledValue
from .lp import GE, LE, LpProblem, LpSolution, SolverConfig, solve
from .model import CltInstance, Dataset, Graph, status_problems

P1POS, P1NEG, P2, NORM, LINK = 0, 1, 2, 3, 4


class EmptyDataset(ValueError):
    pass


class InconsistentSample(ValueError):
    pass


class NodeLpInfeasible(RuntimeError):
    def __init__(self, node: int, certificate=()):
        super().__init__(f"LP for node {node + 1} is infeasible")
        self.node = node
        self.certificate = list(certificate)


@dataclass
class ErmConfig:
    eps: ScaledValue | None = None  # default: one unit of the dataset grid
    candidates: str = "all"  # all | known-graph
    graph: Graph | None = None  # required for known-graph
    objective: str = "group"  # feasibility | margin | sparse | group
    solver: SolverConfig = field(default_factory=SolverConfig)
    reduce: bool = True
    refine_digits: int = 6

    def eps_units(self, q: int) -> int:
        if self.eps is None:
            return 1
        units = self.eps.rescale(q).units if self.eps.q <= q else None
        if units is None or ScaledValue(units, q) != self.eps:
            raise ValueError(f"eps {self.eps} is not a multiple of 10^-{q}")
        if units <= 0:
            raise ValueError("eps must be positive")
        return units

    def __post_init__(self):
        if self.candidates not in ("all", "known-graph"):
            raise ValueError(f"unknown candidate policy {self.candidates!r}")
        if self.candidates == "known-graph" and self.graph is None:
            raise ValueError("known-graph candidates need a graph")
        if self.objective not in ("feasibility", "margin", "sparse", "group"):
            raise ValueError(f"unknown objective {self.objective!r}")


# ---------------------------------------------------------------- step table


@dataclass(frozen=True, eq=False)
class StepTable:
    """Every informative step of a dataset, stacked.

    Row ``r`` is step ``t[r]`` of sample ``sample[r]``; ``prev`` is the phase-2
    status at ``t-1``.  The first padded step after the fixed point is kept:
    it records that nothing else activates.
    """

    prev: np.ndarray  # (R, N, S) bool
    p1: np.ndarray
    p2: np.ndarray
    sample: np.ndarray  # (R,)
    t: np.ndarray  # (R,)
    n: int
    s: int
    q: int


def step_table(dataset: Dataset) -> StepTable:
    if len(dataset) == 0:
        raise EmptyDataset("dataset has no samples")
    prev, p1, p2, ks, ts = [], [], [], [], []
    for k, smp in enumerate(dataset):
        probs = status_problems(smp)
        if probs:
            raise InconsistentSample(f"sample {k + 1}: {probs[0]}")
        for t in range(1, min(smp.horizon, smp.n_changing + 1) + 1):
            prev.append(smp.phase(t - 1, 2))
            p1.append(smp.phase(t, 1))
            p2.append(smp.phase(t, 2))
            ks.append(k)
            ts.append(t)
    shape = (0, dataset.n, dataset.s)
    stack = (lambda xs: np.stack(xs) if xs else np.zeros(shape, dtype=bool))
    return StepTable(stack(prev), stack(p1), stack(p2), np.asarray(ks, dtype=np.int64),
                     np.asarray(ts, dtype=np.int64), dataset.n, dataset.s, dataset.q)


# ---------------------------------------------------------------- node LP


@dataclass(frozen=True, eq=False)
class NodeLp:
    """A node's LP plus the bookkeeping needed to read it back."""

    node: int
    problem: LpProblem
    cands: np.ndarray  # candidate source nodes
    kind: np.ndarray  # per row: P1POS / P1NEG / P2 / NORM / LINK
    strict: np.ndarray  # per row: the inequality is strict in the model
    fixed: np.ndarray  # per full variable: fixed value in units of q, or -1 if free
    keep_cols: np.ndarray  # full-variable index of each problem column

    @property
    def n_full(self) -> int:
        return len(self.fixed)


def _candidates(node: int, n: int, cfg: ErmConfig) -> np.ndarray:
    if cfg.candidates == "known-graph":
        return np.asarray(cfg.graph.in_neighbors(node), dtype=np.int64)
    return np.concatenate([np.arange(node), np.arange(node + 1, n)]).astype(np.int64)


def _var_names(node: int, cands: np.ndarray, s: int, cols: np.ndarray) -> tuple[str, ...]:
    c = len(cands)
    return tuple(f"w_{cands[j % c] + 1}_{node + 1}_{j // c + 1}" if j < s * c else f"theta_{node + 1}_{j - s * c + 1}"
                 for j in cols)


def _rows(tab: StepTable, node: int, cands: np.ndarray, eps: int):
    """The unreduced system: (A, kinds, senses, rhs, strict, sample, cascade)."""
    S, c = tab.s, len(cands)
    one = 10**tab.q
    live = np.flatnonzero(~tab.prev[:, node, :].any(axis=1))
    R = len(live)
    X = tab.prev[live][:, cands, :]  # (R, c, S)
    p1 = tab.p1[live, node, :]
    p2 = tab.p2[live, node, :]
    ri, ci, vals = [], [], []
    # phase 1: row s * R + k
    for s in range(S):
        rr, cc = np.nonzero(X[:, :, s])
        ri += [s * R + rr, s * R + np.arange(R)]
        ci += [s * c + cc, np.full(R, S * c + s)]
        vals += [np.full(rr.size, one), np.full(R, -one)]
    pos = p1.T.ravel()  # (S * R,) in row order
    kinds = [np.where(pos, P1POS, P1NEG)]
    senses = [np.where(pos, GE, LE)]
    rhs = [np.where(pos, 0, -eps)]
    strict = [~pos]
    samp = [np.tile(tab.sample[live], S)]
    casc = [np.repeat(np.arange(S), R)]
    # phase 2: winner against every other candidate cascade
    r = S * R
    p2_rows = []
    for k in np.flatnonzero(p2.any(axis=1)):
        win = int(np.argmax(p2[k]))
        for s in np.flatnonzero(p1[k]):
            if s == win:
                continue
            a = np.flatnonzero(X[k, :, win])
            b = np.flatnonzero(X[k, :, s])
            ri += [np.full(a.size + b.size, r)]
            ci += [win * c + a, s * c + b]
            vals += [np.full(a.size, one), np.full(b.size, -one)]
            p2_rows.append((eps if s < win else 0, bool(s < win), tab.sample[live[k]], int(s)))
            r += 1
    if p2_rows:
        e, st, sm, cs = (np.asarray(x) for x in zip(*p2_rows))
        kinds.append(np.full(len(p2_rows), P2))
        senses.append(np.full(len(p2_rows), GE))
        rhs += [e]
        strict += [st]
        samp += [sm]
        casc += [cs]
    # normalization
    ri += [r + np.repeat(np.arange(S), c)]
    ci += [np.arange(S * c)]
    vals += [np.full(S * c, one)]
    kinds.append(np.full(S, NORM))
    senses.append(np.full(S, LE))
    rhs.append(np.full(S, one))
    strict.append(np.zeros(S, dtype=bool))
    samp.append(np.full(S, -1))
    casc.append(np.arange(S))
    nrows = r + S
    A = sp.csr_matrix((np.concatenate(vals).astype(np.int64),
                       (np.concatenate(ri).astype(np.int64), np.concatenate(ci).astype(np.int64))),
                      shape=(nrows, S * (c + 1)), dtype=np.int64)
    cat = (lambda xs, dt: np.concatenate(xs).astype(dt))
    return (A, cat(kinds, np.int8), cat(senses, np.int8), cat(rhs, np.int64), cat(strict, bool),
            cat(samp, np.int64), cat(casc, np.int64))


def _node_lp(tab: StepTable, node: int, cfg: ErmConfig, reduce: bool) -> NodeLp:
    S = tab.s
    one = 10**tab.q
    eps = cfg.eps_units(tab.q)
    cands = _candidates(node, tab.n, cfg)
    c = len(cands)
    nvars = S * (c + 1)
    A, kinds, senses, rhs, strict, samp, casc = _rows(tab, node, cands, eps)
    fixed = np.full(nvars, -1, dtype=np.int64)
    if reduce:
        keep = _reduce_rows(A, kinds, samp, casc, fixed, S, c, one)
        A, kinds, senses, rhs, strict = A[keep], kinds[keep], senses[keep], rhs[keep], strict[keep]
    lower = np.zeros(nvars)
    upper = np.full(nvars, float(one))
    lower[S * c:] = 1.0
    free = np.flatnonzero(fixed < 0)
    if reduce:
        # move fixed columns to the right-hand side, then drop rows left empty
        fixed_vals = np.where(fixed < 0, 0, fixed)
        rhs = rhs - (A @ fixed_vals) // one
        A = A[:, free]
        nnz = np.diff(A.indptr)
        trivial = (nnz == 0) & np.where(senses == GE, rhs <= 0, rhs >= 0)
        rows = np.flatnonzero(~trivial)
        A, kinds, senses, rhs, strict = A[rows], kinds[rows], senses[rows], rhs[rows], strict[rows]
        A, kinds, senses, rhs, strict = _dedupe(A, kinds, senses, rhs, strict)
    objective = None
    prob_names = _var_names(node, cands, S, free)
    lower, upper = lower[free], upper[free]
    maximize = False
    if cfg.objective == "margin":
        # one shared slack lifts the rows that may be tight at a vertex; strict
        # rows already carry eps, which dwarfs rounding on a finer grid
        sign = np.where(senses == LE, 1, -1)
        sign = np.where(strict, 0, sign)
        A = sp.hstack([A, sp.csr_matrix(sign.reshape(-1, 1) * one)]).tocsr()
        prob_names += ("margin",)
        lower = np.append(lower, 0.0)
        upper = np.append(upper, float(one))
        objective = np.zeros(len(prob_names), dtype=np.int64)
        objective[-1] = one
        maximize = True
    if cfg.objective == "sparse":
        # least total in-weight: spurious sources get no mass
        objective = np.zeros(len(prob_names), dtype=np.int64)
        objective[free < S * c] = one
    if cfg.objective == "group":
        # cascades share one graph: pay once per source, max_s w[j, s]
        wcols = np.flatnonzero(free < S * c)
        src = free[wcols] % c
        groups, gidx = np.unique(src, return_inverse=True)
        g = len(groups)
        link = sp.csr_matrix((np.concatenate([np.full(wcols.size, one), np.full(wcols.size, -one)]),
                              (np.tile(np.arange(wcols.size), 2), np.concatenate([wcols, len(free) + gidx]))),
                             shape=(wcols.size, len(free) + g), dtype=np.int64)
        A = sp.vstack([sp.hstack([A, sp.csr_matrix((A.shape[0], g), dtype=np.int64)]), link]).tocsr()
        senses = np.concatenate([senses, np.full(wcols.size, LE)])
        rhs = np.concatenate([rhs, np.zeros(wcols.size, dtype=np.int64)])
        kinds = np.concatenate([kinds, np.full(wcols.size, LINK, dtype=kinds.dtype)])
        strict = np.concatenate([strict, np.zeros(wcols.size, dtype=bool)])
        prob_names += tuple(f"u_{cands[j] + 1}_{node + 1}" for j in groups)
        lower = np.append(lower, np.zeros(g))
        upper = np.append(upper, np.full(g, float(one)))
        objective = np.zeros(len(prob_names), dtype=np.int64)
        objective[len(free):] = one
    problem = LpProblem(prob_names, A, senses, rhs, lower, upper, tab.q, objective, maximize)
    return NodeLp(node, problem, cands, kinds, strict, fixed, free)


def _reduce_rows(A, kinds, samp, casc, fixed, S, c, one) -> np.ndarray:
    """Row selection and variable fixing that keep the feasible set equivalent.

    * Active sets only grow, so the latest negative phase-1 row of a sample
      and cascade implies the earlier ones (weights are nonnegative).
    * A weight that never enters a positive phase-1 row can be set to 0: it
      only raises sums that must stay below a threshold or belong to rivals.
    * A cascade without positive rows gets ``theta = 1`` and zero weights.
    """
    neg = np.flatnonzero(kinds == P1NEG)
    # rows are in step order within a sample and cascade: keep the last one
    key = samp[neg] * (S + 1) + casc[neg]
    _, last = np.unique(key[::-1], return_index=True)
    keep = np.sort(np.concatenate([np.flatnonzero(kinds != P1NEG), neg[::-1][last]]))
    used = np.zeros(S * (c + 1), dtype=bool)
    used[A[np.flatnonzero(kinds == P1POS)].indices] = True
    fixed[: S * c][~used[: S * c]] = 0
    theta = S * c + np.arange(S)
    fixed[theta[~used[theta]]] = one
    return keep


def _dedupe(A, kinds, senses, rhs, strict):
    seen: dict = {}
    rows = []
    for r in range(A.shape[0]):
        sl = slice(A.indptr[r], A.indptr[r + 1])
        key = (int(senses[r]), int(rhs[r]), A.indices[sl].tobytes(), A.data[sl].tobytes())
        if key not in seen:
            seen[key] = r
            rows.append(r)
    rows = np.asarray(rows, dtype=np.int64)
    return A[rows], kinds[rows], senses[rows], rhs[rows], strict[rows]


def build_node_lp(dataset: Dataset, node: int, config: ErmConfig | None = None, reduce: bool = False) -> NodeLp:
    """The node's constraint system; ``reduce`` applies equivalence-preserving pruning."""
    cfg = config or ErmConfig()
    tab = dataset if isinstance(dataset, StepTable) else step_table(dataset)
    if not 0 <= node < tab.n:
        raise IndexError(f"node {node} out of range")
    return _node_lp(tab, node, cfg, reduce)


# ---------------------------------------------------------------- solving


@dataclass
class NodeDiagnostics:
    node: int
    status: str
    rows: int
    variables: int
    precision: int
    method: str
    iterations: int
    seconds: float
    flagged: bool = False


@dataclass(frozen=True, eq=False)
class LearnedInstance:
    instance: CltInstance
    diagnostics: tuple[NodeDiagnostics, ...]

    @property
    def all_feasible(self) -> bool:
        return all(d.status == "Feasible" for d in self.diagnostics)

    @property
    def flagged(self) -> list[int]:
        return [d.node for d in self.diagnostics if d.flagged]


def _full_units(nlp: NodeLp, x: np.ndarray, p: int, q: int) -> np.ndarray:
    """Snap a solution of the (possibly reduced) LP onto the 10^-p grid, all variables."""
    f = 10 ** (p - q)
    u = np.where(nlp.fixed >= 0, nlp.fixed * f, 0).astype(np.int64)
    vals = np.rint(np.asarray(x[: len(nlp.keep_cols)], dtype=float) * 10.0**p).astype(np.int64)
    u[nlp.keep_cols] = vals
    c = len(nlp.cands)
    S = len(nlp.fixed) // (c + 1)
    u[: S * c] = np.clip(u[: S * c], 0, 10**p)
    u[S * c:] = np.clip(u[S * c:], f, 10**p)
    return u


def semantic_violations(full: NodeLp, units: np.ndarray, p: int) -> np.ndarray:
    """Rows of the unreduced node LP broken by ``units`` (grid ``10^-p``).

    Strict rows need one unit of slack at the assignment's own grid, which is
    exactly what the diffusion semantics requires.
    """
    P = full.problem
    one = 10**P.q
    lhs = (P.A @ units) // one  # coefficients are whole multiples of one
    rhs = np.where(full.kind == NORM, 10**p, 0)
    need = np.where(full.strict, np.where(P.senses == LE, -1, 1), 0)
    bound = rhs + need
    ok = np.where(P.senses == GE, lhs >= bound, lhs <= bound)
    return np.flatnonzero(~ok)


def _solve_node(tab: StepTable, node: int, cfg: ErmConfig):
    t0 = time.perf_counter()
    q = tab.q
    full = _node_lp(tab, node, replace(cfg, objective="feasibility"), reduce=False)
    attempts = [cfg.objective] if cfg.objective == "margin" else [cfg.objective, "margin"]
    status, method, iters, rows, nv = "Infeasible", "", 0, 0, 0
    best = None
    for objective in attempts:
        nlp = _node_lp(tab, node, replace(cfg, objective=objective), reduce=cfg.reduce)
        rows, nv = nlp.problem.n_rows, nlp.problem.n_vars
        if nlp.problem.n_vars == 0:
            sol = LpSolution("Feasible", x=np.zeros(0), objective=0.0, method="trivial")
            bad = semantic_violations(full, _full_units(nlp, sol.x, q, q), q)
            if bad.size:
                sol = LpSolution("Infeasible", certificate=[int(r) for r in bad], method="trivial")
        else:
            sol = solve(nlp.problem, cfg.solver)
        method, iters = sol.method, iters + sol.iterations
        status = sol.status
        if not sol.feasible:
            return node, None, q, NodeDiagnostics(node, status, rows, nv, q, method, iters,
                                                  time.perf_counter() - t0), sol.certificate
        for p in range(q, q + cfg.refine_digits + 1):
            units = _full_units(nlp, sol.x, p, q)
            if semantic_violations(full, units, p).size == 0:
                return node, units, p, NodeDiagnostics(node, "Feasible", rows, nv, p, method, iters,
                                                       time.perf_counter() - t0), []
            best = (units, p)
    units, p = best
    return node, units, p, NodeDiagnostics(node, "Feasible", rows, nv, p, method, iters,
                                           time.perf_counter() - t0, flagged=True), []


_TABLE: StepTable | None = None
_CFG: ErmConfig | None = None


def _init_worker(tab, cfg):
    global _TABLE, _CFG
    _TABLE, _CFG = tab, cfg


def _solve_in_worker(node):
    return _solve_node(_TABLE, node, _CFG)


def fit(dataset: Dataset, config: ErmConfig | None = None, jobs: int = 1, strict: bool = True,
        nodes=None) -> LearnedInstance:
    """Learn an instance with zero training error (when every node LP is feasible)."""
    cfg = config or ErmConfig()
    tab = step_table(dataset)
    todo = list(range(tab.n)) if nodes is None else list(nodes)
    if jobs > 1 and len(todo) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(jobs, initializer=_init_worker, initargs=(tab, cfg)) as ex:
            results = list(ex.map(_solve_in_worker, todo, chunksize=max(1, len(todo) // (8 * jobs))))
    else:
        results = [_solve_node(tab, v, cfg) for v in todo]
    if strict:
        for node, units, _, diag, cert in results:
            if units is None:
                raise NodeLpInfeasible(node, cert)
    return _assemble_instance(tab, cfg, results)


def _assemble_instance(tab: StepTable, cfg: ErmConfig, results) -> LearnedInstance:
    S, n = tab.s, tab.n
    qout = max([tab.q] + [p for _, u, p, _, _ in results if u is not None])
    one = 10**qout
    thresholds = np.full((n, S), one, dtype=np.int64)
    src, dst, wts = [], [], []
    diags = []
    for node, units, p, diag, _ in sorted(results, key=lambda r: r[0]):
        diags.append(diag)
        if units is None:
            continue
        f = 10 ** (qout - p)
        cands = _candidates(node, n, cfg)
        c = len(cands)
        w = units[: S * c].reshape(S, c).T * f  # (c, S)
        thresholds[node] = units[S * c:] * f
        nz = np.flatnonzero(w.any(axis=1))
        src.append(cands[nz])
        dst.append(np.full(nz.size, node))
        wts.append(w[nz])
    if src:
        edges = np.stack([np.concatenate(src), np.concatenate(dst)], axis=1).astype(np.int64)
        w = np.concatenate(wts).astype(np.int64)
    else:
        edges, w = np.zeros((0, 2), dtype=np.int64), np.zeros((0, S), dtype=np.int64)
    order = np.lexsort((edges[:, 1], edges[:, 0]))
    graph = Graph(n, edges[order])
    return LearnedInstance(CltInstance(graph, S, qout, w[order], thresholds), tuple(diags))


def predict(learned: LearnedInstance | CltInstance, initial: np.ndarray) -> np.ndarray:
    inst = learned.instance if isinstance(learned, LearnedInstance) else learned
    return influence_function(inst, initial)


def training_mismatches(learned: LearnedInstance | CltInstance, dataset: Dataset) -> list[int]:
    """Samples whose replay under the learned instance differs anywhere."""
    inst = learned.instance if isinstance(learned, LearnedInstance) else learned
    bad = []
    for k, smp in enumerate(dataset):
        redo = run(inst, smp.initial, smp.horizon)
        if redo != smp:
            bad.append(k)
    return bad


def true_assignment(instance: CltInstance, nlp: NodeLp) -> np.ndarray:
    """The generating parameters of ``nlp.node`` as a full variable vector (units of q)."""
    S, c, i = instance.s, len(nlp.cands), nlp.node
    u = np.zeros(S * (c + 1), dtype=np.int64)
    src = instance.graph.in_neighbors(i)
    eids = instance.graph.in_edge_ids(i)
    pos = {int(j): k for k, j in enumerate(nlp.cands)}
    for j, e in zip(src, eids):
        if int(j) not in pos:
            raise ValueError(f"true in-neighbor {j + 1} of node {i + 1} is not a candidate")
        for s in range(S):
            u[s * c + pos[int(j)]] = instance.weights[e, s]
    u[S * c:] = instance.thresholds[i]
    return u


def witness_violations(instance: CltInstance, dataset: Dataset | StepTable, config: ErmConfig | None = None) -> dict:
    """Rows of every node LP violated by the generating parameters (exact)."""
    from .lp import violations
    tab = dataset if isinstance(dataset, StepTable) else step_table(dataset)
    config = replace(config or ErmConfig(), objective="feasibility")
    if instance.q != tab.q:
        raise ValueError("instance and dataset precision differ")
    out = {}
    rows = 0
    for i in range(tab.n):
        nlp = build_node_lp(tab, i, config, reduce=False)
        rows += nlp.problem.n_rows
        v = violations(nlp.problem, true_assignment(instance, nlp), tab.q)
        if v["rows"] or v["bounds"]:
            out[i] = v
    return {"violations": out, "rows": rows}

"""Linear programs on a decimal grid.

An :class:`LpProblem` stores every coefficient, right-hand side and bound as an
integer count of ``10**-q`` units, so constraint checks after snapping are
exact.  Two solvers sit behind :func:`solve`: a dense bounded-variable primal
simplex with Bland's rule (small problems, no dependencies beyond numpy) and
HiGHS through ``scipy.optimize.linprog`` (large problems).
"""
from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np
import scipy.sparse as sp

from .fixed import format_units, parse_units

GE, LE, EQ = 1, -1, 0
_SENSE_TEXT = {GE: ">=", LE: "<=", EQ: "="}
_NAME_RE = re.compile(r"^[A-Za-z_][A-Za-z0-9_]*$")
_RESERVED = {"inf", "infinity", "free", "st", "end", "bounds", "minimize", "maximize", "subject", "to"}


class MalformedProblem(ValueError):
    pass


class UnsupportedName(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LpProblem:
    names: tuple[str, ...]
    A: sp.csr_matrix  # int64 units, (rows, vars)
    senses: np.ndarray  # GE / LE / EQ per row
    rhs: np.ndarray  # int64 units
    lower: np.ndarray  # float64 units, -inf for none (integral values stay exact)
    upper: np.ndarray  # float64 units, +inf for none
    q: int = 0
    objective: np.ndarray | None = None  # int64 units; None means zero
    maximize: bool = False
    row_names: tuple[str, ...] | None = None

    def __post_init__(self):
        n = len(self.names)
        A = sp.csr_matrix(self.A, dtype=np.int64)
        A.eliminate_zeros()
        A.sort_indices()
        object.__setattr__(self, "A", A)
        object.__setattr__(self, "names", tuple(self.names))
        object.__setattr__(self, "senses", np.asarray(self.senses, dtype=np.int8).reshape(-1))
        object.__setattr__(self, "rhs", np.asarray(self.rhs, dtype=np.int64).reshape(-1))
        object.__setattr__(self, "lower", np.asarray(self.lower, dtype=float).reshape(-1))
        object.__setattr__(self, "upper", np.asarray(self.upper, dtype=float).reshape(-1))
        obj = np.zeros(n, dtype=np.int64) if self.objective is None else np.asarray(self.objective, dtype=np.int64)
        object.__setattr__(self, "objective", obj.reshape(-1))
        if self.row_names is not None:
            object.__setattr__(self, "row_names", tuple(self.row_names))

    def validate(self) -> None:
        n, m = len(self.names), self.A.shape[0]
        if self.A.shape[1] != n:
            raise MalformedProblem(f"matrix has {self.A.shape[1]} columns for {n} variables")
        for arr, what in ((self.senses, "senses"), (self.rhs, "rhs")):
            if arr.shape[0] != m:
                raise MalformedProblem(f"{what} length {arr.shape[0]} != {m} rows")
        for arr, what in ((self.lower, "lower"), (self.upper, "upper"), (self.objective, "objective")):
            if arr.shape[0] != n:
                raise MalformedProblem(f"{what} length {arr.shape[0]} != {n} variables")
        if np.any(np.isnan(self.lower)) or np.any(np.isnan(self.upper)):
            raise MalformedProblem("NaN bound")
        if not np.all(np.isin(self.senses, (GE, LE, EQ))):
            raise MalformedProblem("unknown relation")
        if self.row_names is not None and len(self.row_names) != m:
            raise MalformedProblem("row name count mismatch")

    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def n_rows(self) -> int:
        return self.A.shape[0]

    def rescale(self, q: int) -> "LpProblem":
        if q < self.q:
            raise ValueError("can only refine the grid")
        f = 10 ** (q - self.q)
        return LpProblem(self.names, self.A * f, self.senses, self.rhs * f, self.lower * f, self.upper * f, q,
                         self.objective * f, self.maximize, self.row_names)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, LpProblem):
            return NotImplemented
        q = max(self.q, other.q)
        a, b = self.rescale(q), other.rescale(q)
        return (
            a.names == b.names and a.maximize == b.maximize
            and a.A.shape == b.A.shape and (a.A != b.A).nnz == 0
            and np.array_equal(a.senses, b.senses) and np.array_equal(a.rhs, b.rhs)
            and np.array_equal(a.lower, b.lower) and np.array_equal(a.upper, b.upper)
            and np.array_equal(a.objective, b.objective)
        )

    __hash__ = None  # type: ignore[assignment]


@dataclass
class SolverConfig:
    max_iters: int = 100_000
    tol: float = 1e-9
    method: str = "auto"  # auto | simplex | highs
    simplex_max_cells: int = 4_000  # auto picks the simplex below this rows * cols


@dataclass
class LpSolution:
    status: str  # Feasible | Infeasible | IterationLimit | Unbounded
    x: np.ndarray | None = None  # float values of the variables
    objective: float | None = None
    certificate: list[int] = field(default_factory=list)  # rows of an infeasible subsystem
    iterations: int = 0
    method: str = ""

    @property
    def feasible(self) -> bool:
        return self.status == "Feasible"


# ---------------------------------------------------------------- simplex


class _BoundedSimplex:
    """Dense tableau primal simplex over ``[A | I] (x, s) = b`` with bounds."""

    def __init__(self, A: np.ndarray, senses, b: np.ndarray, lo: np.ndarray, hi: np.ndarray, tol: float):
        m, n = A.shape
        self.m, self.n, self.tol = m, n, tol
        slack_lo = np.where(senses == GE, -np.inf, 0.0)
        slack_hi = np.where(senses == LE, np.inf, 0.0)
        self.lo = np.concatenate([lo, slack_lo, np.zeros(m)])
        self.hi = np.concatenate([hi, slack_hi, np.full(m, np.inf)])
        nb = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
        self.val = np.concatenate([nb, np.zeros(m), np.zeros(m)])
        resid = b - A @ nb
        sigma = np.where(resid >= 0, 1.0, -1.0)
        self.full = np.hstack([A, np.eye(m), np.diag(sigma)])
        self.b = b
        self.art0 = n + m
        self.basis = np.arange(self.art0, self.art0 + m)
        self.T = self.full * sigma[:, None]  # B^-1 = diag(sigma)
        self.binv_cols = slice(n, n + m)
        self.val[self.basis] = np.abs(resid)
        self.is_basic = np.zeros(n + 2 * m, dtype=bool)
        self.is_basic[self.basis] = True

    refactor_every = 32
    pivot_tol = 1e-7

    def refactor(self):
        """Rebuild the tableau from the basis columns to shed rounding drift."""
        binv = np.linalg.inv(self.full[:, self.basis])
        self.T = binv @ self.full

    def _recompute_basic(self):
        binv = self.T[:, self.binv_cols]
        nb = ~self.is_basic
        self.val[self.basis] = binv @ (self.b - self.full[:, nb] @ self.val[nb])

    def run(self, cost: np.ndarray, max_iters: int) -> tuple[str, int]:
        tol = self.tol
        it = 0
        while True:
            if it % self.refactor_every == 0:
                self.refactor()
            self._recompute_basic()
            d = cost - cost[self.basis] @ self.T
            at_lo = np.isclose(self.val, self.lo, rtol=0, atol=tol) | (self.val <= self.lo)
            at_hi = np.isclose(self.val, self.hi, rtol=0, atol=tol) | (self.val >= self.hi)
            movable = self.hi > self.lo
            up = (d < -tol) & ~at_hi & movable
            down = (d > tol) & ~at_lo & movable
            cand = np.flatnonzero((up | down) & ~self.is_basic)
            if cand.size == 0:
                return "Optimal", it
            if it >= max_iters:
                return "IterationLimit", it
            it += 1
            j = int(cand[0])  # Bland: lowest index
            delta = 1.0 if up[j] else -1.0
            alpha = delta * self.T[:, j]
            xb = self.val[self.basis]
            lob, hib = self.lo[self.basis], self.hi[self.basis]
            ratios = np.full(self.m, np.inf)
            ptol = self.pivot_tol * max(1.0, float(np.abs(alpha).max(initial=0.0)))
            dec = alpha > ptol
            inc = alpha < -ptol
            with np.errstate(invalid="ignore", divide="ignore"):
                ratios[dec] = np.maximum((xb[dec] - lob[dec]) / alpha[dec], 0.0)
                ratios[inc] = np.maximum((hib[inc] - xb[inc]) / -alpha[inc], 0.0)
            flip = self.hi[j] - self.lo[j]
            tmin = ratios.min() if self.m else np.inf
            if not np.isfinite(tmin) and not np.isfinite(flip):
                return "Unbounded", it
            if flip <= tmin:
                self.val[j] += delta * flip
                continue
            ties = np.flatnonzero(ratios <= tmin + tol)
            r = int(ties[np.argmin(self.basis[ties])])  # Bland: lowest leaving index
            leaving = int(self.basis[r])
            self.val[j] += delta * tmin
            self.val[leaving] = lob[r] if dec[r] else hib[r]
            piv = self.T[r, j]
            self.T[r] /= piv
            col = self.T[:, j].copy()
            col[r] = 0.0
            self.T -= np.outer(col, self.T[r])
            self.basis[r] = j
            self.is_basic[leaving] = False
            self.is_basic[j] = True

    def duals(self, cost: np.ndarray) -> np.ndarray:
        return cost[self.basis] @ self.T[:, self.binv_cols]

    def drive_out_artificials(self):
        for r in range(self.m):
            a = int(self.basis[r])
            if a < self.art0:
                continue
            row = self.T[r, :self.art0]
            ok = np.flatnonzero((np.abs(row) > 1e-7) & ~self.is_basic[:self.art0])
            if ok.size:
                j = int(ok[0])
                piv = self.T[r, j]
                self.T[r] /= piv
                col = self.T[:, j].copy()
                col[r] = 0.0
                self.T -= np.outer(col, self.T[r])
                self.basis[r] = j
                self.is_basic[a] = False
                self.is_basic[j] = True
                self.val[a] = 0.0
        self.hi[self.art0:] = 0.0


def _float_data(p: LpProblem):
    s = 10.0**-p.q
    return p.A.toarray().astype(float) * s, p.rhs.astype(float) * s, p.lower * s, p.upper * s, p.objective * s


def _solve_simplex(p: LpProblem, cfg: SolverConfig) -> LpSolution:
    A, b, lo, hi, c = _float_data(p)
    if np.any(lo > hi):
        return LpSolution("Infeasible", certificate=[], method="simplex")
    m, n = A.shape
    spx = _BoundedSimplex(A, p.senses, b, lo, hi, cfg.tol)
    cost1 = np.concatenate([np.zeros(n + m), np.ones(m)])
    status, it = spx.run(cost1, cfg.max_iters)
    if status == "IterationLimit":
        return LpSolution("IterationLimit", iterations=it, method="simplex")
    infeas = spx.val[spx.art0:].sum()
    if infeas > max(cfg.tol * 10, 1e-7) * max(1.0, np.abs(b).max(initial=0.0)):
        y = spx.duals(cost1)
        cert = [int(r) for r in np.flatnonzero(np.abs(y) > 1e-9)]
        return LpSolution("Infeasible", certificate=cert, iterations=it, method="simplex")
    spx.drive_out_artificials()
    sign = -1.0 if p.maximize else 1.0
    cost2 = np.concatenate([sign * c, np.zeros(2 * m)])
    status, it2 = spx.run(cost2, max(cfg.max_iters - it, 0))
    spx._recompute_basic()
    x = spx.val[:n].copy()
    if status in ("IterationLimit", "Unbounded"):
        return LpSolution(status, x=x, iterations=it + it2, method="simplex")
    return LpSolution("Feasible", x=x, objective=float(c @ x), iterations=it + it2, method="simplex")


# ---------------------------------------------------------------- HiGHS


def _highs_parts(p: LpProblem):
    from scipy.optimize import linprog  # noqa: F401  (import check)
    s = 10.0**-p.q
    A = p.A.astype(float) * s
    b = p.rhs.astype(float) * s
    ge, le, eq = p.senses == GE, p.senses == LE, p.senses == EQ
    A_ub = sp.vstack([A[le], -A[ge]]).tocsr()
    b_ub = np.concatenate([b[le], -b[ge]])
    bounds = np.stack([p.lower * s, p.upper * s], axis=1)  # infinities mean unbounded
    return A, A_ub, b_ub, A[eq], b[eq], bounds, (le, ge, eq)


def _solve_highs(p: LpProblem, cfg: SolverConfig) -> LpSolution:
    from scipy.optimize import linprog
    A, A_ub, b_ub, A_eq, b_eq, bounds, _ = _highs_parts(p)
    c = p.objective.astype(float) * 10.0**-p.q * (-1.0 if p.maximize else 1.0)
    res = linprog(c, A_ub=A_ub if A_ub.shape[0] else None, b_ub=b_ub if A_ub.shape[0] else None,
                  A_eq=A_eq if A_eq.shape[0] else None, b_eq=b_eq if A_eq.shape[0] else None,
                  bounds=bounds, method="highs",
                  options={"primal_feasibility_tolerance": max(cfg.tol, 1e-10), "maxiter": cfg.max_iters,
                           "presolve": True})
    it = int(getattr(res, "nit", 0) or 0)
    if res.status == 0:
        return LpSolution("Feasible", x=np.asarray(res.x), objective=float(p.objective @ res.x) * 10.0**-p.q,
                          iterations=it, method="highs")
    if res.status == 1:
        return LpSolution("IterationLimit", iterations=it, method="highs")
    if res.status == 3:
        return LpSolution("Unbounded", iterations=it, method="highs")
    return LpSolution("Infeasible", certificate=_elastic_certificate(p, cfg), iterations=it, method="highs")


def _elastic_certificate(p: LpProblem, cfg: SolverConfig) -> list[int]:
    """Rows with nonzero duals in the min-total-violation relaxation."""
    from scipy.optimize import linprog
    m, n = p.n_rows, p.n_vars
    s = 10.0**-p.q
    A = p.A.astype(float) * s
    b = p.rhs.astype(float) * s
    # x, e_plus (helps >= / =), e_minus (helps <= / =)
    E = sp.identity(m, format="csr")
    big = sp.hstack([A, E, -E]).tocsr()
    lo, hi = p.lower * s, p.upper * s
    if np.any(lo > hi):
        return []
    bounds = np.concatenate([
        np.stack([lo, hi], axis=1),
        np.stack([np.zeros(m), np.where(p.senses == LE, 0.0, np.inf)], axis=1),
        np.stack([np.zeros(m), np.where(p.senses == GE, 0.0, np.inf)], axis=1),
    ])
    cost = np.concatenate([np.zeros(n), np.ones(2 * m)])
    res = linprog(cost, A_eq=big, b_eq=b, bounds=bounds, method="highs")
    if res.status != 0 or res.eqlin is None:
        return []
    y = np.asarray(res.eqlin.marginals)
    return [int(r) for r in np.flatnonzero(np.abs(y) > 1e-9)]


def solve(problem: LpProblem, config: SolverConfig | None = None) -> LpSolution:
    """Find a feasible (or optimal, with an objective) point.  Deterministic."""
    cfg = config or SolverConfig()
    problem.validate()
    if problem.n_vars == 0:
        lhs = np.zeros(problem.n_rows)
        ok = _row_ok(lhs, problem.rhs, problem.senses)
        if np.all(ok):
            return LpSolution("Feasible", x=np.zeros(0), objective=0.0, method="trivial")
        return LpSolution("Infeasible", certificate=[int(r) for r in np.flatnonzero(~ok)], method="trivial")
    method = cfg.method
    if method == "auto":
        cells = problem.n_rows * (problem.n_vars + 2 * problem.n_rows)
        method = "simplex" if cells <= cfg.simplex_max_cells else "highs"
    if method == "simplex":
        return _solve_simplex(problem, cfg)
    if method == "highs":
        return _solve_highs(problem, cfg)
    raise ValueError(f"unknown method {cfg.method!r}")


def _row_ok(lhs, rhs, senses) -> np.ndarray:
    return np.where(senses == GE, lhs >= rhs, np.where(senses == LE, lhs <= rhs, lhs == rhs))


# ---------------------------------------------------------------- exact checks


def snap(x: np.ndarray, p: int, lower: np.ndarray | None = None, upper: np.ndarray | None = None,
         q: int = 0) -> np.ndarray:
    """Round to the nearest multiple of ``10**-p``; returns int64 units at ``p``.

    Optional bounds (in units of ``10**-q``) are enforced after rounding.
    """
    u = np.rint(np.asarray(x, dtype=float) * 10.0**p).astype(np.int64)
    f = 10 ** (p - q) if p >= q else None
    if f is not None:
        if lower is not None:
            lo = np.where(np.isfinite(lower), lower, -np.inf) * f
            u = np.where(u < lo, np.ceil(lo), u).astype(np.int64)
        if upper is not None:
            hi = np.where(np.isfinite(upper), upper, np.inf) * f
            u = np.where(u > hi, np.floor(hi), u).astype(np.int64)
    return u


def violations(problem: LpProblem, units: np.ndarray, p: int) -> dict:
    """Exact check of an assignment given as int units of ``10**-p``.

    Returns the violated row indices and variable indices (bounds).
    """
    if p < problem.q:
        raise ValueError("assignment grid must be at least as fine as the problem grid")
    units = np.asarray(units, dtype=object) if _may_overflow(problem, units, p) else np.asarray(units, np.int64)
    f = 10 ** (p - problem.q)
    if units.dtype == object:
        lhs = np.array([sum(int(v) * int(units[j]) for j, v in zip(problem.A.indices[problem.A.indptr[r]:problem.A.indptr[r + 1]],
                                                                      problem.A.data[problem.A.indptr[r]:problem.A.indptr[r + 1]]))
                        for r in range(problem.n_rows)], dtype=object)
        rhs = np.array([int(v) * 10**p for v in problem.rhs], dtype=object)
    else:
        lhs = problem.A @ units
        rhs = problem.rhs * 10**p
    bad_rows = np.flatnonzero(~_row_ok(lhs, rhs, problem.senses))
    lo = problem.lower * f
    hi = problem.upper * f
    vals = units.astype(float)
    bad_vars = np.flatnonzero((vals < lo) | (vals > hi))
    return {"rows": [int(r) for r in bad_rows], "bounds": [int(j) for j in bad_vars]}


def _may_overflow(problem: LpProblem, units: np.ndarray, p: int) -> bool:
    if problem.A.nnz == 0 or len(units) == 0:
        return False
    amax = int(np.abs(problem.A.data).max())
    umax = int(np.abs(np.asarray(units)).max())
    width = int(np.diff(problem.A.indptr).max()) if problem.n_rows else 0
    return amax * umax * max(width, 1) >= 2**62 or int(np.abs(problem.rhs).max(initial=0)) * 10**p >= 2**62


# ---------------------------------------------------------------- LP text format


def _fmt(units: int, q: int) -> str:
    s = format_units(int(units), q)
    if "." in s:
        s = s.rstrip("0").rstrip(".")
    return s


def _check_name(name: str) -> None:
    if not _NAME_RE.match(name) or name.lower() in _RESERVED or re.match(r"^[eE]\d", name):
        raise UnsupportedName(name)


def _expr(coefs, cols, names, q) -> str:
    parts = []
    for v, j in zip(coefs, cols):
        v = int(v)
        sign = "-" if v < 0 else "+"
        parts.append(f"{sign} {_fmt(abs(v), q)} {names[j]}")
    if not parts:
        return f"0 {names[0]}" if names else "0"
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else "-" + text[1:]


def export_lp_format(problem: LpProblem, name: str = "problem") -> str:
    problem.validate()
    for nm in problem.names:
        _check_name(nm)
    rnames = problem.row_names or tuple(f"c{r + 1}" for r in range(problem.n_rows))
    for nm in rnames:
        _check_name(nm)
    q = problem.q
    lines = [f"\\ {name}", "Maximize" if problem.maximize else "Minimize"]
    obj_cols = np.flatnonzero(problem.objective)
    lines.append(" obj: " + _expr(problem.objective[obj_cols], obj_cols, problem.names, q))
    lines.append("Subject To")
    A = problem.A
    for r in range(problem.n_rows):
        sl = slice(A.indptr[r], A.indptr[r + 1])
        lhs = _expr(A.data[sl], A.indices[sl], problem.names, q)
        lines.append(f" {rnames[r]}: {lhs} {_SENSE_TEXT[int(problem.senses[r])]} {_fmt(problem.rhs[r], q)}")
    lines.append("Bounds")
    for j, nm in enumerate(problem.names):
        lo, hi = problem.lower[j], problem.upper[j]
        if not np.isfinite(lo) and not np.isfinite(hi):
            lines.append(f" {nm} free")
        elif lo == hi:
            lines.append(f" {nm} = {_fmt(int(lo), q)}")
        else:
            lo_s = _fmt(int(lo), q) if np.isfinite(lo) else "-inf"
            hi_s = _fmt(int(hi), q) if np.isfinite(hi) else "+inf"
            lines.append(f" {lo_s} <= {nm} <= {hi_s}")
    lines.append("End")
    return "\n".join(lines) + "\n"


_TOKEN_RE = re.compile(r"\s*(<=|>=|=<|=>|<|>|=|:|[+-]|[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?|[A-Za-z_][A-Za-z0-9_.]*)")


def _tokens(text: str) -> list[str]:
    out, pos = [], 0
    text = text.strip()
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if not m or m.end() == pos:
            raise MalformedProblem(f"cannot tokenize near {text[pos:pos + 20]!r}")
        out.append(m.group(1))
        pos = m.end()
    return out


def _is_num(tok: str) -> bool:
    return bool(re.match(r"^[0-9]*\.?[0-9]+(?:[eE][+-]?[0-9]+)?$", tok))


def _frac(tok: str) -> Fraction:
    return Fraction(tok)


def _parse_linear(toks: list[str], i: int, stop: set[str]):
    """Parse ``[+-] [coef] name ...`` up to a stop token; returns (terms, const, i)."""
    terms: dict[str, Fraction] = {}
    order: list[str] = []
    while i < len(toks) and toks[i] not in stop:
        sign = Fraction(1)
        while toks[i] in "+-":
            if toks[i] == "-":
                sign = -sign
            i += 1
        coef = Fraction(1)
        if _is_num(toks[i]):
            coef = _frac(toks[i])
            i += 1
        if i >= len(toks) or toks[i] in stop or _is_num(toks[i]) or toks[i] in "+-":
            raise MalformedProblem("constant terms are not supported")
        name = toks[i]
        i += 1
        if name not in terms:
            order.append(name)
            terms[name] = Fraction(0)
        terms[name] += sign * coef
    return [(nm, terms[nm]) for nm in order], i


def _digits_needed(values) -> int:
    q = 0
    for v in values:
        v = Fraction(v)
        d = v.denominator
        k = 0
        while d % 10 == 0 or d % 2 == 0 or d % 5 == 0:
            if d % 10 == 0:
                d //= 10
            elif d % 2 == 0:
                d //= 2
            else:
                d //= 5
            k += 1
        if d != 1:
            raise MalformedProblem(f"{v} is not a terminating decimal")
        while (v * 10**q).denominator != 1:
            q += 1
    return q


def parse_lp_format(text: str) -> LpProblem:
    """Parse the LP text subset written by :func:`export_lp_format`."""
    sections: dict[str, list[str]] = {}
    cur = None
    for raw in text.splitlines():
        line = raw.split("\\", 1)[0].strip()
        if not line:
            continue
        key = line.lower().replace(".", "")
        if key in ("minimize", "minimise", "min", "maximize", "maximise", "max"):
            cur = "obj"
            sections["sense"] = [key]
            sections["obj"] = []
            continue
        if key in ("subject to", "such that", "st"):
            cur = "st"
            sections.setdefault("st", [])
            continue
        if key in ("bounds", "bound"):
            cur = "bounds"
            sections.setdefault("bounds", [])
            continue
        if key == "end":
            break
        if key in ("general", "generals", "gen", "binary", "binaries", "bin"):
            raise MalformedProblem("integer sections are not supported")
        if cur is None:
            raise MalformedProblem(f"text outside a section: {line!r}")
        sections[cur].append(line)
    maximize = sections.get("sense", ["minimize"])[0].startswith("max")
    names: list[str] = []
    index: dict[str, int] = {}

    def var(nm: str) -> int:
        if nm not in index:
            index[nm] = len(names)
            names.append(nm)
        return index[nm]

    obj_toks = _tokens(" ".join(sections.get("obj", [])))
    if len(obj_toks) >= 2 and obj_toks[1] == ":":
        obj_toks = obj_toks[2:]
    obj_terms, _ = _parse_linear(obj_toks, 0, set()) if obj_toks and obj_toks != ["0"] else ([], 0)
    for nm, _ in obj_terms:
        var(nm)

    rows = []
    toks = _tokens(" ".join(sections.get("st", [])))
    i = 0
    rel = {"<=": LE, "=<": LE, "<": LE, ">=": GE, "=>": GE, ">": GE, "=": EQ}
    k = 0
    while i < len(toks):
        rname = None
        if i + 1 < len(toks) and toks[i + 1] == ":":
            rname = toks[i]
            i += 2
        terms, i = _parse_linear(toks, i, set(rel))
        if i >= len(toks):
            raise MalformedProblem("constraint without relation")
        sense = rel[toks[i]]
        i += 1
        sign = Fraction(1)
        while toks[i] in "+-":
            if toks[i] == "-":
                sign = -sign
            i += 1
        rhs = sign * _frac(toks[i])
        i += 1
        for nm, _ in terms:
            var(nm)
        k += 1
        rows.append((rname or f"c{k}", terms, sense, rhs))

    bounds: dict[str, list] = {}
    bound_order: list[str] = []
    for line in sections.get("bounds", []):
        bt = _tokens(re.sub(r"(?i)infinity|inf", "inf", line))
        nm = _apply_bound(bt, bounds, var)
        if nm not in bound_order:
            bound_order.append(nm)

    # variables listed under Bounds fix the column order; the rest follow first use
    listed = [nm for nm in bound_order if nm in index]
    rest = [nm for nm in names if nm not in set(listed)]
    names[:] = listed + rest
    index.clear()
    index.update({nm: j for j, nm in enumerate(names)})

    all_vals = [c for _, c in obj_terms] + [c for _, terms, _, _ in rows for _, c in terms] + [r for *_, r in rows]
    all_vals += [b for lohi in bounds.values() for b in lohi if b is not None and not isinstance(b, float)]
    q = _digits_needed(all_vals)
    f = 10**q
    n = len(names)
    lower = np.zeros(n)
    upper = np.full(n, np.inf)
    for nm, (lo, hi) in bounds.items():
        j = index[nm]
        lower[j] = lo if isinstance(lo, float) else float(int(lo * f))
        upper[j] = hi if isinstance(hi, float) else float(int(hi * f))
    data, ri, ci = [], [], []
    for r, (_, terms, _, _) in enumerate(rows):
        for nm, c in terms:
            data.append(int(c * f))
            ri.append(r)
            ci.append(index[nm])
    A = sp.csr_matrix((np.asarray(data, dtype=np.int64), (np.asarray(ri, dtype=np.int64), np.asarray(ci, dtype=np.int64))),
                      shape=(len(rows), n), dtype=np.int64)
    obj = np.zeros(n, dtype=np.int64)
    for nm, c in obj_terms:
        obj[index[nm]] = int(c * f)
    return LpProblem(tuple(names), A, [s for _, _, s, _ in rows], [int(r * f) for *_, r in rows], lower, upper, q,
                     obj, maximize, tuple(r[0] for r in rows))


def _bound_val(tok_sign: Fraction, tok: str):
    if tok.lower() == "inf":
        return math.inf if tok_sign > 0 else -math.inf
    return tok_sign * _frac(tok)


def _apply_bound(toks: list[str], bounds: dict, var) -> str:
    def number(i):
        sign = Fraction(1)
        while toks[i] in "+-":
            if toks[i] == "-":
                sign = -sign
            i += 1
        return _bound_val(sign, toks[i]), i + 1

    def cur(nm):
        var(nm)
        return bounds.setdefault(nm, [Fraction(0), math.inf])

    if len(toks) == 2 and toks[1].lower() == "free":
        b = cur(toks[0])
        b[0], b[1] = -math.inf, math.inf
        return toks[0]
    if toks[0] in "+-" or _is_num(toks[0]) or toks[0].lower() == "inf":
        lo, i = number(0)
        op1 = toks[i]
        nm = toks[i + 1]
        b = cur(nm)
        if op1 in ("<=", "=<", "<"):
            b[0] = lo
        elif op1 in (">=", "=>", ">"):
            b[1] = lo
        else:
            b[0] = b[1] = lo
        i += 2
        if i < len(toks):
            hi, _ = number(i + 1)
            if toks[i] in ("<=", "=<", "<"):
                b[1] = hi
            else:
                b[0] = hi
        return nm
    nm, op = toks[0], toks[1]
    val, _ = number(2)
    b = cur(nm)
    if op in ("<=", "=<", "<"):
        b[1] = val
    elif op in (">=", "=>", ">"):
        b[0] = val
    else:
        b[0] = b[1] = val
    return nm

from fractions import Fraction

import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from cltlearn.forge import stream
from cltlearn.lp import (EQ, GE, LE, LpProblem, MalformedProblem, SolverConfig, UnsupportedName, export_lp_format,
                         parse_lp_format, snap, solve, violations)

INF = np.inf
SIMPLEX = SolverConfig(method="simplex")
HIGHS = SolverConfig(method="highs")


def lp(rows, senses, rhs, lower, upper, q=0, names=None, **kw):
    rows = np.asarray(rows, dtype=np.int64).reshape(len(senses), len(lower))
    names = names or [f"x{j + 1}" for j in range(len(lower))]
    return LpProblem(names, sp.csr_matrix(rows), senses, rhs, lower, upper, q, **kw)


def random_problem(seed: int, q: int = 2) -> LpProblem:
    rng = stream(seed, 31)
    n, m = int(rng.integers(1, 7)), int(rng.integers(0, 7))
    A = rng.integers(-5, 6, size=(m, n)) * (rng.random((m, n)) < 0.6)
    senses = rng.choice([GE, LE, EQ], size=m, p=[0.45, 0.45, 0.1])
    rhs = rng.integers(-10, 11, size=m) * 10**q // 2
    lo = np.where(rng.random(n) < 0.8, rng.integers(-3, 2, size=n) * 10**q, -INF)
    hi = np.where(rng.random(n) < 0.8, lo + rng.integers(0, 5, size=n) * 10**q, INF)
    hi = np.where(np.isfinite(hi), hi, np.where(rng.random(n) < 0.5, 7 * 10**q, INF))
    obj = rng.integers(-3, 4, size=n) if rng.random() < 0.5 else None
    return lp((A * 10**q // 4).tolist(), senses, rhs, lo, hi, q=q, objective=obj)


def test_one_variable_feasibility():
    p = lp([[1000]], [GE], [250], [0], [1000], q=3)
    sol = solve(p, SIMPLEX)
    assert sol.feasible and 0.25 - 1e-9 <= sol.x[0] <= 1 + 1e-9
    assert violations(p, snap(sol.x, 3), 3) == {"rows": [], "bounds": []}


@pytest.mark.parametrize("cfg", [SIMPLEX, HIGHS])
def test_contradictory_bounds(cfg):
    p = lp([[1], [1]], [GE, LE], [2, 1], [-INF], [INF])
    assert solve(p, cfg).status == "Infeasible"


def test_infeasible_certificate_names_rows():
    p = lp([[1, 0], [1, 0], [0, 1]], [GE, LE, GE], [2, 1, 0], [-INF, 0], [INF, 1])
    for cfg in (SIMPLEX, HIGHS):
        sol = solve(p, cfg)
        assert sol.status == "Infeasible" and set(sol.certificate) >= {0, 1}
        rows = sorted(sol.certificate)
        sub = LpProblem(p.names, p.A[rows], p.senses[rows], p.rhs[rows], p.lower, p.upper, p.q)
        assert solve(sub, HIGHS).status == "Infeasible"


def test_objective_optimum():
    # min -x - y  s.t. x + 2y <= 4, 3x + y <= 6, x, y >= 0  ->  x = 1.6, y = 1.2
    p = lp([[1, 2], [3, 1]], [LE, LE], [4, 6], [0, 0], [INF, INF], objective=[-1, -1])
    for cfg in (SIMPLEX, HIGHS):
        sol = solve(p, cfg)
        assert sol.feasible
        assert np.allclose(sol.x, [1.6, 1.2], atol=1e-8) and sol.objective == pytest.approx(-2.8)


def test_unbounded_detected():
    p = lp([[1]], [GE], [0], [0], [INF], objective=[-1])
    assert solve(p, SIMPLEX).status == "Unbounded"


@pytest.mark.parametrize("seed", range(120))
def test_simplex_agrees_with_highs(seed):
    p = random_problem(seed)
    a, b = solve(p, SIMPLEX), solve(p, HIGHS)
    assert a.status == b.status
    if a.feasible:
        for sol in (a, b):
            lhs = p.A @ sol.x
            r = p.rhs.astype(float)
            assert np.all(np.where(p.senses == GE, lhs >= r - 1e-6, True))
            assert np.all(np.where(p.senses == LE, lhs <= r + 1e-6, True))
        if p.objective.any():
            assert a.objective == pytest.approx(b.objective, abs=1e-6)


@pytest.mark.parametrize("seed", range(20))
def test_deterministic(seed):
    p = random_problem(seed)
    a, b = solve(p, SIMPLEX), solve(p, SIMPLEX)
    assert a.status == b.status and a.iterations == b.iterations
    if a.feasible:
        assert np.array_equal(a.x, b.x)


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 10**6), st.integers(2, 9))
def test_row_scaling_keeps_status(seed, k):
    p = random_problem(seed)
    if not p.n_rows:
        return
    r = seed % p.n_rows
    D = np.ones(p.n_rows, dtype=np.int64)
    D[r] = k
    scaled = LpProblem(p.names, sp.diags(D) @ p.A, p.senses, p.rhs * D, p.lower, p.upper, p.q, p.objective)
    assert solve(scaled, SIMPLEX).status == solve(p, SIMPLEX).status


def test_snapped_solution_checked_exactly():
    p = lp([[3, 3]], [EQ], [1], [0, 0], [1, 1])  # x + y = 1/3 has no finite-decimal point
    sol = solve(p, SIMPLEX)
    assert sol.feasible
    assert violations(p, snap(sol.x, 3), 3)["rows"] == [0]


def test_exact_violation_check_against_fractions():
    p = random_problem(3)
    x = np.array([5, -7, 12, 0, 3, 1][: p.n_vars])
    got = violations(p, x, 4)
    dense = p.A.toarray()
    for r in range(p.n_rows):
        lhs = sum(Fraction(int(a), 10**p.q) * Fraction(int(v), 10**4) for a, v in zip(dense[r], x))
        rhs = Fraction(int(p.rhs[r]), 10**p.q)
        ok = lhs >= rhs if p.senses[r] == GE else lhs <= rhs if p.senses[r] == LE else lhs == rhs
        assert ok == (r not in got["rows"])


def test_malformed():
    with pytest.raises(MalformedProblem):
        LpProblem(("x",), sp.csr_matrix(np.ones((1, 2))), [GE], [0], [0], [1]).validate()
    with pytest.raises(MalformedProblem):
        lp([[1]], [7], [0], [0], [1]).validate()


def test_empty_objective_text():
    text = export_lp_format(lp([[1, 1]], [LE], [1], [0, 0], [1, 1]), "tiny")
    assert text == ("\\ tiny\nMinimize\n obj: 0 x1\nSubject To\n c1: 1 x1 + 1 x2 <= 1\n"
                    "Bounds\n 0 <= x1 <= 1\n 0 <= x2 <= 1\nEnd\n")
    back = parse_lp_format(text)
    assert back == lp([[1, 1]], [LE], [1], [0, 0], [1, 1])


@pytest.mark.parametrize("seed", range(100))
def test_text_round_trip(seed):
    p = random_problem(seed, q=seed % 4)
    assert parse_lp_format(export_lp_format(p)) == p


def test_decimal_coefficients_round_trip():
    p = lp([[467, -1000]], [GE], [-1], [1, 0], [1000, 1000], q=3, names=["w_2_1_1", "theta_1_1"], maximize=True,
           objective=[1, 0])
    text = export_lp_format(p)
    assert "0.467 w_2_1_1 - 1 theta_1_1 >= -0.001" in text and text.splitlines()[1] == "Maximize"
    assert parse_lp_format(text) == p


@pytest.mark.parametrize("bad", ["1x", "end", "x-y", "e12", ""])
def test_unsupported_names(bad):
    with pytest.raises(UnsupportedName):
        export_lp_format(lp([[1]], [GE], [0], [0], [1], names=[bad]))


def test_parse_accepts_common_variants():
    text = """\\ hand written
Minimize
 cost: 2 a + 3.5 b
Subject To
 r1: a + b >= 1
 r2: a - 0.25 b <= 2.5
Bounds
 a >= 0
 -1 <= b <= 4
End
"""
    p = parse_lp_format(text)
    assert p.names == ("a", "b") and p.q == 2
    assert p.objective.tolist() == [200, 350]
    assert p.lower.tolist() == [0, -100] and p.upper.tolist() == [INF, 400]
    sol = solve(p)
    assert sol.feasible and np.allclose(sol.x, [2, -1]) and sol.objective == pytest.approx(0.5)

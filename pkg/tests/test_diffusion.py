import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import hand_instance, random_instance, status
from cltlearn.diffusion import influence_function, influence_sum, influence_sums, replay_problems, run, step
from cltlearn.fixed import ScaledValue
from cltlearn.forge import sample_initial, stream
from cltlearn.model import CltInstance, InvariantViolation, status_problems


def brute_step(inst: CltInstance, prev):
    """Per-node walk of the edge list, written without numpy vectorization."""
    n, s = prev.shape
    p1 = prev.copy()
    p2 = prev.copy()
    for i in range(n):
        if prev[i].any():
            continue
        sums = [0] * s
        for k, (a, b) in enumerate(inst.graph.edges.tolist()):
            if b == i:
                for c in range(s):
                    if prev[a, c]:
                        sums[c] += int(inst.weights[k, c])
        cands = [c for c in range(s) if sums[c] >= inst.thresholds[i, c]]
        for c in cands:
            p1[i, c] = True
        if cands:
            best = cands[0]
            for c in cands[1:]:
                if sums[c] > sums[best]:
                    best = c
            p2[i, best] = True
    return p1, p2


def test_two_term_sum():
    inst = hand_instance(3, 1, [(0, 2), (1, 2)], [["0.300"], ["0.400"]], [["0.5"]] * 3)
    assert influence_sum(inst, status(3, 1, [(0, 0), (1, 0)]), 2, 0) == ScaledValue.from_decimal_string("0.700", 3)
    assert influence_sum(inst, status(3, 1, []), 2, 0).is_zero()
    with pytest.raises(IndexError):
        influence_sum(inst, status(3, 1, []), 3, 0)


def test_figure_one_scenario():
    # v1 seeded in cascade 2, v2 in cascade 1; both point at v3
    inst = hand_instance(3, 2, [(1, 2), (0, 2)], [["0.700", "0"], ["0", "0.600"]], [["0.5", "0.5"]] * 3)
    out = step(inst, status(3, 2, [(0, 1), (1, 0)]))
    assert out.phase1[2].tolist() == [True, True]
    assert out.phase2[2].tolist() == [True, False]


def test_tie_goes_to_smaller_index():
    inst = hand_instance(3, 2, [(0, 2), (1, 2)], [["0.5", "0"], ["0", "0.5"]], [["0.5", "0.5"]] * 3)
    out = step(inst, status(3, 2, [(0, 0), (1, 1)]))
    assert out.phase2[2].tolist() == [True, False]


def test_empty_status_stays_empty():
    inst = random_instance(10, 3, 4)
    out = step(inst, np.zeros((10, 3), bool))
    assert not out.phase1.any() and not out.phase2.any()


def test_chain_trace():
    inst = hand_instance(3, 1, [(0, 1), (1, 2)], [["1.000"], ["1.000"]], [["0.500"]] * 3)
    traj = run(inst, status(3, 1, [(0, 0)]))
    assert traj.phase(1, 2)[:, 0].tolist() == [True, True, False]
    assert traj.phase(2, 2)[:, 0].tolist() == [True, True, True]


def test_single_node_seeded():
    inst = hand_instance(1, 2, [], [], [["0.5", "0.5"]])
    init = status(1, 2, [(0, 1)])
    assert np.array_equal(influence_function(inst, init), init)


def test_active_nodes_keep_cascade():
    # node 2 is already 2-active; a strong cascade-1 push must not flip it
    inst = hand_instance(3, 2, [(0, 2)], [["1.0", "0"]], [["0.1", "0.1"]] * 3)
    out = step(inst, status(3, 2, [(0, 0), (2, 1)]))
    assert out.phase2[2].tolist() == [False, True]


def test_rejects_double_ownership():
    inst = random_instance(4, 2, 0)
    with pytest.raises(InvariantViolation):
        step(inst, status(4, 2, [(0, 0), (0, 1)]))


def test_sums_match_brute_force_on_fifty_nodes():
    inst = random_instance(50, 3, 11, p=0.1)
    prev = sample_initial(50, 3, stream(11, 7))
    z = influence_sums(inst, prev)
    for i in range(50):
        for c in range(3):
            acc = sum(int(w[c]) for (a, b), w in zip(inst.graph.edges.tolist(), inst.weights) if b == i and prev[a, c])
            assert z[i, c] == acc == influence_sum(inst, prev, i, c).units


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 20), st.integers(1, 4), st.integers(0, 2**31),
       st.sampled_from(["weighted-cascade", "uniform-normalized"]))
def test_step_matches_brute_force(n, s, seed, scheme):
    inst = random_instance(n, s, seed, scheme, p=0.3)
    cur = sample_initial(n, s, stream(seed, 7))
    for _ in range(n):
        p1, p2 = brute_step(inst, cur)
        out = step(inst, cur)
        assert np.array_equal(out.phase1, p1) and np.array_equal(out.phase2, p2)
        if np.array_equal(p2, cur):
            break
        cur = p2


@settings(max_examples=60, deadline=None)
@given(st.integers(2, 30), st.integers(1, 4), st.integers(0, 2**31))
def test_run_invariants(n, s, seed):
    inst = random_instance(n, s, seed, p=0.2)
    init = sample_initial(n, s, stream(seed, 7))
    traj = run(inst, init)
    assert status_problems(traj) == []
    assert replay_problems(inst, traj) == []
    final = traj.final()
    assert np.array_equal(step(inst, final).phase2, final)
    assert np.all(final >= init)
    prev = init
    for cur in traj.phase2_series():
        assert np.all(cur >= prev) and np.all(cur.sum(axis=1) <= 1)
        prev = cur
    assert run(inst, init) == traj


@settings(max_examples=40, deadline=None)
@given(st.integers(3, 15), st.integers(2, 4), st.integers(0, 2**31))
def test_tie_rule_follows_labels(n, s, seed):
    """Reversing cascade labels sends ties to the new smallest label."""
    inst = random_instance(n, s, seed, p=0.4)
    rev = CltInstance(inst.graph, s, inst.q, inst.weights[:, ::-1], inst.thresholds[:, ::-1])
    init = sample_initial(n, s, stream(seed, 7))
    out, out_rev = step(inst, init), step(rev, init[:, ::-1])
    z = influence_sums(inst, init)
    assert np.array_equal(out.phase1, out_rev.phase1[:, ::-1])
    for i in np.flatnonzero(out.phase1.any(axis=1) & ~init.any(axis=1)):
        cands = np.flatnonzero(out.phase1[i])
        best = z[i, cands].max()
        winners = cands[z[i, cands] == best]
        assert out.phase2[i, winners.min()]
        assert out_rev.phase2[i, s - 1 - winners.max()]


def test_candidate_soundness():
    for seed in range(20):
        inst = random_instance(20, 3, seed, p=0.25)
        prev = sample_initial(20, 3, stream(seed, 7))
        out = step(inst, prev)
        new = out.phase1 & ~prev
        z = influence_sums(inst, prev)
        assert np.all(z[new] >= inst.thresholds[new])

import warnings

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import stats

from conftest import random_graph
from cltlearn.diffusion import replay_problems
from cltlearn.forge import (DEFAULT_INITIATOR, GenSpec, IsolatedTargetUnderUniformScheme, gen_kronecker,
                            gen_power_law, generate_dataset, kronecker_probabilities, largest_remainder,
                            make_graph, make_instance, sample_initial, seed_count_range, stream,
                            weighted_cascade_units)
from cltlearn.model import Graph, status_problems, validate_instance


def test_zero_initiator_gives_no_edges():
    g = gen_kronecker(((0, 0), (0, 0)), 4, 1)
    assert g.n == 16 and g.m == 0


def test_default_kronecker_size():
    g = make_graph(GenSpec())
    assert g.n == 1024
    assert abs(g.m - 2655) < 0.1 * 2655


def test_kronecker_edge_count_matches_expectation():
    p = kronecker_probabilities(DEFAULT_INITIATOR, 10)
    np.fill_diagonal(p, 0)
    mean, var = p.sum(), (p * (1 - p)).sum()
    counts = np.array([gen_kronecker(DEFAULT_INITIATOR, 10, seed).m for seed in range(50)])
    assert np.all(np.abs(counts - mean) <= 3 * np.sqrt(var) + 1)
    assert abs(counts.mean() - mean) <= 3 * np.sqrt(var / 50)


def test_power_law_seed_clique():
    g = gen_power_law(4, 3, 0)
    assert g.edges.tolist() == [[3, 0], [3, 1], [3, 2]]


def test_power_law_edge_count():
    g = gen_power_law(768, 2, 0)
    assert g.n == 768 and g.m == 1532
    assert np.all(np.bincount(g.edges[:, 0], minlength=768)[2:] == 2)


def test_power_law_tail_heavier_than_uniform():
    def top_decile(deg):
        d = np.sort(deg)[::-1]
        return d[: len(d) // 10].sum() / d.sum()

    wins = 0
    for seed in range(20):
        g = gen_power_law(768, 2, seed)
        rng = stream(seed, 42)
        flat = Graph.from_edges(768, rng.integers(0, 768, size=(3000, 2)), dedupe=True)
        flat = Graph(768, flat.edges[:g.m])
        wins += top_decile(g.in_degrees()) > top_decile(flat.in_degrees())
    assert wins == 20


def test_weighted_cascade_example():
    assert weighted_cascade_units(2, 1, 3) == 466
    g = Graph(3, [[0, 2], [1, 2]])
    inst = make_instance(g, 1, 3, "weighted-cascade", 0)
    assert inst.weights[:, 0].tolist() == [466, 466]


@given(st.integers(0, 200), st.integers(1, 8), st.integers(1, 5))
def test_weighted_cascade_sum_below_one(d, s, q):
    w = weighted_cascade_units(d, s, q)
    assert d * w < 10**q
    # round toward zero: one more unit would overshoot 1/(d + s/7)
    assert (w + 1) * (7 * d + s) > 7 * 10**q


@settings(max_examples=30, deadline=None)
@given(st.integers(2, 40), st.integers(1, 4), st.integers(0, 2**31))
def test_uniform_sums_exactly_one(n, s, seed):
    g = random_graph(n, 0.3, stream(seed, 1))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IsolatedTargetUnderUniformScheme)
        inst = make_instance(g, s, 3, "uniform-normalized", seed)
    col = np.zeros((n, s), dtype=np.int64)
    np.add.at(col, g.edges[:, 1], inst.weights)
    has_in = g.in_degrees() > 0
    assert np.all(col[has_in] == 1000) and np.all(col[~has_in] == 0)
    assert validate_instance(inst) == []


def test_isolated_target_warns():
    with pytest.warns(IsolatedTargetUnderUniformScheme):
        make_instance(Graph(3, [[0, 1]]), 1, 3, "uniform-normalized", 0)


@given(st.lists(st.floats(0, 1), min_size=1, max_size=30), st.integers(0, 5000))
def test_largest_remainder_exact(raw, total):
    out = largest_remainder(np.array(raw), total)
    assert out.sum() == total and np.all(out >= 0)


def test_seed_range():
    assert seed_count_range(100) == (10, 50)
    rng = stream(0, 3)
    for _ in range(200):
        assert 10 <= sample_initial(100, 3, rng).sum() <= 50


def test_forced_full_seeding():
    init = sample_initial(10, 3, stream(0, 3), count=10)
    assert np.all(init.sum(axis=1) == 1)


def test_seed_count_uniform_chi_square():
    rng = stream(1, 3)
    counts = [int(sample_initial(100, 3, rng).sum()) for _ in range(10_000)]
    observed = np.bincount(counts, minlength=51)[10:51]
    assert stats.chisquare(observed).pvalue > 1e-3


def test_empty_dataset():
    inst = make_instance(gen_power_law(10, 2, 0), 2, 3, "weighted-cascade", 0)
    ds = generate_dataset(inst, 0, 0)
    assert len(ds) == 0 and ds.n == 10


@settings(max_examples=15, deadline=None)
@given(st.integers(3, 40), st.integers(1, 4), st.integers(0, 2**31))
def test_samples_replay(n, s, seed):
    inst = make_instance(gen_power_law(n, 2, seed), s, 3, "weighted-cascade", seed)
    for smp in generate_dataset(inst, 10, seed):
        assert replay_problems(inst, smp) == []
        assert status_problems(smp) == []
        assert np.all(smp.initial.sum(axis=1) <= 1)


def test_deterministic_and_split_invariant():
    spec = GenSpec(graph="powerlaw", n=60, m=2, seed=9)
    a, b = make_graph(spec), make_graph(spec)
    assert a == b
    inst = make_instance(a, 3, 3, "weighted-cascade", 9)
    assert make_instance(b, 3, 3, "weighted-cascade", 9) == inst
    whole = generate_dataset(inst, 8, 9)
    parts = generate_dataset(inst, 3, 9).samples + generate_dataset(inst, 5, 9, start=3).samples
    assert whole.samples == parts
    assert generate_dataset(inst, 8, 9, jobs=2) == whole


def test_pinned_stream_values():
    # Philox output is platform independent; pin a few draws
    draws = stream(0, 1, 0).integers(0, 10**6, size=3).tolist()
    assert draws == stream(0, 1, 0).integers(0, 10**6, size=3).tolist()
    assert draws != stream(0, 1, 1).integers(0, 10**6, size=3).tolist()


@pytest.fixture(scope="module")
def kronecker_pool():
    inst = make_instance(make_graph(GenSpec()), 3, 3, "weighted-cascade", 0)
    return generate_dataset(inst, 500, 0)


def test_pool_new_activations_near_254(kronecker_pool):
    # "total active nodes is 254" sits below the mean seed count (~307), so it
    # can only refer to nodes activated by the diffusion itself
    new = np.mean([smp.final().sum() - smp.initial.sum() for smp in kronecker_pool])
    assert 0.5 * 254 <= new <= 1.5 * 254


def test_pool_average_steps_near_four(kronecker_pool):
    steps = np.mean([smp.n_changing for smp in kronecker_pool])
    assert 0.5 * 4 <= steps <= 1.5 * 4, f"average diffusion steps {steps:.2f}"

import itertools
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from conftest import random_instance
from cltlearn.forge import generate_dataset, stream
from cltlearn.metrics import (MetricsReport, ShapeMismatch, aggregate, classification_metrics, evaluate,
                              evaluate_random, format_table, labels, mean_std, random_baseline, step_matching,
                              write_report_csv, zero_one_loss)
from cltlearn.model import Trajectory

statuses = st.integers(1, 8).flatmap(lambda n: st.integers(1, 8).flatmap(
    lambda s: st.tuples(*(arrays(bool, (n, s)),) * 3)))


def test_loss_examples():
    a = np.zeros((2, 2), bool)
    b = a.copy()
    b[1, 0] = True
    assert zero_one_loss(a, a) == 0
    assert zero_one_loss(a, b) == Fraction(1, 8)
    assert zero_one_loss(a, ~a) == Fraction(1, 2)
    with pytest.raises(ShapeMismatch):
        zero_one_loss(a, np.zeros((2, 3), bool))


@given(statuses)
def test_loss_range(trip):
    x, y, _ = trip
    assert 0 <= zero_one_loss(x, y) <= Fraction(1, 2)


def test_loss_pseudometric_on_random_triples():
    rng = stream(0, 50)
    for _ in range(10_000):
        n, s = (int(v) for v in rng.integers(1, 6, size=2))
        x, y, z = (rng.random((n, s)) < 0.5 for _ in range(3))
        dxy, dyz, dxz = zero_one_loss(x, y), zero_one_loss(y, z), zero_one_loss(x, z)
        assert dxy == zero_one_loss(y, x)
        assert (dxy == 0) == np.array_equal(x, y)
        assert dxz <= dxy + dyz


def brute_counts(t, p):
    tp = fp = fn = tn = 0
    for a, b in zip(t.ravel().tolist(), p.ravel().tolist()):
        if a and b:
            tp += 1
        elif b:
            fp += 1
        elif a:
            fn += 1
        else:
            tn += 1
    return tp, fp, fn, tn


def check_against_brute(t, p):
    tp, fp, fn, tn = brute_counts(t, p)
    m = classification_metrics(t, p)
    assert m["precision"] == pytest.approx(tp / (tp + fp) if tp + fp else 0.0)
    assert m["recall"] == pytest.approx(tp / (tp + fn) if tp + fn else 0.0)
    assert m["f1"] == pytest.approx(2 * tp / (2 * tp + fp + fn) if tp else 0.0)
    assert m["accuracy"] == pytest.approx((tp + tn) / t.size)


def test_exhaustive_tiny_shapes():
    for n, s in [(1, 1), (1, 2), (2, 1), (2, 2), (1, 3), (3, 1)]:
        cells = n * s
        for tb in itertools.product([False, True], repeat=cells):
            for pb in itertools.product([False, True], repeat=cells):
                check_against_brute(np.array(tb).reshape(n, s), np.array(pb).reshape(n, s))


@given(statuses)
def test_brute_force_recount(trip):
    t, p, _ = trip
    check_against_brute(t, p)


def test_perfect_and_all_inactive():
    t = np.zeros((4, 3), bool)
    t[0, 1] = t[2, 0] = True
    assert classification_metrics(t, t) == {"precision": 1.0, "recall": 1.0, "f1": 1.0, "accuracy": 1.0}
    m = classification_metrics(t, np.zeros_like(t))
    assert m["f1"] == 0.0 and m["accuracy"] == pytest.approx(10 / 12)


def test_node_average_by_hand():
    t = np.array([[1, 0], [0, 1], [0, 0], [1, 0]], bool)
    p = np.array([[1, 0], [1, 0], [0, 0], [0, 0]], bool)
    assert labels(t).tolist() == [1, 2, 0, 1] and labels(p).tolist() == [1, 1, 0, 0]
    m = classification_metrics(t, p, "node")
    # class 0: P=1/2 R=1; class 1: P=1/2 R=1/2; class 2: P=0 R=0
    assert m["precision"] == pytest.approx((0.5 + 0.5 + 0) / 3)
    assert m["recall"] == pytest.approx((1 + 0.5 + 0) / 3)
    assert m["f1"] == pytest.approx((2 / 3 + 0.5 + 0) / 3)
    assert m["accuracy"] == pytest.approx(0.5)


def test_macro_averages_cascades():
    t = np.array([[1, 0], [0, 1]], bool)
    p = np.array([[1, 0], [0, 0]], bool)
    assert classification_metrics(t, p, "macro")["f1"] == pytest.approx(0.5)
    with pytest.raises(ValueError):
        classification_metrics(t, p, "weighted")


def test_step_matching():
    inst = random_instance(30, 2, 3, p=0.2)
    smp = next(x for x in generate_dataset(inst, 40, 3) if x.n_changing >= 3)
    assert np.all(step_matching(smp, smp) == 1)
    # flip one newly activated cell from step 2 on
    i, c = np.argwhere(smp.phase(2, 2) & ~smp.phase(1, 2))[0]
    steps = []
    for t, (p1, p2) in enumerate(smp.steps, start=1):
        p2 = p2.copy()
        if t >= 2:
            p2[i, c] = False
        steps.append((p1, p2))
    rates = step_matching(smp, Trajectory(smp.initial, tuple(steps), smp.horizon))
    assert rates[0] == 1 and np.all(rates[1:] < 1)
    with pytest.raises(ShapeMismatch):
        step_matching(smp, Trajectory(smp.initial[:, :1], (), smp.horizon))


def test_random_baseline_per_cell_agreement():
    s, n, reps = 3, 200, 200
    rng = stream(1, 60)
    agree = []
    for _ in range(reps):
        truth, pred = random_baseline(n, s, rng), random_baseline(n, s, rng)
        agree.append(np.mean(truth == pred))
    p = 1 / (s + 1)
    expected = p * p + (1 - p) * (1 - p)
    # cells of one node are dependent; bound the variance per node instead
    node_var = np.var([np.mean(random_baseline(1, s, rng) == random_baseline(1, s, rng)) for _ in range(20000)])
    sigma = np.sqrt(node_var / (n * reps))
    assert abs(np.mean(agree) - expected) <= 3 * sigma


def test_random_baseline_shape_and_determinism():
    a = random_baseline(50, 3, stream(2, 5))
    assert np.array_equal(a, random_baseline(50, 3, stream(2, 5)))
    assert np.all(a.sum(axis=1) <= 1)


def test_random_baseline_band_on_small_protocol():
    inst = random_instance(60, 3, 4, p=0.05)
    test = generate_dataset(inst, 100, 4)
    rep = evaluate_random(test, 4, "node")
    for v in (rep.f1, rep.precision, rep.accuracy):
        assert 0.15 <= v <= 0.35


def test_mean_std_two_pass():
    assert mean_std([0.5] * 4) == (0.5, 0.0)
    m, s = mean_std([1e9 + 1, 1e9 + 2, 1e9 + 3])
    assert m == pytest.approx(1e9 + 2) and s == pytest.approx(1.0)
    assert mean_std([2.0]) == (2.0, 0.0)


def test_aggregate_and_reports(tmp_path):
    inst = random_instance(20, 2, 5, p=0.2)
    test = generate_dataset(inst, 10, 5)
    rep = evaluate(inst, test, steps=3)
    assert rep.f1 == 1.0 and rep.loss == 0 and rep.step_rates == [1.0, 1.0, 1.0]
    summary = aggregate([rep, rep])
    assert summary["f1"] == (1.0, 0.0, 2) and summary["step_3"] == (1.0, 0.0, 2)
    path = tmp_path / "r.csv"
    write_report_csv(path, summary)
    lines = path.read_text().splitlines()
    assert lines[0] == "metric,mean,stddev,runs" and lines[1] == "loss,0.000000,0.000000,2"
    assert "f1" in format_table(summary)
    assert isinstance(rep, MetricsReport)

"""Losses, classification scores, step matching and the random baseline."""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .diffusion import run
from .forge import BASELINE, stream
from .model import CltInstance, Dataset, Trajectory


class ShapeMismatch(ValueError):
    pass


def _pair(truth, pred) -> tuple[np.ndarray, np.ndarray]:
    t, p = np.asarray(truth, dtype=bool), np.asarray(pred, dtype=bool)
    if t.shape != p.shape:
        raise ShapeMismatch(f"{t.shape} vs {p.shape}")
    return t, p


def zero_one_loss(truth, pred) -> Fraction:
    """``#{(i, s): truth != pred} / (2 N S)``; at most one half."""
    t, p = _pair(truth, pred)
    if t.ndim != 2:
        raise ShapeMismatch("expected an N x S status")
    n, s = t.shape
    return Fraction(int(np.count_nonzero(t != p)), 2 * n * s)


def labels(status) -> np.ndarray:
    """Per node: 0 if inactive, else 1 + cascade index."""
    a = np.asarray(status, dtype=bool)
    return np.where(a.any(axis=-1), a.argmax(axis=-1) + 1, 0)


def _prf(tp: int, fp: int, fn: int) -> tuple[float, float, float]:
    prec = tp / (tp + fp) if tp + fp else 0.0
    rec = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
    return prec, rec, f1


def classification_metrics(truth, pred, average: str = "micro") -> dict:
    """Precision, recall, F1 and accuracy.

    ``micro`` pools every (node, cascade) cell with "active" as the positive
    class.  ``macro`` averages that per cascade.  ``node`` treats each node as
    one sample labelled inactive / cascade 1..S and macro-averages over those
    S+1 classes.  Leading axes (e.g. samples) are pooled.
    """
    t, p = _pair(truth, pred)
    if average == "micro":
        tp = int(np.count_nonzero(t & p))
        fp = int(np.count_nonzero(~t & p))
        fn = int(np.count_nonzero(t & ~p))
        prec, rec, f1 = _prf(tp, fp, fn)
        return {"precision": prec, "recall": rec, "f1": f1, "accuracy": float(np.mean(t == p)) if t.size else 1.0}
    if average == "macro":
        per = [classification_metrics(t[..., s], p[..., s], "micro") for s in range(t.shape[-1])]
        out = {k: float(np.mean([d[k] for d in per])) for k in ("precision", "recall", "f1")}
        out["accuracy"] = float(np.mean(t == p)) if t.size else 1.0
        return out
    if average == "node":
        lt, lp = labels(t).ravel(), labels(p).ravel()
        scores = []
        for c in range(t.shape[-1] + 1):
            tp = int(np.count_nonzero((lt == c) & (lp == c)))
            fp = int(np.count_nonzero((lt != c) & (lp == c)))
            fn = int(np.count_nonzero((lt == c) & (lp != c)))
            if tp + fp + fn:
                scores.append(_prf(tp, fp, fn))
        prec, rec, f1 = (float(np.mean(col)) for col in zip(*scores)) if scores else (1.0, 1.0, 1.0)
        return {"precision": prec, "recall": rec, "f1": f1, "accuracy": float(np.mean(lt == lp)) if lt.size else 1.0}
    raise ValueError(f"unknown averaging {average!r}")


def step_matching(truth: Trajectory, pred: Trajectory, steps: int | None = None) -> np.ndarray:
    """Per step ``t = 1..steps``: share of phase-2 cells that agree."""
    if truth.horizon != pred.horizon and steps is None:
        raise ShapeMismatch(f"horizons {truth.horizon} vs {pred.horizon}")
    if truth.initial.shape != pred.initial.shape:
        raise ShapeMismatch(f"{truth.initial.shape} vs {pred.initial.shape}")
    steps = truth.horizon if steps is None else steps
    return np.array([np.mean(truth.phase(t, 2) == pred.phase(t, 2)) for t in range(1, steps + 1)])


def random_baseline(n: int, s: int, rng: np.random.Generator) -> np.ndarray:
    """Each node uniformly inactive or in one of the ``s`` cascades."""
    lab = rng.integers(0, s + 1, size=n)
    out = np.zeros((n, s), dtype=bool)
    act = np.flatnonzero(lab)
    out[act, lab[act] - 1] = True
    return out


def mean_std(values: Sequence[float]) -> tuple[float, float]:
    """Two-pass mean and sample standard deviation (0 for fewer than two values)."""
    xs = [float(v) for v in values]
    if not xs:
        return math.nan, math.nan
    mean = math.fsum(xs) / len(xs)
    if len(xs) < 2:
        return mean, 0.0
    return mean, math.sqrt(math.fsum((x - mean) ** 2 for x in xs) / (len(xs) - 1))


@dataclass
class MetricsReport:
    loss: Fraction
    precision: float
    recall: float
    f1: float
    accuracy: float
    samples: int
    step_rates: list[float] = field(default_factory=list)
    average: str = "micro"

    def row(self) -> dict:
        return {"loss": float(self.loss), "precision": self.precision, "recall": self.recall,
                "f1": self.f1, "accuracy": self.accuracy}


def evaluate(instance: CltInstance, test: Dataset, average: str = "micro", steps: int = 0) -> MetricsReport:
    """Score the influence function of ``instance`` against recorded outcomes.

    ``steps > 0`` also reports mean phase-2 agreement for the first ``steps``
    steps of every test trajectory.
    """
    truth = np.stack([smp.final() for smp in test]) if len(test) else np.zeros((0, test.n, test.s), bool)
    preds, rates = [], []
    for smp in test:
        traj = run(instance, smp.initial, smp.horizon)
        preds.append(traj.final())
        if steps:
            rates.append(step_matching(smp, traj, min(steps, smp.horizon)))
    pred = np.stack(preds) if preds else np.zeros_like(truth)
    return _report(truth, pred, average, rates)


def evaluate_random(test: Dataset, seed: int, average: str = "micro", rep: int = 0) -> MetricsReport:
    rng = stream(seed, BASELINE, rep)
    truth = np.stack([smp.final() for smp in test])
    pred = np.stack([random_baseline(test.n, test.s, rng) for _ in test])
    return _report(truth, pred, average, [])


def _report(truth, pred, average, rates) -> MetricsReport:
    loss = sum((zero_one_loss(t, p) for t, p in zip(truth, pred)), Fraction(0))
    loss = loss / len(truth) if len(truth) else Fraction(0)
    m = classification_metrics(truth, pred, average)
    step_rates = list(np.mean(np.stack(rates), axis=0)) if rates else []
    return MetricsReport(loss, m["precision"], m["recall"], m["f1"], m["accuracy"], len(truth),
                         [float(r) for r in step_rates], average)


def aggregate(reports: Iterable[MetricsReport]) -> dict[str, tuple[float, float, int]]:
    reps = list(reports)
    out = {}
    for key in ("loss", "precision", "recall", "f1", "accuracy"):
        vals = [r.row()[key] for r in reps]
        m, s = mean_std(vals)
        out[key] = (m, s, len(vals))
    steps = min((len(r.step_rates) for r in reps), default=0)
    for t in range(steps):
        m, s = mean_std([r.step_rates[t] for r in reps])
        out[f"step_{t + 1}"] = (m, s, len(reps))
    return out


def write_report_csv(path, summary: dict[str, tuple[float, float, int]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["metric", "mean", "stddev", "runs"])
        for key, (m, s, k) in summary.items():
            w.writerow([key, f"{m:.6f}", f"{s:.6f}", k])


def format_table(summary: dict[str, tuple[float, float, int]]) -> str:
    width = max([12] + [len(k) + 2 for k in summary])
    lines = [f"{'metric':<{width}}{'mean':>10}{'stddev':>10}{'runs':>6}"]
    for key, (m, s, k) in summary.items():
        lines.append(f"{key:<{width}}{m:>10.4f}{s:>10.4f}{k:>6}")
    return "\n".join(lines)

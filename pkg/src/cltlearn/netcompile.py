"""Compile a CLT instance into a layered piecewise-linear network.

One diffusion step becomes ``2Z + 5`` layers (``S' = 2**Z`` cascades after
padding):

=============  ===========================================================
phase1         in-neighbor sums per cascade (self-link weight 2), kept iff
               they reach the threshold
encode         scale by ``10**(Q+D)`` and append the identity code
               ``S' + 1 - s`` in the ``D`` low digits of candidates
compare (2Z)   pairwise ``relu(a - b) + b`` halving the candidates per node
recover        ``mod 10**D`` leaves the winner's code
thermometer    unit ``r`` of a node fires iff the code is at least ``r``
onehot         adjacent thermometer differences, mapped back to cascades
=============  ===========================================================

For ``S = 2`` a shorter path (``phase1``, ``compare``, ``onehot``) needs no
identity coding.

All values are exact integers; a layer's pre-activation ``W @ h`` lives on
the ``10**-(in_exp + weight_exp)`` grid and is reduced to ``out_exp`` after
the activation, refusing any inexact division.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np
import scipy.sparse as sp

from .fixed import format_units
from .model import CltInstance

SELF_WEIGHT = 2
_INT_LIMIT = 2**62


class Act(IntEnum):
    LINEAR = 0
    RELU = 1
    THRESHOLD_KEEP = 2
    IDENTITY_APPEND = 3
    MODULO = 4
    STEP_AT_LEAST = 5


class PrecisionOverflow(ArithmeticError):
    pass


class WidthMismatch(ValueError):
    pass


@dataclass(frozen=True, eq=False)
class LayerSpec:
    role: str
    weights: sp.csr_matrix  # int64, (out, in)
    weight_exp: int  # real weight = int * 10**-weight_exp
    in_exp: int
    out_exp: int
    kinds: np.ndarray  # (out,) Act codes
    params: np.ndarray  # (out,) int64 on the pre-activation grid

    @property
    def pre_exp(self) -> int:
        return self.in_exp + self.weight_exp

    @property
    def width(self) -> int:
        return self.weights.shape[0]

    def apply(self, h: np.ndarray) -> np.ndarray:
        if h.shape[0] != self.weights.shape[1]:
            raise WidthMismatch(f"{self.role}: input width {h.shape[0]} != {self.weights.shape[1]}")
        x = self.weights @ h
        k, p = self.kinds, self.params
        out = np.zeros_like(x)
        m = k == Act.LINEAR
        out[m] = x[m]
        m = k == Act.RELU
        out[m] = np.maximum(x[m], 0)
        m = k == Act.THRESHOLD_KEEP
        out[m] = np.where(x[m] >= p[m], x[m], 0)
        m = k == Act.IDENTITY_APPEND
        out[m] = np.where(x[m] > 0, x[m] + p[m], 0)
        m = k == Act.MODULO
        out[m] = np.mod(x[m], p[m])
        step = k == Act.STEP_AT_LEAST
        shift = self.pre_exp - self.out_exp
        if shift > 0:
            q, r = np.divmod(out[~step], 10**shift)
            if np.any(r):
                raise PrecisionOverflow(f"{self.role}: inexact rescale by 10^-{shift}")
            out[~step] = q
        elif shift < 0:
            out[~step] *= 10**-shift
        out[step] = np.where(x[step] >= p[step], 10**max(self.out_exp, 0), 0)
        return out


@dataclass(frozen=True, eq=False)
class LayeredNet:
    layers: tuple[LayerSpec, ...]
    n: int
    s: int
    s_padded: int
    q: int
    digits: int  # D, low digits reserved for the identity code
    fast_path: bool
    m: int = 0
    meta: dict = field(default_factory=dict)

    @property
    def z(self) -> int:
        return int(math.log2(self.s_padded))

    @property
    def depth(self) -> int:
        return len(self.layers)

    @property
    def scale(self) -> int:
        return 10 ** (self.q + self.digits)


def code_digits(s: int) -> int:
    return int(math.floor(math.log10(s))) + 1


def _csr(rows, cols, vals, shape) -> sp.csr_matrix:
    return sp.csr_matrix((np.asarray(vals, dtype=np.int64), (np.asarray(rows), np.asarray(cols))),
                         shape=shape, dtype=np.int64)


def _phase1_layer(inst: CltInstance, s_pad: int) -> LayerSpec:
    n, s, q = inst.n, inst.s, inst.q
    e = inst.graph.edges
    rows, cols, vals = [], [], []
    for c in range(s):
        nz = inst.weights[:, c] != 0
        rows.append(e[nz, 1] * s_pad + c)
        cols.append(e[nz, 0] * s + c)
        vals.append(inst.weights[nz, c])
        rows.append(np.arange(n) * s_pad + c)
        cols.append(np.arange(n) * s + c)
        vals.append(np.full(n, SELF_WEIGHT * 10**q))
    W = _csr(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), (n * s_pad, n * s))
    theta = np.full((n, s_pad), 10**q, dtype=np.int64)  # dummy cascades: theta = 1
    theta[:, :s] = inst.thresholds
    return LayerSpec("phase1", W, q, 0, q, np.full(n * s_pad, Act.THRESHOLD_KEEP, dtype=np.uint8),
                     theta.reshape(-1))


def compile_net(instance: CltInstance, fast_s2: bool = True) -> LayeredNet:
    n, s, q = instance.n, instance.s, instance.q
    s_pad = 1 << max(1, math.ceil(math.log2(s))) if s > 1 else 2
    if fast_s2 and s == 2:
        return _compile_s2(instance)
    z = int(math.log2(s_pad))
    d = code_digits(s_pad)
    bound = (SELF_WEIGHT + 1) * 10 ** (q + d) + s_pad
    if bound >= _INT_LIMIT:
        raise PrecisionOverflow(f"intermediate magnitude {bound} exceeds 64-bit arithmetic")
    layers = [_phase1_layer(instance, s_pad)]

    width = n * s_pad
    idx = np.arange(width)
    codes = s_pad - (idx % s_pad)  # cascade s (0-based) -> code S' - s
    layers.append(LayerSpec("encode", _csr(idx, idx, np.full(width, 10**d), (width, width)), -q, q, 0,
                            np.full(width, Act.IDENTITY_APPEND, dtype=np.uint8), codes))

    g = s_pad
    for r in range(z):
        half = g // 2
        # layer A: per pair (a, b) emit relu(a - b) and b
        pair = np.arange(n * half)
        node, k = pair // half, pair % half
        a_col, b_col = node * g + 2 * k, node * g + 2 * k + 1
        out_d, out_b = 2 * pair, 2 * pair + 1
        W = _csr(np.concatenate([out_d, out_d, out_b]), np.concatenate([a_col, b_col, b_col]),
                 np.concatenate([np.ones(n * half), -np.ones(n * half), np.ones(n * half)]), (n * g, n * g))
        kinds = np.tile(np.array([Act.RELU, Act.LINEAR], dtype=np.uint8), n * half)
        layers.append(LayerSpec(f"compare{r + 1}a", W, 0, 0, 0, kinds, np.zeros(n * g, dtype=np.int64)))
        W = _csr(np.concatenate([pair, pair]), np.concatenate([2 * pair, 2 * pair + 1]),
                 np.ones(2 * n * half), (n * half, n * g))
        layers.append(LayerSpec(f"compare{r + 1}b", W, 0, 0, 0, np.full(n * half, Act.LINEAR, dtype=np.uint8),
                                np.zeros(n * half, dtype=np.int64)))
        g = half

    nodes = np.arange(n)
    layers.append(LayerSpec("recover", _csr(nodes, nodes, np.ones(n), (n, n)), 0, 0, 0,
                            np.full(n, Act.MODULO, dtype=np.uint8), np.full(n, 10**d, dtype=np.int64)))
    layers.append(LayerSpec("thermometer", _csr(idx, idx // s_pad, np.ones(width), (width, n)), 0, 0, 0,
                            np.full(width, Act.STEP_AT_LEAST, dtype=np.uint8), (idx % s_pad) + 1))

    # onehot for real cascade c: thermometer position r = S' - c (1-based), minus position r + 1
    out = np.arange(n * s)
    node, c = out // s, out % s
    r0 = s_pad - c - 1  # 0-based thermometer slot
    rows, cols, vals = [out], [node * s_pad + r0], [np.ones(n * s)]
    nxt = r0 + 1 < s_pad
    rows.append(out[nxt])
    cols.append(node[nxt] * s_pad + r0[nxt] + 1)
    vals.append(-np.ones(int(nxt.sum())))
    W = _csr(np.concatenate(rows), np.concatenate(cols), np.concatenate(vals), (n * s, width))
    layers.append(LayerSpec("onehot", W, 0, 0, 0, np.full(n * s, Act.STEP_AT_LEAST, dtype=np.uint8),
                            np.ones(n * s, dtype=np.int64)))
    return LayeredNet(tuple(layers), n, s, s_pad, q, d, False, instance.graph.m)


def _compile_s2(instance: CltInstance) -> LayeredNet:
    n, q = instance.n, instance.q
    layers = [_phase1_layer(instance, 2)]
    nodes = np.arange(n)
    # compare: u_a = [H1 >= 1 unit], u_c = [H2 - H1 >= 1 unit]
    rows = np.concatenate([2 * nodes, 2 * nodes + 1, 2 * nodes + 1])
    cols = np.concatenate([2 * nodes, 2 * nodes + 1, 2 * nodes])
    vals = np.concatenate([np.ones(n), np.ones(n), -np.ones(n)])
    layers.append(LayerSpec("compare", _csr(rows, cols, vals, (2 * n, 2 * n)), 0, q, 0,
                            np.full(2 * n, Act.STEP_AT_LEAST, dtype=np.uint8), np.ones(2 * n, dtype=np.int64)))
    # onehot: cascade 1 iff u_a - u_c >= 1, cascade 2 iff u_c >= 1
    rows = np.concatenate([2 * nodes, 2 * nodes, 2 * nodes + 1])
    cols = np.concatenate([2 * nodes, 2 * nodes + 1, 2 * nodes + 1])
    vals = np.concatenate([np.ones(n), -np.ones(n), np.ones(n)])
    layers.append(LayerSpec("onehot", _csr(rows, cols, vals, (2 * n, 2 * n)), 0, 0, 0,
                            np.full(2 * n, Act.STEP_AT_LEAST, dtype=np.uint8), np.ones(2 * n, dtype=np.int64)))
    return LayeredNet(tuple(layers), n, 2, 2, q, code_digits(2), True, instance.graph.m)


compile = compile_net  # noqa: A001  public alias matching the operation name


def forward_step(net: LayeredNet, h1: np.ndarray, trace: bool = False):
    """One diffusion step on a flat ``N*S`` 0/1 vector (node-major)."""
    h = np.asarray(h1).astype(np.int64).reshape(-1)
    if h.shape[0] != net.n * net.s:
        raise WidthMismatch(f"input width {h.shape[0]} != {net.n * net.s}")
    hidden = [h]
    for layer in net.layers:
        h = layer.apply(h)
        hidden.append(h)
    out = h != 0
    return (out, hidden) if trace else out


def unroll_trajectory(net: LayeredNet, initial: np.ndarray, horizon: int | None = None) -> list[np.ndarray]:
    """Phase-2 statuses for steps 1.. until the fixed point (inclusive of changes only)."""
    cur = np.asarray(initial, dtype=bool).reshape(net.n, net.s)
    horizon = net.n if horizon is None else horizon
    out = []
    for _ in range(horizon):
        nxt = forward_step(net, cur.reshape(-1)).reshape(net.n, net.s)
        if np.array_equal(nxt, cur):
            break
        out.append(nxt)
        cur = nxt
    return out


def unroll_forward(net: LayeredNet, initial: np.ndarray) -> np.ndarray:
    """``N`` repeated steps; a fixed point of the step map ends the loop early."""
    traj = unroll_trajectory(net, initial)
    return traj[-1] if traj else np.asarray(initial, dtype=bool).reshape(net.n, net.s).copy()


def max_pieces(net: LayeredNet) -> int:
    """Largest piece count of any activation over the reachable input range.

    The modulo unit sees at most ``(SELF_WEIGHT + 1) * 10**(Q+D) + S'``, so it
    has ``(SELF_WEIGHT + 1) * 10**Q + 1`` periods; everything else has <= 2.
    """
    best = 0
    for layer in net.layers:
        kinds = set(int(k) for k in np.unique(layer.kinds))
        if Act.MODULO in kinds:
            top = (SELF_WEIGHT + 1) * 10 ** (net.q + net.digits) + net.s_padded
            best = max(best, top // 10**net.digits + 1)
        elif kinds - {Act.LINEAR}:
            best = max(best, 2)
        else:
            best = max(best, 1)
    return best


def audit(net: LayeredNet) -> dict:
    """Size accounting: layers, adjustable weights, units, activation pieces."""
    units = sum(layer.width for layer in net.layers)
    return {
        "layers": net.depth,
        "expected_layers": 3 if net.fast_path else 2 * net.z + 5,
        "adjustable_weights": net.s * (net.m + net.n),
        "phase1_nonzeros": int(net.layers[0].weights.nnz),
        "units": int(units),
        "units_per_node_cascade": units / (net.n * net.s) if net.n else 0.0,
        "max_pieces": max_pieces(net),
        "widths": [layer.width for layer in net.layers],
        "roles": [layer.role for layer in net.layers],
        "n": net.n, "s": net.s, "s_padded": net.s_padded, "q": net.q, "digits": net.digits,
        "fast_path": net.fast_path,
    }


def _fmt(v: int, exp: int) -> str:
    return format_units(int(v), exp) if exp >= 0 else str(int(v) * 10**-exp)


def _parse(text: str, exp: int) -> int:
    from .fixed import parse_units
    if exp >= 0:
        return parse_units(text, exp)
    v = parse_units(text, 0)
    div, rem = divmod(v, 10**-exp)
    if rem:
        raise ValueError(f"{text} is not a multiple of 10^{-exp}")
    return div


def net_to_dict(net: LayeredNet) -> dict:
    layers = []
    for L in net.layers:
        coo = L.weights.tocoo()
        order = np.lexsort((coo.col, coo.row))
        layers.append({
            "role": L.role,
            "shape": list(L.weights.shape),
            "in_exp": L.in_exp, "weight_exp": L.weight_exp, "out_exp": L.out_exp,
            "weights": [[int(coo.row[k]), int(coo.col[k]), _fmt(coo.data[k], L.weight_exp)] for k in order],
            "activations": [[Act(int(k)).name.lower(), _fmt(p, L.pre_exp)] for k, p in zip(L.kinds, L.params)],
        })
    return {"n": net.n, "s": net.s, "s_padded": net.s_padded, "q": net.q, "digits": net.digits,
            "fast_path": net.fast_path, "m": net.m, "layers": layers}


def net_from_dict(d: dict) -> LayeredNet:
    layers = []
    for L in d["layers"]:
        w = L["weights"]
        rows = [r for r, _, _ in w]
        cols = [c for _, c, _ in w]
        vals = [_parse(v, L["weight_exp"]) for _, _, v in w]
        pre = L["in_exp"] + L["weight_exp"]
        kinds = np.array([Act[k.upper()] for k, _ in L["activations"]], dtype=np.uint8)
        params = np.array([_parse(p, pre) for _, p in L["activations"]], dtype=np.int64)
        layers.append(LayerSpec(L["role"], _csr(rows, cols, vals, tuple(L["shape"])), L["weight_exp"],
                                L["in_exp"], L["out_exp"], kinds, params))
    return LayeredNet(tuple(layers), d["n"], d["s"], d["s_padded"], d["q"], d["digits"], d["fast_path"],
                      d.get("m", 0))


@dataclass
class Divergence:
    trial: int
    step: int
    node: int
    cascade: int
    expected: bool
    got: bool
    layers: list[str]

    def describe(self) -> str:
        head = (f"trial {self.trial}: step {self.step}, node {self.node + 1}, cascade {self.cascade + 1}: "
                f"simulator {int(self.expected)}, net {int(self.got)}")
        return "\n".join([head] + [f"  {line}" for line in self.layers])


def _layer_values(net: LayeredNet, hidden: list[np.ndarray], node: int, cascade: int) -> list[str]:
    """Units touching the diverging cell, layer by layer (exact decimals)."""
    out = []
    for k, layer in enumerate(net.layers):
        h = hidden[k + 1]
        if h.shape[0] == net.n * net.s:
            idx = [node * net.s + cascade]
        elif h.shape[0] % net.n == 0:
            w = h.shape[0] // net.n
            idx = list(range(node * w, (node + 1) * w))
        else:
            idx = []
        vals = ", ".join(_fmt(int(h[i]), layer.out_exp) for i in idx[:8])
        out.append(f"layer {k + 1} ({layer.role}): [{vals}]")
    return out


def compare_with_simulator(net: LayeredNet, instance: CltInstance, initials) -> tuple[int, Divergence | None]:
    """Run each initial status through both engines, step by step.

    Returns the number of diverging trials and the first divergence found.
    """
    from .diffusion import run

    bad, first = 0, None
    for k, init in enumerate(initials):
        traj = run(instance, init)
        cur = np.asarray(init, dtype=bool)
        for t in range(1, traj.n_changing + 2):
            want = traj.phase(t, 2) if t <= traj.horizon else traj.final()
            got, hidden = forward_step(net, cur.reshape(-1), trace=True)
            got = got.reshape(net.n, net.s)
            if not np.array_equal(got, want):
                bad += 1
                if first is None:
                    i, s = (int(v[0]) for v in np.nonzero(got != want))
                    first = Divergence(k, t, i, s, bool(want[i, s]), bool(got[i, s]),
                                       _layer_values(net, hidden, i, s))
                break
            cur = want
    return bad, first

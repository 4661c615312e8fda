import io
import json

import numpy as np
from hypothesis import given, settings, strategies as st

from conftest import random_instance
from cltlearn.forge import generate_dataset
from cltlearn.io import (dump_dataset, graph_from_dict, graph_to_dict, instance_from_dict, instance_to_dict,
                         load_dataset, read_edge_list, sample_from_dict, sample_to_dict)


@settings(max_examples=30, deadline=None)
@given(st.integers(1, 25), st.integers(1, 4), st.integers(0, 2**31),
       st.sampled_from(["weighted-cascade", "uniform-normalized"]))
def test_instance_round_trip(n, s, seed, scheme):
    inst = random_instance(n, s, seed, scheme)
    d = json.loads(json.dumps(instance_to_dict(inst)))
    assert instance_from_dict(d) == inst
    assert graph_from_dict(graph_to_dict(inst.graph)) == inst.graph


def test_decimal_strings_and_one_based():
    inst = random_instance(4, 2, 1)
    d = instance_to_dict(inst)
    assert all(isinstance(w[3], str) and len(w[3].split(".")[1]) == 3 for w in d["weights"])
    assert min(min(e) for e in d["graph"]["edges"]) >= 1
    assert d["thresholds"][0][:2] == [1, 1]


@settings(max_examples=20, deadline=None)
@given(n=st.integers(2, 20), s=st.integers(1, 3), seed=st.integers(0, 2**31))
def test_dataset_round_trip(tmp_path_factory, n, s, seed):
    inst = random_instance(n, s, seed)
    ds = generate_dataset(inst, 5, seed)
    path = tmp_path_factory.mktemp("ds") / "d.jsonl"
    with open(path, "w") as fh:
        dump_dataset(ds, fh)
    assert load_dataset(path) == ds


def test_explicit_fixed_point_steps_fold():
    inst = random_instance(6, 2, 5)
    traj = generate_dataset(inst, 1, 5)[0]
    d = sample_to_dict(traj)
    last = d["steps"][-1]["p2"] if d["steps"] else d["i0"]
    d["steps"] = d["steps"] + [{"p1": last, "p2": last}] * 3
    assert sample_from_dict(d) == traj


def test_edge_list_autodetects_base(tmp_path):
    p = tmp_path / "e.txt"
    p.write_text("# comment\n1 2\n2,3\n")
    g = read_edge_list(p)
    assert g.n == 3 and g.edges.tolist() == [[0, 1], [1, 2]]
    p.write_text("0 1\n1 2\n")
    assert read_edge_list(p).edges.tolist() == [[0, 1], [1, 2]]


def test_dump_is_one_line_per_sample():
    ds = generate_dataset(random_instance(5, 2, 2), 3, 2)
    buf = io.StringIO()
    dump_dataset(ds, buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == 3 and all(json.loads(x)["q"] == 3 for x in lines)
    assert np.array_equal(sample_from_dict(json.loads(lines[0])).initial, ds[0].initial)

import numpy as np
import pytest

from capsforge import capsule as cm
from capsforge import tensor as tz
from capsforge.errors import (Degenerate, NotConnected, ShapeErrors,
                              Unsupported)
from capsforge.generation import eval_plain
from capsforge.graph import build_dag, classify_layering
from netgen import random_capsule_network, random_inputs, randomize_parameters


def single_capsule_net(fn=cm.CapsuleFn("identity"), dim=3):
    dag = build_dag(["x", "h"], [("x", "h")])
    caps = {"h": cm.CapsuleSpec("h", fn, tz.zeros((dim,)))}
    conns = {("x", "h"): cm.ConnectionSpec("x", "h", cm.WeightingOp("transfer"))}
    return cm.CapsuleNetwork(dag, {"x": (dim,)}, caps, conns)


# --- validation ----------------------------------------------------------------

def test_mlp_path_weight_shapes_five_layer():
    net = cm.build_mlp_path([5, 7, 7, 7, 4])
    shapes = [net.connections[e].weight.shape for e in
              [("x", "h1"), ("h1", "h2"), ("h2", "h3"), ("h3", "o")]]
    assert shapes == [(7, 5), (7, 7), (7, 7), (4, 7)]
    report = cm.validate_shapes(net)
    assert report.ok
    assert report.shapes["o"] == (4,)


def test_lenet_first_hidden_shape():
    net = cm.build_lenet_path()
    report = cm.validate_shapes(net)
    assert report.ok
    assert report.shapes["c1"] == (32, 24, 24)
    assert report.shapes["p1"] == (32, 12, 12)


def test_bias_mismatch_reported():
    dag = build_dag(["x", "h"], [("x", "h")])
    caps = {"h": cm.CapsuleSpec("h", cm.CapsuleFn("identity"), tz.zeros((4,)))}
    conns = {("x", "h"): cm.ConnectionSpec("x", "h", cm.WeightingOp("matmul"),
                                           tz.zeros((3, 3)))}
    net = cm.CapsuleNetwork(dag, {"x": (3,)}, caps, conns)
    report = cm.validate_shapes(net)
    assert not report.ok
    assert [i.code for i in report.issues] == ["bias_mismatch"]
    assert report.issues[0].where == ("vertex", "h")


def test_validation_collects_every_issue():
    dag = build_dag(["x", "h", "g"], [("x", "h"), ("x", "g")])
    caps = {
        "h": cm.CapsuleSpec("h", cm.CapsuleFn("identity"), tz.zeros((9,))),
        "g": cm.CapsuleSpec("g", cm.CapsuleFn("identity"), tz.zeros((2,))),
    }
    conns = {
        ("x", "h"): cm.ConnectionSpec("x", "h", cm.WeightingOp("matmul"),
                                      tz.zeros((2, 5))),   # inner dim wrong
        ("x", "g"): cm.ConnectionSpec("x", "g", cm.WeightingOp("matmul"),
                                      tz.zeros((3, 3))),   # bias wrong
    }
    net = cm.CapsuleNetwork(dag, {"x": (3,)}, caps, conns)
    report = cm.validate_shapes(net)
    codes = sorted(i.code for i in report.issues)
    assert codes == ["bias_mismatch", "shape_mismatch"]


def test_stride_mismatch_on_edge():
    dag = build_dag(["x", "h"], [("x", "h")])
    caps = {"h": cm.CapsuleSpec("h", cm.CapsuleFn("identity"), tz.zeros((1, 2, 2)))}
    conns = {("x", "h"): cm.ConnectionSpec("x", "h", cm.WeightingOp("conv", 2),
                                           tz.zeros((1, 1, 2, 2)))}
    net = cm.CapsuleNetwork(dag, {"x": (1, 5, 5)}, caps, conns)
    report = cm.validate_shapes(net)
    assert [i.code for i in report.issues] == ["stride_mismatch"]
    assert report.issues[0].where == ("edge", ("x", "h"))


def test_window_mismatch_on_vertex():
    dag = build_dag(["x", "h"], [("x", "h")])
    caps = {"h": cm.CapsuleSpec("h", cm.CapsuleFn("maxpool", (2, 2)),
                                tz.zeros((1, 3, 3)))}
    conns = {("x", "h"): cm.ConnectionSpec("x", "h", cm.WeightingOp("transfer"))}
    net = cm.CapsuleNetwork(dag, {"x": (1, 3, 3)}, caps, conns)
    assert [i.code for i in cm.validate_shapes(net).issues] == ["window_mismatch"]


def test_disconnected_network_rejected():
    dag = build_dag(["a", "b"], [])
    with pytest.raises(NotConnected):
        cm.CapsuleNetwork(dag, {"a": (1,), "b": (1,)}, {}, {})


# --- forward ---------------------------------------------------------------------

def test_identity_transfer_is_identity():
    net = single_capsule_net()
    x = tz.tensor([1.5, -2.0, 3.0])
    result = cm.forward(net, {"x": x})
    assert result.ys["h"].tolist() == x.tolist()


def test_zero_lenet_outputs_uniform_softmax():
    net = cm.build_lenet_path(input_shape=(1, 8, 8), conv1=(2, 3, 3, 1),
                              pool1=(2, 2), conv2=(2, 2, 2, 1), pool2=(2, 2),
                              fc_dims=(5, 4))
    params = net.parameters()
    for k in params.weights:
        params.weights[k][:] = 0.0
    x = tz.zeros((1, 8, 8))
    result = cm.forward(net, {"x": x}, params)
    np.testing.assert_allclose(result.ys["out"], np.full(4, 0.25), rtol=1e-15)


def test_two_input_convergent_capsule():
    dag = build_dag(["a", "b", "h"], [("a", "h"), ("b", "h")])
    caps = {"h": cm.CapsuleSpec("h", cm.CapsuleFn("identity"), tz.tensor([1.0]))}
    conns = {
        ("a", "h"): cm.ConnectionSpec("a", "h", cm.WeightingOp("matmul"),
                                      tz.tensor([[1.0]])),
        ("b", "h"): cm.ConnectionSpec("b", "h", cm.WeightingOp("matmul"),
                                      tz.tensor([[2.0]])),
    }
    net = cm.CapsuleNetwork(dag, {"a": (1,), "b": (1,)}, caps, conns)
    result = cm.forward(net, {"a": tz.tensor([3.0]), "b": tz.tensor([4.0])})
    assert result.ys["h"].tolist() == [12.0]


def test_forward_requires_valid_shapes():
    dag = build_dag(["x", "h"], [("x", "h")])
    caps = {"h": cm.CapsuleSpec("h", cm.CapsuleFn("identity"), tz.zeros((4,)))}
    conns = {("x", "h"): cm.ConnectionSpec("x", "h", cm.WeightingOp("matmul"),
                                           tz.zeros((3, 3)))}
    net = cm.CapsuleNetwork(dag, {"x": (3,)}, caps, conns)
    with pytest.raises(ShapeErrors):
        cm.forward(net, {"x": tz.tensor([1.0, 2.0, 3.0])})


def test_forward_deterministic():
    rng = np.random.default_rng(0)
    net = cm.build_mlp_path([3, 4, 2], seed=5)
    x = tz.tensor(rng.standard_normal(3))
    a = cm.forward(net, {"x": x}).ys["o"]
    b = cm.forward(net, {"x": x}).ys["o"]
    assert a.tolist() == b.tolist()


def test_forward_shapes_match_validation_random():
    rng = np.random.default_rng(42)
    for _ in range(60):
        net = random_capsule_network(rng, max_capsules=8)
        report = cm.validate_shapes(net)
        assert report.ok
        params = randomize_parameters(net, rng)
        result = cm.forward(net, random_inputs(net, rng), params)
        for vid in net.dag.vertices:
            assert result.ys[vid].shape == report.shapes[vid]


# --- builders ---------------------------------------------------------------------

def test_mlp_2_6_4_2_dims():
    net = cm.build_mlp_path([2, 6, 4, 2])
    report = cm.validate_shapes(net)
    assert report.shapes == {"x": (2,), "h1": (6,), "h2": (4,), "o": (2,)}


def test_mlp_identity_square_is_identity_map():
    net = cm.build_mlp_path([3, 3], fns=[cm.CapsuleFn("identity")])
    params = net.parameters()
    params.weights[("x", "o")] = np.eye(3)
    x = tz.tensor([0.5, -1.0, 2.0])
    assert cm.forward(net, {"x": x}, params).ys["o"].tolist() == x.tolist()


def test_mlp_degenerate():
    with pytest.raises(Degenerate):
        cm.build_mlp_path([4])


def test_lenet_degenerate_1x1_reduces_to_mlp():
    net = cm.build_lenet_path(input_shape=(1, 1, 1), conv1=(1, 1, 1, 1),
                              pool1=(1, 1), conv2=(1, 1, 1, 1), pool2=(1, 1),
                              fc_dims=(3, 2))
    report = cm.validate_shapes(net)
    assert report.ok
    assert report.shapes["flat"] == (1,)
    assert report.shapes["out"] == (2,)


def test_lenet_output_softmax_sums_to_one():
    net = cm.build_lenet_path(input_shape=(1, 6, 6), conv1=(2, 3, 3, 1),
                              pool1=(2, 2), conv2=(2, 2, 2, 1), pool2=(1, 1),
                              fc_dims=(4, 3), seed=9)
    rng = np.random.default_rng(1)
    x = tz.tensor(rng.standard_normal((1, 6, 6)))
    out = cm.forward(net, {"x": x}).ys["out"]
    assert float(out.sum()) == pytest.approx(1.0, abs=1e-12)


# --- layering interplay -------------------------------------------------------------

def test_mlp_path_is_layered_and_skip_edge_flips():
    net = cm.build_mlp_path([2, 3, 3, 2])
    assert classify_layering(net.dag) is not None
    skip = build_dag(net.dag.vertices, list(net.dag.edges) + [("x", "h2")])
    assert classify_layering(skip) is None


# --- expansion to plain networks ------------------------------------------------------

def test_expand_single_1x1_matmul():
    dag = build_dag(["x", "h"], [("x", "h")])
    caps = {"h": cm.CapsuleSpec("h", cm.CapsuleFn("identity"), tz.tensor([0.5]))}
    conns = {("x", "h"): cm.ConnectionSpec("x", "h", cm.WeightingOp("matmul"),
                                           tz.tensor([[2.0]]))}
    net = cm.CapsuleNetwork(dag, {"x": (1,)}, caps, conns)
    plain = cm.expand_to_plain(net)
    assert plain.inputs == ("x[0]",)
    assert len(plain.neurons) == 1
    assert len(plain.connections) == 1
    values = eval_plain(plain, {"x[0]": 3.0})
    assert values["h[0]"] == 6.5


def test_expand_mlp_equivalence_100_random():
    rng = np.random.default_rng(2024)
    fns = [cm.CapsuleFn("relu"), cm.CapsuleFn("relu"), cm.CapsuleFn("identity")]
    net0 = cm.build_mlp_path([2, 6, 4, 2], fns=fns)
    for _ in range(100):
        params = randomize_parameters(net0, rng)
        net = net0.with_parameters(params)
        x = rng.standard_normal(2)
        capsule_out = cm.forward(net, {"x": tz.tensor(x)}).ys["o"]
        plain = cm.expand_to_plain(net)
        values = eval_plain(plain, {"x[0]": x[0], "x[1]": x[1]})
        plain_out = np.array([values["o[0]"], values["o[1]"]])
        np.testing.assert_allclose(plain_out, capsule_out, atol=1e-12, rtol=0)


def test_expand_rejects_conv():
    net = cm.build_lenet_path(input_shape=(1, 4, 4), conv1=(1, 3, 3, 1),
                              pool1=(2, 2), conv2=(1, 1, 1, 1), pool2=(1, 1),
                              fc_dims=(2, 2))
    with pytest.raises(Unsupported):
        cm.expand_to_plain(net)

"""Capsule networks: tensor-induced networks over connected DAGs.

A capsule network assigns each non-input vertex a capsule (function + bias
tensor) and each edge a tensor-weighting connection (weighting operation +
optional weight tensor). The forward pass computes, in topological order,

    Y_H = cap_H( sum over incoming edges of  W (x) Y_tail  +  B_H )

Networks are immutable; training works on a detached :class:`Parameters`
store and produces a new network via :meth:`CapsuleNetwork.with_parameters`.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Mapping, Sequence

import numpy as np

from . import tensor as tz
from .errors import (Degenerate, InputShapeMismatch, Issue, MissingInput,
                     NotConnected, ShapeErrors, ShapeMismatch, StrideMismatch,
                     Unsupported, WindowMismatch)
from .generation import PlainConnection, PlainNetwork, PlainNeuron
from .graph import Dag, build_dag, is_connected, roles, topo_order
from .tensor import DType, Tensor

CAPSULE_FN_KINDS = ("relu", "sigmoid", "identity", "softmax", "squash", "maxpool")
WEIGHTING_OP_KINDS = ("matmul", "conv", "transfer", "reshape_flatten", "scalar_mult")
ELEMENTWISE_KINDS = ("relu", "sigmoid", "identity")
WEIGHT_FREE_OPS = ("transfer", "reshape_flatten")


@dataclass(frozen=True)
class CapsuleFn:
    kind: str
    window: tuple[int, int] | None = None

    def __post_init__(self):
        if self.kind not in CAPSULE_FN_KINDS:
            raise ValueError(f"unknown capsule function {self.kind!r}")
        if self.kind == "maxpool":
            if not self.window or self.window[0] < 1 or self.window[1] < 1:
                raise ValueError("maxpool needs a positive window (lam, tau)")
        elif self.window is not None:
            raise ValueError(f"{self.kind} takes no window")


@dataclass(frozen=True)
class WeightingOp:
    kind: str
    stride: int = 1

    def __post_init__(self):
        if self.kind not in WEIGHTING_OP_KINDS:
            raise ValueError(f"unknown weighting operation {self.kind!r}")
        if self.stride < 1:
            raise ValueError("stride must be positive")


@dataclass(frozen=True)
class CapsuleSpec:
    id: str
    fn: CapsuleFn
    bias: Tensor
    output_shape: tuple[int, ...] | None = None  # declared; checked when given


@dataclass(frozen=True)
class ConnectionSpec:
    tail: str
    head: str
    op: WeightingOp
    weight: Tensor | None = None

    def __post_init__(self):
        if self.op.kind in WEIGHT_FREE_OPS:
            if self.weight is not None:
                raise ValueError(f"{self.op.kind} connections carry no weight")
        elif self.weight is None:
            raise ValueError(f"{self.op.kind} connections require a weight tensor")


@dataclass(frozen=True)
class Parameters:
    """Mutable training view of a network's weights and biases (raw arrays)."""

    weights: dict
    biases: dict

    def copy(self) -> "Parameters":
        return Parameters({k: v.copy() for k, v in self.weights.items()},
                          {k: v.copy() for k, v in self.biases.items()})

    def scalar_count(self) -> int:
        return (sum(v.size for v in self.weights.values())
                + sum(v.size for v in self.biases.values()))


@dataclass(frozen=True)
class ShapeReport:
    shapes: dict
    issues: tuple[Issue, ...]

    @property
    def ok(self) -> bool:
        return not self.issues


@dataclass(frozen=True)
class ForwardResult:
    """Outputs for every vertex plus the cache backprop consumes."""

    ys: dict            # vertex -> ndarray (inputs included)
    us: dict            # non-input vertex -> total-input ndarray
    pool_argmax: dict   # maxpool vertex -> per-block argmax positions
    params: Parameters
    net_token: tuple

    def output(self, vid: str) -> Tensor:
        return tz.tensor(self.ys[vid])


@dataclass(frozen=True)
class CapsuleNetwork:
    dag: Dag
    input_shapes: dict
    capsules: dict          # id -> CapsuleSpec
    connections: dict       # (tail, head) -> ConnectionSpec
    dtype: DType = DType.F64

    def __post_init__(self):
        if not is_connected(self.dag):
            raise NotConnected("a capsule network's graph must be connected")
        parts = roles(self.dag)
        inputs = set(parts.inputs)
        if set(self.input_shapes) != inputs:
            raise InputShapeMismatch(
                f"input shapes declared for {sorted(self.input_shapes)} but graph "
                f"inputs are {sorted(inputs)}")
        non_inputs = set(self.dag.vertices) - inputs
        if set(self.capsules) != non_inputs:
            raise InputShapeMismatch(
                f"capsule specs must cover exactly the non-input vertices")
        if set(self.connections) != set(self.dag.edges):
            raise InputShapeMismatch("connection specs must cover exactly the edges")
        for spec in self.capsules.values():
            if spec.bias.dtype is not self.dtype:
                raise InputShapeMismatch(
                    f"bias of {spec.id!r} is {spec.bias.dtype.value}, "
                    f"network is {self.dtype.value}")
        for conn in self.connections.values():
            if conn.weight is not None and conn.weight.dtype is not self.dtype:
                raise InputShapeMismatch(
                    f"weight of {conn.tail}->{conn.head} has wrong data type")

    @property
    def parts(self):
        return roles(self.dag)

    def parameters(self) -> Parameters:
        weights = {e: c.weight.data.copy()
                   for e, c in self.connections.items() if c.weight is not None}
        biases = {vid: spec.bias.data.copy() for vid, spec in self.capsules.items()}
        return Parameters(weights, biases)

    def with_parameters(self, params: Parameters) -> "CapsuleNetwork":
        capsules = {vid: replace(spec, bias=tz.tensor(params.biases[vid], self.dtype))
                    for vid, spec in self.capsules.items()}
        connections = {}
        for e, conn in self.connections.items():
            if conn.weight is None:
                connections[e] = conn
            else:
                connections[e] = replace(
                    conn, weight=tz.tensor(params.weights[e], self.dtype))
        return CapsuleNetwork(self.dag, self.input_shapes, capsules,
                              connections, self.dtype)

    def token(self) -> tuple:
        return (self.dag.vertices, self.dag.edges)


# --- shape rules ------------------------------------------------------------

def op_output_shape(op: WeightingOp, weight_shape: tuple[int, ...] | None,
                    in_shape: tuple[int, ...]) -> tuple[int, ...]:
    if op.kind == "matmul":
        if weight_shape is None or len(weight_shape) != 2:
            raise ShapeMismatch(f"matmul weight must be a matrix, got {weight_shape}")
        if len(in_shape) != 1 or in_shape[0] != weight_shape[1]:
            raise ShapeMismatch(
                f"matmul weight {weight_shape} cannot multiply input {in_shape}")
        return (weight_shape[0],)
    if op.kind == "conv":
        return tz.conv_output_shape(weight_shape, in_shape, op.stride)
    if op.kind == "transfer":
        return tuple(in_shape)
    if op.kind == "reshape_flatten":
        if len(in_shape) != 3:
            raise ShapeMismatch(f"reshaping needs a rank-3 input, got {in_shape}")
        return (in_shape[0] * in_shape[1] * in_shape[2],)
    if op.kind == "scalar_mult":
        if weight_shape not in ((), (1,)):
            raise ShapeMismatch("scalar multiplication weight must be a scalar")
        return tuple(in_shape)
    raise ShapeMismatch(f"unknown op {op.kind!r}")


def cap_output_shape(fn: CapsuleFn, u_shape: tuple[int, ...]) -> tuple[int, ...]:
    if fn.kind in ELEMENTWISE_KINDS:
        return tuple(u_shape)
    if fn.kind in ("softmax", "squash"):
        if len(u_shape) != 1:
            raise ShapeMismatch(f"{fn.kind} needs a rank-1 input, got {u_shape}")
        return tuple(u_shape)
    if fn.kind == "maxpool":
        return tz.pool_output_shape(u_shape, fn.window)
    raise ShapeMismatch(f"unknown capsule function {fn.kind!r}")


def validate_shapes(net: CapsuleNetwork) -> ShapeReport:
    """Infer every vertex's output shape, collecting *all* violations."""
    shapes: dict = {vid: tuple(s) for vid, s in net.input_shapes.items()}
    issues: list[Issue] = []
    for vid in topo_order(net.dag):
        if vid in shapes:
            continue
        spec = net.capsules[vid]
        results = []
        for z in net.dag.predecessors(vid):
            edge = (z, vid)
            if z not in shapes:
                continue  # upstream failure already reported
            conn = net.connections[edge]
            wshape = conn.weight.shape if conn.weight is not None else None
            try:
                results.append((edge, op_output_shape(conn.op, wshape, shapes[z])))
            except StrideMismatch as e:
                issues.append(Issue("stride_mismatch", ("edge", edge), str(e)))
            except ShapeMismatch as e:
                issues.append(Issue("shape_mismatch", ("edge", edge), str(e)))
        if not results:
            continue
        u_shape = results[0][1]
        consistent = True
        for edge, r in results[1:]:
            if r != u_shape:
                consistent = False
                issues.append(Issue(
                    "shape_mismatch", ("edge", edge),
                    f"produces {r} but sibling connections produce {u_shape}"))
        if not consistent:
            continue
        if spec.bias.shape != u_shape:
            issues.append(Issue(
                "bias_mismatch", ("vertex", vid),
                f"bias shape {spec.bias.shape} != total input shape {u_shape}"))
            continue
        try:
            out_shape = cap_output_shape(spec.fn, u_shape)
        except WindowMismatch as e:
            issues.append(Issue("window_mismatch", ("vertex", vid), str(e)))
            continue
        except ShapeMismatch as e:
            issues.append(Issue("capsule_fn_mismatch", ("vertex", vid), str(e)))
            continue
        if spec.output_shape is not None and tuple(spec.output_shape) != out_shape:
            issues.append(Issue(
                "shape_mismatch", ("vertex", vid),
                f"declared output shape {tuple(spec.output_shape)} but "
                f"connections produce {out_shape}"))
            continue
        shapes[vid] = out_shape
    return ShapeReport(shapes, tuple(issues))


# --- forward pass -------------------------------------------------------------

def _op_apply(op: WeightingOp, w: np.ndarray | None, y: np.ndarray) -> np.ndarray:
    if op.kind == "matmul":
        return w @ y
    if op.kind == "conv":
        return tz._conv_connection_arr(w, y, op.stride)
    if op.kind == "transfer":
        return y
    if op.kind == "reshape_flatten":
        return y.reshape(-1)
    if op.kind == "scalar_mult":
        return w.reshape(()) * y
    raise ShapeMismatch(f"unknown op {op.kind!r}")


def _cap_forward(fn: CapsuleFn, u: np.ndarray):
    """Returns (output, aux) where aux is the maxpool argmax or None."""
    if fn.kind == "relu":
        return np.maximum(u, 0), None
    if fn.kind == "sigmoid":
        return tz._sigmoid(u), None
    if fn.kind == "identity":
        return u, None
    if fn.kind == "softmax":
        return tz._softmax_arr(u), None
    if fn.kind == "squash":
        return tz._squash_arr(u), None
    if fn.kind == "maxpool":
        return tz._maxpool_arr(u, fn.window)
    raise ShapeMismatch(f"unknown capsule function {fn.kind!r}")


def forward(net: CapsuleNetwork, inputs: Mapping[str, Tensor],
            params: Parameters | None = None) -> ForwardResult:
    """Evaluate the network; raises ShapeErrors when validation fails."""
    report = validate_shapes(net)
    if not report.ok:
        raise ShapeErrors(report.issues)
    if params is None:
        params = net.parameters()
    missing = [v for v in net.input_shapes if v not in inputs]
    if missing:
        raise MissingInput(f"missing input tensors for {sorted(missing)}")
    ys: dict = {}
    for vid, shape in net.input_shapes.items():
        x = inputs[vid]
        if tuple(x.shape) != tuple(shape):
            raise InputShapeMismatch(
                f"input {vid!r} expects shape {tuple(shape)}, got {x.shape}")
        if x.dtype is not net.dtype:
            raise InputShapeMismatch(
                f"input {vid!r} expects {net.dtype.value}, got {x.dtype.value}")
        ys[vid] = x.data
    us: dict = {}
    pool_argmax: dict = {}
    for vid in topo_order(net.dag):
        if vid in ys:
            continue
        spec = net.capsules[vid]
        u = params.biases[vid].copy()
        for z in net.dag.predecessors(vid):
            conn = net.connections[(z, vid)]
            w = params.weights.get((z, vid))
            u += _op_apply(conn.op, w, ys[z])
        us[vid] = u
        y, aux = _cap_forward(spec.fn, u)
        ys[vid] = y
        if aux is not None:
            pool_argmax[vid] = aux
    return ForwardResult(ys, us, pool_argmax, params, net.token())


# --- builders ------------------------------------------------------------------

def init_weight(rng: np.random.Generator, shape: tuple[int, ...], fan_in: int,
                dtype: DType = DType.F64) -> Tensor:
    """Seeded uniform init in [-r, r] with r = 1/sqrt(fan-in)."""
    r = 1.0 / np.sqrt(max(fan_in, 1))
    return tz.tensor(rng.uniform(-r, r, size=shape), dtype)


def fan_in_of(op: WeightingOp, weight_shape: tuple[int, ...]) -> int:
    if op.kind == "matmul":
        return weight_shape[1]
    if op.kind == "conv":
        _, d, m, n = weight_shape
        return d * m * n
    return 1


def build_mlp_path(layer_dims: Sequence[int],
                   fns: Sequence[CapsuleFn] | None = None, seed: int = 0,
                   dtype: DType = DType.F64) -> CapsuleNetwork:
    """Path-shaped capsule network with matrix-multiplication connections.

    Weight shapes are d_{i+1} x d_i; biases start at zero. Default functions
    are relu for hidden capsules and identity for the last one.
    """
    dims = list(layer_dims)
    if len(dims) < 2:
        raise Degenerate("an MLP path needs at least two layers")
    if fns is None:
        fns = [CapsuleFn("relu")] * (len(dims) - 2) + [CapsuleFn("identity")]
    fns = list(fns)
    if len(fns) != len(dims) - 1:
        raise Degenerate("need one capsule function per non-input layer")
    names = ["x"] + [f"h{i}" for i in range(1, len(dims) - 1)] + ["o"]
    edges = list(zip(names[:-1], names[1:]))
    dag = build_dag(names, edges)
    rng = np.random.default_rng(seed)
    capsules = {}
    connections = {}
    for i, (tail, head) in enumerate(edges):
        w = init_weight(rng, (dims[i + 1], dims[i]), fan_in=dims[i], dtype=dtype)
        connections[(tail, head)] = ConnectionSpec(tail, head,
                                                   WeightingOp("matmul"), w)
        capsules[head] = CapsuleSpec(head, fns[i], tz.zeros((dims[i + 1],), dtype),
                                     output_shape=(dims[i + 1],))
    return CapsuleNetwork(dag, {"x": (dims[0],)}, capsules, connections, dtype)


def build_lenet_path(input_shape: tuple[int, int, int] = (1, 28, 28),
                     conv1: tuple[int, int, int, int] = (32, 5, 5, 1),
                     pool1: tuple[int, int] = (2, 2),
                     conv2: tuple[int, int, int, int] = (16, 5, 5, 1),
                     pool2: tuple[int, int] = (2, 2),
                     fc_dims: tuple[int, int] = (128, 10), seed: int = 0,
                     dtype: DType = DType.F64) -> CapsuleNetwork:
    """The seven-capsule convolutional path:

    conv+relu, maxpool, conv+relu, maxpool, flatten (identity capsule fed by a
    reshaping connection), fully connected relu, softmax output.
    """
    d, M, N = input_shape
    k1, m1, n1, s1 = conv1
    k2, m2, n2, s2 = conv2
    rng = np.random.default_rng(seed)

    def conv_shape(shape, k, m, n, s):
        return (k,) + tz.conv2d_output_hw(shape[1:], (m, n), s)

    c1 = conv_shape(input_shape, k1, m1, n1, s1)
    p1 = tz.pool_output_shape(c1, pool1)
    c2 = conv_shape(p1, k2, m2, n2, s2)
    p2 = tz.pool_output_shape(c2, pool2)
    flat = (p2[0] * p2[1] * p2[2],)
    fc, out = fc_dims

    names = ["x", "c1", "p1", "c2", "p2", "flat", "fc", "out"]
    edges = list(zip(names[:-1], names[1:]))
    dag = build_dag(names, edges)

    capsules = {
        "c1": CapsuleSpec("c1", CapsuleFn("relu"), tz.zeros(c1, dtype), c1),
        "p1": CapsuleSpec("p1", CapsuleFn("maxpool", pool1), tz.zeros(c1, dtype), p1),
        "c2": CapsuleSpec("c2", CapsuleFn("relu"), tz.zeros(c2, dtype), c2),
        "p2": CapsuleSpec("p2", CapsuleFn("maxpool", pool2), tz.zeros(c2, dtype), p2),
        "flat": CapsuleSpec("flat", CapsuleFn("identity"), tz.zeros(flat, dtype), flat),
        "fc": CapsuleSpec("fc", CapsuleFn("relu"), tz.zeros((fc,), dtype), (fc,)),
        "out": CapsuleSpec("out", CapsuleFn("softmax"), tz.zeros((out,), dtype), (out,)),
    }
    w1 = init_weight(rng, (k1, d, m1, n1), d * m1 * n1, dtype)
    w2 = init_weight(rng, (k2, p1[0], m2, n2), p1[0] * m2 * n2, dtype)
    wfc = init_weight(rng, (fc, flat[0]), flat[0], dtype)
    wout = init_weight(rng, (out, fc), fc, dtype)
    connections = {
        ("x", "c1"): ConnectionSpec("x", "c1", WeightingOp("conv", s1), w1),
        ("c1", "p1"): ConnectionSpec("c1", "p1", WeightingOp("transfer")),
        ("p1", "c2"): ConnectionSpec("p1", "c2", WeightingOp("conv", s2), w2),
        ("c2", "p2"): ConnectionSpec("c2", "p2", WeightingOp("transfer")),
        ("p2", "flat"): ConnectionSpec("p2", "flat", WeightingOp("reshape_flatten")),
        ("flat", "fc"): ConnectionSpec("flat", "fc", WeightingOp("matmul"), wfc),
        ("fc", "out"): ConnectionSpec("fc", "out", WeightingOp("matmul"), wout),
    }
    net = CapsuleNetwork(dag, {"x": input_shape}, capsules, connections, dtype)
    report = validate_shapes(net)
    if not report.ok:
        raise ShapeErrors(report.issues)
    return net


# --- lowering to plain networks -----------------------------------------------

def expand_to_plain(net: CapsuleNetwork,
                    params: Parameters | None = None) -> PlainNetwork:
    """One scalar neuron per tensor element, one amplifying connection per
    weight entry. Only matmul / scalar_mult / transfer connections and
    elementwise capsule functions can be expanded."""
    for conn in net.connections.values():
        if conn.op.kind not in ("matmul", "scalar_mult", "transfer"):
            raise Unsupported(f"cannot expand {conn.op.kind} connections")
    for spec in net.capsules.values():
        if spec.fn.kind not in ELEMENTWISE_KINDS:
            raise Unsupported(f"cannot expand {spec.fn.kind} capsules")
    report = validate_shapes(net)
    if not report.ok:
        raise ShapeErrors(report.issues)
    if params is None:
        params = net.parameters()

    def elems(vid):
        n = int(np.prod(report.shapes[vid])) if report.shapes[vid] else 1
        return [f"{vid}[{k}]" for k in range(n)]

    inputs = tuple(x for vid in net.input_shapes for x in elems(vid))
    neurons: list[PlainNeuron] = []
    conns: list[PlainConnection] = []
    for vid in topo_order(net.dag):
        if vid in net.input_shapes:
            continue
        spec = net.capsules[vid]
        bias = params.biases[vid].reshape(-1)
        head_elems = elems(vid)
        for k, hid in enumerate(head_elems):
            neurons.append(PlainNeuron(hid, spec.fn.kind, float(bias[k])))
        for z in net.dag.predecessors(vid):
            conn = net.connections[(z, vid)]
            tail_elems = elems(z)
            if conn.op.kind == "matmul":
                w = params.weights[(z, vid)]
                for i, hid in enumerate(head_elems):
                    for j, tidt in enumerate(tail_elems):
                        conns.append(PlainConnection(tidt, hid, float(w[i, j])))
            elif conn.op.kind == "scalar_mult":
                w = float(params.weights[(z, vid)].reshape(()))
                for tidt, hid in zip(tail_elems, head_elems):
                    conns.append(PlainConnection(tidt, hid, w))
            else:  # transfer
                for tidt, hid in zip(tail_elems, head_elems):
                    conns.append(PlainConnection(tidt, hid, 1.0))
    return PlainNetwork(inputs, tuple(neurons), tuple(conns))

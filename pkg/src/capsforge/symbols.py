"""The standard graphical symbol catalog.

Symbols are what documents and the editor UI speak: each capsule symbol kind
carries a typed attribute schema (dimensions, channels, pooling window, data
type) and each connection symbol kind knows how to infer its front-end
structure from a back-end capsule. Lowering turns a placed symbol graph into
an executable capsule network.

The transfer and reshaping connections are weight-free operations; the
constant structural matrices the catalog describes for them are exposed as
documentation metadata only.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import capsule as cm
from . import tensor as tz
from .errors import Issue, ShapeErrors, UnknownSymbolKind, WindowMismatch
from .graph import build_dag
from .tensor import DType, Tensor

CAPSULE_KINDS = ("data_1d", "data_2d", "relu_2d", "maxpool_2d",
                 "identity_1d", "relu_1d", "softmax_1d")
CONNECTION_KINDS = ("convolutional", "transfer", "reshaping", "full")
PLAIN_KINDS = ("data_neuron", "relu_neuron", "identity_neuron",
               "arrow_amplifying_connection", "amplifying_connection")

_DIM_1D = [{"name": "dimension", "type": "int", "required": True, "min": 1}]
_DIMS_2D = [{"name": "height", "type": "int", "required": True, "min": 1},
            {"name": "width", "type": "int", "required": True, "min": 1},
            {"name": "channels", "type": "int", "required": True, "min": 1}]
_DTYPE = {"name": "dtype", "type": "dtype", "required": False,
          "default": "float64", "choices": ["float64", "float32"]}
_WINDOW = {"name": "window", "type": "int_pair", "required": True, "min": 1}


def _capsule_def(kind, label, attrs):
    return {"name": kind, "category": "capsule", "label": label,
            "attributes": attrs}


_CAPSULE_DEFS = [
    _capsule_def("data_1d", "1D-data capsule", _DIM_1D + [_DTYPE]),
    _capsule_def("data_2d", "2D-data capsule", _DIMS_2D + [_DTYPE]),
    _capsule_def("relu_2d", "2D-ReLU capsule", _DIMS_2D + [_DTYPE]),
    _capsule_def("maxpool_2d", "2D-maximum downsampling capsule",
                 _DIMS_2D + [_WINDOW, _DTYPE]),
    _capsule_def("identity_1d", "1D-identical capsule", _DIM_1D + [_DTYPE]),
    _capsule_def("relu_1d", "1D-ReLU capsule", _DIM_1D + [_DTYPE]),
    _capsule_def("softmax_1d", "1D-softmax capsule", _DIM_1D + [_DTYPE]),
]

_CONNECTION_DEFS = [
    {"name": "convolutional", "category": "connection",
     "label": "convolutional connection",
     "attributes": [
         {"name": "kernels", "type": "int", "required": True, "min": 1},
         {"name": "kernel_height", "type": "int", "required": True, "min": 1},
         {"name": "kernel_width", "type": "int", "required": True, "min": 1},
         {"name": "stride", "type": "int", "required": False, "default": 1,
          "min": 1}],
     "back_end": {"rank": 2}, "front_end": {"rank": 2},
     "weight_doc": ("k kernels of d-channel m x n matrices; channel count and "
                    "data type follow the back end")},
    {"name": "transfer", "category": "connection",
     "label": "transfer connection", "attributes": [],
     "back_end": {"rank": 2}, "front_end": {"rank": 2},
     "weight_doc": ("constant M x M identity matrix; carries no free "
                    "parameters")},
    {"name": "reshaping", "category": "connection",
     "label": "reshaping connection", "attributes": [],
     "back_end": {"rank": 2}, "front_end": {"rank": 1},
     "weight_doc": ("constant family of M row-selector vectors; carries no "
                    "free parameters")},
    {"name": "full", "category": "connection", "label": "full connection",
     "attributes": [
         {"name": "height", "type": "int", "required": True, "min": 1},
         {"name": "width", "type": "int", "required": False, "min": 1}],
     "back_end": {"rank": 1}, "front_end": {"rank": 1},
     "weight_doc": "M x N weight matrix; width N defaults to the back-end dimension"},
]

_PLAIN_DEFS = [
    {"name": "data_neuron", "category": "plain", "label": "data neuron",
     "attributes": [_DTYPE]},
    {"name": "relu_neuron", "category": "plain", "label": "ReLU neuron",
     "attributes": [_DTYPE]},
    {"name": "identity_neuron", "category": "plain", "label": "identical neuron",
     "attributes": [_DTYPE]},
    {"name": "arrow_amplifying_connection", "category": "plain",
     "label": "arrow amplifying connection",
     "attributes": [{"name": "strength", "type": "float", "required": True},
                    _DTYPE]},
    {"name": "amplifying_connection", "category": "plain",
     "label": "amplifying connection",
     "attributes": [{"name": "strength", "type": "float", "required": True},
                    _DTYPE]},
]


def catalog() -> dict:
    """The complete machine-readable symbol catalog, stable ordering."""
    return {"capsules": [dict(d) for d in _CAPSULE_DEFS],
            "connections": [dict(d) for d in _CONNECTION_DEFS],
            "plain": [dict(d) for d in _PLAIN_DEFS]}


def _schema_for(kind: str) -> dict:
    for d in _CAPSULE_DEFS + _CONNECTION_DEFS + _PLAIN_DEFS:
        if d["name"] == kind:
            return d
    raise UnknownSymbolKind(f"unknown symbol kind {kind!r}")


@dataclass(frozen=True)
class CapsuleSymbol:
    kind: str
    attrs: dict

    def __post_init__(self):
        if self.kind not in CAPSULE_KINDS:
            raise UnknownSymbolKind(f"unknown capsule symbol {self.kind!r}")


@dataclass(frozen=True)
class ConnectionSymbol:
    kind: str
    attrs: dict = field(default_factory=dict)

    def __post_init__(self):
        if self.kind not in CONNECTION_KINDS:
            raise UnknownSymbolKind(f"unknown connection symbol {self.kind!r}")


def validate_attributes(kind: str, attrs: Mapping) -> list[str]:
    """Schema check: missing/unknown attributes, types, positivity."""
    schema = _schema_for(kind)
    problems = []
    known = {a["name"] for a in schema["attributes"]}
    for name in attrs:
        if name not in known:
            problems.append(f"unknown attribute {name!r} for {kind}")
    for a in schema["attributes"]:
        name = a["name"]
        if name not in attrs:
            if a.get("required"):
                problems.append(f"missing required attribute {name!r} for {kind}")
            continue
        value = attrs[name]
        if a["type"] == "int":
            if not isinstance(value, int) or isinstance(value, bool):
                problems.append(f"attribute {name!r} must be an integer")
            elif value < a.get("min", value):
                problems.append(f"attribute {name!r} must be >= {a['min']}")
        elif a["type"] == "int_pair":
            ok = (isinstance(value, (list, tuple)) and len(value) == 2
                  and all(isinstance(v, int) and not isinstance(v, bool)
                          and v >= a.get("min", 1) for v in value))
            if not ok:
                problems.append(f"attribute {name!r} must be a pair of positive integers")
        elif a["type"] == "dtype":
            if value not in a["choices"]:
                problems.append(f"attribute {name!r} must be one of {a['choices']}")
        elif a["type"] == "float":
            if not isinstance(value, (int, float)) or isinstance(value, bool):
                problems.append(f"attribute {name!r} must be a number")
    return problems


def _attrs_with_defaults(kind: str, attrs: Mapping) -> dict:
    schema = _schema_for(kind)
    out = dict(attrs)
    for a in schema["attributes"]:
        if a["name"] not in out and "default" in a:
            out[a["name"]] = a["default"]
    return out


def symbol_dtype(sym: CapsuleSymbol) -> str:
    return _attrs_with_defaults(sym.kind, sym.attrs).get("dtype", "float64")


def symbol_input_shape(sym: CapsuleSymbol) -> tuple[int, ...]:
    """The tensor shape a capsule symbol's attributes describe (its total
    input; channel-major for 2D kinds)."""
    a = _attrs_with_defaults(sym.kind, sym.attrs)
    if sym.kind in ("data_1d", "identity_1d", "relu_1d", "softmax_1d"):
        return (a["dimension"],)
    return (a["channels"], a["height"], a["width"])


def symbol_output_attrs(sym: CapsuleSymbol) -> dict:
    """Structure attributes of the symbol's output, as seen by an outgoing
    connection. Only pooling changes the structure."""
    a = _attrs_with_defaults(sym.kind, sym.attrs)
    if sym.kind != "maxpool_2d":
        return a
    lam, tau = a["window"]
    if a["height"] % lam or a["width"] % tau:
        raise WindowMismatch(
            f"window {lam}x{tau} does not divide {a['height']}x{a['width']}")
    out = dict(a)
    del out["window"]
    out["height"] = a["height"] // lam
    out["width"] = a["width"] // tau
    return out


_RANK_OF_KIND = {"data_1d": 1, "identity_1d": 1, "relu_1d": 1, "softmax_1d": 1,
                 "data_2d": 2, "relu_2d": 2, "maxpool_2d": 2}


def infer_front_attrs(conn: ConnectionSymbol, back: CapsuleSymbol) -> dict:
    """Front-end structure implied by a connection leaving `back`.

    convolutional: ((M-m)/s+1, (N-n)/s+1, k); transfer: unchanged;
    reshaping: dimension d*M*N; full: dimension = weight height.
    Raises IncompatibleBackEnd / StrideMismatch on impossible combinations.
    """
    from .errors import IncompatibleBackEnd, StrideMismatch

    conn_attrs = _attrs_with_defaults(conn.kind, conn.attrs)
    schema = _schema_for(conn.kind)
    back_out = symbol_output_attrs(back)
    back_rank = 1 if "dimension" in back_out else 2
    if schema["back_end"]["rank"] != back_rank:
        raise IncompatibleBackEnd(
            f"{conn.kind} connection needs a {schema['back_end']['rank']}D back "
            f"end, got {back.kind}")
    dtype = back_out.get("dtype", "float64")
    if conn.kind == "convolutional":
        M, N = back_out["height"], back_out["width"]
        m, n = conn_attrs["kernel_height"], conn_attrs["kernel_width"]
        s = conn_attrs["stride"]
        if m > M or n > N:
            raise IncompatibleBackEnd(
                f"kernel {m}x{n} exceeds back end {M}x{N}")
        if (M - m) % s or (N - n) % s:
            raise StrideMismatch(
                f"stride {s} does not divide ({M}-{m}, {N}-{n}) evenly")
        return {"height": (M - m) // s + 1, "width": (N - n) // s + 1,
                "channels": conn_attrs["kernels"], "dtype": dtype}
    if conn.kind == "transfer":
        return dict(back_out)
    if conn.kind == "reshaping":
        dim = back_out["channels"] * back_out["height"] * back_out["width"]
        return {"dimension": dim, "dtype": dtype}
    # full
    width = conn_attrs.get("width")
    if width is not None and width != back_out["dimension"]:
        raise IncompatibleBackEnd(
            f"full-connection weight width {width} != back-end dimension "
            f"{back_out['dimension']}")
    return {"dimension": conn_attrs["height"], "dtype": dtype}


def check_connection_compat(conn: ConnectionSymbol, back: CapsuleSymbol,
                            front: CapsuleSymbol,
                            where: tuple = ("edge", ("?", "?"))) -> list[Issue]:
    """Every attribute clash between the inferred front structure and the
    declared front capsule; empty list means compatible."""
    from .errors import IncompatibleBackEnd, StrideMismatch

    issues: list[Issue] = []
    if front.kind in ("data_1d", "data_2d"):
        issues.append(Issue("incompatible_front_end", where,
                            "data capsules cannot receive connections"))
        return issues
    try:
        inferred = infer_front_attrs(conn, back)
    except IncompatibleBackEnd as e:
        return [Issue("incompatible_back_end", where, str(e))]
    except WindowMismatch as e:
        return [Issue("window_mismatch", where, str(e))]
    except StrideMismatch as e:
        return [Issue("stride_mismatch", where, str(e))]
    schema = _schema_for(conn.kind)
    declared = _attrs_with_defaults(front.kind, front.attrs)
    front_rank = _RANK_OF_KIND[front.kind]
    if schema["front_end"]["rank"] != front_rank:
        issues.append(Issue(
            "incompatible_front_end", where,
            f"{conn.kind} connection needs a {schema['front_end']['rank']}D "
            f"front end, got {front.kind}"))
        return issues
    for key in ("dimension", "height", "width", "channels"):
        if key in inferred and inferred[key] != declared.get(key):
            issues.append(Issue(
                "shape_mismatch", where,
                f"front {key} should be {inferred[key]}, declared "
                f"{declared.get(key)}"))
    if inferred.get("dtype") != declared.get("dtype", "float64"):
        issues.append(Issue(
            "data_type_mismatch", where,
            f"back end is {inferred.get('dtype')}, front end is "
            f"{declared.get('dtype', 'float64')}"))
    return issues


# --- lowering -----------------------------------------------------------------

@dataclass(frozen=True)
class PlacedCapsule:
    id: str
    kind: str
    attrs: dict
    bias: Tensor | None = None


@dataclass(frozen=True)
class PlacedConnection:
    tail: str
    head: str
    kind: str
    attrs: dict = field(default_factory=dict)
    weight: Tensor | None = None


_FN_OF_KIND = {"relu_2d": "relu", "relu_1d": "relu", "identity_1d": "identity",
               "softmax_1d": "softmax"}

_OP_OF_KIND = {"convolutional": "conv", "transfer": "transfer",
               "reshaping": "reshape_flatten", "full": "matmul"}


def lower_symbols(capsules: Sequence[PlacedCapsule],
                  connections: Sequence[PlacedConnection],
                  seed: int = 0) -> cm.CapsuleNetwork:
    """Build an executable capsule network from a placed symbol graph.

    Raises ShapeErrors carrying every compatibility violation at once.
    Omitted weights get the seeded initialization; omitted biases are zero.
    """
    by_id = {c.id: c for c in capsules}
    issues: list[Issue] = []
    for c in capsules:
        for problem in validate_attributes(c.kind, c.attrs):
            issues.append(Issue("bad_attribute", ("vertex", c.id), problem))
    for conn in connections:
        for problem in validate_attributes(conn.kind, conn.attrs):
            issues.append(Issue("bad_attribute",
                                ("edge", (conn.tail, conn.head)), problem))
    if issues:
        raise ShapeErrors(issues)
    for conn in connections:
        where = ("edge", (conn.tail, conn.head))
        back, front = by_id.get(conn.tail), by_id.get(conn.head)
        if back is None or front is None:
            missing = conn.tail if back is None else conn.head
            issues.append(Issue("unresolved_reference", where,
                                f"connection references unknown capsule {missing!r}"))
            continue
        issues.extend(check_connection_compat(
            ConnectionSymbol(conn.kind, conn.attrs),
            CapsuleSymbol(back.kind, back.attrs),
            CapsuleSymbol(front.kind, front.attrs), where))
    if issues:
        raise ShapeErrors(issues)

    dtypes = {symbol_dtype(CapsuleSymbol(c.kind, c.attrs)) for c in capsules}
    dtype = DType.from_name(dtypes.pop()) if len(dtypes) == 1 else DType.F64

    dag = build_dag([c.id for c in capsules],
                    [(c.tail, c.head) for c in connections])
    rng = np.random.default_rng(seed)
    specs: dict = {}
    conn_specs: dict = {}
    input_shapes: dict = {}
    for c in capsules:
        sym = CapsuleSymbol(c.kind, c.attrs)
        shape = symbol_input_shape(sym)
        if c.kind in ("data_1d", "data_2d"):
            input_shapes[c.id] = shape
            continue
        if c.kind == "maxpool_2d":
            window = tuple(_attrs_with_defaults(c.kind, c.attrs)["window"])
            fn = cm.CapsuleFn("maxpool", window)
        else:
            fn = cm.CapsuleFn(_FN_OF_KIND[c.kind])
        bias = c.bias if c.bias is not None else tz.zeros(shape, dtype)
        out_shape = cm.cap_output_shape(fn, shape)
        specs[c.id] = cm.CapsuleSpec(c.id, fn, bias, out_shape)
    for c in connections:
        attrs = _attrs_with_defaults(c.kind, c.attrs)
        back_out = symbol_output_attrs(CapsuleSymbol(by_id[c.tail].kind,
                                                     by_id[c.tail].attrs))
        if c.kind == "convolutional":
            op = cm.WeightingOp("conv", attrs["stride"])
            wshape = (attrs["kernels"], back_out["channels"],
                      attrs["kernel_height"], attrs["kernel_width"])
        elif c.kind == "full":
            op = cm.WeightingOp("matmul")
            wshape = (attrs["height"], back_out["dimension"])
        else:
            op = cm.WeightingOp(_OP_OF_KIND[c.kind])
            wshape = None
        if wshape is None:
            weight = None
        elif c.weight is not None:
            weight = c.weight
        else:
            weight = cm.init_weight(rng, wshape, cm.fan_in_of(op, wshape), dtype)
        conn_specs[(c.tail, c.head)] = cm.ConnectionSpec(c.tail, c.head, op, weight)
    net = cm.CapsuleNetwork(dag, input_shapes, specs, conn_specs, dtype)
    report = cm.validate_shapes(net)
    if not report.ok:
        raise ShapeErrors(report.issues)
    return net


# --- reverse mapping (networks back to symbols) ----------------------------------

def capsule_to_symbol(spec: cm.CapsuleSpec) -> PlacedCapsule:
    shape = spec.bias.shape
    dtype = spec.bias.dtype.value
    if spec.fn.kind == "maxpool":
        d, M, N = shape
        return PlacedCapsule(spec.id, "maxpool_2d",
                             {"height": M, "width": N, "channels": d,
                              "window": list(spec.fn.window), "dtype": dtype},
                             spec.bias)
    if spec.fn.kind == "relu" and len(shape) == 3:
        d, M, N = shape
        return PlacedCapsule(spec.id, "relu_2d",
                             {"height": M, "width": N, "channels": d,
                              "dtype": dtype}, spec.bias)
    kind = {"relu": "relu_1d", "identity": "identity_1d",
            "softmax": "softmax_1d"}.get(spec.fn.kind)
    if kind is None or len(shape) != 1:
        raise UnknownSymbolKind(
            f"capsule {spec.id!r} ({spec.fn.kind}, shape {shape}) has no "
            f"standard symbol")
    return PlacedCapsule(spec.id, kind,
                         {"dimension": shape[0], "dtype": dtype}, spec.bias)


def input_to_symbol(vid: str, shape: tuple[int, ...], dtype: DType) -> PlacedCapsule:
    if len(shape) == 1:
        return PlacedCapsule(vid, "data_1d",
                             {"dimension": shape[0], "dtype": dtype.value})
    if len(shape) == 3:
        d, M, N = shape
        return PlacedCapsule(vid, "data_2d",
                             {"height": M, "width": N, "channels": d,
                              "dtype": dtype.value})
    raise UnknownSymbolKind(f"input {vid!r} of shape {shape} has no data symbol")


def connection_to_symbol(conn: cm.ConnectionSpec) -> PlacedConnection:
    if conn.op.kind == "conv":
        k, d, m, n = conn.weight.shape
        return PlacedConnection(conn.tail, conn.head, "convolutional",
                                {"kernels": k, "kernel_height": m,
                                 "kernel_width": n, "stride": conn.op.stride},
                                conn.weight)
    if conn.op.kind == "matmul":
        M, N = conn.weight.shape
        return PlacedConnection(conn.tail, conn.head, "full",
                                {"height": M, "width": N}, conn.weight)
    if conn.op.kind == "transfer":
        return PlacedConnection(conn.tail, conn.head, "transfer")
    if conn.op.kind == "reshape_flatten":
        return PlacedConnection(conn.tail, conn.head, "reshaping")
    raise UnknownSymbolKind(
        f"{conn.op.kind} connections have no standard symbol")

"""Persistence and interchange.

The graph document is a JSON description of a placed symbol graph — the same
structure the editor draws — with format version "capsforge/1". Serialization
is canonical: fixed field order, sorted open maps, shortest round-trip float
formatting, so `serialize(parse(serialize(x))) == serialize(x)` byte for byte.

Weights and biases may be inlined as base-64 little-endian payloads; omitted
parameters fall back to the seeded initialization (seed from the document
metadata). Datasets arrive as CSV rows or IDX containers; checkpoints are a
small binary format bound to the document by a SHA-256 hash.
"""

from __future__ import annotations

import base64
import hashlib
import json
import struct
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from . import capsule as cm
from . import symbols as sym
from . import tensor as tz
from .errors import (DocumentSyntaxError, FormatError, HashMismatch,
                     UnknownSymbolKind, UnresolvedReference)
from .tensor import DType, Tensor

FORMAT_VERSION = "capsforge/1"


@dataclass(frozen=True)
class GraphDocument:
    capsules: tuple[sym.PlacedCapsule, ...]
    connections: tuple[sym.PlacedConnection, ...]
    metadata: dict = field(default_factory=dict)
    format_version: str = FORMAT_VERSION

    @property
    def seed(self) -> int:
        return int(self.metadata.get("seed", 0))


# --- payload encoding ---------------------------------------------------------

_DTYPE_LE = {DType.F64: "<f8", DType.F32: "<f4"}


def encode_payload(t: Tensor) -> str:
    return base64.b64encode(t.data.astype(_DTYPE_LE[t.dtype]).tobytes()).decode()


def decode_payload(text: str, shape: tuple[int, ...], dtype: DType,
                   where: str) -> Tensor:
    try:
        raw = base64.b64decode(text, validate=True)
    except Exception:
        raise DocumentSyntaxError(f"{where}: payload is not valid base64")
    want = int(np.prod(shape)) if shape else 1
    arr = np.frombuffer(raw, dtype=_DTYPE_LE[dtype])
    if arr.size != want:
        raise DocumentSyntaxError(
            f"{where}: payload holds {arr.size} values, shape {shape} needs {want}")
    try:
        return tz.tensor(arr.reshape(shape), dtype)
    except ValueError as e:
        raise DocumentSyntaxError(f"{where}: {e}")


# --- parsing --------------------------------------------------------------------

def parse_document(text: str) -> GraphDocument:
    """Syntax, schema, and reference checks; no shape validation yet."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as e:
        raise DocumentSyntaxError(f"line {e.lineno}, column {e.colno}: {e.msg}")
    if not isinstance(raw, dict):
        raise DocumentSyntaxError("document must be a JSON object")
    version = raw.get("format_version")
    if version != FORMAT_VERSION:
        raise DocumentSyntaxError(
            f"format_version: expected {FORMAT_VERSION!r}, got {version!r}")
    metadata = raw.get("metadata", {})
    if not isinstance(metadata, dict):
        raise DocumentSyntaxError("metadata: must be an object")
    caps_raw = raw.get("capsules")
    if not isinstance(caps_raw, list) or not caps_raw:
        raise DocumentSyntaxError("capsules: a network requires at least one capsule")

    capsules: list[sym.PlacedCapsule] = []
    ids: set[str] = set()
    for i, c in enumerate(caps_raw):
        where = f"capsules[{i}]"
        if not isinstance(c, dict) or not isinstance(c.get("id"), str):
            raise DocumentSyntaxError(f"{where}: needs a string 'id'")
        cid = c["id"]
        if cid in ids:
            raise DocumentSyntaxError(f"{where}: duplicate id {cid!r}")
        ids.add(cid)
        kind = c.get("kind")
        if kind not in sym.CAPSULE_KINDS:
            raise UnknownSymbolKind(f"{where}: unknown capsule kind {kind!r}")
        attrs = c.get("attributes", {})
        if not isinstance(attrs, dict):
            raise DocumentSyntaxError(f"{where}: attributes must be an object")
        attrs = _normalize_attrs(attrs)
        bias = None
        if "bias" in c:
            dtype = DType.from_name(attrs.get("dtype", "float64"))
            shape = sym.symbol_input_shape(sym.CapsuleSymbol(kind, attrs))
            bias = decode_payload(c["bias"], shape, dtype, f"{where}.bias")
        capsules.append(sym.PlacedCapsule(cid, kind, attrs, bias))

    conns_raw = raw.get("connections", [])
    if not isinstance(conns_raw, list):
        raise DocumentSyntaxError("connections: must be a list")
    by_id = {c.id: c for c in capsules}
    connections: list[sym.PlacedConnection] = []
    seen_edges: set[tuple[str, str]] = set()
    for i, c in enumerate(conns_raw):
        where = f"connections[{i}]"
        if not isinstance(c, dict):
            raise DocumentSyntaxError(f"{where}: must be an object")
        tail, head = c.get("tail"), c.get("head")
        for label, vid in (("tail", tail), ("head", head)):
            if not isinstance(vid, str):
                raise DocumentSyntaxError(f"{where}.{label}: needs a string id")
            if vid not in by_id:
                raise UnresolvedReference(f"{where}.{label}: unknown capsule {vid!r}")
        if (tail, head) in seen_edges:
            raise DocumentSyntaxError(f"{where}: duplicate connection {tail}->{head}")
        seen_edges.add((tail, head))
        kind = c.get("kind")
        if kind not in sym.CONNECTION_KINDS:
            raise UnknownSymbolKind(f"{where}: unknown connection kind {kind!r}")
        attrs = c.get("attributes", {})
        if not isinstance(attrs, dict):
            raise DocumentSyntaxError(f"{where}: attributes must be an object")
        attrs = _normalize_attrs(attrs)
        weight = None
        if "weight" in c:
            weight = _decode_connection_weight(c["weight"], kind, attrs,
                                               by_id[tail], f"{where}.weight")
        connections.append(sym.PlacedConnection(tail, head, kind, attrs, weight))
    return GraphDocument(tuple(capsules), tuple(connections), dict(metadata))


def _normalize_attrs(attrs: Mapping) -> dict:
    out = {}
    for k, v in attrs.items():
        if isinstance(v, list):
            out[k] = [int(x) if isinstance(x, float) and x.is_integer() else x
                      for x in v]
        elif isinstance(v, float) and v.is_integer():
            out[k] = int(v)
        else:
            out[k] = v
    return out


def _decode_connection_weight(payload: str, kind: str, attrs: Mapping,
                              back: sym.PlacedCapsule, where: str) -> Tensor:
    back_sym = sym.CapsuleSymbol(back.kind, back.attrs)
    back_out = sym.symbol_output_attrs(back_sym)
    dtype = DType.from_name(back_out.get("dtype", "float64"))
    if kind == "convolutional":
        shape = (attrs["kernels"], back_out["channels"],
                 attrs["kernel_height"], attrs["kernel_width"])
    elif kind == "full":
        shape = (attrs["height"], back_out["dimension"])
    else:
        raise DocumentSyntaxError(
            f"{where}: {kind} connections carry no weight payload")
    return decode_payload(payload, shape, dtype, where)


def document_to_network(doc: GraphDocument) -> cm.CapsuleNetwork:
    """Lower the document; raises ShapeErrors with every violation."""
    return sym.lower_symbols(doc.capsules, doc.connections, seed=doc.seed)


def parse_graph_document(text: str) -> cm.CapsuleNetwork:
    """Full pipeline: parse, lower, and shape-validate a document."""
    return document_to_network(parse_document(text))


# --- canonical serialization -----------------------------------------------------

def _canon_value(v):
    if isinstance(v, dict):
        return {k: _canon_value(v[k]) for k in sorted(v)}
    if isinstance(v, (list, tuple)):
        return [_canon_value(x) for x in v]
    if isinstance(v, np.integer):
        return int(v)
    if isinstance(v, np.floating):
        return float(v)
    return v


def document_to_obj(doc: GraphDocument) -> dict:
    caps = []
    for c in doc.capsules:
        entry = {"id": c.id, "kind": c.kind,
                 "attributes": _canon_value(c.attrs)}
        if c.bias is not None:
            entry["bias"] = encode_payload(c.bias)
        caps.append(entry)
    conns = []
    for c in doc.connections:
        entry = {"tail": c.tail, "head": c.head, "kind": c.kind}
        if c.attrs:
            entry["attributes"] = _canon_value(c.attrs)
        if c.weight is not None:
            entry["weight"] = encode_payload(c.weight)
        conns.append(entry)
    return {"format_version": doc.format_version,
            "metadata": _canon_value(doc.metadata),
            "capsules": caps,
            "connections": conns}


def canonical_json(obj) -> str:
    """Canonical text for an already-ordered JSON-able object."""
    return json.dumps(obj, indent=2, ensure_ascii=False,
                      allow_nan=False) + "\n"


def network_to_document(net: cm.CapsuleNetwork,
                        metadata: Mapping | None = None) -> GraphDocument:
    """Represent a network as a symbol document with inlined parameters.

    Only catalog-representable networks serialize; others raise
    UnknownSymbolKind (the v1 catalog is closed).
    """
    capsules = []
    for vid in net.dag.vertices:
        if vid in net.input_shapes:
            capsules.append(sym.input_to_symbol(vid, net.input_shapes[vid],
                                                net.dtype))
        else:
            capsules.append(sym.capsule_to_symbol(net.capsules[vid]))
    connections = [sym.connection_to_symbol(net.connections[edge])
                   for edge in net.dag.edges]
    return GraphDocument(tuple(capsules), tuple(connections),
                         dict(metadata or {}))


def serialize(obj) -> str:
    """Canonical document text for a GraphDocument or a CapsuleNetwork."""
    if isinstance(obj, cm.CapsuleNetwork):
        obj = network_to_document(obj)
    if not isinstance(obj, GraphDocument):
        raise TypeError(f"cannot serialize {type(obj).__name__}")
    return canonical_json(document_to_obj(obj))


def document_hash(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


# --- DOT export --------------------------------------------------------------------

def export_dot(net: cm.CapsuleNetwork) -> str:
    report = cm.validate_shapes(net)
    shape_of = report.shapes

    def fmt_shape(s):
        return "x".join(str(d) for d in s) if s else "scalar"

    lines = ["digraph capsule_network {", "  rankdir=LR;"]
    for vid in net.dag.vertices:
        if vid in net.input_shapes:
            label = f"{vid}\\ndata {fmt_shape(net.input_shapes[vid])}"
        else:
            spec = net.capsules[vid]
            kind = spec.fn.kind
            if spec.fn.kind == "maxpool":
                kind += "%dx%d" % spec.fn.window
            out = shape_of.get(vid)
            label = f"{vid}\\n{kind} {fmt_shape(out) if out else '?'}"
        lines.append(f'  "{vid}" [label="{label}"];')
    for tail, head in net.dag.edges:
        conn = net.connections[(tail, head)]
        label = conn.op.kind
        if conn.op.kind == "conv":
            label += f" s={conn.op.stride}"
        lines.append(f'  "{tail}" -> "{head}" [label="{label}"];')
    lines.append("}")
    return "\n".join(lines) + "\n"


# --- datasets -----------------------------------------------------------------------

@dataclass(frozen=True)
class DatasetSpec:
    source: str                       # "csv" | "idx"
    feature_shape: tuple[int, ...]
    target_shape: tuple[int, ...]
    record_count: int | None = None
    labels_path: str | None = None    # idx only
    dtype: DType = DType.F64

    def __post_init__(self):
        if self.source not in ("csv", "idx"):
            raise ValueError(f"unknown dataset source {self.source!r}")


def load_dataset(path: str, spec: DatasetSpec) -> list[tuple[Tensor, Tensor]]:
    if spec.source == "csv":
        pairs = _load_csv(path, spec)
    else:
        pairs = _load_idx_pairs(path, spec)
    if spec.record_count is not None and len(pairs) != spec.record_count:
        raise FormatError(
            f"expected {spec.record_count} records, found {len(pairs)}")
    return pairs


def load_csv_text(text: str, spec: DatasetSpec) -> list[tuple[Tensor, Tensor]]:
    """CSV records from a string: features first, then targets, one pair per line."""
    n_feat = int(np.prod(spec.feature_shape))
    n_targ = int(np.prod(spec.target_shape))
    pairs = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.strip()
        if not line:
            continue
        fields = line.split(",")
        if len(fields) != n_feat + n_targ:
            raise FormatError(
                f"line {lineno}: expected {n_feat + n_targ} fields, "
                f"got {len(fields)}")
        try:
            values = [float(f) for f in fields]
        except ValueError as e:
            raise FormatError(f"line {lineno}: {e}")
        x = np.array(values[:n_feat]).reshape(spec.feature_shape)
        t = np.array(values[n_feat:]).reshape(spec.target_shape)
        pairs.append((tz.tensor(x, spec.dtype), tz.tensor(t, spec.dtype)))
    return pairs


def _load_csv(path: str, spec: DatasetSpec) -> list[tuple[Tensor, Tensor]]:
    with open(path, "r", encoding="utf-8") as fh:
        return load_csv_text(fh.read(), spec)


_IDX_DTYPES = {0x08: ">u1", 0x09: ">i1", 0x0B: ">i2", 0x0C: ">i4",
               0x0D: ">f4", 0x0E: ">f8"}


def read_idx(path: str) -> np.ndarray:
    """One IDX container: big-endian magic, dimension headers, then data."""
    with open(path, "rb") as fh:
        blob = fh.read()
    if len(blob) < 4:
        raise FormatError("idx file shorter than its magic number")
    zero, zero2, type_code, ndim = struct.unpack(">BBBB", blob[:4])
    if zero != 0 or zero2 != 0 or type_code not in _IDX_DTYPES:
        raise FormatError(
            f"bad idx magic 0x{int.from_bytes(blob[:4], 'big'):08x}")
    header_end = 4 + 4 * ndim
    if len(blob) < header_end:
        raise FormatError("idx file truncated inside dimension header")
    dims = struct.unpack(f">{ndim}I", blob[4:header_end])
    dtype = np.dtype(_IDX_DTYPES[type_code])
    want = int(np.prod(dims)) * dtype.itemsize
    payload = blob[header_end:]
    if len(payload) != want:
        raise FormatError(
            f"idx payload holds {len(payload)} bytes, dims {dims} need {want}")
    return np.frombuffer(payload, dtype=dtype).reshape(dims)


def _load_idx_pairs(path: str, spec: DatasetSpec) -> list[tuple[Tensor, Tensor]]:
    if spec.labels_path is None:
        raise FormatError("idx datasets need a labels_path")
    images = read_idx(path)
    labels = read_idx(spec.labels_path)
    if labels.ndim != 1:
        raise FormatError(f"label container must be rank 1, got {labels.shape}")
    if images.shape[0] != labels.shape[0]:
        raise FormatError(
            f"{images.shape[0]} images but {labels.shape[0]} labels")
    per_record = int(np.prod(images.shape[1:]))
    if per_record != int(np.prod(spec.feature_shape)):
        raise FormatError(
            f"record shape {images.shape[1:]} incompatible with feature shape "
            f"{spec.feature_shape}")
    if len(spec.target_shape) != 1:
        raise FormatError("idx targets are one-hot vectors; target shape must be rank 1")
    n_classes = spec.target_shape[0]
    scale = 255.0 if images.dtype == np.dtype(">u1") else 1.0
    pairs = []
    for i in range(images.shape[0]):
        x = images[i].astype(spec.dtype.np) / scale
        label = int(labels[i])
        if not 0 <= label < n_classes:
            raise FormatError(f"record {i}: label {label} outside 0..{n_classes - 1}")
        t = np.zeros(n_classes, dtype=spec.dtype.np)
        t[label] = 1.0
        pairs.append((tz.tensor(x.reshape(spec.feature_shape), spec.dtype),
                      tz.tensor(t, spec.dtype)))
    return pairs


# --- checkpoints ---------------------------------------------------------------------

_CKPT_MAGIC = b"CAPSFCK1"
_CKPT_DTYPE = {DType.F64: 0, DType.F32: 1}
_CKPT_DTYPE_INV = {0: DType.F64, 1: DType.F32}


@dataclass(frozen=True)
class Checkpoint:
    document_hash: str
    iteration: int
    loss_history: tuple[tuple[int, float], ...]
    weights: dict     # "tail->head" -> ndarray
    biases: dict      # vertex id -> ndarray


def checkpoint_from_training(document_text: str, params: cm.Parameters,
                             iteration: int,
                             history: Sequence[tuple[int, float]]) -> Checkpoint:
    weights = {f"{t}->{h}": arr.copy() for (t, h), arr in params.weights.items()}
    biases = {vid: arr.copy() for vid, arr in params.biases.items()}
    return Checkpoint(document_hash(document_text), iteration,
                      tuple((int(i), float(l)) for i, l in history),
                      weights, biases)


def checkpoint_parameters(ckpt: Checkpoint, net: cm.CapsuleNetwork) -> cm.Parameters:
    weights = {}
    for edge in net.dag.edges:
        conn = net.connections[edge]
        if conn.weight is None:
            continue
        key = f"{edge[0]}->{edge[1]}"
        if key not in ckpt.weights:
            raise FormatError(f"checkpoint is missing weight {key}")
        if ckpt.weights[key].shape != conn.weight.shape:
            raise FormatError(
                f"checkpoint weight {key} has shape {ckpt.weights[key].shape}, "
                f"network needs {conn.weight.shape}")
        weights[edge] = ckpt.weights[key].copy()
    biases = {}
    for vid, spec in net.capsules.items():
        if vid not in ckpt.biases:
            raise FormatError(f"checkpoint is missing bias {vid!r}")
        if ckpt.biases[vid].shape != spec.bias.shape:
            raise FormatError(
                f"checkpoint bias {vid!r} has shape {ckpt.biases[vid].shape}, "
                f"network needs {spec.bias.shape}")
        biases[vid] = ckpt.biases[vid].copy()
    return cm.Parameters(weights, biases)


def _pack_array(key: str, arr: np.ndarray) -> bytes:
    kb = key.encode("utf-8")
    dtype = DType.from_name(arr.dtype.name)
    dims = arr.shape
    head = struct.pack("<H", len(kb)) + kb
    head += struct.pack("<BB", _CKPT_DTYPE[dtype], len(dims))
    head += struct.pack(f"<{len(dims)}I", *dims) if dims else b""
    return head + arr.astype(_DTYPE_LE[dtype]).tobytes()


class _Reader:
    def __init__(self, blob: bytes, offset: int):
        self.blob = blob
        self.off = offset

    def take(self, n: int) -> bytes:
        if self.off + n > len(self.blob):
            raise FormatError("checkpoint truncated")
        out = self.blob[self.off:self.off + n]
        self.off += n
        return out

    def unpack(self, fmt: str):
        return struct.unpack(fmt, self.take(struct.calcsize(fmt)))


def _unpack_array(r: _Reader) -> tuple[str, np.ndarray]:
    (klen,) = r.unpack("<H")
    key = r.take(klen).decode("utf-8")
    dcode, rank = r.unpack("<BB")
    if dcode not in _CKPT_DTYPE_INV:
        raise FormatError(f"unknown checkpoint dtype code {dcode}")
    dims = r.unpack(f"<{rank}I") if rank else ()
    dtype = _CKPT_DTYPE_INV[dcode]
    count = int(np.prod(dims)) if dims else 1
    raw = r.take(count * np.dtype(_DTYPE_LE[dtype]).itemsize)
    arr = np.frombuffer(raw, dtype=_DTYPE_LE[dtype]).reshape(dims)
    return key, arr.astype(dtype.np)


def checkpoint_to_bytes(ckpt: Checkpoint) -> bytes:
    out = [_CKPT_MAGIC, bytes.fromhex(ckpt.document_hash),
           struct.pack("<Q", ckpt.iteration),
           struct.pack("<Q", len(ckpt.loss_history))]
    for it, lo in ckpt.loss_history:
        out.append(struct.pack("<Qd", it, lo))
    for store in (ckpt.weights, ckpt.biases):
        out.append(struct.pack("<I", len(store)))
        for key in sorted(store):
            out.append(_pack_array(key, store[key]))
    return b"".join(out)


def save_checkpoint(path: str, ckpt: Checkpoint) -> None:
    with open(path, "wb") as fh:
        fh.write(checkpoint_to_bytes(ckpt))


def checkpoint_from_bytes(blob: bytes,
                          expected_document: str | None = None) -> Checkpoint:
    if blob[:8] != _CKPT_MAGIC:
        raise FormatError("not a checkpoint file (bad magic)")
    r = _Reader(blob, 8)
    doc_hash = r.take(32).hex()
    (iteration,) = r.unpack("<Q")
    (hist_len,) = r.unpack("<Q")
    history = tuple(r.unpack("<Qd") for _ in range(hist_len))
    stores = []
    for _ in range(2):
        (count,) = r.unpack("<I")
        store = {}
        for _ in range(count):
            key, arr = _unpack_array(r)
            store[key] = arr
        stores.append(store)
    if r.off != len(blob):
        raise FormatError("checkpoint has trailing bytes")
    ckpt = Checkpoint(doc_hash, iteration, history, stores[0], stores[1])
    if expected_document is not None:
        if document_hash(expected_document) != doc_hash:
            raise HashMismatch(
                "checkpoint was produced for a different document")
    return ckpt


def load_checkpoint(path: str, expected_document: str | None = None) -> Checkpoint:
    with open(path, "rb") as fh:
        blob = fh.read()
    return checkpoint_from_bytes(blob, expected_document)

"""Bundled example documents: the four-capsule MLP, the eight-capsule
convolutional chain, and a small skip-connection network, plus the XOR
dataset the MLP demo trains on. Documents are topology-only (no inline
payloads) so the seeded initialization applies."""

from __future__ import annotations

from . import model_io as mio
from . import symbols as sym

XOR_TRAIN_CONFIG = {"learning_rate": 0.1, "max_iter": 2000, "loss": "sse",
                    "seed": 0}


def mlp_document() -> mio.GraphDocument:
    """1D data(2) -> ReLU(6) -> ReLU(4) -> identity(2), full connections."""
    capsules = (
        sym.PlacedCapsule("a", "data_1d", {"dimension": 2, "dtype": "float64"}),
        sym.PlacedCapsule("b", "relu_1d", {"dimension": 6, "dtype": "float64"}),
        sym.PlacedCapsule("c", "relu_1d", {"dimension": 4, "dtype": "float64"}),
        sym.PlacedCapsule("d", "identity_1d", {"dimension": 2, "dtype": "float64"}),
    )
    connections = (
        sym.PlacedConnection("a", "b", "full", {"height": 6}),
        sym.PlacedConnection("b", "c", "full", {"height": 4}),
        sym.PlacedConnection("c", "d", "full", {"height": 2}),
    )
    return mio.GraphDocument(capsules, connections,
                             {"name": "mlp-2-6-4-2", "seed": 0})


def lenet_document() -> mio.GraphDocument:
    """The eight-symbol convolutional chain on 28x28x1 input."""
    f64 = {"dtype": "float64"}
    capsules = (
        sym.PlacedCapsule("a", "data_2d",
                          {"height": 28, "width": 28, "channels": 1, **f64}),
        sym.PlacedCapsule("b", "relu_2d",
                          {"height": 24, "width": 24, "channels": 32, **f64}),
        sym.PlacedCapsule("c", "maxpool_2d",
                          {"height": 24, "width": 24, "channels": 32,
                           "window": [2, 2], **f64}),
        sym.PlacedCapsule("d", "relu_2d",
                          {"height": 8, "width": 8, "channels": 16, **f64}),
        sym.PlacedCapsule("e", "maxpool_2d",
                          {"height": 8, "width": 8, "channels": 16,
                           "window": [2, 2], **f64}),
        sym.PlacedCapsule("f", "identity_1d", {"dimension": 256, **f64}),
        sym.PlacedCapsule("g", "relu_1d", {"dimension": 128, **f64}),
        sym.PlacedCapsule("h", "softmax_1d", {"dimension": 10, **f64}),
    )
    connections = (
        sym.PlacedConnection("a", "b", "convolutional",
                             {"kernels": 32, "kernel_height": 5,
                              "kernel_width": 5, "stride": 1}),
        sym.PlacedConnection("b", "c", "transfer"),
        sym.PlacedConnection("c", "d", "convolutional",
                             {"kernels": 16, "kernel_height": 5,
                              "kernel_width": 5, "stride": 1}),
        sym.PlacedConnection("d", "e", "transfer"),
        sym.PlacedConnection("e", "f", "reshaping"),
        sym.PlacedConnection("f", "g", "full", {"height": 128}),
        sym.PlacedConnection("g", "h", "full", {"height": 10}),
    )
    return mio.GraphDocument(capsules, connections,
                             {"name": "lenet-28x28", "seed": 0})


def skip_document() -> mio.GraphDocument:
    """A four-capsule network with one layer-skipping connection."""
    capsules = (
        sym.PlacedCapsule("a", "data_1d", {"dimension": 3, "dtype": "float64"}),
        sym.PlacedCapsule("b", "relu_1d", {"dimension": 4, "dtype": "float64"}),
        sym.PlacedCapsule("c", "relu_1d", {"dimension": 4, "dtype": "float64"}),
        sym.PlacedCapsule("d", "identity_1d", {"dimension": 2, "dtype": "float64"}),
    )
    connections = (
        sym.PlacedConnection("a", "b", "full", {"height": 4}),
        sym.PlacedConnection("b", "c", "full", {"height": 4}),
        sym.PlacedConnection("a", "c", "full", {"height": 4}),  # the skip
        sym.PlacedConnection("c", "d", "full", {"height": 2}),
    )
    return mio.GraphDocument(capsules, connections,
                             {"name": "skip-demo", "seed": 0})


_BUILDERS = {"xor_mlp": mlp_document, "lenet_mnist": lenet_document,
             "skip_demo": skip_document}

PRESET_NAMES = tuple(sorted(_BUILDERS))


def document(name: str) -> mio.GraphDocument:
    try:
        return _BUILDERS[name]()
    except KeyError:
        raise KeyError(f"unknown preset {name!r}; have {PRESET_NAMES}") from None


def text(name: str) -> str:
    """Canonical document text of a bundled preset."""
    return mio.serialize(document(name))


def xor_csv() -> str:
    """Two features, two-dimensional one-hot target: class 0 = inputs equal."""
    rows = [([0, 0], [1, 0]), ([0, 1], [0, 1]),
            ([1, 0], [0, 1]), ([1, 1], [1, 0])]
    return "".join(",".join(str(float(v)) for v in x + t) + "\n"
                   for x, t in rows)


def data_path(filename: str) -> str:
    """Absolute path of a bundled preset file."""
    import importlib.resources

    return str(importlib.resources.files(__package__) / "presets" / filename)

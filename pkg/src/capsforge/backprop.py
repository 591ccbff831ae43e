"""Universal backpropagation over capsule networks.

Sensitivities are computed in reverse topological order: the loss gradient is
pulled through each capsule function (a vector-Jacobian product), then each
incoming connection splits it into a weight gradient and a contribution to
the tail capsule's sensitivity. Hidden capsules sum the contributions of all
their consumers before applying their own capsule Jacobian.

Training is plain full-batch gradient descent: per-pair gradients are
accumulated in pair order (so the batch gradient is bit-identical to the sum
of per-pair gradients) and applied once per iteration.

`finite_diff_check` is the independent oracle: it never touches the analytic
path and recomputes every partial derivative by central differences.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Mapping, Sequence

import numpy as np

from . import tensor as tz
from .capsule import (CapsuleFn, CapsuleNetwork, ConnectionSpec, ForwardResult,
                      Parameters, forward, init_weight, fan_in_of)
from .errors import (DomainError, MissingTarget, ShapeMismatch, StaleCache)
from .graph import topo_order
from .tensor import Tensor

LOSS_KINDS = ("sse", "cross_entropy")


def loss(y: Tensor, t: Tensor, fn: str = "sse") -> float:
    return _loss_arr(y.data, t.data, fn)


def loss_grad(y: Tensor, t: Tensor, fn: str = "sse") -> Tensor:
    return tz.tensor(_loss_grad_arr(y.data, t.data, fn))


def _check_loss_pre(y: np.ndarray, t: np.ndarray, fn: str) -> None:
    if fn not in LOSS_KINDS:
        raise ValueError(f"unknown loss {fn!r}")
    if y.shape != t.shape:
        raise ShapeMismatch(f"loss shapes differ: {y.shape} vs {t.shape}")
    if fn == "cross_entropy":
        if np.any(y <= 0):
            raise DomainError("cross entropy needs strictly positive predictions")
        tol = 1e-6 if y.dtype == np.float64 else 1e-4
        if abs(float(y.sum()) - 1.0) > tol:
            raise DomainError("cross entropy needs predictions summing to 1")


def _loss_arr(y: np.ndarray, t: np.ndarray, fn: str) -> float:
    _check_loss_pre(y, t, fn)
    if fn == "sse":
        d = y - t
        return 0.5 * float(np.sum(d * d))
    return -float(np.sum(t * np.log(y)))


def _loss_grad_arr(y: np.ndarray, t: np.ndarray, fn: str) -> np.ndarray:
    _check_loss_pre(y, t, fn)
    if fn == "sse":
        return y - t
    return -t / y


# --- vector-Jacobian products --------------------------------------------------

def _cap_vjp(fn: CapsuleFn, u: np.ndarray, upstream: np.ndarray,
             pool_arg: np.ndarray | None = None) -> np.ndarray:
    if fn.kind == "relu":
        return upstream * (u > 0)
    if fn.kind == "sigmoid":
        s = tz._sigmoid(u)
        return upstream * s * (1.0 - s)
    if fn.kind == "identity":
        return upstream
    if fn.kind == "softmax":
        return tz._softmax_vjp(tz._softmax_arr(u), upstream)
    if fn.kind == "squash":
        return tz._squash_vjp(u, upstream)
    if fn.kind == "maxpool":
        if pool_arg is None:
            _, pool_arg = tz._maxpool_arr(u, fn.window)
        return tz._maxpool_route(upstream, pool_arg, u.shape, fn.window)
    raise ValueError(f"unknown capsule function {fn.kind!r}")


def capsule_vjp(fn: CapsuleFn, u: Tensor, upstream: Tensor,
                pool_arg: np.ndarray | None = None) -> Tensor:
    """upstream^T . d cap(u)/du; maxpool routes through the cached argmaxes."""
    out_shape = (tz.pool_output_shape(u.shape, fn.window)
                 if fn.kind == "maxpool" else u.shape)
    if upstream.shape != tuple(out_shape):
        raise ShapeMismatch(
            f"upstream shape {upstream.shape} != capsule output {tuple(out_shape)}")
    return tz.tensor(_cap_vjp(fn, u.data, upstream.data, pool_arg))


def _conn_vjp(conn: ConnectionSpec, w: np.ndarray | None, y_tail: np.ndarray,
              delta: np.ndarray) -> tuple[np.ndarray | None, np.ndarray]:
    """Returns (dW or None, contribution to the tail's upstream gradient)."""
    kind = conn.op.kind
    if kind == "matmul":
        return np.outer(delta, y_tail), w.T @ delta
    if kind == "conv":
        return tz._conv_connection_grads(w, y_tail, delta, conn.op.stride)
    if kind == "transfer":
        return None, delta
    if kind == "reshape_flatten":
        return None, delta.reshape(y_tail.shape)
    if kind == "scalar_mult":
        dw = np.array(np.sum(delta * y_tail)).reshape(w.shape)
        return dw, w.reshape(()) * delta
    raise ValueError(f"unknown weighting operation {kind!r}")


def connection_vjp(conn: ConnectionSpec, y_tail: Tensor,
                   delta_head: Tensor) -> tuple[Tensor | None, Tensor]:
    """Per-edge backward step using the connection's own weight tensor."""
    w = conn.weight.data if conn.weight is not None else None
    dw, contrib = _conn_vjp(conn, w, y_tail.data, delta_head.data)
    return (None if dw is None else tz.tensor(dw)), tz.tensor(contrib)


# --- full backward pass -----------------------------------------------------------

@dataclass(frozen=True)
class GradientSet:
    weights: dict   # edge -> ndarray shaped like the weight
    biases: dict    # vertex -> ndarray shaped like the bias


@dataclass(frozen=True)
class BackwardResult:
    sensitivities: dict   # non-input vertex -> delta ndarray (shape of U)
    gradients: GradientSet
    total_loss: float


def backward(net: CapsuleNetwork, result: ForwardResult,
             targets: Mapping[str, Tensor], loss_fn: str = "sse") -> BackwardResult:
    """Sensitivities and parameter gradients for one forward pass."""
    if result.net_token != net.token():
        raise StaleCache("forward cache was produced for a different network")
    outputs = set(net.parts.outputs)
    missing = outputs - set(targets)
    if missing:
        raise MissingTarget(f"no target for outputs {sorted(missing)}")
    unknown = set(targets) - outputs
    if unknown:
        raise MissingTarget(f"targets given for non-output vertices {sorted(unknown)}")

    params = result.params
    total_loss = 0.0
    downstream: dict = {}      # vertex -> accumulated dL/dY
    sensitivities: dict = {}
    grad_w: dict = {}
    grad_b: dict = {}
    for vid in reversed(topo_order(net.dag)):
        if vid in net.input_shapes:
            continue
        spec = net.capsules[vid]
        u = result.us[vid]
        y = result.ys[vid]
        if vid in outputs:
            t = targets[vid].data
            total_loss += _loss_arr(y, t, loss_fn)
            if loss_fn == "cross_entropy" and spec.fn.kind == "softmax":
                # Stable fused gradient; identical to chaining -t/y through
                # the softmax Jacobian.
                delta = y - t
            else:
                delta = _cap_vjp(spec.fn, u, _loss_grad_arr(y, t, loss_fn),
                                 result.pool_argmax.get(vid))
        else:
            upstream = downstream.get(vid)
            if upstream is None:
                upstream = np.zeros_like(y)
            delta = _cap_vjp(spec.fn, u, upstream, result.pool_argmax.get(vid))
        sensitivities[vid] = delta
        grad_b[vid] = delta
        for z in net.dag.predecessors(vid):
            conn = net.connections[(z, vid)]
            w = params.weights.get((z, vid))
            dw, contrib = _conn_vjp(conn, w, result.ys[z], delta)
            if dw is not None:
                grad_w[(z, vid)] = dw
            if z not in net.input_shapes:
                if z in downstream:
                    downstream[z] = downstream[z] + contrib
                else:
                    downstream[z] = contrib
    return BackwardResult(sensitivities, GradientSet(grad_w, grad_b), total_loss)


# --- training ------------------------------------------------------------------------

@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    max_iter: int
    loss: str = "sse"
    seed: int = 0
    log_stride: int = 1

    def __post_init__(self):
        if not self.learning_rate > 0:
            raise ValueError("learning rate must be positive")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.loss not in LOSS_KINDS:
            raise ValueError(f"unknown loss {self.loss!r}")
        if self.log_stride < 1:
            raise ValueError("log stride must be >= 1")


Pair = tuple  # (inputs, targets) as mappings, or (Tensor, Tensor) for 1-in/1-out


def _normalize_pair(net: CapsuleNetwork, pair: Pair) -> tuple[dict, dict]:
    x, t = pair
    if isinstance(x, Tensor):
        parts = net.parts
        if len(net.input_shapes) != 1 or len(parts.outputs) != 1:
            raise MissingTarget(
                "bare tensor pairs need a single-input single-output network")
        return ({next(iter(net.input_shapes)): x}, {parts.outputs[0]: t})
    return dict(x), dict(t)


def seeded_init(net: CapsuleNetwork, seed: int) -> Parameters:
    """Fresh parameter store: zero biases, seeded uniform weights in
    [-1/sqrt(fan-in), 1/sqrt(fan-in)], drawn in edge declaration order."""
    rng = np.random.default_rng(seed)
    weights = {}
    for edge in net.dag.edges:
        conn = net.connections[edge]
        if conn.weight is None:
            continue
        shape = conn.weight.shape
        weights[edge] = init_weight(rng, shape, fan_in_of(conn.op, shape),
                                    net.dtype).data.copy()
    biases = {vid: np.zeros(spec.bias.shape, dtype=net.dtype.np)
              for vid, spec in net.capsules.items()}
    return Parameters(weights, biases)


def train_iteration(net: CapsuleNetwork, params: Parameters,
                    pairs: Sequence[Pair], config: TrainConfig) -> tuple[Parameters, float]:
    """One full-batch step: accumulate per-pair gradients in order, then
    descend. Updates `params` in place and returns it with the batch loss."""
    acc_w = {k: np.zeros_like(v) for k, v in params.weights.items()}
    acc_b = {k: np.zeros_like(v) for k, v in params.biases.items()}
    batch_loss = 0.0
    for pair in pairs:
        inputs, targets = _normalize_pair(net, pair)
        result = forward(net, inputs, params)
        back = backward(net, result, targets, config.loss)
        batch_loss += back.total_loss
        for k, g in back.gradients.weights.items():
            acc_w[k] += g
        for k, g in back.gradients.biases.items():
            acc_b[k] += g
    eta = config.learning_rate
    for k in params.weights:
        params.weights[k] -= eta * acc_w[k]
    for k in params.biases:
        params.biases[k] -= eta * acc_b[k]
    return params, batch_loss


def train(net: CapsuleNetwork, pairs: Sequence[Pair], config: TrainConfig,
          init_params: Parameters | None = None,
          on_iteration: Callable[[int, float], None] | None = None,
          ) -> tuple[Parameters, list[tuple[int, float]]]:
    """Full-batch gradient descent for `config.max_iter` iterations.

    Parameters are initialized exactly once: from `init_params` when resuming,
    otherwise by the seeded initialization. The history records the batch
    loss of each logged iteration, measured before that iteration's update.
    """
    if not pairs:
        raise MissingTarget("training needs at least one pair")
    params = init_params.copy() if init_params is not None else seeded_init(
        net, config.seed)
    history: list[tuple[int, float]] = []
    for it in range(1, config.max_iter + 1):
        params, batch_loss = train_iteration(net, params, pairs, config)
        if it % config.log_stride == 0 or it == config.max_iter:
            history.append((it, batch_loss))
        if on_iteration is not None:
            on_iteration(it, batch_loss)
    return params, history


def evaluate(net: CapsuleNetwork, pairs: Sequence[Pair],
             params: Parameters | None = None,
             loss_fn: str = "sse") -> dict:
    """Mean loss over pairs plus argmax accuracy for vector outputs."""
    if params is None:
        params = net.parameters()
    outputs = net.parts.outputs
    total = 0.0
    correct = 0
    classified = 0
    for pair in pairs:
        inputs, targets = _normalize_pair(net, pair)
        result = forward(net, inputs, params)
        for vid in outputs:
            y = result.ys[vid]
            t = targets[vid].data
            total += _loss_arr(y, t, loss_fn)
            if y.ndim == 1 and y.shape[0] >= 2:
                classified += 1
                if int(np.argmax(y)) == int(np.argmax(t)):
                    correct += 1
    report = {"pairs": len(pairs), "mean_loss": total / len(pairs)}
    if classified:
        report["accuracy"] = correct / classified
        report["correct"] = correct
        report["classified"] = classified
    return report


# --- the finite-difference oracle ---------------------------------------------------

def finite_diff_check(net: CapsuleNetwork, pair: Pair, eps: float = 1e-6,
                      params: Parameters | None = None, loss_fn: str = "sse",
                      atol: float = 1e-8) -> float:
    """Worst relative error between analytic gradients and central differences.

    Every scalar parameter is perturbed by +/- eps and the loss recomputed
    through the ordinary forward pass; the analytic side comes from one
    backward pass. Differences below `atol` count as zero error (both sides
    vanishing). A network without parameters scores 0.
    """
    if params is None:
        params = net.parameters()
    params = params.copy()
    inputs, targets = _normalize_pair(net, pair)

    def loss_at() -> float:
        result = forward(net, inputs, params)
        return sum(_loss_arr(result.ys[vid], targets[vid].data, loss_fn)
                   for vid in net.parts.outputs)

    result = forward(net, inputs, params)
    back = backward(net, result, targets, loss_fn)

    worst = 0.0

    def probe(store: dict, grads: dict):
        nonlocal worst
        for key, arr in store.items():
            flat = arr.reshape(-1)
            gflat = grads[key].reshape(-1)
            for i in range(flat.size):
                saved = flat[i]
                flat[i] = saved + eps
                lp = loss_at()
                flat[i] = saved - eps
                lm = loss_at()
                flat[i] = saved
                fd = (lp - lm) / (2.0 * eps)
                diff = abs(fd - gflat[i])
                if diff > atol:
                    worst = max(worst, diff / max(abs(fd), abs(gflat[i])))

    probe(params.weights, back.gradients.weights)
    probe(params.biases, back.gradients.biases)
    return worst

"""Dense tensor values and the numeric kernels used by capsules and connections.

Values are immutable, row-major numpy arrays wrapped in :class:`Tensor`.
Rank-1 tensors model vectors, rank-3 tensors model channel-major matrix
arrays (channels x height x width), so flattening a rank-3 tensor in memory
order is exactly the channel-major enumeration the reshaping connection uses.

All kernels are pure; the backward helpers at the bottom operate on raw
ndarrays and are consumed by the backprop module.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Iterable

import numpy as np

from .errors import ShapeMismatch, StrideMismatch, WindowMismatch


class DType(enum.Enum):
    F32 = "float32"
    F64 = "float64"

    @property
    def np(self) -> np.dtype:
        return np.dtype(self.value)

    @classmethod
    def from_name(cls, name: str) -> "DType":
        for d in cls:
            if d.value == name:
                return d
        raise ValueError(f"unknown data type {name!r} (expected float32 or float64)")


@dataclass(frozen=True, eq=False)
class Tensor:
    """Immutable dense array. Construct through :func:`tensor` or :func:`zeros`."""

    data: np.ndarray

    def __post_init__(self):
        self.data.flags.writeable = False

    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def rank(self) -> int:
        return self.data.ndim

    @property
    def size(self) -> int:
        return int(self.data.size)

    @property
    def dtype(self) -> DType:
        return DType.from_name(self.data.dtype.name)

    def tolist(self):
        return self.data.tolist()

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, dtype={self.dtype.value})"


def _wrap(arr: np.ndarray) -> Tensor:
    """Wrap an internally produced array without re-validating finiteness."""
    return Tensor(np.ascontiguousarray(arr))


def tensor(values, dtype: DType = DType.F64) -> Tensor:
    """Build a tensor from nested sequences or an ndarray, validating finiteness.

    Always copies, so the new value never aliases (or freezes) a caller-owned
    array.
    """
    arr = np.array(values, dtype=dtype.np, order="C")
    if not np.all(np.isfinite(arr)):
        raise ValueError("tensor values must be finite (no NaN/Inf)")
    return _wrap(arr)


def zeros(shape: Iterable[int], dtype: DType = DType.F64) -> Tensor:
    return _wrap(np.zeros(tuple(shape), dtype=dtype.np))


def _same_dtype(*tensors: Tensor) -> None:
    kinds = {t.data.dtype for t in tensors}
    if len(kinds) > 1:
        raise ShapeMismatch(f"mixed data types {sorted(k.name for k in kinds)}")


# --- elementwise capsule functions ------------------------------------------

def _relu(x: np.ndarray) -> np.ndarray:
    return np.maximum(x, 0)


def _sigmoid(x: np.ndarray) -> np.ndarray:
    # Split by sign to avoid overflow in exp for large |x|.
    out = np.empty_like(x)
    pos = x >= 0
    out[pos] = 1.0 / (1.0 + np.exp(-x[pos]))
    ex = np.exp(x[~pos])
    out[~pos] = ex / (1.0 + ex)
    return out


_ELEMENTWISE = {
    "relu": _relu,
    "sigmoid": _sigmoid,
    "identity": lambda x: x.copy(),
    "tanh": np.tanh,
}


def elementwise_apply(t: Tensor, func: str) -> Tensor:
    """Apply relu / sigmoid / identity / tanh independently to each element."""
    try:
        f = _ELEMENTWISE[func]
    except KeyError:
        raise ValueError(f"unknown elementwise function {func!r}") from None
    return _wrap(f(t.data))


def _softmax_arr(v: np.ndarray) -> np.ndarray:
    shifted = v - v.max()
    e = np.exp(shifted)
    return e / e.sum()


def softmax(v: Tensor) -> Tensor:
    """Stable softmax of a vector; entries in (0,1) summing to 1."""
    if v.rank != 1:
        raise ShapeMismatch(f"softmax needs a rank-1 tensor, got shape {v.shape}")
    return _wrap(_softmax_arr(v.data))


def _squash_arr(s: np.ndarray) -> np.ndarray:
    n2 = float(np.dot(s, s))
    if n2 == 0.0:
        return np.zeros_like(s)
    n = math.sqrt(n2)
    return (n / (1.0 + n2)) * s  # == (n2/(1+n2)) * (s/n)


def squash(s: Tensor) -> Tensor:
    """Nonlinear squashing: keeps direction, maps norm r to r^2/(1+r^2) < 1.

    The origin is the analytic limit: squash(0) = 0.
    """
    if s.rank != 1:
        raise ShapeMismatch(f"squash needs a rank-1 tensor, got shape {s.shape}")
    return _wrap(_squash_arr(s.data))


# --- weighting operations ----------------------------------------------------

def matmul(w: Tensor, x: Tensor) -> Tensor:
    """Matrix (M x N) times vector (N) -> vector (M)."""
    _same_dtype(w, x)
    if w.rank != 2 or x.rank != 1:
        raise ShapeMismatch(f"matmul needs matrix x vector, got {w.shape} x {x.shape}")
    if w.shape[1] != x.shape[0]:
        raise ShapeMismatch(f"inner dimensions differ: {w.shape[1]} != {x.shape[0]}")
    return _wrap(w.data @ x.data)


def conv2d_output_hw(in_hw: tuple[int, int], kernel_hw: tuple[int, int],
                     stride: int) -> tuple[int, int]:
    """Output height/width of an s-stride valid convolution, checking divisibility."""
    (M, N), (m, n) = in_hw, kernel_hw
    if m > M or n > N:
        raise ShapeMismatch(f"kernel {m}x{n} exceeds input {M}x{N}")
    if (M - m) % stride or (N - n) % stride:
        raise StrideMismatch(
            f"stride {stride} does not divide ({M}-{m}, {N}-{n}) evenly")
    return ((M - m) // stride + 1, (N - n) // stride + 1)


def _conv2d_arr(kernel: np.ndarray, x: np.ndarray, stride: int) -> np.ndarray:
    Ho, Wo = conv2d_output_hw(x.shape, kernel.shape, stride)
    windows = np.lib.stride_tricks.sliding_window_view(x, kernel.shape)
    windows = windows[::stride, ::stride]
    return np.einsum("uv,ijuv->ij", kernel, windows)


def convolve2d(kernel: Tensor, x: Tensor, stride: int = 1) -> Tensor:
    """Single-channel s-stride convolution (cross-correlation indexing).

    c[i,j] = sum_{u,v} kernel[u,v] * x[i*s+u, j*s+v]
    """
    _same_dtype(kernel, x)
    if kernel.rank != 2 or x.rank != 2:
        raise ShapeMismatch("convolve2d needs rank-2 kernel and input")
    if stride < 1:
        raise StrideMismatch(f"stride must be positive, got {stride}")
    return _wrap(_conv2d_arr(kernel.data, x.data, stride))


def conv_output_shape(kernels_shape: tuple[int, ...], in_shape: tuple[int, ...],
                      stride: int) -> tuple[int, int, int]:
    """Shape of a k-kernel channel-summed convolution: (k, H', W')."""
    if len(kernels_shape) != 4:
        raise ShapeMismatch(f"kernel tensor must be rank 4, got {kernels_shape}")
    if len(in_shape) != 3:
        raise ShapeMismatch(f"conv input must be rank 3, got {in_shape}")
    k, d, m, n = kernels_shape
    din, M, N = in_shape
    if d != din:
        raise ShapeMismatch(f"kernel channels {d} != input channels {din}")
    Ho, Wo = conv2d_output_hw((M, N), (m, n), stride)
    return (k, Ho, Wo)


def _conv_connection_arr(kernels: np.ndarray, x: np.ndarray, stride: int) -> np.ndarray:
    k, d, m, n = kernels.shape
    Ho, Wo = conv2d_output_hw(x.shape[1:], (m, n), stride)
    windows = np.lib.stride_tricks.sliding_window_view(x, (m, n), axis=(1, 2))
    windows = windows[:, ::stride, ::stride]          # d, Ho, Wo, m, n
    return np.einsum("cduv,dijuv->cij", kernels, windows)


def conv_connection_apply(kernels: Tensor, x: Tensor, stride: int = 1) -> Tensor:
    """Multi-kernel convolution: output channel i sums convolve2d over input channels."""
    _same_dtype(kernels, x)
    conv_output_shape(kernels.shape, x.shape, stride)
    return _wrap(_conv_connection_arr(kernels.data, x.data, stride))


def pool_output_shape(in_shape: tuple[int, ...],
                      window: tuple[int, int]) -> tuple[int, ...]:
    lam, tau = window
    if lam < 1 or tau < 1:
        raise WindowMismatch(f"window must be positive, got {window}")
    *lead, M, N = in_shape
    if len(in_shape) not in (2, 3):
        raise WindowMismatch(f"max_downsample needs rank 2 or 3, got {in_shape}")
    if M % lam or N % tau:
        raise WindowMismatch(f"window {lam}x{tau} does not divide input {M}x{N}")
    return (*lead, M // lam, N // tau)


def _maxpool_arr(x: np.ndarray, window: tuple[int, int]) -> tuple[np.ndarray, np.ndarray]:
    """Non-overlapping block maxima plus the row-major-first argmax per block."""
    lam, tau = window
    squeeze = x.ndim == 2
    if squeeze:
        x = x[None]
    d, M, N = x.shape
    blocks = (x.reshape(d, M // lam, lam, N // tau, tau)
               .transpose(0, 1, 3, 2, 4)
               .reshape(d, M // lam, N // tau, lam * tau))
    out = blocks.max(axis=-1)
    arg = blocks.argmax(axis=-1)  # first maximum in row-major block order
    if squeeze:
        return out[0], arg[0]
    return out, arg


def _maxpool_route(delta: np.ndarray, arg: np.ndarray, in_shape: tuple[int, ...],
                   window: tuple[int, int]) -> np.ndarray:
    """Scatter each downstream element back to its block's argmax position."""
    lam, tau = window
    squeeze = len(in_shape) == 2
    if squeeze:
        in_shape = (1, *in_shape)
        delta = delta[None]
        arg = arg[None]
    d, M, N = in_shape
    grad = np.zeros((d, M, N), dtype=delta.dtype)
    ci, bi, bj = np.indices(arg.shape)
    rows = bi * lam + arg // tau
    cols = bj * tau + arg % tau
    grad[ci, rows, cols] = delta
    return grad[0] if squeeze else grad


def max_downsample(x: Tensor, window: tuple[int, int]) -> tuple[Tensor, np.ndarray]:
    """Block maxima over non-overlapping lam x tau windows.

    Returns (pooled tensor, argmax positions per block); the positions are the
    row-major-first maxima and are what the backward pass routes through.
    """
    pool_output_shape(x.shape, window)
    out, arg = _maxpool_arr(x.data, window)
    return _wrap(out), arg


def reshape_flatten(x: Tensor) -> Tensor:
    """Flatten a channel-major rank-3 tensor to a vector of length d*M*N.

    Order: for each channel, each row's entries in sequence — which is the
    row-major memory order, so this is pure data movement.
    """
    if x.rank != 3:
        raise ShapeMismatch(f"reshape_flatten needs a rank-3 tensor, got {x.shape}")
    return _wrap(x.data.reshape(-1))


# --- backward kernels (ndarray level) ----------------------------------------

def _conv_connection_grads(kernels: np.ndarray, x: np.ndarray, delta: np.ndarray,
                           stride: int) -> tuple[np.ndarray, np.ndarray]:
    """Gradients of the channel-summed convolution.

    delta has the output shape (k, Ho, Wo). Returns (d_kernels, d_input).
    """
    k, d, m, n = kernels.shape
    windows = np.lib.stride_tricks.sliding_window_view(x, (m, n), axis=(1, 2))
    windows = windows[:, ::stride, ::stride]          # d, Ho, Wo, m, n
    dk = np.einsum("cij,dijuv->cduv", delta, windows)
    dx = np.zeros_like(x)
    Ho, Wo = delta.shape[1:]
    for u in range(m):
        for v in range(n):
            # positions x[:, i*s+u, j*s+v] receive kernels[:, :, u, v]^T . delta
            contrib = np.einsum("cd,cij->dij", kernels[:, :, u, v], delta)
            dx[:, u:u + stride * Ho:stride, v:v + stride * Wo:stride] += contrib
    return dk, dx


def _softmax_vjp(y: np.ndarray, g: np.ndarray) -> np.ndarray:
    """g^T . d softmax / d u given y = softmax(u)."""
    return y * (g - np.dot(g, y))


def _squash_vjp(s: np.ndarray, g: np.ndarray) -> np.ndarray:
    """g^T . d squash / d s; zero at the origin (analytic limit)."""
    n2 = float(np.dot(s, s))
    if n2 == 0.0:
        return np.zeros_like(s)
    n = math.sqrt(n2)
    alpha = n / (1.0 + n2)
    dalpha = (1.0 - n2) / (1.0 + n2) ** 2
    return alpha * g + (dalpha / n) * np.dot(g, s) * s

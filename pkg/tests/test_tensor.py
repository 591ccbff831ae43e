import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from capsforge import tensor as T
from capsforge.errors import ShapeMismatch, StrideMismatch, WindowMismatch


# --- independent oracles ------------------------------------------------------

def conv2d_bruteforce(kernel, x, stride):
    """Direct double loop over the s-stride convolution sum (1-based indexing
    c_ij = sum a_uv * b_{(i-1)s+u, (j-1)s+v} translated to 0-based)."""
    m, n = len(kernel), len(kernel[0])
    M, N = len(x), len(x[0])
    Ho, Wo = (M - m) // stride + 1, (N - n) // stride + 1
    out = [[0.0] * Wo for _ in range(Ho)]
    for i in range(Ho):
        for j in range(Wo):
            acc = 0.0
            for u in range(m):
                for v in range(n):
                    acc += kernel[u][v] * x[i * stride + u][j * stride + v]
            out[i][j] = acc
    return out


def conv_connection_bruteforce(kernels, x, stride):
    """Channel-summed multi-kernel convolution via the per-channel oracle."""
    k = len(kernels)
    d = len(kernels[0])
    outs = []
    for i in range(k):
        acc = None
        for j in range(d):
            c = conv2d_bruteforce(kernels[i][j], x[j], stride)
            if acc is None:
                acc = c
            else:
                acc = [[a + b for a, b in zip(ra, rb)] for ra, rb in zip(acc, c)]
        outs.append(acc)
    return outs


def block_max_bruteforce(x, lam, tau):
    M, N = len(x), len(x[0])
    return [[max(x[bi * lam + u][bj * tau + v] for u in range(lam) for v in range(tau))
             for bj in range(N // tau)] for bi in range(M // lam)]


# --- elementwise --------------------------------------------------------------

def test_relu_definition():
    out = T.elementwise_apply(T.tensor([-1.0, 2.0, 0.0]), "relu")
    assert out.tolist() == [0.0, 2.0, 0.0]


def test_identity_returns_equal_tensor():
    x = T.tensor([[1.0, -2.0], [3.0, 4.5]])
    out = T.elementwise_apply(x, "identity")
    assert out.tolist() == x.tolist()


def test_sigmoid_at_zero():
    assert T.elementwise_apply(T.tensor([0.0]), "sigmoid").tolist() == [0.5]


def test_sigmoid_extreme_inputs_no_overflow():
    out = T.elementwise_apply(T.tensor([-800.0, 800.0]), "sigmoid")
    assert np.all(np.isfinite(out.data))
    assert out.data[0] == pytest.approx(0.0, abs=1e-300)
    assert out.data[1] == pytest.approx(1.0)


# --- softmax --------------------------------------------------------------------

def test_softmax_symmetry():
    assert T.softmax(T.tensor([0.0, 0.0])).tolist() == [0.5, 0.5]


@pytest.mark.parametrize("c", [-7.5, 0.0, 3.25, 1e6])
def test_softmax_shift_invariance(c):
    out = T.softmax(T.tensor([c, c, c]))
    np.testing.assert_allclose(out.data, [1 / 3] * 3, rtol=0, atol=1e-15)


def test_softmax_large_gap_matches_arbitrary_precision():
    import mpmath

    mpmath.mp.dps = 400
    exact = [mpmath.exp(v) for v in (1000, 0)]
    total = sum(exact)
    expected = [float(e / total) for e in exact]
    out = T.softmax(T.tensor([1000.0, 0.0]))
    assert np.all(np.isfinite(out.data))
    np.testing.assert_allclose(out.data, expected, rtol=1e-12, atol=0)


@settings(max_examples=200)
@given(st.lists(st.floats(-50, 50), min_size=1, max_size=9))
def test_softmax_sums_to_one_f64(vals):
    out = T.softmax(T.tensor(vals))
    assert abs(float(out.data.sum()) - 1.0) <= 1e-12
    assert np.all(out.data > 0) and np.all(out.data < 1 + 1e-15)


@given(st.lists(st.floats(-50, 50), min_size=1, max_size=9))
def test_softmax_sums_to_one_f32(vals):
    out = T.softmax(T.tensor(vals, dtype=T.DType.F32))
    assert out.dtype is T.DType.F32
    assert abs(float(out.data.sum()) - 1.0) <= 1e-5


# --- squash ---------------------------------------------------------------------

def test_squash_zero_input():
    assert T.squash(T.tensor([0.0, 0.0, 0.0])).tolist() == [0.0, 0.0, 0.0]


def test_squash_three_four():
    # Independent scalar evaluation: r=5, factor r^2/(1+r^2)=25/26, unit (3/5, 4/5).
    expected = [25 / 26 * 3 / 5, 25 / 26 * 4 / 5]
    out = T.squash(T.tensor([3.0, 4.0]))
    np.testing.assert_allclose(out.data, expected, rtol=1e-15)
    np.testing.assert_allclose(out.data, [0.576923, 0.769231], atol=5e-7)


def test_squash_unit_norm_halves():
    s = np.array([1.0, 2.0, 2.0]) / 3.0  # unit norm
    out = T.squash(T.tensor(s))
    np.testing.assert_allclose(out.data, s / 2, rtol=1e-15)


@settings(max_examples=200)
@given(st.lists(st.floats(-20, 20), min_size=1, max_size=6))
def test_squash_norm_below_one_and_parallel(vals):
    s = T.tensor(vals)
    v = T.squash(s)
    norm_v = float(np.linalg.norm(v.data))
    assert norm_v < 1.0
    # Parallelism: v . s == |v| |s|
    lhs = float(np.dot(v.data, s.data))
    rhs = norm_v * float(np.linalg.norm(s.data))
    assert lhs == pytest.approx(rhs, rel=1e-9, abs=1e-12)


# --- matmul ---------------------------------------------------------------------

def test_matmul_identity():
    w = T.tensor(np.eye(3))
    assert T.matmul(w, T.tensor([1.0, 2.0, 3.0])).tolist() == [1.0, 2.0, 3.0]


def test_matmul_zero_matrix():
    w = T.zeros((2, 4))
    assert T.matmul(w, T.tensor([5.0, 6.0, 7.0, 8.0])).tolist() == [0.0, 0.0]


def test_matmul_hand_evaluated():
    out = T.matmul(T.tensor([[1.0, 2.0], [3.0, 4.0]]), T.tensor([1.0, 1.0]))
    assert out.tolist() == [3.0, 7.0]


def test_matmul_shape_mismatch():
    with pytest.raises(ShapeMismatch):
        T.matmul(T.tensor([[1.0, 2.0]]), T.tensor([1.0, 1.0, 1.0]))


# --- convolve2d -----------------------------------------------------------------

def test_convolve2d_unit_kernel_is_identity():
    x = T.tensor([[1.0, 2.0, 3.0], [4.0, 5.0, 6.0]])
    out = T.convolve2d(T.tensor([[1.0]]), x, stride=1)
    assert out.tolist() == x.tolist()


def test_convolve2d_ones_3x3():
    out = T.convolve2d(T.tensor(np.ones((2, 2))), T.tensor(np.ones((3, 3))), stride=1)
    assert out.tolist() == [[4.0, 4.0], [4.0, 4.0]]


def test_convolve2d_ones_stride2():
    out = T.convolve2d(T.tensor(np.ones((2, 2))), T.tensor(np.ones((4, 4))), stride=2)
    assert out.tolist() == [[4.0, 4.0], [4.0, 4.0]]


def test_convolve2d_matches_bruteforce_random():
    rng = np.random.default_rng(11)
    for _ in range(40):
        m, n = rng.integers(1, 4, size=2)
        s = int(rng.integers(1, 3))
        M = m + s * int(rng.integers(0, 4))
        N = n + s * int(rng.integers(0, 4))
        k = rng.standard_normal((m, n))
        x = rng.standard_normal((M, N))
        out = T.convolve2d(T.tensor(k), T.tensor(x), stride=s)
        np.testing.assert_allclose(
            out.data, conv2d_bruteforce(k.tolist(), x.tolist(), s), rtol=1e-12)


def test_convolve2d_kernel_larger_than_input():
    with pytest.raises(ShapeMismatch):
        T.convolve2d(T.tensor(np.ones((5, 5))), T.tensor(np.ones((3, 3))), 1)


def test_convolve2d_stride_not_dividing():
    with pytest.raises(StrideMismatch):
        T.convolve2d(T.tensor(np.ones((2, 2))), T.tensor(np.ones((5, 5))), 2)


# --- conv connection -------------------------------------------------------------

def test_conv_connection_single_channel_reduces_to_convolve2d():
    rng = np.random.default_rng(3)
    k = rng.standard_normal((1, 1, 2, 2))
    x = rng.standard_normal((1, 4, 4))
    full = T.conv_connection_apply(T.tensor(k), T.tensor(x), 1)
    single = T.convolve2d(T.tensor(k[0, 0]), T.tensor(x[0]), 1)
    np.testing.assert_allclose(full.data[0], single.data, rtol=1e-14)


def test_conv_connection_channel_sum_linearity():
    rng = np.random.default_rng(4)
    kern = rng.standard_normal((1, 1, 2, 2))
    x1 = rng.standard_normal((1, 4, 4))
    k2 = np.concatenate([kern, kern], axis=1)
    x2 = np.concatenate([x1, x1], axis=0)
    doubled = T.conv_connection_apply(T.tensor(k2), T.tensor(x2), 1)
    base = T.conv_connection_apply(T.tensor(kern), T.tensor(x1), 1)
    np.testing.assert_allclose(doubled.data, 2 * base.data, rtol=1e-14)


def test_conv_connection_mnist_front_shape():
    # 32 kernels of 5x5 over a 1x28x28 input at stride 1 -> 32x24x24.
    k = T.zeros((32, 1, 5, 5))
    x = T.zeros((1, 28, 28))
    out = T.conv_connection_apply(k, x, 1)
    assert out.shape == (32, 24, 24)


def test_conv_connection_matches_bruteforce_random():
    rng = np.random.default_rng(12)
    for _ in range(25):
        kn, d = int(rng.integers(1, 3)), int(rng.integers(1, 3))
        m, n = rng.integers(1, 4, size=2)
        s = int(rng.integers(1, 3))
        M = m + s * int(rng.integers(0, 3))
        N = n + s * int(rng.integers(0, 3))
        assert M <= 8 and N <= 8
        k = rng.standard_normal((kn, d, m, n))
        x = rng.standard_normal((d, M, N))
        out = T.conv_connection_apply(T.tensor(k), T.tensor(x), s)
        expected = conv_connection_bruteforce(k.tolist(), x.tolist(), s)
        np.testing.assert_allclose(out.data, expected, rtol=1e-12, atol=1e-12)


def test_conv_connection_channel_mismatch():
    with pytest.raises(ShapeMismatch):
        T.conv_connection_apply(T.zeros((2, 3, 2, 2)), T.zeros((2, 4, 4)), 1)


# --- max downsampling --------------------------------------------------------------

def test_max_downsample_whole_block():
    out, arg = T.max_downsample(T.tensor([[1.0, 2.0], [3.0, 4.0]]), (2, 2))
    assert out.tolist() == [[4.0]]
    assert arg.tolist() == [[3]]


def test_max_downsample_constant():
    out, _ = T.max_downsample(T.tensor(np.full((4, 4), 7.0)), (2, 2))
    assert out.tolist() == [[7.0, 7.0], [7.0, 7.0]]


def test_max_downsample_blocks():
    x = [[1.0, 5.0, 2.0, 0.0],
         [3.0, 4.0, 1.0, 1.0],
         [0.0, 0.0, 9.0, 8.0],
         [0.0, 0.0, 7.0, 6.0]]
    out, _ = T.max_downsample(T.tensor(x), (2, 2))
    assert out.tolist() == block_max_bruteforce(x, 2, 2)
    assert out.tolist() == [[5.0, 2.0], [0.0, 9.0]]


def test_max_downsample_rank3_matches_bruteforce():
    rng = np.random.default_rng(5)
    x = rng.standard_normal((3, 6, 4))
    out, _ = T.max_downsample(T.tensor(x), (3, 2))
    for c in range(3):
        np.testing.assert_array_equal(out.data[c],
                                      block_max_bruteforce(x[c].tolist(), 3, 2))


def test_max_downsample_dominates_source_blocks():
    rng = np.random.default_rng(6)
    x = rng.standard_normal((2, 4, 6))
    out, _ = T.max_downsample(T.tensor(x), (2, 3))
    for c in range(2):
        for bi in range(2):
            for bj in range(2):
                block = x[c, bi * 2:bi * 2 + 2, bj * 3:bj * 3 + 3]
                assert out.data[c, bi, bj] == block.max()
                assert out.data[c, bi, bj] in block


def test_max_downsample_tie_routes_row_major_first():
    x = T.tensor([[2.0, 2.0], [2.0, 2.0]])
    _, arg = T.max_downsample(x, (2, 2))
    assert arg.tolist() == [[0]]


def test_max_downsample_window_mismatch():
    with pytest.raises(WindowMismatch):
        T.max_downsample(T.zeros((3, 3)), (2, 2))


# --- reshape flatten ------------------------------------------------------------

def test_reshape_flatten_row_vector_passthrough():
    x = T.tensor([[[1.0, 2.0, 3.0]]])  # d=1, M=1
    assert T.reshape_flatten(x).tolist() == [1.0, 2.0, 3.0]


def test_reshape_flatten_single_channel():
    x = T.tensor([[[1.0, 2.0], [3.0, 4.0]]])
    assert T.reshape_flatten(x).tolist() == [1.0, 2.0, 3.0, 4.0]


def test_reshape_flatten_channel_major():
    x = T.tensor([[[1.0, 2.0]], [[3.0, 4.0]]])  # d=2, M=1, N=2
    assert T.reshape_flatten(x).tolist() == [1.0, 2.0, 3.0, 4.0]


@given(st.integers(1, 3), st.integers(1, 3), st.integers(1, 3), st.integers(0, 10 ** 6))
def test_reshape_flatten_is_multiset_bijection(d, M, N, seed):
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((d, M, N))
    flat = T.reshape_flatten(T.tensor(x))
    assert flat.shape == (d * M * N,)
    assert sorted(flat.tolist()) == sorted(x.reshape(-1).tolist())


# --- cross-cutting ---------------------------------------------------------------

def test_dtype_preserved_across_ops():
    x32 = T.tensor([1.0, -2.0, 3.0], dtype=T.DType.F32)
    assert T.elementwise_apply(x32, "relu").dtype is T.DType.F32
    assert T.softmax(x32).dtype is T.DType.F32
    assert T.squash(x32).dtype is T.DType.F32
    w32 = T.tensor(np.eye(3), dtype=T.DType.F32)
    assert T.matmul(w32, x32).dtype is T.DType.F32


def test_mixed_dtype_rejected():
    with pytest.raises(ShapeMismatch):
        T.matmul(T.tensor(np.eye(2), dtype=T.DType.F32), T.tensor([1.0, 2.0]))


def test_tensor_rejects_non_finite():
    with pytest.raises(ValueError):
        T.tensor([1.0, float("nan")])
    with pytest.raises(ValueError):
        T.tensor([float("inf")])


def test_tensor_is_immutable():
    x = T.tensor([1.0, 2.0])
    with pytest.raises(ValueError):
        x.data[0] = 5.0

import numpy as np
import pytest

from mcrp.errors import DimensionError
from mcrp.tensor import conv2d, matmul, maxpool2d, relu


def matmul_oracle(a, b):
    """Naive triple loop in float64."""
    m, k = a.shape
    k2, n = b.shape
    out = np.zeros((m, n))
    for i in range(m):
        for j in range(n):
            s = 0.0
            for p in range(k):
                s += float(a[i, p]) * float(b[p, j])
            out[i, j] = s
    return out


def im2col_conv_oracle(x, kernels, stride, padding):
    """im2col + matmul reference, explicit loops for the unrolling."""
    k, c, kh, kw = kernels.shape
    xp = np.pad(np.asarray(x, dtype=np.float64), ((0, 0), (padding, padding), (padding, padding)))
    hh = (x.shape[1] + 2 * padding - kh) // stride + 1
    ww = (x.shape[2] + 2 * padding - kw) // stride + 1
    cols = np.zeros((hh * ww, c * kh * kw))
    for oy in range(hh):
        for ox in range(ww):
            patch = xp[:, oy * stride : oy * stride + kh, ox * stride : ox * stride + kw]
            cols[oy * ww + ox] = patch.reshape(-1)
    flat_k = kernels.reshape(k, -1).astype(np.float64)
    return (cols @ flat_k.T).T.reshape(k, hh, ww)


def pool_oracle(x, window, stride):
    """Exhaustive per-window scan with first-occurrence tie breaking."""
    c, h, w = x.shape
    hh = (h - window) // stride + 1
    ww = (w - window) // stride + 1
    out = np.zeros((c, hh, ww), dtype=x.dtype)
    arg = np.zeros((c, hh, ww), dtype=np.int64)
    for ci in range(c):
        for oy in range(hh):
            for ox in range(ww):
                best, best_idx = None, 0
                for dy in range(window):
                    for dx in range(window):
                        v = x[ci, oy * stride + dy, ox * stride + dx]
                        if best is None or v > best:
                            best, best_idx = v, dy * window + dx
                out[ci, oy, ox] = best
                arg[ci, oy, ox] = best_idx
    return out, arg


class TestMatmul:
    def test_identity(self):
        eye = np.eye(2, dtype=np.float32)
        b = np.array([[3.0], [4.0]], dtype=np.float32)
        np.testing.assert_array_equal(matmul(eye, b), b)

    def test_dot_product(self):
        a = np.array([[1.0, 2.0]])
        b = np.array([[3.0], [4.0]])
        np.testing.assert_array_equal(matmul(a, b), [[11.0]])

    def test_matches_triple_loop(self):
        gen = np.random.default_rng(100)
        a = gen.uniform(-1, 1, (5, 4)).astype(np.float32)
        b = gen.uniform(-1, 1, (4, 3)).astype(np.float32)
        np.testing.assert_allclose(matmul(a, b), matmul_oracle(a, b), rtol=1e-5, atol=1e-6)

    def test_shape_mismatch(self):
        with pytest.raises(DimensionError):
            matmul(np.zeros((2, 3)), np.zeros((2, 3)))

    def test_distributes_over_addition(self):
        gen = np.random.default_rng(101)
        for _ in range(20):
            a = gen.uniform(-1, 1, (4, 5)).astype(np.float32)
            b = gen.uniform(-1, 1, (5, 3)).astype(np.float32)
            c = gen.uniform(-1, 1, (5, 3)).astype(np.float32)
            left = matmul(a, b + c)
            right = matmul(a, b) + matmul(a, c)
            np.testing.assert_allclose(left, right, rtol=1e-5, atol=1e-6)


class TestConv2d:
    def test_scalar_kernel_scales(self):
        x = np.ones((1, 3, 3), dtype=np.float32)
        k = np.full((1, 1, 1, 1), 2.0, dtype=np.float32)
        np.testing.assert_array_equal(conv2d(x, k, 1, 0), np.full((1, 3, 3), 2.0))

    def test_impulse_response(self):
        # cross-correlation convention: a delta reproduces the kernel flipped
        x = np.zeros((1, 5, 5), dtype=np.float32)
        x[0, 2, 2] = 1.0
        k = np.arange(9, dtype=np.float32).reshape(1, 1, 3, 3) / 9.0
        out = conv2d(x, k, 1, 0)
        np.testing.assert_allclose(out[0], k[0, 0, ::-1, ::-1], atol=1e-7)
        # symmetric averaging kernel: imprint equals the kernel either way
        avg = np.full((1, 1, 3, 3), 1.0 / 9.0, dtype=np.float32)
        np.testing.assert_allclose(conv2d(x, avg, 1, 0)[0], avg[0, 0], atol=1e-7)

    def test_matches_im2col_oracle(self):
        gen = np.random.default_rng(102)
        x = gen.uniform(-1, 1, (2, 8, 8)).astype(np.float32)
        k = gen.uniform(-1, 1, (3, 2, 3, 3)).astype(np.float32)
        for stride, padding in [(1, 0), (1, 1)]:
            got = conv2d(x, k, stride, padding)
            want = im2col_conv_oracle(x, k, stride, padding)
            np.testing.assert_allclose(got, want, rtol=1e-5, atol=1e-6)
        x9 = gen.uniform(-1, 1, (2, 9, 9)).astype(np.float32)
        got = conv2d(x9, k, 2, 0)
        want = im2col_conv_oracle(x9, k, 2, 0)
        np.testing.assert_allclose(got, want, rtol=1e-5, atol=1e-6)

    def test_non_integral_output_rejected(self):
        x = np.zeros((1, 5, 5), dtype=np.float32)
        k = np.zeros((1, 1, 2, 2), dtype=np.float32)
        with pytest.raises(DimensionError):
            conv2d(x, k, 2, 0)  # (5-2)/2 not integral

    def test_channel_mismatch_rejected(self):
        with pytest.raises(DimensionError):
            conv2d(np.zeros((2, 4, 4), dtype=np.float32), np.zeros((1, 3, 2, 2), dtype=np.float32), 1, 0)


class TestMaxpool:
    def test_single_window(self):
        x = np.array([[[1.0, 2.0], [3.0, 4.0]]], dtype=np.float32)
        out, arg = maxpool2d(x, 2, 2)
        assert out[0, 0, 0] == 4.0
        assert arg[0, 0, 0] == 3

    def test_tie_breaks_to_first(self):
        x = np.full((1, 4, 4), 0.5, dtype=np.float32)
        out, arg = maxpool2d(x, 2, 2)
        np.testing.assert_array_equal(out, np.full((1, 2, 2), 0.5))
        np.testing.assert_array_equal(arg, np.zeros((1, 2, 2), dtype=np.int64))

    def test_matches_exhaustive_scan(self):
        gen = np.random.default_rng(103)
        x = gen.uniform(-1, 1, (1, 4, 4)).astype(np.float32)
        out, arg = maxpool2d(x, 2, 2)
        want_out, want_arg = pool_oracle(x, 2, 2)
        np.testing.assert_array_equal(out, want_out)
        np.testing.assert_array_equal(arg, want_arg)

    def test_winner_value_matches_input(self):
        gen = np.random.default_rng(104)
        x = gen.uniform(-1, 1, (3, 8, 8)).astype(np.float32)
        out, arg = maxpool2d(x, 2, 2)
        c, hh, ww = out.shape
        for ci in range(c):
            for oy in range(hh):
                for ox in range(ww):
                    idx = arg[ci, oy, ox]
                    y = oy * 2 + idx // 2
                    xx = ox * 2 + idx % 2
                    assert out[ci, oy, ox] == x[ci, y, xx]

    def test_non_divisible_rejected(self):
        with pytest.raises(DimensionError):
            maxpool2d(np.zeros((1, 5, 5), dtype=np.float32), 2, 2)


class TestRelu:
    def test_mixed(self):
        np.testing.assert_array_equal(
            relu(np.array([-1.0, 0.0, 2.0], dtype=np.float32)), [0.0, 0.0, 2.0]
        )

    def test_all_negative(self):
        np.testing.assert_array_equal(relu(np.full((3, 2), -0.5, dtype=np.float32)), np.zeros((3, 2)))

    def test_identity_on_positive(self):
        x = np.abs(np.random.default_rng(105).standard_normal((4, 4))).astype(np.float32) + 0.1
        np.testing.assert_array_equal(relu(x), x)

"""Dense tensor kernels used by the forward and relevance passes.

Tensors are plain numpy arrays: float32, C-contiguous, row-major, with
images stored as [channels, height, width].  All kernels are pure
functions and safe to call concurrently on shared read-only inputs.
"""

from __future__ import annotations

import numpy as np

from .errors import DimensionError

DTYPE = np.float32


def as_tensor(values) -> np.ndarray:
    """Coerce to a C-contiguous float32 array."""
    return np.ascontiguousarray(values, dtype=DTYPE)


def check_finite(t: np.ndarray, context: str) -> None:
    if not np.all(np.isfinite(t)):
        from .errors import NumericalError

        raise NumericalError(f"non-finite values in {context}")


def matmul(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Matrix product of a rank-2 [m,k] with a rank-2 [k,n] tensor."""
    if a.ndim != 2 or b.ndim != 2:
        raise DimensionError(f"matmul expects rank-2 tensors, got {a.shape} x {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise DimensionError(f"matmul inner extents differ: {a.shape} x {b.shape}")
    return np.matmul(as_tensor(a), as_tensor(b))


def conv_output_extent(extent: int, kernel: int, stride: int, padding: int) -> int:
    span = extent + 2 * padding - kernel
    if span < 0 or span % stride != 0:
        raise DimensionError(
            f"convolution window {kernel} stride {stride} padding {padding} "
            f"does not tile extent {extent}"
        )
    return span // stride + 1


def _window_view(x: np.ndarray, kh: int, kw: int, stride: int, padding: int) -> np.ndarray:
    """Strided [C, H', W', kh, kw] view over the zero-padded input."""
    if padding > 0:
        x = np.pad(x, ((0, 0), (padding, padding), (padding, padding)))
    windows = np.lib.stride_tricks.sliding_window_view(x, (kh, kw), axis=(1, 2))
    return windows[:, ::stride, ::stride, :, :]


def conv2d_raw(x: np.ndarray, kernels: np.ndarray, stride: int, padding: int) -> np.ndarray:
    """Cross-correlation without dtype coercion; used internally at float64 too."""
    if x.ndim != 3 or kernels.ndim != 4:
        raise DimensionError(f"conv2d expects [C,H,W] x [K,C,kh,kw], got {x.shape} x {kernels.shape}")
    c, h, w = x.shape
    k, kc, kh, kw = kernels.shape
    if kc != c:
        raise DimensionError(f"conv2d channel mismatch: input {c}, kernels {kc}")
    conv_output_extent(h, kh, stride, padding)
    conv_output_extent(w, kw, stride, padding)
    windows = _window_view(x, kh, kw, stride, padding)
    # [H',W',K] via BLAS, then back to channels-first
    out = np.tensordot(windows, kernels, axes=([0, 3, 4], [1, 2, 3]))
    return np.ascontiguousarray(np.moveaxis(out, 2, 0))


def conv2d(x: np.ndarray, kernels: np.ndarray, stride: int = 1, padding: int = 0) -> np.ndarray:
    """Cross-correlate [C,H,W] with K kernels [K,C,kh,kw], zero padding, no bias."""
    return conv2d_raw(as_tensor(x), as_tensor(kernels), stride, padding)


def conv2d_transpose_raw(
    r: np.ndarray, kernels: np.ndarray, stride: int, padding: int, out_shape: tuple
) -> np.ndarray:
    """Scatter [K,H',W'] values back through the kernels onto the [C,H,W] input grid.

    This is the adjoint of :func:`conv2d_raw`: overlapping window
    contributions are summed at each input position.
    """
    c, h, w = out_shape
    k, kc, kh, kw = kernels.shape
    _, hh, ww = r.shape
    buf = np.zeros((c, h + 2 * padding, w + 2 * padding), dtype=r.dtype)
    for i in range(kh):
        for j in range(kw):
            patch = np.tensordot(kernels[:, :, i, j], r, axes=([0], [0]))  # [C,H',W']
            buf[:, i : i + stride * hh : stride, j : j + stride * ww : stride] += patch
    if padding > 0:
        buf = buf[:, padding : padding + h, padding : padding + w]
    return np.ascontiguousarray(buf)


def maxpool2d(x: np.ndarray, window: int, stride: int) -> tuple[np.ndarray, np.ndarray]:
    """Per-window maximum over [C,H,W] plus the winner index of each window.

    Winner indices are flat positions inside the window (row-major scan);
    ties go to the first occurrence.  They are retained so the relevance
    pass can route each pooled value back to the unit that produced it.
    """
    if x.ndim != 3:
        raise DimensionError(f"maxpool2d expects [C,H,W], got {x.shape}")
    c, h, w = x.shape
    for extent in (h, w):
        if window > extent or (extent - window) % stride != 0:
            raise DimensionError(
                f"pool window {window} stride {stride} does not tile extents {h}x{w}"
            )
    windows = _window_view(as_tensor(x), window, window, stride, 0)
    flat = windows.reshape(*windows.shape[:3], window * window)
    argmax = np.ascontiguousarray(flat.argmax(axis=3))
    out = np.ascontiguousarray(np.take_along_axis(flat, argmax[..., None], axis=3)[..., 0])
    return out, argmax


def relu(x: np.ndarray) -> np.ndarray:
    """Elementwise max(0, v)."""
    return np.maximum(as_tensor(x), DTYPE(0))

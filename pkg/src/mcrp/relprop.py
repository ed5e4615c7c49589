"""Relevance backward pass: positive-weight redistribution layer by layer.

Dense and conv layers redistribute relevance proportionally to each
input's positive contribution:

    R_i = sum_j  x_i * w+_ij / (sum_i' x_i' * w+_i'j + eps) * R_j

Pooling routes each value to the recorded winner, relu and flatten pass
relevance through unchanged, and dropout re-applies the sample's keep
mask.  Columns whose positive pre-activation is zero cannot redistribute
anything; their relevance is dropped and accounted for in a leak report
instead of being silently lost.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import tensor
from .errors import DimensionError, NumericalError
from .model import ForwardTrace, ModelGraph
from .tensor import DTYPE


@dataclass
class RelevanceSeed:
    """Relevance injected at the output layer before the backward pass."""

    mode: str  # "target_class", "predicted_class", or "full_output"
    values: np.ndarray
    target: int | None = None

    @classmethod
    def target_class(cls, logits: np.ndarray, k: int) -> "RelevanceSeed":
        """One-hot seed: the chosen logit, clamped at zero to stay nonnegative."""
        values = np.zeros_like(logits, dtype=DTYPE)
        values[k] = max(float(logits[k]), 0.0)
        return cls(mode="target_class", values=values, target=int(k))

    @classmethod
    def predicted_class(cls, logits: np.ndarray) -> "RelevanceSeed":
        k = int(np.argmax(logits))
        seed = cls.target_class(logits, k)
        return cls(mode="predicted_class", values=seed.values, target=k)

    @classmethod
    def full_output(cls, logits: np.ndarray) -> "RelevanceSeed":
        """Seed every output with its rectified logit."""
        return cls(mode="full_output", values=tensor.relu(logits))


@dataclass
class RelevanceTrace:
    """Relevance at every layer boundary, aligned with the forward activations.

    relevances[i] sits at the input of layer i; relevances[-1] is the seed.
    """

    relevances: list[np.ndarray]
    layer_leaks: list[float]
    sample_index: int = -1

    @property
    def input_relevance(self) -> np.ndarray:
        return self.relevances[0]

    @property
    def total_leak(self) -> float:
        return float(sum(self.layer_leaks))

    def boundary_sums(self) -> list[float]:
        return [float(np.asarray(r, dtype=np.float64).sum()) for r in self.relevances]


def _masked(arr64: np.ndarray, mask, shape) -> np.ndarray:
    if mask is None:
        return arr64
    return arr64 * np.asarray(mask, dtype=np.float64).reshape(shape)


def zplus_dense(
    x: np.ndarray,
    weights: np.ndarray,
    r_out: np.ndarray,
    mask_in: np.ndarray | None = None,
    mask_out: np.ndarray | None = None,
    epsilon: float = 0.0,
) -> tuple[np.ndarray, float]:
    """Positive-weight relevance redistribution through a dense layer.

    x: [in] nonnegative activations feeding the layer; weights: [in,out];
    r_out: [out] nonnegative relevance.  Keep masks, when given, zero
    entire rows/columns of the positive weight matrix.  Returns the input
    relevance [in] and the leaked relevance (dead columns plus the
    epsilon shrink), measured rather than redistributed.
    """
    if x.ndim != 1 or weights.ndim != 2 or x.shape[0] != weights.shape[0]:
        raise DimensionError(f"zplus_dense shapes: x {x.shape}, weights {weights.shape}")
    if r_out.shape != (weights.shape[1],):
        raise DimensionError(f"zplus_dense r_out {r_out.shape} != [{weights.shape[1]}]")
    xm = _masked(np.asarray(x, dtype=np.float64), mask_in, x.shape)
    wp = np.maximum(np.asarray(weights, dtype=np.float64), 0.0)
    r64 = np.asarray(r_out, dtype=np.float64)
    r_eff = _masked(r64, mask_out, r_out.shape)
    z = xm @ wp
    live = z > 0.0
    s = np.zeros_like(z)
    s[live] = r_eff[live] / (z[live] + epsilon)
    r_in = xm * (wp @ s)
    leak = float(r_eff[~live].sum())
    if epsilon > 0.0:
        leak += float((r_eff[live] * (epsilon / (z[live] + epsilon))).sum())
    if mask_out is not None:
        leak += float((r64 - r_eff).sum())
    return r_in.astype(DTYPE), leak


def zplus_conv(
    x: np.ndarray,
    kernels: np.ndarray,
    stride: int,
    padding: int,
    r_out: np.ndarray,
    mask_in: np.ndarray | None = None,
    mask_out: np.ndarray | None = None,
    epsilon: float = 0.0,
) -> tuple[np.ndarray, float]:
    """Positive-weight redistribution through a conv layer.

    Equivalent to :func:`zplus_dense` on the unrolled linear map; the
    scatter through the transposed convolution sums overlapping-window
    contributions back onto each input position.
    """
    xm = _masked(np.asarray(x, dtype=np.float64), mask_in, x.shape)
    wp = np.maximum(np.asarray(kernels, dtype=np.float64), 0.0)
    r64 = np.asarray(r_out, dtype=np.float64)
    r_eff = _masked(r64, mask_out, r_out.shape)
    z = tensor.conv2d_raw(xm, wp, stride, padding)
    if z.shape != r_out.shape:
        raise DimensionError(f"zplus_conv r_out {r_out.shape} != conv output {z.shape}")
    live = z > 0.0
    s = np.zeros_like(z)
    s[live] = r_eff[live] / (z[live] + epsilon)
    r_in = xm * tensor.conv2d_transpose_raw(s, wp, stride, padding, x.shape)
    leak = float(r_eff[~live].sum())
    if epsilon > 0.0:
        leak += float((r_eff[live] * (epsilon / (z[live] + epsilon))).sum())
    if mask_out is not None:
        leak += float((r64 - r_eff).sum())
    return r_in.astype(DTYPE), leak


def relprop_maxpool(
    r_out: np.ndarray,
    argmax_indices: np.ndarray,
    window: int,
    stride: int,
    input_shape: tuple,
) -> np.ndarray:
    """Route each pooled relevance value entirely to its recorded winner."""
    c, h, w = input_shape
    _, hh, ww = r_out.shape
    r_in = np.zeros((c, h, w), dtype=np.float64)
    rows = argmax_indices // window
    cols = argmax_indices % window
    ci, hi, wi = np.meshgrid(np.arange(c), np.arange(hh), np.arange(ww), indexing="ij")
    np.add.at(r_in, (ci, hi * stride + rows, wi * stride + cols), r_out.astype(np.float64))
    return r_in.astype(DTYPE)


def relprop_identitylike(
    kind: str,
    r_out: np.ndarray,
    input_shape: tuple | None = None,
    keep_mask: np.ndarray | None = None,
) -> np.ndarray:
    """Routing for relu (pass-through), flatten (reshape), dropout (re-mask)."""
    if kind == "relu":
        return np.array(r_out, dtype=DTYPE, copy=True)
    if kind == "flatten":
        return np.ascontiguousarray(r_out.reshape(input_shape), dtype=DTYPE)
    if kind == "dropout":
        return np.ascontiguousarray(r_out * keep_mask.reshape(r_out.shape), dtype=DTYPE)
    raise DimensionError(f"no identity-like relevance rule for layer kind {kind!r}")


def relevance_pass(
    model: ModelGraph,
    trace: ForwardTrace,
    seed: RelevanceSeed,
    epsilon: float = 1e-9,
) -> RelevanceTrace:
    """Propagate the seed from the output boundary down to the input.

    The trace must come from the same model and mask.  Dense and conv
    layers use identity keep masks here: the mask already reached them
    through the recorded activations and the dropout routing rule, which
    is algebraically the same as masking the weights.
    """
    activations = trace.activations
    if seed.values.shape != activations[-1].shape:
        raise DimensionError(
            f"seed shape {seed.values.shape} != output shape {activations[-1].shape}"
        )
    n = len(model.layers)
    relevances: list[np.ndarray | None] = [None] * (n + 1)
    relevances[n] = tensor.as_tensor(seed.values)
    layer_leaks = [0.0] * n
    for i in range(n - 1, -1, -1):
        layer = model.layers[i]
        x = activations[i]
        r_out = relevances[i + 1]
        if layer.kind == "dense":
            r_in, leak = zplus_dense(x, layer.weights, r_out, epsilon=epsilon)
            layer_leaks[i] = leak
        elif layer.kind == "conv2d":
            r_in, leak = zplus_conv(
                x, layer.weights, layer.stride, layer.padding, r_out, epsilon=epsilon
            )
            layer_leaks[i] = leak
        elif layer.kind == "maxpool2d":
            r_in = relprop_maxpool(
                r_out, trace.argmax_indices[layer.name], layer.window, layer.stride, x.shape
            )
        elif layer.kind == "relu":
            r_in = relprop_identitylike("relu", r_out)
        elif layer.kind == "flatten":
            r_in = relprop_identitylike("flatten", r_out, input_shape=x.shape)
        elif layer.kind == "dropout":
            r_in = relprop_identitylike("dropout", r_out, keep_mask=trace.mask.keeps[layer.name])
        else:
            raise DimensionError(f"layer {layer.name!r}: unknown kind {layer.kind!r}")
        if np.isnan(r_in).any():
            raise NumericalError(f"NaN relevance below layer {layer.name!r}")
        relevances[i] = r_in
    return RelevanceTrace(
        relevances=relevances,  # type: ignore[arg-type]
        layer_leaks=layer_leaks,
        sample_index=trace.mask.sample_index,
    )

"""Monte Carlo sampling loop and the relevance-distribution estimators.

Runs T stochastic forward+relevance passes under independent dropout
masks, normalizes each per-pixel relevance map, and reduces the sample
set into mean relevance, relevance uncertainty, signal-to-noise, and
confusion maps, plus predictive mean/variance of the raw logits.
"""

from __future__ import annotations

import math
import warnings
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import NumericalError
from .model import ModelGraph, all_ones_mask, forward, predict_deterministic, sample_mask
from .relprop import RelevanceSeed, relevance_pass
from .tensor import DTYPE, as_tensor

SNR_EPSILON = 1e-6
VARIANCE_CLAMP_WARN = -1e-6


@dataclass
class SamplingConfig:
    """Knobs of one sampling run.  Defaults follow the reference protocol:
    100 samples, archive-declared dropout, epsilon stabilizer 1e-9."""

    samples: int = 100
    base_seed: int = 0
    p_keep: float | None = None  # override for every dropout layer
    epsilon: float = 1e-9
    seed_mode: str | int = "predicted_class"  # class index, "predicted_class", "full_output"
    layer_taps: tuple[str, ...] = ()
    normalize_maps: bool = True  # False = raw relevance maps into the estimators
    rescale_activations: bool = False
    snr_epsilon: float = SNR_EPSILON
    threads: int = 1

    def __post_init__(self):
        if self.samples < 1:
            raise ValueError(f"sample count must be >= 1, got {self.samples}")
        if self.epsilon < 0:
            raise ValueError(f"epsilon must be >= 0, got {self.epsilon}")
        if self.p_keep is not None and not 0.0 < self.p_keep <= 1.0:
            raise ValueError(f"keep probability {self.p_keep} outside (0, 1]")
        if self.threads < 1:
            raise ValueError(f"thread count must be >= 1, got {self.threads}")
        if isinstance(self.seed_mode, str) and self.seed_mode not in (
            "predicted_class",
            "full_output",
        ):
            raise ValueError(f"unknown seed mode {self.seed_mode!r}")
        self.layer_taps = tuple(self.layer_taps)


@dataclass
class RelevanceSample:
    """One draw from the relevance distribution."""

    t: int
    pixel_map: np.ndarray  # [H,W], channel-averaged, normalized unless raw mode
    logits: np.ndarray
    taps: dict[str, np.ndarray] = field(default_factory=dict)
    leak: float = 0.0


@dataclass
class UncertaintyMaps:
    """The derived maps over the input grid plus predictive logit statistics."""

    mean: np.ndarray
    variance: np.ndarray
    sigma: np.ndarray
    snr: np.ndarray
    confusion: np.ndarray
    predictive_mean: np.ndarray
    predictive_variance: np.ndarray
    target: int | None = None
    tap_mean: dict[str, np.ndarray] = field(default_factory=dict)
    tap_sigma: dict[str, np.ndarray] = field(default_factory=dict)


def channel_average(r: np.ndarray) -> np.ndarray:
    """Mean over the channel axis of a [C,H,W] relevance map."""
    return np.ascontiguousarray(np.asarray(r).mean(axis=0), dtype=DTYPE)


def normalize(r: np.ndarray) -> np.ndarray:
    """Linear rescale to [0,1]: (R - min) / (max - min).

    A constant map has no ranking information and comes back all-zero
    instead of dividing by zero.
    """
    r = as_tensor(r)
    lo = r.min()
    hi = r.max()
    if hi == lo:
        return np.zeros_like(r)
    return (r - lo) / (hi - lo)


def mean_variance(stack: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Biased one-pass estimators over sample axis 0: E = sum/T, Var = sum(x^2)/T - E^2.

    Sums run through math.fsum so the reduction is exact regardless of
    sample order or worker count; the variance is clamped at zero against
    cancellation residue (clamps past -1e-6 are reported as warnings).
    """
    stack = np.asarray(stack, dtype=np.float64)
    t = stack.shape[0]
    cols = np.ascontiguousarray(stack.reshape(t, -1).T)  # [N, T]
    sums = np.fromiter((math.fsum(col) for col in cols), dtype=np.float64, count=len(cols))
    sqsums = np.fromiter((math.fsum(col * col) for col in cols), dtype=np.float64, count=len(cols))
    mean = sums / t
    var = sqsums / t - mean * mean
    worst = var.min() if var.size else 0.0
    if worst < VARIANCE_CLAMP_WARN:
        warnings.warn(f"variance clamp absorbed {worst:.3e}; estimator cancellation is severe")
    np.maximum(var, 0.0, out=var)
    shape = stack.shape[1:]
    return mean.reshape(shape).astype(DTYPE), var.reshape(shape).astype(DTYPE)


def snr_map(mean: np.ndarray, sigma: np.ndarray, snr_epsilon: float = SNR_EPSILON) -> np.ndarray:
    """Signal-to-noise mean/sigma, stabilized so zero-sigma pixels stay finite."""
    if mean.shape != sigma.shape:
        raise ValueError(f"shape mismatch: mean {mean.shape}, sigma {sigma.shape}")
    return (mean / (sigma + DTYPE(snr_epsilon))).astype(DTYPE)


def confusion_map(mean: np.ndarray, sigma: np.ndarray) -> np.ndarray:
    """Elementwise product mean*sigma: relevant but uncertain features."""
    if mean.shape != sigma.shape:
        raise ValueError(f"shape mismatch: mean {mean.shape}, sigma {sigma.shape}")
    return (mean * sigma).astype(DTYPE)


def predictive_stats(logit_samples) -> tuple[np.ndarray, np.ndarray]:
    """Predictive mean and variance of the stochastic logits."""
    stack = np.stack([np.asarray(v) for v in logit_samples])
    return mean_variance(stack)


def _resolve_seed_builder(config: SamplingConfig, det_logits: np.ndarray):
    """Freeze the explained class once so every sample explains the same decision."""
    if config.seed_mode == "full_output":
        return None, RelevanceSeed.full_output
    if config.seed_mode == "predicted_class":
        target = int(np.argmax(det_logits))
    else:
        target = int(config.seed_mode)
        if not 0 <= target < det_logits.size:
            raise ValueError(f"target class {target} outside 0..{det_logits.size - 1}")
    return target, lambda logits: RelevanceSeed.target_class(logits, target)


def _tap_map(rel_tensor: np.ndarray, do_normalize: bool) -> np.ndarray:
    # Hidden-layer taps collapse channels by summation: total relevance
    # landing on each spatial position of the feature map.
    tap = rel_tensor.sum(axis=0) if rel_tensor.ndim == 3 else rel_tensor
    tap = np.ascontiguousarray(tap, dtype=DTYPE)
    return normalize(tap) if do_normalize else tap


def draw_sample(
    model: ModelGraph,
    image: np.ndarray,
    config: SamplingConfig,
    t: int,
    seed_builder,
) -> RelevanceSample:
    """One stochastic forward+relevance pass; pure given (model, image, config, t)."""
    mask = sample_mask(model, config.base_seed, t, config.p_keep)
    trace = forward(model, image, mask, rescale_activations=config.rescale_activations)
    rel = relevance_pass(model, trace, seed_builder(trace.logits), config.epsilon)
    pixel = channel_average(rel.input_relevance)
    pixel_map = normalize(pixel) if config.normalize_maps else pixel
    taps = {}
    for name in config.layer_taps:
        idx = model.layer_index(name)
        taps[name] = _tap_map(rel.relevances[idx + 1], config.normalize_maps)
    if np.isnan(pixel_map).any() or np.isnan(trace.logits).any():
        raise NumericalError(f"NaN in sample {t}")
    return RelevanceSample(
        t=t, pixel_map=pixel_map, logits=trace.logits.copy(), taps=taps, leak=rel.total_leak
    )


def _check_nonnegative(image: np.ndarray) -> None:
    # the redistribution rule is defined for nonnegative inputs; images are
    # expected in [0,1]
    if image.min() < 0:
        raise ValueError("input tensor must be nonnegative; rescale images to [0,1] first")


def deterministic_relevance_map(
    model: ModelGraph, image: np.ndarray, config: SamplingConfig
) -> np.ndarray:
    """The single-pass map with dropout disabled: the point-estimate baseline."""
    image = as_tensor(image)
    _check_nonnegative(image)
    trace = forward(model, image, all_ones_mask(model))
    _, seed_builder = _resolve_seed_builder(config, trace.logits)
    rel = relevance_pass(model, trace, seed_builder(trace.logits), config.epsilon)
    pixel = channel_average(rel.input_relevance)
    return normalize(pixel) if config.normalize_maps else pixel


def run_mcrp(
    model: ModelGraph, image: np.ndarray, config: SamplingConfig
) -> tuple[list[RelevanceSample], UncertaintyMaps]:
    """Draw T relevance samples and reduce them into uncertainty maps.

    Samples are independent and may run on several threads; the reduction
    is exact summation over the sample index, so results are bit-identical
    for any worker count.
    """
    image = as_tensor(image)
    _check_nonnegative(image)
    det_logits = predict_deterministic(model, image)
    target, seed_builder = _resolve_seed_builder(config, det_logits)

    indices = range(config.samples)
    if config.threads > 1:
        with ThreadPoolExecutor(max_workers=config.threads) as pool:
            samples = list(
                pool.map(lambda t: draw_sample(model, image, config, t, seed_builder), indices)
            )
    else:
        samples = [draw_sample(model, image, config, t, seed_builder) for t in indices]

    mean, variance = mean_variance(np.stack([s.pixel_map for s in samples]))
    sigma = np.sqrt(variance, dtype=DTYPE)
    pred_mean, pred_var = predictive_stats([s.logits for s in samples])
    maps = UncertaintyMaps(
        mean=mean,
        variance=variance,
        sigma=sigma,
        snr=snr_map(mean, sigma, config.snr_epsilon),
        confusion=confusion_map(mean, sigma),
        predictive_mean=pred_mean,
        predictive_variance=pred_var,
        target=target,
    )
    for name in config.layer_taps:
        tap_mean, tap_var = mean_variance(np.stack([s.taps[name] for s in samples]))
        maps.tap_mean[name] = tap_mean
        maps.tap_sigma[name] = np.sqrt(tap_var, dtype=DTYPE)
    return samples, maps

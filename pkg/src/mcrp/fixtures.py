"""Seeded desk-scale models and a demo image.

These networks exist so the engine can be exercised and demonstrated
without any external weights: a 4-layer perceptron, a small conv net
with one dropout layer, an all-positive-weight variant for conservation
runs, and a net with a dead column that provably leaks relevance.

``python -m mcrp.fixtures OUTDIR`` writes the conv-net archive plus a
demo image for trying out the command line.
"""

from __future__ import annotations

import sys
from pathlib import Path

import numpy as np

from . import archive, heatmap_io
from .model import LayerSpec, ModelGraph
from .tensor import DTYPE


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(seed)


def _dense(rng, name, n_in, n_out, scale=None):
    scale = scale if scale is not None else (2.0 / (n_in + n_out)) ** 0.5
    w = (rng.standard_normal((n_in, n_out)) * scale).astype(DTYPE)
    b = (rng.standard_normal(n_out) * 0.05).astype(DTYPE)
    return LayerSpec(name=name, kind="dense", weights=w, bias=b)


def tiny_mlp(seed: int = 7) -> ModelGraph:
    """4-layer perceptron on [1,4,4] inputs: flatten, dense, relu, dense."""
    rng = _rng(seed)
    layers = [
        LayerSpec(name="flatten", kind="flatten"),
        _dense(rng, "fc1", 16, 8),
        LayerSpec(name="relu1", kind="relu"),
        _dense(rng, "fc2", 8, 3),
    ]
    return ModelGraph(layers=layers, input_shape=(1, 4, 4),
                      class_labels=["alpha", "beta", "gamma"])


def tiny_cnn(seed: int = 11, keep_prob: float = 0.5) -> ModelGraph:
    """Small conv net on [3,8,8] inputs with dropout before the last layer."""
    rng = _rng(seed)
    k = (rng.standard_normal((6, 3, 3, 3)) * 0.25).astype(DTYPE)
    kb = (rng.standard_normal(6) * 0.05).astype(DTYPE)
    layers = [
        LayerSpec(name="conv1", kind="conv2d", weights=k, bias=kb, stride=1, padding=1),
        LayerSpec(name="relu1", kind="relu"),
        LayerSpec(name="pool1", kind="maxpool2d", window=2, stride=2),
        LayerSpec(name="flatten", kind="flatten"),
        _dense(rng, "fc1", 96, 32),
        LayerSpec(name="relu2", kind="relu"),
        LayerSpec(name="drop1", kind="dropout", keep_prob=keep_prob),
        _dense(rng, "fc2", 32, 5),
    ]
    labels = [f"class_{i}" for i in range(5)]
    return ModelGraph(layers=layers, input_shape=(3, 8, 8), class_labels=labels)


def allpos_cnn(seed: int = 13) -> ModelGraph:
    """tiny_cnn architecture with all-positive weights: conserves relevance exactly."""
    graph = tiny_cnn(seed)
    layers = []
    for layer in graph.layers:
        w = np.abs(layer.weights) + DTYPE(0.01) if layer.weights is not None else None
        b = np.abs(layer.bias) if layer.bias is not None else None
        layers.append(
            LayerSpec(
                name=layer.name, kind=layer.kind, weights=w, bias=b,
                stride=layer.stride, padding=layer.padding,
                window=layer.window, keep_prob=layer.keep_prob,
            )
        )
    return ModelGraph(layers=layers, input_shape=graph.input_shape,
                      class_labels=graph.class_labels)


def dead_column_mlp() -> ModelGraph:
    """Net whose hidden unit 2 is active (via bias) but has no positive inputs.

    Relevance assigned to that unit cannot be redistributed and must show
    up in the leak report.
    """
    w1 = np.array(
        [
            [0.6, 0.2, -0.5],
            [0.1, 0.4, -0.3],
            [0.3, 0.1, -0.8],
            [0.2, 0.5, -0.2],
        ],
        dtype=DTYPE,
    )
    b1 = np.array([0.0, 0.0, 1.5], dtype=DTYPE)
    w2 = np.array([[0.7, 0.3], [0.2, 0.6], [0.5, 0.4]], dtype=DTYPE)
    b2 = np.zeros(2, dtype=DTYPE)
    layers = [
        LayerSpec(name="flatten", kind="flatten"),
        LayerSpec(name="fc1", kind="dense", weights=w1, bias=b1),
        LayerSpec(name="relu1", kind="relu"),
        LayerSpec(name="fc2", kind="dense", weights=w2, bias=b2),
    ]
    return ModelGraph(layers=layers, input_shape=(1, 2, 2))


def demo_image(shape: tuple = (3, 8, 8), seed: int = 3) -> np.ndarray:
    """Smooth positive test image in [0,1]: a bright blob on a dim gradient."""
    c, h, w = shape
    rng = _rng(seed)
    yy, xx = np.meshgrid(np.linspace(0, 1, h), np.linspace(0, 1, w), indexing="ij")
    cy, cx = rng.uniform(0.3, 0.7, size=2)
    blob = np.exp(-(((yy - cy) ** 2 + (xx - cx) ** 2) / 0.08))
    img = np.stack([0.15 + 0.25 * xx + 0.55 * blob * (0.6 + 0.4 * rng.random()) for _ in range(c)])
    return np.clip(img, 0.0, 1.0).astype(DTYPE)


def write_demo_assets(outdir) -> tuple[Path, Path]:
    """Write the conv-net archive and a demo PNG; returns (model_dir, image_path)."""
    outdir = Path(outdir)
    outdir.mkdir(parents=True, exist_ok=True)
    model_dir = outdir / "tiny-cnn"
    archive.write_archive(tiny_cnn(), model_dir)
    image_path = outdir / "demo.png"
    raster = heatmap_io.RasterImage.from_tensor(demo_image())
    heatmap_io.save_raster(raster, image_path)
    return model_dir, image_path


if __name__ == "__main__":
    target = sys.argv[1] if len(sys.argv) > 1 else "demo-assets"
    model_dir, image_path = write_demo_assets(target)
    print(f"wrote {model_dir} and {image_path}")

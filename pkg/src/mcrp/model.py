"""Layer graph, stochastic forward pass, and dropout mask sampling."""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, field

import numpy as np

from . import archive, tensor
from .errors import ArchiveError, DimensionError
from .tensor import DTYPE


@dataclass
class LayerSpec:
    """One layer of the graph.

    kind is one of dense, conv2d, maxpool2d, relu, flatten, dropout.
    Weight layouts: dense [in, out]; conv2d [K, C, kh, kw]; bias is one
    value per output unit.  stride/padding apply to conv2d, window/stride
    to maxpool2d, keep_prob to dropout.
    """

    name: str
    kind: str
    weights: np.ndarray | None = None
    bias: np.ndarray | None = None
    stride: int = 1
    padding: int = 0
    window: int = 2
    keep_prob: float = 1.0

    def hyperparams(self) -> dict:
        if self.kind == "conv2d":
            return {"stride": self.stride, "padding": self.padding}
        if self.kind == "maxpool2d":
            return {"window": self.window, "stride": self.stride}
        if self.kind == "dropout":
            return {"keep_prob": self.keep_prob}
        return {}

    def param_count(self) -> int:
        n = 0
        if self.weights is not None:
            n += self.weights.size
        if self.bias is not None:
            n += self.bias.size
        return n

    def output_shape(self, in_shape: tuple) -> tuple:
        """Shape produced from ``in_shape``; raises ArchiveError on mismatch."""
        kind = self.kind
        if kind == "dense":
            if self.weights is None or self.weights.ndim != 2:
                raise ArchiveError(f"layer {self.name!r}: dense layer needs [in,out] weights")
            n_in, n_out = self.weights.shape
            if len(in_shape) != 1 or in_shape[0] != n_in:
                raise ArchiveError(
                    f"layer {self.name!r}: dense expects input [{n_in}], got {list(in_shape)}"
                )
            if self.bias is not None and self.bias.shape != (n_out,):
                raise ArchiveError(f"layer {self.name!r}: bias shape {self.bias.shape} != [{n_out}]")
            return (n_out,)
        if kind == "conv2d":
            if self.weights is None or self.weights.ndim != 4:
                raise ArchiveError(f"layer {self.name!r}: conv2d layer needs [K,C,kh,kw] kernels")
            k, c, kh, kw = self.weights.shape
            if len(in_shape) != 3 or in_shape[0] != c:
                raise ArchiveError(
                    f"layer {self.name!r}: conv2d expects {c}-channel image, got {list(in_shape)}"
                )
            if self.bias is not None and self.bias.shape != (k,):
                raise ArchiveError(f"layer {self.name!r}: bias shape {self.bias.shape} != [{k}]")
            try:
                h = tensor.conv_output_extent(in_shape[1], kh, self.stride, self.padding)
                w = tensor.conv_output_extent(in_shape[2], kw, self.stride, self.padding)
            except DimensionError as exc:
                raise ArchiveError(f"layer {self.name!r}: {exc}") from exc
            return (k, h, w)
        if kind == "maxpool2d":
            if len(in_shape) != 3:
                raise ArchiveError(f"layer {self.name!r}: maxpool2d expects [C,H,W] input")
            c, h, w = in_shape
            for extent in (h, w):
                if self.window > extent or (extent - self.window) % self.stride != 0:
                    raise ArchiveError(
                        f"layer {self.name!r}: window {self.window} stride {self.stride} "
                        f"does not tile {h}x{w}"
                    )
            return (c, (h - self.window) // self.stride + 1, (w - self.window) // self.stride + 1)
        if kind == "flatten":
            return (int(np.prod(in_shape)),)
        if kind in ("relu", "dropout"):
            if kind == "dropout" and not 0.0 < self.keep_prob <= 1.0:
                raise ArchiveError(
                    f"layer {self.name!r}: keep_prob {self.keep_prob} outside (0, 1]"
                )
            return tuple(in_shape)
        raise ArchiveError(f"layer {self.name!r}: unknown layer kind {kind!r}")


@dataclass
class ModelGraph:
    """Ordered layer stack; immutable after load."""

    layers: list[LayerSpec]
    input_shape: tuple
    class_labels: list[str] | None = None

    def __post_init__(self):
        self.input_shape = tuple(int(v) for v in self.input_shape)
        self._shapes = [self.input_shape]
        for layer in self.layers:
            self._shapes.append(layer.output_shape(self._shapes[-1]))

    def layer_shapes(self) -> list[tuple]:
        """Activation shapes at every boundary: input, then after each layer."""
        return list(self._shapes)

    def output_shape(self) -> tuple:
        return self._shapes[-1]

    def dropout_layers(self) -> list[LayerSpec]:
        return [l for l in self.layers if l.kind == "dropout"]

    def layer_index(self, name: str) -> int:
        for i, layer in enumerate(self.layers):
            if layer.name == name:
                return i
        raise KeyError(f"no layer named {name!r}")


@dataclass
class DropoutMask:
    """Per-dropout-layer Bernoulli keep vectors for one sample.

    The same mask drives the forward pass and the relevance pass, so a
    dropped unit neither contributes downstream nor receives relevance.
    """

    keeps: dict[str, np.ndarray]
    sample_index: int
    base_seed: int

    def keep_fraction(self) -> float:
        total = sum(v.size for v in self.keeps.values())
        if total == 0:
            return 1.0
        return float(sum(v.sum() for v in self.keeps.values()) / total)


@dataclass
class ForwardTrace:
    """Activations at every layer boundary plus the sampling context."""

    activations: list[np.ndarray]
    mask: DropoutMask
    argmax_indices: dict[str, np.ndarray] = field(default_factory=dict)

    @property
    def logits(self) -> np.ndarray:
        return self.activations[-1]


def load_model(path) -> ModelGraph:
    """Load and validate an MCRP model archive.

    The shape chain is checked eagerly: every layer's declared weights
    must be consistent with the activation shape flowing into it.
    """
    raw = archive.read_archive(path)
    layers = []
    for entry in raw["layers"]:
        hp = entry["hyperparams"]
        layers.append(
            LayerSpec(
                name=entry["name"],
                kind=entry["kind"],
                weights=entry["weights"],
                bias=entry["bias"],
                stride=int(hp.get("stride", 1)),
                padding=int(hp.get("padding", 0)),
                window=int(hp.get("window", 2)),
                keep_prob=float(hp.get("keep_prob", 1.0)),
            )
        )
    return ModelGraph(layers=layers, input_shape=tuple(raw["input_shape"]),
                      class_labels=raw["class_labels"])


def _philox_for(base_seed: int, layer_name: str, t: int) -> np.random.Generator:
    # Counter-based: the key is a stable 128-bit digest of (seed, layer, t),
    # so sample t's mask never depends on how many masks were drawn before it.
    material = f"{base_seed}|{layer_name}|{t}".encode("utf-8")
    digest = hashlib.blake2b(material, digest_size=16).digest()
    key = np.frombuffer(digest, dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def sample_mask(model: ModelGraph, base_seed: int, t: int, p_keep: float | None = None) -> DropoutMask:
    """Draw the dropout mask for sample ``t``.

    Each unit of each dropout layer is kept independently with the
    layer's keep probability (or ``p_keep`` when overridden).  Identical
    (base_seed, t) always regenerate identical masks.
    """
    if t < 0:
        raise ValueError(f"sample index must be >= 0, got {t}")
    if p_keep is not None and not 0.0 < p_keep <= 1.0:
        raise ValueError(f"keep probability {p_keep} outside (0, 1]")
    shapes = model.layer_shapes()
    keeps = {}
    for i, layer in enumerate(model.layers):
        if layer.kind != "dropout":
            continue
        units = int(np.prod(shapes[i]))
        p = layer.keep_prob if p_keep is None else p_keep
        if p >= 1.0:
            keep = np.ones(units, dtype=DTYPE)
        else:
            rng = _philox_for(base_seed, layer.name, t)
            keep = (rng.random(units) < p).astype(DTYPE)
        keeps[layer.name] = keep
    return DropoutMask(keeps=keeps, sample_index=t, base_seed=base_seed)


def all_ones_mask(model: ModelGraph) -> DropoutMask:
    """The deterministic mask: every unit of every dropout layer kept."""
    shapes = model.layer_shapes()
    keeps = {
        layer.name: np.ones(int(np.prod(shapes[i])), dtype=DTYPE)
        for i, layer in enumerate(model.layers)
        if layer.kind == "dropout"
    }
    return DropoutMask(keeps=keeps, sample_index=-1, base_seed=-1)


def forward(
    model: ModelGraph,
    x: np.ndarray,
    mask: DropoutMask,
    rescale_activations: bool = False,
) -> ForwardTrace:
    """Run the stochastic forward pass under ``mask``, recording every activation.

    Dropout multiplies activations by the 0/1 keep vector; no 1/keep_prob
    rescaling is applied unless ``rescale_activations`` is set, since the
    relevance rule is scale-invariant per column and the sampled
    subnetworks are meant to be used as-is.
    """
    x = tensor.as_tensor(x)
    if x.shape != model.input_shape:
        raise DimensionError(
            f"input shape {x.shape} does not match model input {model.input_shape}"
        )
    activations = [x]
    argmax_indices = {}
    for layer in model.layers:
        current = activations[-1]
        kind = layer.kind
        if kind == "dense":
            out = tensor.matmul(current[None, :], layer.weights)[0]
            if layer.bias is not None:
                out = out + layer.bias
        elif kind == "conv2d":
            out = tensor.conv2d(current, layer.weights, layer.stride, layer.padding)
            if layer.bias is not None:
                out = out + layer.bias[:, None, None]
        elif kind == "maxpool2d":
            out, argmax = tensor.maxpool2d(current, layer.window, layer.stride)
            argmax_indices[layer.name] = argmax
        elif kind == "relu":
            out = tensor.relu(current)
        elif kind == "flatten":
            out = current.reshape(-1)
        elif kind == "dropout":
            keep = mask.keeps.get(layer.name)
            if keep is None:
                raise DimensionError(f"mask has no keep vector for dropout layer {layer.name!r}")
            if keep.size != current.size:
                raise DimensionError(
                    f"mask for {layer.name!r} has {keep.size} entries, layer has {current.size}"
                )
            out = current * keep.reshape(current.shape)
            if rescale_activations and layer.keep_prob < 1.0:
                out = out * DTYPE(1.0 / layer.keep_prob)
        else:
            raise DimensionError(f"layer {layer.name!r}: unknown kind {kind!r}")
        activations.append(np.ascontiguousarray(out, dtype=DTYPE))
    return ForwardTrace(activations=activations, mask=mask, argmax_indices=argmax_indices)


def predict_deterministic(model: ModelGraph, x: np.ndarray) -> np.ndarray:
    """Logits with dropout disabled (all units kept, no rescaling)."""
    return forward(model, x, all_ones_mask(model)).logits

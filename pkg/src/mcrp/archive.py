"""Reading and writing the MCRP model archive.

An archive is a directory (or a zip file with the same entries) holding

* ``manifest.json`` -- UTF-8 JSON describing the layer stack, and
* ``weights.bin``   -- all parameter blobs concatenated, little-endian
  IEEE-754 float32, row-major, each manifest entry giving the byte
  offset and length of its blob.

Manifest schema (format_version 1)::

    {
      "format_version": 1,
      "input_shape": [C, H, W],
      "class_labels": ["..."] | null,
      "layers": [
        {
          "name": "fc1",
          "kind": "dense",                  # dense | conv2d | maxpool2d |
                                            # relu | flatten | dropout
          "hyperparams": {...},             # stride/padding, window/stride,
                                            # keep_prob -- as applicable
          "weight_blob": {"offset": 0, "length": 512, "shape": [16, 8]},
          "bias_blob":   {"offset": 512, "length": 32, "shape": [8]}
        },
        ...
      ]
    }
"""

from __future__ import annotations

import json
import zipfile
from pathlib import Path

import numpy as np

from .errors import ArchiveError

FORMAT_VERSION = 1
MANIFEST_NAME = "manifest.json"
WEIGHTS_NAME = "weights.bin"

LAYER_KINDS = ("dense", "conv2d", "maxpool2d", "relu", "flatten", "dropout")


def _read_entries(path: Path) -> tuple[bytes, bytes]:
    if path.is_dir():
        manifest_path = path / MANIFEST_NAME
        weights_path = path / WEIGHTS_NAME
        if not manifest_path.is_file():
            raise ArchiveError(f"archive {path} has no {MANIFEST_NAME}")
        if not weights_path.is_file():
            raise ArchiveError(f"archive {path} has no {WEIGHTS_NAME}")
        return manifest_path.read_bytes(), weights_path.read_bytes()
    if path.is_file() and zipfile.is_zipfile(path):
        with zipfile.ZipFile(path) as zf:
            names = set(zf.namelist())
            for required in (MANIFEST_NAME, WEIGHTS_NAME):
                if required not in names:
                    raise ArchiveError(f"archive {path} has no {required}")
            return zf.read(MANIFEST_NAME), zf.read(WEIGHTS_NAME)
    raise ArchiveError(f"archive not found or unreadable: {path}")


def _blob(weights: bytes, entry: dict, layer_name: str, which: str) -> np.ndarray:
    try:
        offset, length, shape = entry["offset"], entry["length"], entry["shape"]
    except (KeyError, TypeError) as exc:
        raise ArchiveError(f"layer {layer_name!r}: malformed {which} blob entry") from exc
    expected = int(np.prod(shape)) * 4
    if length != expected:
        raise ArchiveError(
            f"layer {layer_name!r}: {which} blob length {length} does not match shape {shape}"
        )
    if offset < 0 or offset + length > len(weights):
        raise ArchiveError(
            f"layer {layer_name!r}: {which} blob [{offset}:{offset + length}] "
            f"exceeds weights.bin ({len(weights)} bytes)"
        )
    flat = np.frombuffer(weights, dtype="<f4", count=length // 4, offset=offset)
    return np.ascontiguousarray(flat.reshape(shape)).astype(np.float32, copy=False)


def read_archive(path) -> dict:
    """Parse an archive into a plain dict with numpy blobs attached.

    Raises :class:`ArchiveError` on bad magic fields, missing entries,
    unknown layer kinds, or blob/manifest inconsistencies; structural
    shape validation is the model loader's job.
    """
    manifest_bytes, weights = _read_entries(Path(path))
    try:
        manifest = json.loads(manifest_bytes.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise ArchiveError(f"{path}: manifest is not valid JSON: {exc}") from exc

    version = manifest.get("format_version")
    if version != FORMAT_VERSION:
        raise ArchiveError(f"{path}: unsupported format_version {version!r}")
    input_shape = manifest.get("input_shape")
    if not isinstance(input_shape, list) or len(input_shape) != 3:
        raise ArchiveError(f"{path}: input_shape must be [C,H,W], got {input_shape!r}")

    layers = []
    for i, raw in enumerate(manifest.get("layers", [])):
        name = raw.get("name") or f"layer{i}"
        kind = raw.get("kind")
        if kind not in LAYER_KINDS:
            raise ArchiveError(f"layer {name!r}: unknown layer kind {kind!r}")
        layer = {
            "name": name,
            "kind": kind,
            "hyperparams": raw.get("hyperparams", {}),
            "weights": None,
            "bias": None,
        }
        if raw.get("weight_blob") is not None:
            layer["weights"] = _blob(weights, raw["weight_blob"], name, "weight")
        if raw.get("bias_blob") is not None:
            layer["bias"] = _blob(weights, raw["bias_blob"], name, "bias")
        layers.append(layer)

    return {
        "input_shape": [int(v) for v in input_shape],
        "class_labels": manifest.get("class_labels"),
        "layers": layers,
    }


def write_archive(model, path) -> None:
    """Serialize a ModelGraph to ``path`` (directory, or zip if it ends in .zip)."""
    path = Path(path)
    blobs = bytearray()
    layer_entries = []
    for layer in model.layers:
        entry: dict = {"name": layer.name, "kind": layer.kind, "hyperparams": layer.hyperparams()}
        for which, tensor in (("weight_blob", layer.weights), ("bias_blob", layer.bias)):
            if tensor is None:
                continue
            raw = np.ascontiguousarray(tensor, dtype="<f4").tobytes()
            entry[which] = {"offset": len(blobs), "length": len(raw), "shape": list(tensor.shape)}
            blobs.extend(raw)
        layer_entries.append(entry)

    manifest = {
        "format_version": FORMAT_VERSION,
        "input_shape": list(model.input_shape),
        "class_labels": model.class_labels,
        "layers": layer_entries,
    }
    manifest_bytes = json.dumps(manifest, indent=2).encode("utf-8")

    if path.suffix == ".zip":
        path.parent.mkdir(parents=True, exist_ok=True)
        with zipfile.ZipFile(path, "w", compression=zipfile.ZIP_STORED) as zf:
            zf.writestr(MANIFEST_NAME, manifest_bytes)
            zf.writestr(WEIGHTS_NAME, bytes(blobs))
    else:
        path.mkdir(parents=True, exist_ok=True)
        (path / MANIFEST_NAME).write_bytes(manifest_bytes)
        (path / WEIGHTS_NAME).write_bytes(bytes(blobs))

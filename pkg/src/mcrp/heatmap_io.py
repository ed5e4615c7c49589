"""Image ingestion, heatmap rendering, and the MCRT raw-tensor dump format.

Rendering composites a colormapped relevance map over a grayscale copy
of the original image, byte-for-byte deterministically.  Display
renormalization here is independent of the sampling module's map
normalization: sigma or confusion maps are rescaled for the ramp only,
while the raw values always survive in the tensor dumps.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image, UnidentifiedImageError

from .errors import DimensionError, DumpFormatError, ImageIOError
from .tensor import DTYPE, as_tensor

MCRT_MAGIC = b"MCRT"
MCRT_VERSION = 1

SUPPORTED_FORMATS = {"PNG", "PPM"}  # Pillow reports PGM/PBM under "PPM"


@dataclass
class RasterImage:
    """8-bit RGB raster, row-major."""

    width: int
    height: int
    pixels: np.ndarray  # uint8 [H, W, 3]

    @classmethod
    def from_array(cls, pixels: np.ndarray) -> "RasterImage":
        pixels = np.ascontiguousarray(pixels, dtype=np.uint8)
        if pixels.ndim != 3 or pixels.shape[2] != 3:
            raise DimensionError(f"raster expects [H,W,3] uint8, got {pixels.shape}")
        return cls(width=pixels.shape[1], height=pixels.shape[0], pixels=pixels)

    @classmethod
    def from_tensor(cls, t: np.ndarray) -> "RasterImage":
        """Quantize a [3,H,W] or [1,H,W] float image in [0,1] to 8-bit RGB."""
        arr = np.clip(np.asarray(t, dtype=np.float64), 0.0, 1.0)
        if arr.ndim == 3 and arr.shape[0] == 1:
            arr = np.repeat(arr, 3, axis=0)
        return cls.from_array(np.rint(arr * 255.0).astype(np.uint8).transpose(1, 2, 0))


@dataclass
class RenderSpec:
    """How a map is composited: ramp, blend alpha, background, display gamma."""

    colormap: str = "blackbody"
    overlay_alpha: float = 0.85
    background: str = "grayscale"  # or "none"
    gamma: float = 1.0

    def __post_init__(self):
        if not 0.0 <= self.overlay_alpha <= 1.0:
            raise ValueError(f"overlay alpha {self.overlay_alpha} outside [0,1]")
        if self.gamma <= 0.0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.background not in ("grayscale", "none"):
            raise ValueError(f"unknown background {self.background!r}")
        if self.colormap not in COLORMAP_STOPS:
            raise ValueError(
                f"unknown colormap {self.colormap!r}; available: {sorted(COLORMAP_STOPS)}"
            )


# Piecewise-linear ramp control points, (position, (r, g, b)).
COLORMAP_STOPS = {
    "blackbody": [
        (0.00, (0, 0, 0)),
        (0.35, (170, 0, 0)),
        (0.70, (255, 160, 0)),
        (1.00, (255, 255, 255)),
    ],
    "gray": [(0.0, (0, 0, 0)), (1.0, (255, 255, 255))],
    "ice": [
        (0.00, (0, 0, 0)),
        (0.40, (0, 60, 170)),
        (0.75, (0, 180, 220)),
        (1.00, (255, 255, 255)),
    ],
}


def colormap_ramp(name: str) -> np.ndarray:
    """256-entry uint8 RGB lookup table for a named ramp."""
    stops = COLORMAP_STOPS[name]
    positions = np.array([p for p, _ in stops])
    colors = np.array([c for _, c in stops], dtype=np.float64)
    xs = np.linspace(0.0, 1.0, 256)
    ramp = np.stack([np.interp(xs, positions, colors[:, i]) for i in range(3)], axis=1)
    return np.rint(ramp).astype(np.uint8)


def bilinear_resize(t: np.ndarray, out_h: int, out_w: int) -> np.ndarray:
    """Bilinear resample of a [C,H,W] float tensor (half-pixel centers, edge clamp)."""
    c, h, w = t.shape
    if (h, w) == (out_h, out_w):
        return as_tensor(t)
    src = np.asarray(t, dtype=np.float64)

    def axis_coords(n_out, n_in):
        centers = (np.arange(n_out) + 0.5) * (n_in / n_out) - 0.5
        lo = np.floor(centers).astype(int)
        frac = centers - lo
        return np.clip(lo, 0, n_in - 1), np.clip(lo + 1, 0, n_in - 1), frac

    y0, y1, fy = axis_coords(out_h, h)
    x0, x1, fx = axis_coords(out_w, w)
    top = src[:, y0][:, :, x0] * (1 - fx) + src[:, y0][:, :, x1] * fx
    bottom = src[:, y1][:, :, x0] * (1 - fx) + src[:, y1][:, :, x1] * fx
    out = top * (1 - fy)[:, None] + bottom * fy[:, None]
    return out.astype(DTYPE)


def load_image(path, size: tuple[int, int] | None = None) -> np.ndarray:
    """Read an 8-bit PNG or PPM/PGM into a [3,H,W] float tensor in [0,1].

    Grayscale images are replicated to three channels.  ``size`` = (H, W)
    resamples bilinearly to the model's input grid.
    """
    try:
        with Image.open(path) as im:
            fmt = im.format
            if fmt not in SUPPORTED_FORMATS:
                raise ImageIOError(f"{path}: unsupported image format {fmt!r} (PNG/PPM/PGM only)")
            rgb = im.convert("RGB")
            arr = np.asarray(rgb, dtype=np.uint8)
    except (FileNotFoundError, UnidentifiedImageError, OSError) as exc:
        raise ImageIOError(f"cannot read image {path}: {exc}") from exc
    t = (arr.astype(DTYPE) / DTYPE(255.0)).transpose(2, 0, 1)
    if size is not None:
        t = bilinear_resize(t, size[0], size[1])
    return np.ascontiguousarray(t)


def _display_range(map2d: np.ndarray) -> np.ndarray:
    v = np.asarray(map2d, dtype=np.float64)
    lo, hi = v.min(), v.max()
    if lo < 0.0 or hi > 1.0:
        v = np.zeros_like(v) if hi == lo else (v - lo) / (hi - lo)
    return v


def render_heatmap(map2d: np.ndarray, original: RasterImage, spec: RenderSpec) -> RasterImage:
    """Colormap a [H,W] map and alpha-blend it over the grayscale original."""
    map2d = np.asarray(map2d)
    if not np.all(np.isfinite(map2d)):
        raise DimensionError("relevance map contains non-finite values")
    if map2d.shape != (original.height, original.width):
        raise DimensionError(
            f"map {map2d.shape} does not match image {original.height}x{original.width}"
        )
    v = _display_range(map2d)
    if spec.gamma != 1.0:
        v = v**spec.gamma
    ramp = colormap_ramp(spec.colormap)
    indices = np.rint(v * 255.0).astype(np.int64)
    overlay = ramp[indices].astype(np.float64)
    if spec.background == "grayscale":
        rgbf = original.pixels.astype(np.float64)
        gray = 0.299 * rgbf[:, :, 0] + 0.587 * rgbf[:, :, 1] + 0.114 * rgbf[:, :, 2]
        background = np.repeat(gray[:, :, None], 3, axis=2)
    else:
        background = np.zeros_like(overlay)
    blended = (1.0 - spec.overlay_alpha) * background + spec.overlay_alpha * overlay
    return RasterImage.from_array(np.rint(np.clip(blended, 0.0, 255.0)).astype(np.uint8))


def save_raster(raster: RasterImage, path) -> None:
    """Write a raster as PNG or PPM depending on the suffix."""
    path = Path(path)
    if path.suffix.lower() == ".ppm":
        header = f"P6\n{raster.width} {raster.height}\n255\n".encode("ascii")
        path.write_bytes(header + raster.pixels.tobytes())
        return
    Image.fromarray(raster.pixels, mode="RGB").save(path, format="PNG")


def write_tensor_dump(t: np.ndarray, path) -> None:
    """Write an MCRT dump: magic, version byte, rank and extents as
    little-endian uint32, then float32 values row-major."""
    if np.asarray(t).ndim == 0:
        raise DumpFormatError("rank-0 tensors cannot be dumped")
    t = as_tensor(t)
    header = MCRT_MAGIC + struct.pack("<B", MCRT_VERSION) + struct.pack("<I", t.ndim)
    header += struct.pack(f"<{t.ndim}I", *t.shape)
    Path(path).write_bytes(header + t.astype("<f4").tobytes())


def read_tensor_dump(path) -> np.ndarray:
    """Read an MCRT dump back into a float32 tensor; strict about truncation."""
    try:
        raw = Path(path).read_bytes()
    except OSError as exc:
        raise DumpFormatError(f"cannot read tensor dump {path}: {exc}") from exc
    if len(raw) < 9 or raw[:4] != MCRT_MAGIC:
        raise DumpFormatError(f"{path}: not an MCRT tensor dump (bad magic)")
    version = raw[4]
    if version != MCRT_VERSION:
        raise DumpFormatError(f"{path}: unsupported MCRT version {version}")
    (rank,) = struct.unpack_from("<I", raw, 5)
    if rank == 0:
        raise DumpFormatError(f"{path}: rank-0 tensor dumps are forbidden")
    header_len = 9 + 4 * rank
    if len(raw) < header_len:
        raise DumpFormatError(f"{path}: truncated extent table")
    shape = struct.unpack_from(f"<{rank}I", raw, 9)
    if any(extent == 0 for extent in shape):
        raise DumpFormatError(f"{path}: zero extent in shape {shape}")
    count = int(np.prod(shape))
    expected = header_len + 4 * count
    if len(raw) != expected:
        raise DumpFormatError(f"{path}: expected {expected} bytes for shape {shape}, got {len(raw)}")
    values = np.frombuffer(raw, dtype="<f4", count=count, offset=header_len)
    return np.ascontiguousarray(values.reshape(shape)).astype(DTYPE, copy=False)

"""Relevance-distribution engine: dropout-sampled relevance propagation
with per-pixel mean, uncertainty, signal-to-noise, and confusion maps."""

__version__ = "0.1.0"

from .errors import (
    ArchiveError,
    DimensionError,
    DumpFormatError,
    ImageIOError,
    McrpError,
    NumericalError,
)
from .model import (
    DropoutMask,
    ForwardTrace,
    LayerSpec,
    ModelGraph,
    all_ones_mask,
    forward,
    load_model,
    predict_deterministic,
    sample_mask,
)
from .relprop import (
    RelevanceSeed,
    RelevanceTrace,
    relevance_pass,
    relprop_identitylike,
    relprop_maxpool,
    zplus_conv,
    zplus_dense,
)
from .sampling import (
    RelevanceSample,
    SamplingConfig,
    UncertaintyMaps,
    channel_average,
    confusion_map,
    deterministic_relevance_map,
    mean_variance,
    normalize,
    predictive_stats,
    run_mcrp,
    snr_map,
)
from .heatmap_io import (
    RasterImage,
    RenderSpec,
    bilinear_resize,
    colormap_ramp,
    load_image,
    read_tensor_dump,
    render_heatmap,
    save_raster,
    write_tensor_dump,
)
from .archive import read_archive, write_archive

__all__ = [
    "ArchiveError",
    "DimensionError",
    "DropoutMask",
    "DumpFormatError",
    "ForwardTrace",
    "ImageIOError",
    "LayerSpec",
    "McrpError",
    "ModelGraph",
    "NumericalError",
    "RasterImage",
    "RelevanceSample",
    "RelevanceSeed",
    "RelevanceTrace",
    "RenderSpec",
    "SamplingConfig",
    "UncertaintyMaps",
    "all_ones_mask",
    "bilinear_resize",
    "channel_average",
    "colormap_ramp",
    "confusion_map",
    "deterministic_relevance_map",
    "forward",
    "load_image",
    "load_model",
    "mean_variance",
    "normalize",
    "predict_deterministic",
    "predictive_stats",
    "read_archive",
    "read_tensor_dump",
    "relevance_pass",
    "relprop_identitylike",
    "relprop_maxpool",
    "render_heatmap",
    "run_mcrp",
    "sample_mask",
    "save_raster",
    "snr_map",
    "write_archive",
    "write_tensor_dump",
    "zplus_conv",
    "zplus_dense",
]

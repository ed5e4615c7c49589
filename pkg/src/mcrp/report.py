"""Optional run report: a matplotlib panel figure plus a CSV summary."""

from __future__ import annotations

import csv
from pathlib import Path

import numpy as np


def save_report_figure(path, panels: list[tuple[str, np.ndarray]]) -> None:
    """Render labeled rasters side by side to an image file."""
    import matplotlib

    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    fig, axes = plt.subplots(1, len(panels), figsize=(2.6 * len(panels), 3.0))
    if len(panels) == 1:
        axes = [axes]
    for ax, (title, pixels) in zip(axes, panels):
        ax.imshow(pixels)
        ax.set_title(title, fontsize=10)
        ax.set_axis_off()
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def save_summary_csv(path, maps, samples, class_labels=None) -> None:
    """Per-map statistics and predictive logit moments, one row per entry."""
    rows = [("entry", "statistic", "value")]
    for name in ("mean", "sigma", "snr", "confusion"):
        grid = getattr(maps, name)
        rows.append((name, "min", f"{float(grid.min()):.8g}"))
        rows.append((name, "max", f"{float(grid.max()):.8g}"))
        rows.append((name, "mean", f"{float(grid.mean()):.8g}"))
    for k in range(maps.predictive_mean.size):
        label = class_labels[k] if class_labels else f"class_{k}"
        rows.append((f"logit[{label}]", "predictive_mean", f"{float(maps.predictive_mean[k]):.8g}"))
        rows.append(
            (f"logit[{label}]", "predictive_variance", f"{float(maps.predictive_variance[k]):.8g}")
        )
    leaks = [s.leak for s in samples]
    rows.append(("leak", "total", f"{float(np.sum(leaks)):.8g}"))
    rows.append(("leak", "mean_per_sample", f"{float(np.mean(leaks)):.8g}"))
    rows.append(("leak", "max", f"{float(np.max(leaks)):.8g}"))
    with open(Path(path), "w", newline="") as fh:
        csv.writer(fh).writerows(rows)

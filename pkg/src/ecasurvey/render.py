"""PNG rendering of quantile-classed ECa maps and their histograms."""

from __future__ import annotations

import io
from typing import Sequence

import numpy as np
from PIL import Image, ImageDraw

from .geocore import Raster
from .geostat.maps import classify, histogram, quantile_classes

# low ECa (dry) to high ECa (wet)
DEFAULT_PALETTE = (
    (215, 48, 39),
    (252, 141, 89),
    (254, 224, 144),
    (145, 191, 219),
    (69, 117, 180),
)


def _palette(n: int, base: Sequence[tuple[int, int, int]]) -> np.ndarray:
    base = np.asarray(base, dtype=float)
    if n == len(base):
        return base.astype(np.uint8)
    pos = np.linspace(0, len(base) - 1, n)
    out = np.column_stack([np.interp(pos, np.arange(len(base)), base[:, k]) for k in range(3)])
    return np.round(out).astype(np.uint8)


def _png(img: Image.Image) -> bytes:
    buf = io.BytesIO()
    img.save(buf, format="PNG", optimize=False, compress_level=6)
    return buf.getvalue()


def render_map(
    r: Raster,
    n_classes: int = 5,
    palette: Sequence[tuple[int, int, int]] = DEFAULT_PALETTE,
    scale: int = 8,
) -> bytes:
    """One ``scale`` x ``scale`` block per cell, north up; missing cells transparent.

    A raster with a single valid cell is drawn in the first class color;
    anything else must support ``n_classes`` distinct quantile breaks.
    """
    colors = _palette(n_classes, palette)
    vals = r.values[::-1]
    valid = ~np.isnan(vals)
    if valid.sum() == 1:
        cls = np.zeros(vals.shape, dtype=int)
    else:
        breaks = quantile_classes(r, n_classes)
        cls = classify(np.where(valid, vals, 0.0), breaks)
    rgba = np.zeros(vals.shape + (4,), dtype=np.uint8)
    rgba[..., :3] = colors[cls]
    rgba[..., 3] = np.where(valid, 255, 0)
    rgba = np.repeat(np.repeat(rgba, scale, axis=0), scale, axis=1)
    return _png(Image.fromarray(rgba, "RGBA"))


def render_legend(
    r: Raster,
    n_classes: int = 5,
    palette: Sequence[tuple[int, int, int]] = DEFAULT_PALETTE,
    n_bins: int = 20,
) -> bytes:
    """Class swatches with break labels above a histogram of cell values."""
    breaks = quantile_classes(r, n_classes)
    colors = _palette(n_classes, palette)
    counts, edges = histogram(r, n_bins)
    v = r.valid_values()
    lo = np.concatenate([[v.min()], breaks])
    hi = np.concatenate([breaks, [v.max()]])

    w, row_h, hist_h = 240, 16, 120
    h = 8 + n_classes * row_h + 8 + hist_h + 8
    img = Image.new("RGB", (w, h), (255, 255, 255))
    d = ImageDraw.Draw(img)
    for k in range(n_classes):
        y = 8 + k * row_h
        d.rectangle([8, y, 28, y + row_h - 4], fill=tuple(int(c) for c in colors[k]))
        d.text((36, y), f"{lo[k]:.2f} - {hi[k]:.2f} mS/m", fill=(0, 0, 0))
    top = 8 + n_classes * row_h + 8
    bar_w = (w - 16) / n_bins
    peak = max(int(counts.max()), 1)
    centers = 0.5 * (edges[:-1] + edges[1:])
    bin_cls = classify(centers, breaks)
    for i, c in enumerate(counts):
        bh = int(round((hist_h - 4) * c / peak))
        x0 = 8 + i * bar_w
        d.rectangle([round(x0), top + hist_h - bh, round(x0 + bar_w) - 1, top + hist_h],
                    fill=tuple(int(x) for x in colors[bin_cls[i]]), outline=(60, 60, 60))
    return _png(img)

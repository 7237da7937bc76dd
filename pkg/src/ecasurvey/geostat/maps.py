"""Raster summaries: moments, map correlation, quantile classes, histograms."""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from ..geocore import Raster


class EmptyRasterError(ValueError):
    pass


class ShapeError(ValueError):
    pass


class UndefinedCorrelationError(ValueError):
    pass


class ClassingError(ValueError):
    pass


@dataclass
class RasterStats:
    mean: float
    sd: float
    min: float
    max: float
    n_cells: int

    def to_dict(self) -> dict:
        return asdict(self)


def _valid(r: Raster) -> np.ndarray:
    v = r.valid_values()
    if v.size == 0:
        raise EmptyRasterError("raster has no valid cells")
    return v


def raster_stats(r: Raster) -> RasterStats:
    v = _valid(r)
    sd = float(v.std(ddof=1)) if v.size > 1 else 0.0
    return RasterStats(float(v.mean()), sd, float(v.min()), float(v.max()), int(v.size))


def raster_pearson(a: Raster, b: Raster) -> float:
    """Cell-by-cell Pearson r over cells valid in both rasters."""
    if a.spec != b.spec:
        raise ShapeError("rasters are on different grids")
    both = a.valid & b.valid
    if both.sum() < 2:
        raise UndefinedCorrelationError("fewer than two shared valid cells")
    x = a.values[both] - a.values[both].mean()
    y = b.values[both] - b.values[both].mean()
    sxx, syy = float(x @ x), float(y @ y)
    if sxx == 0 or syy == 0:
        raise UndefinedCorrelationError("a raster is constant over the shared cells")
    return float(np.clip((x @ y) / np.sqrt(sxx * syy), -1.0, 1.0))


def quantile_classes(r: Raster, n_classes: int = 5) -> np.ndarray:
    """Class breaks at the k/n quantiles (linear interpolation), k = 1..n-1."""
    if n_classes < 2:
        raise ClassingError("need at least two classes")
    v = r.valid_values()
    if v.size < n_classes:
        raise ClassingError(f"{v.size} valid cells for {n_classes} classes")
    breaks = np.quantile(v, np.arange(1, n_classes) / n_classes)
    if np.any(np.diff(breaks) <= 0) or breaks[0] <= v.min() and breaks[-1] >= v.max():
        raise ClassingError("values too repetitive for distinct quantile breaks")
    return breaks


def classify(values: np.ndarray, breaks: np.ndarray) -> np.ndarray:
    """Class index per value; class k holds (breaks[k-1], breaks[k]]."""
    return np.searchsorted(breaks, values, side="left")


def histogram(r: Raster, n_bins: int = 20) -> tuple[np.ndarray, np.ndarray]:
    """Equal-width counts over [min, max], last bin closed; returns (counts, edges)."""
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    v = _valid(r)
    counts, edges = np.histogram(v, bins=n_bins, range=(float(v.min()), float(v.max())))
    return counts, edges

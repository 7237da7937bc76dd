"""Serpentine (boustrophedon) coverage plans."""

from __future__ import annotations

import math

import numpy as np


def plan_serpentine(
    bounds: tuple[float, float, float, float],
    row_spacing_m: float,
    margin_m: float = 1.0,
) -> np.ndarray:
    """Waypoints for back-and-forth rows along the long axis of ``bounds``.

    ``bounds`` is ``(xmin, ymin, xmax, ymax)``. Rows are evenly spread over
    the inset extent; a row spacing wider than the extent yields one row
    through the middle. Returns an (n, 2) array, two waypoints per row.
    """
    xmin, ymin, xmax, ymax = bounds
    if not row_spacing_m > 0:
        raise ValueError("row spacing must be positive")
    x0, x1 = xmin + margin_m, xmax - margin_m
    y0, y1 = ymin + margin_m, ymax - margin_m
    if not (x1 > x0 and y1 >= y0):
        raise ValueError("margin leaves no room for a row")
    along_x = (x1 - x0) >= (y1 - y0)
    if not along_x:
        x0, x1, y0, y1 = y0, y1, x0, x1
    width = y1 - y0
    n_rows = int(math.floor(width / row_spacing_m + 1e-9)) + 1
    if n_rows == 1:
        offsets = [0.5 * (y0 + y1)]
    else:
        offsets = list(np.linspace(y0, y1, n_rows))
    pts = []
    for i, c in enumerate(offsets):
        a, b = (x0, x1) if i % 2 == 0 else (x1, x0)
        pts += [(a, c), (b, c)]
    wp = np.array(pts, dtype=float)
    return wp if along_x else wp[:, ::-1].copy()

"""Synthetic ECa ground truth drawn from a Gaussian random field."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cholesky, LinAlgError
from scipy.spatial.distance import cdist

from ..geocore import GridSpec
from ..geostat.variogram import VariogramModel

MAX_DENSE_CELLS = 10_000
JITTER_STEPS = (0.0, 1e-12, 1e-10, 1e-8)


class GenerationError(RuntimeError):
    pass


@dataclass(frozen=True, eq=False)
class FieldTruth:
    grid: GridSpec
    values: np.ndarray  # (n_rows, n_cols), row 0 south
    model: VariogramModel
    field_mean: float
    seed: int

    def sample(self, x: float, y: float) -> tuple[float, bool]:
        """Bilinear interpolation between cell centers.

        Positions outside the grid are clamped to the nearest edge and
        reported with ``clamped=True``; positions inside the outer half-cell
        band are held at the edge value without a flag.
        """
        g = self.grid
        inside = g.origin.x_m <= x <= g.x_max and g.origin.y_m <= y <= g.y_max
        fx = (x - g.origin.x_m) / g.cell_size_m - 0.5
        fy = (y - g.origin.y_m) / g.cell_size_m - 0.5
        fx = min(max(fx, 0.0), g.n_cols - 1.0)
        fy = min(max(fy, 0.0), g.n_rows - 1.0)
        c0, r0 = min(int(fx), g.n_cols - 2), min(int(fy), g.n_rows - 2)
        c0, r0 = max(c0, 0), max(r0, 0)
        tx = fx - c0 if g.n_cols > 1 else 0.0
        ty = fy - r0 if g.n_rows > 1 else 0.0
        v = self.values
        c1 = min(c0 + 1, g.n_cols - 1)
        r1 = min(r0 + 1, g.n_rows - 1)
        val = ((1 - tx) * (1 - ty) * v[r0, c0] + tx * (1 - ty) * v[r0, c1]
               + (1 - tx) * ty * v[r1, c0] + tx * ty * v[r1, c1])
        return float(val), not inside


def generate_field(grid: GridSpec, model: VariogramModel, mean: float, seed: int) -> FieldTruth:
    """One realization via a dense lower-triangular factor of the cell covariance."""
    n = grid.n_cols * grid.n_rows
    if n > MAX_DENSE_CELLS:
        raise GenerationError(f"{n} cells exceeds the dense limit of {MAX_DENSE_CELLS}")
    rng = np.random.default_rng(seed)
    noise = rng.standard_normal(n)
    if model.sill == 0:
        vals = np.full(n, float(mean))
    else:
        pts = grid.centers()
        C = model.covariance(cdist(pts, pts))
        L = None
        for eps in JITTER_STEPS:
            try:
                L = cholesky(C + np.eye(n) * eps * model.sill, lower=True)
                break
            except LinAlgError:
                continue
        if L is None:
            raise GenerationError("covariance not positive definite after jitter")
        vals = mean + L @ noise
    vals = vals.reshape(grid.shape)
    vals.setflags(write=False)
    return FieldTruth(grid, vals, model, float(mean), int(seed))


def field_summary(truth: FieldTruth) -> dict:
    v = truth.values
    return {"mean": float(v.mean()), "sd": float(v.std(ddof=1)) if v.size > 1 else 0.0,
            "min": float(v.min()), "max": float(v.max()), "cells": int(v.size)}

"""Simple kriging of point data onto a raster grid."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial import cKDTree
from scipy.spatial.distance import cdist

from ..geocore import GridSpec, Raster
from .variogram import VariogramModel

JITTER_REL = 1e-10
BATCH_CELLS = 2048
FULL_COV_MAX_POINTS = 4096  # above this, data covariances are built per cell


class ModelError(ValueError):
    pass


@dataclass(frozen=True)
class KrigingConfig:
    mean_msm: float
    neighborhood_k: int = 32
    max_search_radius_m: float | None = None  # None: 3 effective ranges
    dedup_radius_m: float = 0.05

    def __post_init__(self):
        if self.neighborhood_k < 1:
            raise ValueError("neighborhood_k must be >= 1")
        if self.max_search_radius_m is not None and not self.max_search_radius_m > 0:
            raise ValueError("search radius must be positive")
        if not self.dedup_radius_m >= 0:
            raise ValueError("dedup radius must be non-negative")

    def search_radius(self, model: VariogramModel) -> float:
        if self.max_search_radius_m is not None:
            return self.max_search_radius_m
        return 3.0 * model.effective_range_m


def dedup_points(xy: np.ndarray, z: np.ndarray, radius_m: float) -> tuple[np.ndarray, np.ndarray]:
    """Merge points lying within ``radius_m`` of an earlier kept point.

    Anchors are the kept points themselves (greedy, in input order); the
    merged value is the mean of the anchor and everything absorbed into it.
    """
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    z = np.asarray(z, dtype=float)
    if radius_m < 0:
        raise ValueError("radius must be non-negative")
    if len(z) == 0:
        return xy.copy(), z.copy()
    tree = cKDTree(xy)
    owner = np.full(len(z), -1, dtype=np.int64)
    for i in range(len(z)):
        if owner[i] >= 0:
            continue
        owner[i] = i
        for j in tree.query_ball_point(xy[i], radius_m):
            if j > i and owner[j] < 0:
                owner[j] = i
    anchors = np.flatnonzero(owner == np.arange(len(z)))
    slot = np.searchsorted(anchors, owner)
    sums = np.bincount(slot, weights=z, minlength=len(anchors))
    counts = np.bincount(slot, minlength=len(anchors))
    return xy[anchors].copy(), sums / counts


def _neighbors(tree: cKDTree, targets: np.ndarray, k: int, radius: float):
    """k nearest within radius, ordered by distance then input index; -1 pads."""
    k = min(k, tree.n)
    dist, idx = tree.query(targets, k=k, distance_upper_bound=radius)
    dist = np.asarray(dist).reshape(len(targets), k)
    idx = np.asarray(idx).reshape(len(targets), k)
    missing = idx >= tree.n
    idx = np.where(missing, -1, idx)
    dist = np.where(missing, np.inf, dist)
    key_idx = np.where(missing, np.iinfo(np.int64).max, idx)
    order = np.lexsort((key_idx, dist), axis=1)
    return np.take_along_axis(dist, order, 1), np.take_along_axis(idx, order, 1)


def krige_points(
    xy: np.ndarray,
    z: np.ndarray,
    targets: np.ndarray,
    model: VariogramModel,
    cfg: KrigingConfig,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Simple-kriging prediction, variance and regularization flag per target.

    Targets with no data inside the search radius come back as NaN.
    """
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    z = np.asarray(z, dtype=float)
    targets = np.asarray(targets, dtype=float).reshape(-1, 2)
    if len(z) == 0:
        raise ModelError("no data points to krige")
    sill = model.sill
    if not sill > 0:
        raise ModelError("model has zero sill")
    tree = cKDTree(xy)
    radius = cfg.search_radius(model)
    n_t = len(targets)
    pred = np.full(n_t, np.nan)
    var = np.full(n_t, np.nan)
    flag = np.zeros(n_t, dtype=bool)
    resid = z - cfg.mean_msm
    full = model.covariance(cdist(xy, xy)) if len(z) <= FULL_COV_MAX_POINTS else None
    for start in range(0, n_t, BATCH_CELLS):
        sl = slice(start, min(start + BATCH_CELLS, n_t))
        dist, idx = _neighbors(tree, targets[sl], cfg.neighborhood_k, radius)
        has = idx >= 0
        m, k = idx.shape
        safe = np.where(has, idx, 0)
        if full is not None:
            cov = full[safe[:, :, None], safe[:, None, :]]
        else:
            pts = xy[safe]
            cov = model.covariance(np.linalg.norm(pts[:, :, None, :] - pts[:, None, :, :], axis=-1))
        both = has[:, :, None] & has[:, None, :]
        eye = np.broadcast_to(np.eye(k, dtype=bool), (m, k, k))
        # padded slots become decoupled identity rows with zero right-hand side
        C = np.where(both, cov, np.where(eye, 1.0, 0.0))
        c = np.where(has, model.covariance(dist), 0.0)
        lam, bad = _solve_batch(C, c, sill)
        p = cfg.mean_msm + np.einsum("ij,ij->i", lam, np.where(has, resid[safe], 0.0))
        v = sill - np.einsum("ij,ij->i", lam, c)
        any_nb = has.any(axis=1)
        pred[sl] = np.where(any_nb, p, np.nan)
        var[sl] = np.where(any_nb, np.clip(v, 0.0, sill), np.nan)
        flag[sl] = bad & any_nb
    return pred, var, flag


def _solve_batch(C: np.ndarray, c: np.ndarray, sill: float):
    bad = np.zeros(len(C), dtype=bool)
    try:
        lam = np.linalg.solve(C, c[..., None])[..., 0]
        ok = np.all(np.isfinite(lam), axis=1)
        if ok.all():
            return lam, bad
    except np.linalg.LinAlgError:
        lam = np.zeros_like(c)
        ok = np.zeros(len(C), dtype=bool)
    # retry failed systems one at a time, then with diagonal jitter
    for i in np.flatnonzero(~ok):
        try:
            lam[i] = np.linalg.solve(C[i], c[i])
            if np.all(np.isfinite(lam[i])):
                continue
        except np.linalg.LinAlgError:
            pass
        A = C[i] + np.eye(len(c[i])) * JITTER_REL * sill
        lam[i] = np.linalg.lstsq(A, c[i], rcond=None)[0]
        bad[i] = True
    return lam, bad


def simple_krige(
    xy: np.ndarray,
    z: np.ndarray,
    model: VariogramModel,
    cfg: KrigingConfig,
    grid: GridSpec,
) -> Raster:
    """Krige onto the cell centers of ``grid``.

    Inputs are deduplicated at ``cfg.dedup_radius_m`` first so coincident
    GNSS fixes cannot make the local systems singular.
    """
    xy, z = dedup_points(xy, z, cfg.dedup_radius_m)
    pred, var, flag = krige_points(xy, z, grid.centers(), model, cfg)
    return Raster(grid, pred.reshape(grid.shape), var.reshape(grid.shape),
                  regularized=flag.reshape(grid.shape))

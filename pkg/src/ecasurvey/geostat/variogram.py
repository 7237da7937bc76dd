"""Empirical semivariogram and exponential model fitting."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np
from scipy.optimize import least_squares, nnls
from scipy.spatial.distance import pdist

DEFAULT_BIN_WIDTH_M = 1.0
DEFAULT_MAX_LAG_M = 25.0
N_RANGE_STARTS = 16


class InsufficientDataError(ValueError):
    pass


class FitError(RuntimeError):
    def __init__(self, message: str, residual: float | None = None):
        super().__init__(message if residual is None else f"{message} (residual {residual:.4g})")
        self.residual = residual


@dataclass(frozen=True)
class VariogramModel:
    """Exponential model gamma(h) = nugget + partial_sill * (1 - exp(-h / range_m))."""

    nugget: float
    partial_sill: float
    range_m: float
    flag: str | None = None

    def __post_init__(self):
        if not (self.nugget >= 0 and self.partial_sill >= 0):
            raise ValueError("nugget and partial sill must be non-negative")
        if not (self.range_m > 0 and math.isfinite(self.range_m)):
            raise ValueError("range must be positive and finite")

    @property
    def sill(self) -> float:
        return self.nugget + self.partial_sill

    @property
    def effective_range_m(self) -> float:
        return 3.0 * self.range_m

    def gamma(self, h):
        h = np.asarray(h, dtype=float)
        g = self.nugget + self.partial_sill * (1.0 - np.exp(-h / self.range_m))
        return np.where(h > 0, g, 0.0)

    def covariance(self, h):
        """C(h) = sill - gamma(h); C(0) is the full sill."""
        h = np.asarray(h, dtype=float)
        return np.where(h > 0, self.partial_sill * np.exp(-h / self.range_m), self.sill)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, d: dict) -> "VariogramModel":
        return cls(float(d["nugget"]), float(d["partial_sill"]), float(d["range_m"]),
                   d.get("flag"))


@dataclass
class EmpiricalVariogram:
    lags: np.ndarray
    gamma: np.ndarray
    n_pairs: np.ndarray
    bin_width_m: float
    max_lag_m: float

    def __len__(self) -> int:
        return len(self.lags)

    def to_dict(self) -> dict:
        return {
            "bin_width_m": self.bin_width_m,
            "max_lag_m": self.max_lag_m,
            "bins": [{"lag_center_m": float(l), "gamma": float(g), "n_pairs": int(n)}
                     for l, g, n in zip(self.lags, self.gamma, self.n_pairs)],
        }


def empirical_variogram(
    xy: np.ndarray,
    z: np.ndarray,
    bin_width_m: float = DEFAULT_BIN_WIDTH_M,
    max_lag_m: float = DEFAULT_MAX_LAG_M,
) -> EmpiricalVariogram:
    """Matheron estimator over lag bins ``[(k - 1/2) w, (k + 1/2) w)``, k >= 1.

    Bins are centered on multiples of the bin width; pairs closer than
    half a bin width are not used. Empty bins are omitted.
    """
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    z = np.asarray(z, dtype=float)
    if len(z) < 2:
        raise InsufficientDataError("variogram needs at least two points")
    if not (bin_width_m > 0 and max_lag_m > 0):
        raise ValueError("bin width and max lag must be positive")
    h = pdist(xy)
    dz2 = pdist(z[:, None], "sqeuclidean")
    k = np.floor(h / bin_width_m + 0.5).astype(np.int64)
    n_bins = int(math.floor(max_lag_m / bin_width_m + 0.5))
    use = (k >= 1) & (k <= n_bins)
    counts = np.bincount(k[use], minlength=n_bins + 1)
    sums = np.bincount(k[use], weights=dz2[use], minlength=n_bins + 1)
    keep = np.flatnonzero(counts > 0)
    return EmpiricalVariogram(
        lags=keep * bin_width_m,
        gamma=sums[keep] / (2.0 * counts[keep]),
        n_pairs=counts[keep],
        bin_width_m=bin_width_m,
        max_lag_m=max_lag_m,
    )


def _cressie_residuals(p, h, g, w):
    c0, c1, a = p
    model = c0 + c1 * (1.0 - np.exp(-h / a))
    model = np.maximum(model, 1e-300)
    return w * (g - model) / model


def fit_exponential(ev: EmpiricalVariogram) -> VariogramModel:
    """Cressie-weighted least-squares fit of the exponential model.

    The range is started from a fixed log-spaced grid; each start gets a
    non-negative linear solve for the sills and a bounded local
    refinement. Ties go to the earlier start, so results are reproducible.
    """
    h = np.asarray(ev.lags, dtype=float)
    g = np.asarray(ev.gamma, dtype=float)
    n = np.asarray(ev.n_pairs, dtype=float)
    if len(h) < 3:
        raise InsufficientDataError("fit needs at least three lag bins")
    if np.all(g == 0):
        return VariogramModel(0.0, 0.0, ev.bin_width_m, flag="degenerate")

    w = np.sqrt(n)
    # constant-model optimum under Cressie weights
    flat_c = float(np.sum(n * g**2) / np.sum(n * g))
    flat_cost = 0.5 * float(np.sum(_cressie_residuals((flat_c, 0.0, 1.0), h, g, w) ** 2))

    scale = float(g.max())
    best = None
    starts = np.geomspace(ev.bin_width_m, ev.max_lag_m, N_RANGE_STARTS)
    for a0 in starts:
        basis = np.column_stack([np.ones_like(h), 1.0 - np.exp(-h / a0)])
        sw = np.sqrt(n)[:, None] / np.maximum(g[:, None], scale * 1e-6)
        coef, _ = nnls(basis * sw, g * sw[:, 0])
        x0 = np.array([max(coef[0], scale * 1e-6), max(coef[1], scale * 1e-6), a0])
        try:
            res = least_squares(
                _cressie_residuals, x0, args=(h, g, w),
                bounds=([0.0, 0.0, ev.bin_width_m * 1e-3], [np.inf, np.inf, ev.max_lag_m * 1e3]),
                method="trf", xtol=1e-14, ftol=1e-14, gtol=1e-14, max_nfev=2000,
            )
        except (ValueError, np.linalg.LinAlgError):
            continue
        if res.status <= 0 or not np.all(np.isfinite(res.x)):
            continue
        if best is None or res.cost < best.cost:
            best = res
    if best is None:
        raise FitError("no start converged", flat_cost)

    if flat_cost <= best.cost * (1 + 1e-9) + 1e-24:
        return VariogramModel(flat_c, 0.0, ev.bin_width_m, flag="nugget-only")
    c0, c1, a = (float(v) for v in best.x)
    if c1 <= 1e-12 * max(c0, 1e-300):
        return VariogramModel(c0 + c1, 0.0, a, flag="nugget-only")
    if 1.0 - math.exp(-h.min() / a) > 1 - 1e-9:
        # model reaches its sill before the first lag: indistinguishable from flat
        return VariogramModel(c0 + c1, 0.0, ev.bin_width_m, flag="nugget-only")
    return VariogramModel(c0, c1, a)


def variogram_json(ev: EmpiricalVariogram, model: VariogramModel | None) -> str:
    d = ev.to_dict()
    d["model"] = None if model is None else model.to_dict()
    return json.dumps(d, indent=1, sort_keys=True) + "\n"

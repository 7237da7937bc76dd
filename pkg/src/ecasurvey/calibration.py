"""Robot-induced sensor bias: paired surveys and the distance interference table."""

from __future__ import annotations

import csv
import io
import json
import math
import warnings
from dataclasses import asdict, dataclass, field
from importlib import resources
from typing import Sequence

import numpy as np

from .geocore import GeoPoint
from .ingest import Survey

TABLE1_DISTANCES_CM = (25, 30, 36, 41, 46, 51, 56, 61)
DEFAULT_BIN_WIDTH_M = 1.0


class NoOverlapError(ValueError):
    pass


class RegressionDegenerateError(ValueError):
    pass


class UnsupportedOrientationError(ValueError):
    pass


class NonPositiveCorrectionWarning(UserWarning):
    pass


@dataclass(frozen=True)
class SensorMountConfig:
    d_h_mm: float
    d_v_mm: float = 50.0
    theta_deg: float = 0.0
    alpha_deg: float = 18.4
    beta_deg: float = 12.2

    def __post_init__(self):
        if min(self.d_h_mm, self.d_v_mm, self.alpha_deg, self.beta_deg) <= 0:
            raise ValueError("mount dimensions and angles must be positive")
        if self.theta_deg not in (0, 90):
            raise ValueError("theta_deg must be 0 or 90")

    @classmethod
    def handheld(cls) -> "SensorMountConfig":
        return cls(d_h_mm=math.inf)

    @classmethod
    def rosbot(cls) -> "SensorMountConfig":
        """The as-built robot mount."""
        return cls(d_h_mm=235.0, d_v_mm=50.0, theta_deg=0.0, alpha_deg=18.4, beta_deg=12.2)

    def to_dict(self) -> dict:
        d = asdict(self)
        if math.isinf(self.d_h_mm):
            d["d_h_mm"] = None
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "SensorMountConfig":
        d = dict(d)
        if d.get("d_h_mm") is None:
            d["d_h_mm"] = math.inf
        return cls(**d)


@dataclass
class CalibrationReport:
    mean_a: float
    mean_b: float
    offset: float
    slope: float
    intercept: float
    pearson_r: float
    n_pairs: int

    def to_dict(self) -> dict:
        return asdict(self)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


@dataclass
class DistanceEntry:
    distance_cm: float
    n_rows: int
    mean_offset: float
    slope: float | None
    intercept: float | None
    pearson_r: float | None


@dataclass
class InterferenceProfile:
    theta_deg: float
    entries: list[DistanceEntry] = field(default_factory=list)

    @property
    def distances_cm(self) -> np.ndarray:
        return np.array([e.distance_cm for e in self.entries])

    @property
    def mean_offsets(self) -> np.ndarray:
        return np.array([e.mean_offset for e in self.entries])

    def entry(self, distance_cm: float) -> DistanceEntry:
        for e in self.entries:
            if e.distance_cm == distance_cm:
                return e
        raise KeyError(distance_cm)

    def to_dict(self) -> dict:
        return {"theta_deg": self.theta_deg,
                "entries": [asdict(e) for e in self.entries]}


@dataclass(frozen=True)
class ProfileRow:
    config: str
    theta_deg: float
    control: float
    readings: dict[float, float]


def ols(x: np.ndarray, y: np.ndarray) -> tuple[float, float, float]:
    """Slope, intercept and Pearson r of y regressed on x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    dx = x - x.mean()
    dy = y - y.mean()
    sxx = float(dx @ dx)
    syy = float(dy @ dy)
    if x.size < 2 or sxx == 0.0:
        raise RegressionDegenerateError("regressor has no spread")
    sxy = float(dx @ dy)
    slope = sxy / sxx
    intercept = float(y.mean()) - slope * float(x.mean())
    r = sxy / math.sqrt(sxx * syy) if syy > 0 else float("nan")
    return slope, intercept, float(np.clip(r, -1.0, 1.0))


def load_profile_table(text: str | None = None) -> list[ProfileRow]:
    """Read the distance-interference table; defaults to the shipped fixture."""
    if text is None:
        text = resources.files("ecasurvey").joinpath("fixtures/table1.csv").read_text()
    rows = []
    for rec in csv.DictReader(io.StringIO(text)):
        readings = {float(k[1:]): float(v) for k, v in rec.items()
                    if k.startswith("d") and v not in (None, "")}
        rows.append(ProfileRow(rec["config"], float(rec["theta_deg"]),
                               float(rec["control"]), readings))
    return rows


def interference_profile(
    rows: Sequence[ProfileRow], theta_deg: float = 0.0, strict: bool = False
) -> InterferenceProfile:
    """Per-distance offset and regression against the no-robot control.

    Distances with fewer than two rows keep their mean offset but get no
    regression; with ``strict=True`` that raises instead.
    """
    sel = [r for r in rows if r.theta_deg == theta_deg]
    if not sel:
        raise UnsupportedOrientationError(f"no rows for theta={theta_deg}")
    distances = sorted({d for r in sel for d in r.readings})
    prof = InterferenceProfile(theta_deg)
    for d in distances:
        pairs = [(r.control, r.readings[d]) for r in sel if d in r.readings]
        ctrl = np.array([p[0] for p in pairs])
        read = np.array([p[1] for p in pairs])
        mean_off = float(np.mean(read - ctrl))
        try:
            slope, icpt, r = ols(ctrl, read)
        except RegressionDegenerateError:
            if strict:
                raise RegressionDegenerateError(
                    f"distance {d} cm: {len(pairs)} row(s), mean offset {mean_off:.4g}")
            slope = icpt = r = None
        prof.entries.append(DistanceEntry(d, len(pairs), mean_off, slope, icpt, r))
    return prof


def bias_at(profile: InterferenceProfile, mount: SensorMountConfig) -> float:
    """Additive bias for a mount, interpolated over the tabulated distances.

    Clamped to the end knots inside the table span; an infinitely distant
    sensor (the control) has zero bias.
    """
    if mount.theta_deg != profile.theta_deg:
        raise UnsupportedOrientationError(
            f"profile is for theta={profile.theta_deg}, mount has {mount.theta_deg}")
    if not profile.entries:
        raise UnsupportedOrientationError("empty profile")
    if math.isinf(mount.d_h_mm):
        return 0.0
    d_cm = mount.d_h_mm / 10.0
    return float(np.interp(d_cm, profile.distances_cm, profile.mean_offsets))


def along_path_distance(xy: np.ndarray) -> np.ndarray:
    xy = np.asarray(xy, dtype=float).reshape(-1, 2)
    steps = np.hypot(*np.diff(xy, axis=0).T)
    return np.concatenate([[0.0], np.cumsum(steps)])


def _bin_means(s: np.ndarray, v: np.ndarray, width: float) -> dict[int, float]:
    idx = np.floor(s / width).astype(int)
    sums = np.bincount(idx, weights=v)
    counts = np.bincount(idx)
    return {int(i): float(sums[i] / counts[i]) for i in np.flatnonzero(counts)}


def paired_offset(
    a: Survey,
    b: Survey,
    width_m: float = DEFAULT_BIN_WIDTH_M,
    datum: GeoPoint | None = None,
) -> CalibrationReport:
    """Compare two passes over the same path, matched by along-path distance.

    Each survey is averaged in bins of cumulative travelled distance;
    bins present in both give the offset (b - a), the regression of b on a
    and the correlation.
    """
    if not width_m > 0:
        raise ValueError("bin width must be positive")
    if len(a) == 0 or len(b) == 0:
        raise NoOverlapError("empty survey")
    datum = datum or a.records[0].position
    bins = []
    for s in (a, b):
        xy = np.array([[p.x_m, p.y_m] for p in s.planar(datum)])
        bins.append(_bin_means(along_path_distance(xy), np.array(s.values), width_m))
    common = sorted(set(bins[0]) & set(bins[1]))
    if len(common) < 2:
        raise NoOverlapError(f"only {len(common)} distance bin(s) shared by both surveys")
    ma = np.array([bins[0][k] for k in common])
    mb = np.array([bins[1][k] for k in common])
    slope, icpt, r = ols(ma, mb)
    return CalibrationReport(
        mean_a=float(ma.mean()),
        mean_b=float(mb.mean()),
        offset=float(mb.mean() - ma.mean()),
        slope=slope,
        intercept=icpt,
        pearson_r=r,
        n_pairs=len(common),
    )


def apply_bias_correction(s: Survey, offset: float) -> Survey:
    """Subtract a constant offset from every reading.

    Readings pushed to zero or below are kept but warned about; they are
    floored at 0 so records stay within the sensor range.
    """
    vals = np.array(s.values) - offset
    bad = np.flatnonzero(vals <= 0)
    if bad.size:
        warnings.warn(f"bias correction leaves {bad.size} non-positive reading(s) "
                      f"at indices {bad[:10].tolist()}", NonPositiveCorrectionWarning)
    meta = {"bias_correction_msm": repr(float(offset))}
    if bad.size:
        meta["bias_correction_nonpositive"] = ",".join(map(str, bad.tolist()))
    return s.with_values(np.maximum(vals, 0.0), **meta)

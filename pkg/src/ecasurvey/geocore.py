"""Coordinates, grid geometry and raster storage.

Geodetic positions are mapped onto a local east/north plane with an
equirectangular projection about a datum point. At orchard scale (tens of
meters) the error is far below GNSS resolution, so no zone bookkeeping is
needed.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

EARTH_RADIUS_M = 6_371_000.0
PLANE_LIMIT_M = 1e5
PROJECTION_LIMIT_M = 10_000.0
NODATA = -9999


class InvalidCoordinateError(ValueError):
    pass


class ProjectionDomainError(ValueError):
    pass


class EmptyExtentError(ValueError):
    pass


@dataclass(frozen=True)
class GeoPoint:
    latitude_deg: float
    longitude_deg: float

    def __post_init__(self):
        lat, lon = self.latitude_deg, self.longitude_deg
        if not (math.isfinite(lat) and -90.0 <= lat <= 90.0):
            raise InvalidCoordinateError(f"latitude out of range: {lat}")
        if not (math.isfinite(lon) and -180.0 <= lon <= 180.0):
            raise InvalidCoordinateError(f"longitude out of range: {lon}")


@dataclass(frozen=True)
class PlanarPoint:
    x_m: float
    y_m: float

    def __post_init__(self):
        for v in (self.x_m, self.y_m):
            if not math.isfinite(v) or abs(v) >= PLANE_LIMIT_M:
                raise ProjectionDomainError(f"planar coordinate outside local frame: {v}")


def haversine_m(a: GeoPoint, b: GeoPoint) -> float:
    """Great-circle distance on the spherical earth."""
    p1, p2 = math.radians(a.latitude_deg), math.radians(b.latitude_deg)
    dp = p2 - p1
    dl = math.radians(b.longitude_deg - a.longitude_deg)
    h = math.sin(dp / 2) ** 2 + math.cos(p1) * math.cos(p2) * math.sin(dl / 2) ** 2
    return 2 * EARTH_RADIUS_M * math.asin(min(1.0, math.sqrt(h)))


def project_to_plane(datum: GeoPoint, p: GeoPoint) -> PlanarPoint:
    if haversine_m(datum, p) >= PROJECTION_LIMIT_M:
        raise ProjectionDomainError("point farther than 10 km from the datum")
    dlat = math.radians(p.latitude_deg - datum.latitude_deg)
    dlon = math.radians(p.longitude_deg - datum.longitude_deg)
    x = EARTH_RADIUS_M * math.cos(math.radians(datum.latitude_deg)) * dlon
    y = EARTH_RADIUS_M * dlat
    return PlanarPoint(x, y)


def unproject(datum: GeoPoint, q: PlanarPoint) -> GeoPoint:
    """Inverse of :func:`project_to_plane`."""
    lat = datum.latitude_deg + math.degrees(q.y_m / EARTH_RADIUS_M)
    coslat = math.cos(math.radians(datum.latitude_deg))
    lon = datum.longitude_deg + math.degrees(q.x_m / (EARTH_RADIUS_M * coslat))
    return GeoPoint(lat, lon)


def project_many(datum: GeoPoint, points: Iterable[GeoPoint]) -> np.ndarray:
    """Project a batch of points; returns an (n, 2) array of x, y meters."""
    out = [project_to_plane(datum, p) for p in points]
    return np.array([[q.x_m, q.y_m] for q in out], dtype=float).reshape(-1, 2)


@dataclass(frozen=True)
class GridSpec:
    origin: PlanarPoint
    cell_size_m: float
    n_cols: int
    n_rows: int

    def __post_init__(self):
        if not self.cell_size_m > 0:
            raise ValueError("cell_size_m must be positive")
        if self.n_cols < 1 or self.n_rows < 1:
            raise ValueError("grid needs at least one row and one column")

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_rows, self.n_cols)

    @property
    def x_max(self) -> float:
        return self.origin.x_m + self.n_cols * self.cell_size_m

    @property
    def y_max(self) -> float:
        return self.origin.y_m + self.n_rows * self.cell_size_m

    def centers(self) -> np.ndarray:
        """Cell centers as an (n_rows * n_cols, 2) array, row-major from the south row."""
        c = self.cell_size_m
        xs = self.origin.x_m + (np.arange(self.n_cols) + 0.5) * c
        ys = self.origin.y_m + (np.arange(self.n_rows) + 0.5) * c
        xx, yy = np.meshgrid(xs, ys)
        return np.column_stack([xx.ravel(), yy.ravel()])

    def cell_of(self, x: float, y: float) -> tuple[int, int] | None:
        """(col, row) of the cell containing a point, or None when outside."""
        col = math.floor((x - self.origin.x_m) / self.cell_size_m)
        row = math.floor((y - self.origin.y_m) / self.cell_size_m)
        if 0 <= col < self.n_cols and 0 <= row < self.n_rows:
            return col, row
        return None

    def to_dict(self) -> dict:
        return {
            "origin": [self.origin.x_m, self.origin.y_m],
            "cell_size_m": self.cell_size_m,
            "n_cols": self.n_cols,
            "n_rows": self.n_rows,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "GridSpec":
        ox, oy = d["origin"]
        return cls(PlanarPoint(float(ox), float(oy)), float(d["cell_size_m"]),
                   int(d["n_cols"]), int(d["n_rows"]))


def grid_from_bounds(min_pt: PlanarPoint, max_pt: PlanarPoint, cell_size_m: float) -> GridSpec:
    if not cell_size_m > 0:
        raise EmptyExtentError("cell size must be positive")
    dx = max_pt.x_m - min_pt.x_m
    dy = max_pt.y_m - min_pt.y_m
    if not (dx > 0 and dy > 0):
        raise EmptyExtentError(f"degenerate bounds: {dx} x {dy} m")
    # round before ceil so 50/0.5 does not become 101 through float noise
    n_cols = math.ceil(round(dx / cell_size_m, 9))
    n_rows = math.ceil(round(dy / cell_size_m, 9))
    return GridSpec(min_pt, cell_size_m, n_cols, n_rows)


def cell_center(spec: GridSpec, col: int, row: int) -> PlanarPoint:
    if not (0 <= col < spec.n_cols and 0 <= row < spec.n_rows):
        raise IndexError(f"cell ({col}, {row}) outside {spec.n_cols}x{spec.n_rows} grid")
    c = spec.cell_size_m
    return PlanarPoint(spec.origin.x_m + (col + 0.5) * c, spec.origin.y_m + (row + 0.5) * c)


@dataclass(frozen=True, eq=False)
class Raster:
    """Gridded values (NaN = missing) with an optional kriging-variance layer.

    Arrays have shape ``(n_rows, n_cols)``; row 0 is the southern row.
    """

    spec: GridSpec
    values: np.ndarray
    variances: np.ndarray | None = None
    regularized: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        vals = np.array(self.values, dtype=float).reshape(self.spec.shape)
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)
        if self.variances is not None:
            var = np.array(self.variances, dtype=float).reshape(self.spec.shape)
            if np.any(var[~np.isnan(var)] < 0):
                raise ValueError("negative variance in raster")
            var.setflags(write=False)
            object.__setattr__(self, "variances", var)
        if self.regularized is not None:
            reg = np.array(self.regularized, dtype=bool).reshape(self.spec.shape)
            reg.setflags(write=False)
            object.__setattr__(self, "regularized", reg)

    @property
    def valid(self) -> np.ndarray:
        return ~np.isnan(self.values)

    def valid_values(self) -> np.ndarray:
        return self.values[self.valid]


def _fmt(v: float) -> str:
    return format(v, ".6g")


def write_ascii_grid(r: Raster, layer: str = "values") -> str:
    """ESRI ASCII grid text for one raster layer, top row first."""
    arr = r.values if layer == "values" else r.variances
    if arr is None:
        raise ValueError(f"raster has no {layer} layer")
    s = r.spec
    lines = [
        f"ncols {s.n_cols}",
        f"nrows {s.n_rows}",
        f"xllcorner {format(s.origin.x_m, '.10g')}",
        f"yllcorner {format(s.origin.y_m, '.10g')}",
        f"cellsize {format(s.cell_size_m, '.10g')}",
        f"NODATA_value {NODATA}",
    ]
    for row in arr[::-1]:
        lines.append(" ".join(str(NODATA) if np.isnan(v) else _fmt(v) for v in row))
    return "\n".join(lines) + "\n"


def read_ascii_grid(text: str) -> Raster:
    buf = io.StringIO(text)
    header: dict[str, str] = {}
    for _ in range(6):
        key, val = buf.readline().split()
        header[key.lower()] = val
    n_cols, n_rows = int(header["ncols"]), int(header["nrows"])
    nodata = float(header.get("nodata_value", NODATA))
    spec = GridSpec(
        PlanarPoint(float(header["xllcorner"]), float(header["yllcorner"])),
        float(header["cellsize"]), n_cols, n_rows,
    )
    data = np.loadtxt(buf, dtype=float, ndmin=2)
    if data.shape != (n_rows, n_cols):
        raise ValueError(f"grid body is {data.shape}, header says {(n_rows, n_cols)}")
    data[data == nodata] = np.nan
    return Raster(spec, data[::-1].copy())


def points_geojson(
    datum: GeoPoint,
    xy: np.ndarray,
    eca_msm: Sequence[float],
    variance: Sequence[float] | None = None,
) -> dict:
    """FeatureCollection of planar points converted back to lon/lat."""
    feats = []
    for i, (x, y) in enumerate(np.asarray(xy, dtype=float).reshape(-1, 2)):
        g = unproject(datum, PlanarPoint(float(x), float(y)))
        var = None if variance is None or np.isnan(variance[i]) else float(variance[i])
        feats.append({
            "type": "Feature",
            "geometry": {"type": "Point", "coordinates": [g.longitude_deg, g.latitude_deg]},
            "properties": {"eca_msm": float(eca_msm[i]), "variance": var},
        })
    return {"type": "FeatureCollection", "features": feats}


def raster_geojson(datum: GeoPoint, r: Raster) -> dict:
    """Point features at the centers of non-missing cells."""
    mask = r.valid.ravel()
    var = None if r.variances is None else r.variances.ravel()[mask]
    return points_geojson(datum, r.spec.centers()[mask], r.values.ravel()[mask], var)


def dump_geojson(obj: dict) -> str:
    return json.dumps(obj, indent=1, sort_keys=True) + "\n"

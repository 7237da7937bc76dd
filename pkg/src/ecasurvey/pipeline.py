"""End-to-end processing: ingest, screen, correct, fit, krige, compare, render."""

from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass, field, fields
from pathlib import Path
from typing import Any

import numpy as np

from . import calibration as cal
from .geocore import (
    GeoPoint,
    PlanarPoint,
    dump_geojson,
    grid_from_bounds,
    points_geojson,
    project_many,
    write_ascii_grid,
)
from .geostat import (
    KrigingConfig,
    VariogramModel,
    empirical_variogram,
    fit_exponential,
    histogram,
    quantile_classes,
    raster_pearson,
    raster_stats,
    simple_krige,
    variogram_json,
)
from .ingest import Survey, parse_survey_log
from .render import render_legend, render_map
from .screening import screen_outliers


class PipelineError(RuntimeError):
    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


@dataclass
class PipelineConfig:
    surveys: dict[str, str]
    out_dir: str = "out"
    reference: str | None = None       # default: first survey
    sources: dict[str, str] = field(default_factory=dict)
    datum: tuple[float, float] | None = None
    bounds: tuple[float, float, float, float] | None = None
    screen: bool = True
    bias: dict[str, dict] = field(default_factory=dict)
    bin_width_m: float = 1.0
    max_lag_m: float = 25.0
    model: dict | None = None          # fixed variogram; None fits per survey
    cell_size_m: float = 0.5
    neighborhood_k: int = 32
    max_search_radius_m: float | None = None
    dedup_radius_m: float = 0.05
    pairing_width_m: float = 1.0
    n_classes: int = 5
    hist_bins: int = 20
    render_scale: int = 8
    render: bool = True
    seed: int = 0
    base_dir: str = "."

    def __post_init__(self):
        if not self.surveys:
            raise ValueError("no surveys configured")
        if not self.cell_size_m > 0:
            raise ValueError("cell size must be positive")
        if self.reference is None:
            self.reference = next(iter(self.surveys))
        if self.reference not in self.surveys:
            raise ValueError(f"reference survey '{self.reference}' not configured")

    @classmethod
    def from_dict(cls, d: dict, base_dir: str | Path = ".") -> "PipelineConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        d = dict(d)
        d.setdefault("base_dir", str(base_dir))
        for key in ("datum", "bounds"):
            if d.get(key) is not None:
                d[key] = tuple(float(v) for v in d[key])
        return cls(**d)

    @classmethod
    def load(cls, path: str | Path) -> "PipelineConfig":
        path = Path(path)
        return cls.from_dict(json.loads(path.read_text()), base_dir=path.parent)

    def path_of(self, name: str) -> Path:
        p = Path(self.surveys[name])
        return p if p.is_absolute() else Path(self.base_dir) / p


def _clean(obj: Any) -> Any:
    """JSON-safe copy: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return float(obj) if math.isfinite(obj) else None
    return obj


def dump_json(obj: Any) -> str:
    return json.dumps(_clean(obj), indent=1, sort_keys=True) + "\n"


def _datum(cfg: PipelineConfig, ref: Survey) -> GeoPoint:
    if cfg.datum is not None:
        return GeoPoint(*cfg.datum)
    if "datum" in ref.metadata:
        lat, lon = ref.metadata["datum"].split(",")
        return GeoPoint(float(lat), float(lon))
    return ref.records[0].position


def _resolve_bias(spec: dict, name: str, surveys: dict[str, Survey], ref: str,
                  datum: GeoPoint, cfg: PipelineConfig) -> tuple[float, dict]:
    mode = spec.get("mode", "offset")
    if mode == "offset":
        return float(spec["value"]), {"mode": mode}
    if mode == "profile":
        table = cal.load_profile_table(
            Path(spec["table"]).read_text() if spec.get("table") else None)
        mount = cal.SensorMountConfig.from_dict(spec.get("mount", {"d_h_mm": 235.0}))
        prof = cal.interference_profile(table, mount.theta_deg)
        return cal.bias_at(prof, mount), {"mode": mode, "mount": mount.to_dict()}
    if mode == "mean_difference":
        off = float(np.mean(surveys[name].values) - np.mean(surveys[ref].values))
        return off, {"mode": mode}
    if mode == "paired":
        rep = cal.paired_offset(surveys[ref], surveys[name], cfg.pairing_width_m, datum)
        return rep.offset, {"mode": mode}
    raise ValueError(f"unknown bias mode '{mode}'")


def run_pipeline(cfg: PipelineConfig) -> dict:
    """Run every stage and write artifacts to ``cfg.out_dir``.

    Returns the run report (also written as ``report.json``). Failures are
    raised as :class:`PipelineError` naming the stage, after a report with
    the error and the files written so far has been saved.
    """
    out = Path(cfg.out_dir)
    out.mkdir(parents=True, exist_ok=True)
    files: list[str] = []
    report: dict[str, Any] = {"config": {"seed": cfg.seed, "screen": cfg.screen,
                                         "cell_size_m": cfg.cell_size_m,
                                         "reference": cfg.reference},
                              "surveys": {}, "files": files}

    def write(name: str, data: str | bytes):
        p = out / name
        if isinstance(data, bytes):
            p.write_bytes(data)
        else:
            p.write_text(data)
        files.append(name)

    stage = "ingest"
    try:
        raw: dict[str, Survey] = {}
        for name in cfg.surveys:
            text = cfg.path_of(name).read_text()
            survey, summary = parse_survey_log(text, cfg.sources.get(name, "handheld"))
            raw[name] = survey
            report["surveys"][name] = {"parse": {"rows_total": summary.rows_total,
                                                 "rows_ok": summary.rows_ok,
                                                 "rows_rejected": summary.rows_rejected},
                                       "mean_raw_msm": float(np.mean(survey.values))}
        datum = _datum(cfg, raw[cfg.reference])
        report["datum"] = [datum.latitude_deg, datum.longitude_deg]

        stage = "screen"
        screened: dict[str, Survey] = {}
        for name, s in raw.items():
            entry = report["surveys"][name]
            if cfg.screen:
                _, rep = screen_outliers(s.values)
                drop = set(rep.removed_indices)
                screened[name] = s.subset(i for i in range(len(s)) if i not in drop)
                entry["screening"] = rep.to_dict()
            else:
                screened[name] = s
                entry["screening"] = None
            entry["mean_screened_msm"] = float(np.mean(screened[name].values))

        stage = "calibrate"
        corrected: dict[str, Survey] = {}
        ref = cfg.reference
        for name, s in screened.items():
            entry = report["surveys"][name]
            if name != ref:
                try:
                    entry["paired_vs_reference"] = cal.paired_offset(
                        screened[ref], s, cfg.pairing_width_m, datum).to_dict()
                except cal.NoOverlapError as exc:
                    entry["paired_vs_reference"] = {"error": str(exc)}
            if name in cfg.bias:
                off, info = _resolve_bias(cfg.bias[name], name, screened, ref, datum, cfg)
                with warnings.catch_warnings(record=True) as caught:
                    warnings.simplefilter("always", cal.NonPositiveCorrectionWarning)
                    corrected[name] = cal.apply_bias_correction(s, off)
                entry["bias"] = {**info, "offset_msm": off,
                                 "nonpositive_warnings": len(caught)}
            else:
                corrected[name] = s
                entry["bias"] = None
            entry["mean_corrected_msm"] = float(np.mean(corrected[name].values))

        stage = "grid"
        planar = {n: project_many(datum, (r.position for r in s.records))
                  for n, s in corrected.items()}
        if cfg.bounds is not None:
            xmin, ymin, xmax, ymax = cfg.bounds
        else:
            allxy = np.vstack(list(planar.values()))
            c = cfg.cell_size_m
            xmin, ymin = np.floor(allxy.min(axis=0) / c) * c
            xmax, ymax = np.ceil(allxy.max(axis=0) / c) * c
        grid = grid_from_bounds(PlanarPoint(float(xmin), float(ymin)),
                                PlanarPoint(float(xmax), float(ymax)), cfg.cell_size_m)
        report["grid"] = grid.to_dict()

        rasters = {}
        for name, s in corrected.items():
            entry = report["surveys"][name]
            xy, z = planar[name], np.array(s.values)
            stage = f"variogram:{name}"
            ev = empirical_variogram(xy, z, cfg.bin_width_m, cfg.max_lag_m)
            model = (VariogramModel.from_dict(cfg.model) if cfg.model is not None
                     else fit_exponential(ev))
            entry["variogram_model"] = model.to_dict()
            write(f"variogram_{name}.json", variogram_json(ev, model))

            stage = f"krige:{name}"
            kcfg = KrigingConfig(float(z.mean()), cfg.neighborhood_k,
                                 cfg.max_search_radius_m, cfg.dedup_radius_m)
            r = simple_krige(xy, z, model, kcfg, grid)
            rasters[name] = r
            entry["kriging"] = {"mean_msm": kcfg.mean_msm,
                                "missing_cells": int((~r.valid).sum()),
                                "regularized_cells": int(r.regularized.sum())}
            write(f"map_{name}.asc", write_ascii_grid(r))
            write(f"map_{name}_variance.asc", write_ascii_grid(r, "variances"))
            write(f"points_{name}.geojson", dump_geojson(points_geojson(datum, xy, z)))

            stage = f"stats:{name}"
            entry["map_stats"] = raster_stats(r).to_dict()
            breaks = quantile_classes(r, cfg.n_classes)
            counts, edges = histogram(r, cfg.hist_bins)
            entry["quantile_breaks_msm"] = breaks
            entry["histogram"] = {"counts": counts, "edges": edges}

            if cfg.render:
                stage = f"render:{name}"
                write(f"map_{name}.png", render_map(r, cfg.n_classes, scale=cfg.render_scale))
                write(f"map_{name}_legend.png",
                      render_legend(r, cfg.n_classes, n_bins=cfg.hist_bins))

        stage = "compare"
        names = list(rasters)
        report["comparison"] = {
            f"{ref}__{n}": {"pearson_r": raster_pearson(rasters[ref], rasters[n]),
                            "mean_diff_msm": report["surveys"][n]["map_stats"]["mean"]
                            - report["surveys"][ref]["map_stats"]["mean"]}
            for n in names if n != ref
        }
    except Exception as exc:
        report["error"] = {"stage": stage, "message": str(exc)}
        files.append("report.json")
        (out / "report.json").write_text(dump_json(report))
        raise PipelineError(stage, exc) from exc

    files.append("report.json")
    (out / "report.json").write_text(dump_json(report))
    return _clean(report)

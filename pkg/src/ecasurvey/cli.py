"""Command-line entry point: one subcommand per processing stage plus ``pipeline``."""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import calibration as cal
from .fieldsim import SimScenario, field_summary, twin_surveys
from .geocore import GeoPoint, PlanarPoint, Raster, grid_from_bounds, project_many, read_ascii_grid, write_ascii_grid
from .geostat import (
    KrigingConfig,
    VariogramModel,
    empirical_variogram,
    fit_exponential,
    raster_pearson,
    raster_stats,
    simple_krige,
    variogram_json,
)
from .ingest import PoseSample, parse_pose_log, parse_survey_log, sync_streams, write_survey_csv
from .pipeline import PipelineConfig, PipelineError, dump_json, run_pipeline
from .render import render_legend, render_map
from .screening import screen_outliers


def _out(args) -> Path:
    p = Path(args.out)
    p.mkdir(parents=True, exist_ok=True)
    return p


def _load_survey(path: str, source: str = "handheld"):
    return parse_survey_log(Path(path).read_text(), source)


def _datum_of(survey) -> GeoPoint:
    if "datum" in survey.metadata:
        lat, lon = survey.metadata["datum"].split(",")
        return GeoPoint(float(lat), float(lon))
    return survey.records[0].position


def cmd_ingest(args) -> int:
    out = _out(args)
    stem = Path(args.log).stem
    if args.poses:
        # LOG is a bare ECa stream: timestamp,eca_msm
        rows = np.atleast_2d(np.loadtxt(args.log, delimiter=",", skiprows=1))
        poses: list[PoseSample] = parse_pose_log(Path(args.poses).read_text())
        survey, dropped = sync_streams([(float(t), float(v)) for t, v in rows[:, :2]],
                                       poses, args.max_gap, args.source)
        summary = {"rows_total": len(rows), "rows_ok": len(survey), "dropped": dropped}
    else:
        survey, s = _load_survey(args.log, args.source)
        summary = json.loads(s.to_json())
    (out / f"survey_{stem}.csv").write_text(write_survey_csv(survey))
    (out / f"parse_{stem}.json").write_text(dump_json(summary))
    print(dump_json(summary), end="")
    return 0


def cmd_screen(args) -> int:
    out = _out(args)
    survey, _ = _load_survey(args.log, args.source)
    _, rep = screen_outliers(survey.values)
    drop = set(rep.removed_indices)
    kept = survey.subset(i for i in range(len(survey)) if i not in drop)
    stem = Path(args.log).stem
    (out / f"screened_{stem}.csv").write_text(write_survey_csv(kept))
    (out / f"screening_{stem}.json").write_text(dump_json(rep.to_dict()))
    print(dump_json(rep.to_dict()), end="")
    return 0


def cmd_calibrate(args) -> int:
    out = _out(args)
    result = {}
    if args.a and args.b:
        a, _ = _load_survey(args.a)
        b, _ = _load_survey(args.b)
        result["paired"] = cal.paired_offset(a, b, args.width, _datum_of(a)).to_dict()
    table = cal.load_profile_table(Path(args.table).read_text() if args.table else None)
    prof = cal.interference_profile(table, args.theta)
    result["profile"] = prof.to_dict()
    mount = cal.SensorMountConfig(d_h_mm=args.d_h_mm, theta_deg=args.theta)
    result["bias_at_mount_msm"] = cal.bias_at(prof, mount)
    (out / "calibration.json").write_text(dump_json(result))
    print(dump_json(result), end="")
    return 0


def _model_from(args, ev) -> VariogramModel:
    if args.model:
        return VariogramModel.from_dict(json.loads(Path(args.model).read_text()))
    return fit_exponential(ev)


def cmd_variogram(args) -> int:
    out = _out(args)
    survey, _ = _load_survey(args.log)
    xy = project_many(_datum_of(survey), (r.position for r in survey.records))
    ev = empirical_variogram(xy, np.array(survey.values), args.bin_width, args.max_lag)
    text = variogram_json(ev, fit_exponential(ev))
    (out / f"variogram_{Path(args.log).stem}.json").write_text(text)
    print(text, end="")
    return 0


def cmd_krige(args) -> int:
    out = _out(args)
    survey, _ = _load_survey(args.log)
    xy = project_many(_datum_of(survey), (r.position for r in survey.records))
    z = np.array(survey.values)
    ev = empirical_variogram(xy, z, args.bin_width, args.max_lag)
    model = _model_from(args, ev)
    c = args.cell_size
    if args.bounds:
        xmin, ymin, xmax, ymax = args.bounds
    else:
        xmin, ymin = np.floor(xy.min(axis=0) / c) * c
        xmax, ymax = np.ceil(xy.max(axis=0) / c) * c
    grid = grid_from_bounds(PlanarPoint(float(xmin), float(ymin)),
                            PlanarPoint(float(xmax), float(ymax)), c)
    r = simple_krige(xy, z, model, KrigingConfig(float(z.mean()), args.k), grid)
    name = Path(args.log).stem
    (out / f"map_{name}.asc").write_text(write_ascii_grid(r))
    (out / f"map_{name}_variance.asc").write_text(write_ascii_grid(r, "variances"))
    print(dump_json({"model": model.to_dict(), "stats": raster_stats(r).to_dict()}), end="")
    return 0


def cmd_compare(args) -> int:
    a = read_ascii_grid(Path(args.a).read_text())
    b = read_ascii_grid(Path(args.b).read_text())
    res = {"pearson_r": raster_pearson(a, b),
           "a": raster_stats(a).to_dict(), "b": raster_stats(b).to_dict()}
    print(dump_json(res), end="")
    return 0


def cmd_simulate(args) -> int:
    out = _out(args)
    scenario = SimScenario.from_json(Path(args.config).read_text()) if args.config else SimScenario()
    if args.seed is not None:
        scenario = SimScenario.from_dict({**scenario.to_dict(), "seed": args.seed})
    truth, hand, robot = twin_surveys(scenario)
    (out / "handheld.csv").write_text(write_survey_csv(hand.survey))
    (out / "robot.csv").write_text(write_survey_csv(robot.survey))
    (out / "truth.asc").write_text(write_ascii_grid(Raster(truth.grid, truth.values)))
    info = {
        "scenario": scenario.to_dict(),
        "truth": field_summary(truth),
        "robot_bias_msm": robot.bias_msm,
        "samples": {"handheld": len(hand.survey), "robot": len(robot.survey)},
        "dropped": {"handheld": hand.dropped, "robot": robot.dropped},
        "ekf_rmse_m": robot.ekf_rmse_m,
    }
    (out / "simulation.json").write_text(dump_json(info))
    print(dump_json(info), end="")
    return 0


def cmd_render(args) -> int:
    out = _out(args)
    r = read_ascii_grid(Path(args.grid).read_text())
    stem = Path(args.grid).stem
    (out / f"{stem}.png").write_bytes(render_map(r, args.classes, scale=args.scale))
    (out / f"{stem}_legend.png").write_bytes(render_legend(r, args.classes))
    return 0


def cmd_pipeline(args) -> int:
    cfg = PipelineConfig.load(args.config)
    if args.seed is not None:
        cfg.seed = args.seed
    if args.out:
        cfg.out_dir = args.out
    if args.cell_size is not None:
        cfg.cell_size_m = args.cell_size
    if args.classes is not None:
        cfg.n_classes = args.classes
    if args.no_screen:
        cfg.screen = False
    if args.offset is not None:
        for name in cfg.surveys:
            if name != cfg.reference:
                cfg.bias[name] = {"mode": "offset", "value": args.offset}
    try:
        report = run_pipeline(cfg)
    except PipelineError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    print(dump_json({"comparison": report.get("comparison"), "files": report["files"]}), end="")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="ecasurvey", description=__doc__)
    sub = p.add_subparsers(dest="command", required=True)

    def add(name, fn, help_):
        sp = sub.add_parser(name, help=help_)
        sp.set_defaults(func=fn)
        sp.add_argument("--out", default="out", help="output directory")
        return sp

    sp = add("ingest", cmd_ingest, "parse a survey log (or sync an ECa stream with poses)")
    sp.add_argument("log")
    sp.add_argument("--poses", help="pose CSV; LOG is then a timestamp,eca_msm stream")
    sp.add_argument("--max-gap", type=float, default=0.5)
    sp.add_argument("--source", default="handheld", choices=["handheld", "robot", "simulated"])

    sp = add("screen", cmd_screen, "log-domain 2.5-sigma outlier screening")
    sp.add_argument("log")
    sp.add_argument("--source", default="handheld", choices=["handheld", "robot", "simulated"])

    sp = add("calibrate", cmd_calibrate, "paired offset and interference profile")
    sp.add_argument("--a", help="reference survey CSV")
    sp.add_argument("--b", help="biased survey CSV")
    sp.add_argument("--width", type=float, default=1.0, help="along-path bin width (m)")
    sp.add_argument("--table", help="interference table CSV (default: bundled fixture)")
    sp.add_argument("--theta", type=float, default=0.0)
    sp.add_argument("--d-h-mm", type=float, default=235.0)

    for name, fn, help_ in (("variogram", cmd_variogram, "empirical variogram + fit"),
                            ("krige", cmd_krige, "simple kriging to an ASCII grid")):
        sp = add(name, fn, help_)
        sp.add_argument("log")
        sp.add_argument("--bin-width", type=float, default=1.0)
        sp.add_argument("--max-lag", type=float, default=25.0)
        if name == "krige":
            sp.add_argument("--model", help="variogram model JSON (default: auto-fit)")
            sp.add_argument("--cell-size", type=float, default=0.5)
            sp.add_argument("--bounds", type=float, nargs=4, metavar=("XMIN", "YMIN", "XMAX", "YMAX"))
            sp.add_argument("-k", type=int, default=32)

    sp = add("compare", cmd_compare, "pixel correlation and stats of two grids")
    sp.add_argument("a")
    sp.add_argument("b")

    sp = add("simulate", cmd_simulate, "simulate handheld and robot surveys of a synthetic field")
    sp.add_argument("--config", help="scenario JSON")
    sp.add_argument("--seed", type=int)

    sp = add("render", cmd_render, "quantile-classed PNG of an ASCII grid")
    sp.add_argument("grid")
    sp.add_argument("--classes", type=int, default=5)
    sp.add_argument("--scale", type=int, default=8)

    sp = sub.add_parser("pipeline", help="run every stage from a JSON config")
    sp.set_defaults(func=cmd_pipeline)
    sp.add_argument("--config", required=True)
    sp.add_argument("--out")
    sp.add_argument("--seed", type=int)
    sp.add_argument("--cell-size", type=float)
    sp.add_argument("--offset", type=float, help="fixed bias for every non-reference survey")
    sp.add_argument("--classes", type=int)
    sp.add_argument("--no-screen", action="store_true")
    return p


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, RuntimeError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

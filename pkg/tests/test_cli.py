import json
from pathlib import Path

import pytest

from ecasurvey.cli import main
from ecasurvey.geocore import GridSpec, PlanarPoint, read_ascii_grid
from ecasurvey.geostat import VariogramModel
from ecasurvey.pipeline import PipelineConfig, PipelineError, run_pipeline

DATA = Path(__file__).parent / "data"

SMALL = {
    "truth": {"grid": GridSpec(PlanarPoint(0, 0), 1.0, 20, 12).to_dict(),
              "model": VariogramModel(0.2, 4.0, 6.0).to_dict(), "mean_msm": 19.0, "seed": 2},
    "row_spacing_m": 3.0,
}


@pytest.fixture(scope="module")
def simulated(tmp_path_factory):
    d = tmp_path_factory.mktemp("sim")
    cfg = d / "scenario.json"
    cfg.write_text(json.dumps(SMALL))
    assert main(["simulate", "--config", str(cfg), "--seed", "4", "--out", str(d)]) == 0
    return d


def test_simulate_outputs(simulated):
    info = json.loads((simulated / "simulation.json").read_text())
    assert info["scenario"]["seed"] == 4
    assert info["samples"]["robot"] > info["samples"]["handheld"]
    truth = read_ascii_grid((simulated / "truth.asc").read_text())
    assert truth.spec.shape == (12, 20)


def test_ingest_and_screen(tmp_path, capsys):
    log = DATA / "handheld_461.csv"
    assert main(["ingest", str(log), "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "parse_handheld_461.json").read_text())
    assert summary["rows_ok"] == 461
    assert main(["screen", str(log), "--out", str(tmp_path)]) == 0
    rep = json.loads((tmp_path / "screening_handheld_461.json").read_text())
    kept = (tmp_path / "screened_handheld_461.csv").read_text().count("\n")
    assert rep["n_input"] == 461
    assert kept == 461 - rep["n_removed"] + 1 + 2  # header and metadata lines


def test_ingest_with_poses(tmp_path):
    eca = tmp_path / "eca.csv"
    eca.write_text("timestamp,eca_msm\n0.5,20.0\n1.5,21.0\n9.0,22.0\n")
    poses = tmp_path / "poses.csv"
    poses.write_text("timestamp,lat,lon,heading_rad\n0,33.9735,-117.3195,0\n1,33.97351,-117.3195,0\n"
                     "2,33.97352,-117.3195,0\n")
    assert main(["ingest", str(eca), "--poses", str(poses), "--out", str(tmp_path)]) == 0
    summary = json.loads((tmp_path / "parse_eca.json").read_text())
    assert summary == {"rows_total": 3, "rows_ok": 2, "dropped": 1}


def test_calibrate_default_table(tmp_path, capsys):
    assert main(["calibrate", "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "calibration.json").read_text())
    assert res["bias_at_mount_msm"] == pytest.approx(251 / 19)


def test_calibrate_paired(simulated, tmp_path):
    assert main(["calibrate", "--a", str(simulated / "handheld.csv"),
                 "--b", str(simulated / "robot.csv"), "--out", str(tmp_path)]) == 0
    res = json.loads((tmp_path / "calibration.json").read_text())
    assert res["paired"]["n_pairs"] >= 2


def test_variogram_krige_render_compare(simulated, tmp_path, capsys):
    log = str(simulated / "handheld.csv")
    assert main(["variogram", log, "--out", str(tmp_path), "--max-lag", "10"]) == 0
    model = json.loads((tmp_path / "variogram_handheld.json").read_text())["model"]
    assert model["range_m"] > 0
    (tmp_path / "model.json").write_text(json.dumps(model))
    args = ["--out", str(tmp_path), "--cell-size", "1.0", "--bounds", "0", "0", "20", "12"]
    assert main(["krige", log, "--model", str(tmp_path / "model.json")] + args) == 0
    grid = tmp_path / "map_handheld.asc"
    r = read_ascii_grid(grid.read_text())
    assert r.spec.shape == (12, 20)
    assert main(["render", str(grid), "--out", str(tmp_path), "--scale", "4"]) == 0
    assert (tmp_path / "map_handheld.png").read_bytes()[:8] == b"\x89PNG\r\n\x1a\n"
    capsys.readouterr()
    assert main(["compare", str(grid), str(grid)]) == 0
    assert json.loads(capsys.readouterr().out)["pearson_r"] == pytest.approx(1.0)


def _pipeline_config(simulated, out, **extra):
    d = {"surveys": {"handheld": "handheld.csv", "robot": "robot.csv"},
         "sources": {"robot": "robot"},
         "bounds": [0, 0, 20, 12], "cell_size_m": 1.0, "out_dir": str(out),
         "bias": {"robot": {"mode": "profile"}}}
    d.update(extra)
    p = simulated / f"pipeline_{out.name}.json"
    p.write_text(json.dumps(d))
    return p


def test_pipeline_cli(simulated, tmp_path, capsys):
    cfg = _pipeline_config(simulated, tmp_path / "run")
    assert main(["pipeline", "--config", str(cfg)]) == 0
    out = tmp_path / "run"
    report = json.loads((out / "report.json").read_text())
    expected = {"variogram_handheld.json", "map_handheld.asc", "map_handheld_variance.asc",
                "points_handheld.geojson", "map_handheld.png", "map_handheld_legend.png",
                "report.json"}
    assert expected <= set(report["files"])
    assert all((out / f).exists() for f in report["files"])
    assert report["surveys"]["robot"]["bias"]["offset_msm"] == pytest.approx(251 / 19)
    assert report["comparison"]["handheld__robot"]["pearson_r"] > 0.5
    gj = json.loads((out / "points_robot.geojson").read_text())
    assert gj["type"] == "FeatureCollection"


def test_pipeline_overrides(simulated, tmp_path):
    cfg = _pipeline_config(simulated, tmp_path / "base")
    out = tmp_path / "override"
    assert main(["pipeline", "--config", str(cfg), "--out", str(out), "--offset", "10",
                 "--no-screen", "--classes", "4"]) == 0
    report = json.loads((out / "report.json").read_text())
    assert report["surveys"]["robot"]["bias"] == {"mode": "offset", "offset_msm": 10.0,
                                                  "nonpositive_warnings": 0}
    assert report["surveys"]["robot"]["screening"] is None
    assert len(report["surveys"]["robot"]["quantile_breaks_msm"]) == 3


def test_pipeline_error_names_stage(simulated, tmp_path, capsys):
    cfg = _pipeline_config(simulated, tmp_path / "bad", surveys={"a": "missing.csv"})
    assert main(["pipeline", "--config", str(cfg)]) == 2
    assert "ingest" in capsys.readouterr().err
    report = json.loads((tmp_path / "bad" / "report.json").read_text())
    assert report["error"]["stage"] == "ingest"
    with pytest.raises(PipelineError) as exc:
        run_pipeline(PipelineConfig.load(cfg))
    assert exc.value.stage == "ingest"


def test_pipeline_config_rejects_unknown_keys():
    with pytest.raises(ValueError, match="unknown"):
        PipelineConfig.from_dict({"surveys": {"a": "a.csv"}, "colour": "red"})


def test_cli_reports_bad_input(tmp_path, capsys):
    bad = tmp_path / "bad.csv"
    bad.write_text("timestamp,lat,lon\n1,2,3\n")
    assert main(["screen", str(bad), "--out", str(tmp_path)]) == 1
    assert "eca_msm" in capsys.readouterr().err

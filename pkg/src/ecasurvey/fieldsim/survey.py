"""Sensor model, scenario configuration and end-to-end virtual surveys."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from ..calibration import (
    InterferenceProfile,
    SensorMountConfig,
    bias_at,
    interference_profile,
    load_profile_table,
)
from ..geocore import GeoPoint, GridSpec, PlanarPoint, unproject
from ..geostat.variogram import VariogramModel
from ..ingest import ECA_MAX_MSM, ECA_MIN_MSM, PoseSample, Source, Survey, sync_streams
from .drive import DriveConfig, DriveLog, simulate_drive
from .ekf import EkfNoise, PoseEstimate, ekf_fuse
from .field import FieldTruth, generate_field
from .planning import plan_serpentine

# 33°58'24.5"N 117°19'10.3"W
SITE_DATUM = GeoPoint(33.973472, -117.319528)

# stream ids for per-purpose RNGs
_DRIVE, _SENSOR = 1, 2
_MODES = {"handheld": 0, "robot": 1}


def sense_eca(
    truth: FieldTruth,
    x: float,
    y: float,
    bias_msm: float,
    noise_sd: float,
    rng: np.random.Generator | None,
) -> tuple[float, bool]:
    """Simulated reading: truth + additive mount bias + Gaussian noise.

    Returns the reading clamped to the sensor range and whether any clamp
    (position or value) was applied.
    """
    value, pos_clamped = truth.sample(x, y)
    value += bias_msm
    if noise_sd > 0 and rng is not None:
        value += rng.normal(0.0, noise_sd)
    clipped = min(max(value, ECA_MIN_MSM), ECA_MAX_MSM)
    return clipped, pos_clamped or clipped != value


@dataclass(frozen=True)
class TruthConfig:
    grid: GridSpec = field(default_factory=lambda: GridSpec(PlanarPoint(0.0, 0.0), 1.0, 50, 30))
    model: VariogramModel = VariogramModel(0.2, 4.0, 8.0)
    mean_msm: float = 19.0
    seed: int = 0


@dataclass(frozen=True)
class SimScenario:
    truth: TruthConfig = TruthConfig()
    mount: SensorMountConfig = SensorMountConfig.rosbot()
    theta_profile_deg: float = 0.0
    sensor_noise_sd: float = 0.0       # mS/m, absolute part
    sensor_noise_rel: float = 0.04     # fraction of the reading
    gnss_noise_sd_m: float = 0.3
    odom_v_sd: float = 0.02
    odom_omega_sd: float = 0.02
    gnss_rate_hz: float = 1.0
    sample_rate_hz: float = 2.0
    speed_mps: float = 0.5             # robot
    handheld_speed_mps: float = 1.25
    row_spacing_m: float = 3.0
    margin_m: float = 1.0
    dt_s: float = 0.02
    datum: GeoPoint = SITE_DATUM
    seed: int = 0

    def __post_init__(self):
        if min(self.sample_rate_hz, self.speed_mps, self.handheld_speed_mps,
               self.gnss_rate_hz, self.dt_s, self.row_spacing_m) <= 0:
            raise ValueError("rates, speeds and spacings must be positive")
        if min(self.sensor_noise_sd, self.sensor_noise_rel, self.gnss_noise_sd_m,
               self.odom_v_sd, self.odom_omega_sd) < 0:
            raise ValueError("noise levels must be non-negative")

    def profile(self) -> InterferenceProfile:
        return interference_profile(load_profile_table(), self.theta_profile_deg)

    def robot_bias(self) -> float:
        return bias_at(self.profile(), self.mount)

    def drive_config(self, robot: bool) -> DriveConfig:
        return DriveConfig(
            dt_s=self.dt_s,
            odom_v_sd=self.odom_v_sd if robot else 0.0,
            odom_omega_sd=self.odom_omega_sd if robot else 0.0,
            gnss_sd_m=self.gnss_noise_sd_m,
            gnss_rate_hz=self.gnss_rate_hz,
        )

    def to_dict(self) -> dict:
        t = self.truth
        return {
            "truth": {"grid": t.grid.to_dict(), "model": t.model.to_dict(),
                      "mean_msm": t.mean_msm, "seed": t.seed},
            "mount": self.mount.to_dict(),
            "datum": [self.datum.latitude_deg, self.datum.longitude_deg],
            **{k: v for k, v in asdict(self).items()
               if k not in ("truth", "mount", "datum")},
        }

    @classmethod
    def from_dict(cls, d: dict) -> "SimScenario":
        d = dict(d)
        kw = {}
        if "truth" in d:
            t = d.pop("truth")
            base = TruthConfig()
            kw["truth"] = TruthConfig(
                GridSpec.from_dict(t["grid"]) if "grid" in t else base.grid,
                VariogramModel.from_dict(t["model"]) if "model" in t else base.model,
                float(t.get("mean_msm", base.mean_msm)),
                int(t.get("seed", base.seed)),
            )
        if "mount" in d:
            kw["mount"] = SensorMountConfig.from_dict(d.pop("mount"))
        if "datum" in d:
            kw["datum"] = GeoPoint(*map(float, d.pop("datum")))
        return cls(**kw, **d)

    @classmethod
    def from_json(cls, text: str) -> "SimScenario":
        return cls.from_dict(json.loads(text))


@dataclass
class VirtualSurvey:
    survey: Survey
    drive: DriveLog
    true_xy: np.ndarray       # true sensor position per emitted sample
    bias_msm: float
    dropped: int
    clamped: int
    ekf_rmse_m: float | None = None


def _field_bounds(truth: FieldTruth) -> tuple[float, float, float, float]:
    g = truth.grid
    return (g.origin.x_m, g.origin.y_m, g.x_max, g.y_max)


def run_virtual_survey(
    scenario: SimScenario,
    use_robot: bool,
    truth: FieldTruth | None = None,
) -> VirtualSurvey:
    """Plan, drive, localize and sense one survey of the scenario's field.

    The robot reports EKF-fused positions and carries the mount bias; the
    handheld survey reports raw GNSS fixes and has no bias.
    """
    if truth is None:
        t = scenario.truth
        truth = generate_field(t.grid, t.model, t.mean_msm, t.seed)
    mode = _MODES["robot" if use_robot else "handheld"]
    drive_rng = np.random.default_rng([scenario.seed, mode, _DRIVE])
    sensor_rng = np.random.default_rng([scenario.seed, mode, _SENSOR])

    plan = plan_serpentine(_field_bounds(truth), scenario.row_spacing_m, scenario.margin_m)
    speed = scenario.speed_mps if use_robot else scenario.handheld_speed_mps
    log = simulate_drive(plan, speed, scenario.drive_config(use_robot), drive_rng)

    ekf_rmse = None
    if use_robot:
        start = log.truth[0]
        P0 = np.diag([scenario.gnss_noise_sd_m ** 2 + 1e-6] * 2 + [0.05])
        tr = ekf_fuse(log.t, log.odom, log.gnss_t, log.gnss_xy, PoseEstimate(start, P0),
                      EkfNoise(scenario.odom_v_sd, scenario.odom_omega_sd,
                               max(scenario.gnss_noise_sd_m, 1e-3)))
        pose_t, pose_xy, pose_h = tr.t, tr.mean[:, :2], tr.mean[:, 2]
        ekf_rmse = float(np.sqrt(np.mean(np.sum((pose_xy - log.truth[:, :2]) ** 2, axis=1))))
        max_gap = 2.0 * scenario.dt_s
        bias = bias_at(scenario.profile(), scenario.mount)
        source = Source.ROBOT
    else:
        pose_t, pose_xy, pose_h = log.gnss_t, log.gnss_xy, None
        max_gap = 1.0 / scenario.gnss_rate_hz
        bias = 0.0
        source = Source.HANDHELD

    # ECa samples at the logger rate; truth position by interpolating the step trace
    period = 1.0 / scenario.sample_rate_hz
    n_samples = int(math.floor(log.duration_s / period + 1e-9)) + 1
    st = log.t[0] + np.arange(n_samples) * period
    sx = np.interp(st, log.t, log.truth[:, 0])
    sy = np.interp(st, log.t, log.truth[:, 1])
    readings = []
    clamped = 0
    for k in range(n_samples):
        expected = truth.sample(sx[k], sy[k])[0] + bias
        noise_sd = math.hypot(scenario.sensor_noise_sd, scenario.sensor_noise_rel * expected)
        val, c = sense_eca(truth, sx[k], sy[k], bias, noise_sd, sensor_rng)
        clamped += c
        readings.append((float(st[k]), val))

    datum = scenario.datum
    poses = [
        PoseSample(float(pose_t[i]),
                   unproject(datum, PlanarPoint(float(pose_xy[i, 0]), float(pose_xy[i, 1]))),
                   None if pose_h is None else float(pose_h[i]))
        for i in range(len(pose_t))
    ]
    meta = {
        "mode": source.value,
        "speed_mps": repr(speed),
        "sample_rate_hz": repr(scenario.sample_rate_hz),
        "seed": str(scenario.seed),
        "datum": f"{datum.latitude_deg!r},{datum.longitude_deg!r}",
    }
    survey, dropped = sync_streams(readings, poses, max_gap, source, meta)
    kept_t = {r.timestamp for r in survey.records}
    mask = np.array([t in kept_t for t in st])
    return VirtualSurvey(survey, log, np.column_stack([sx, sy])[mask], bias,
                         dropped, clamped, ekf_rmse)


def twin_surveys(scenario: SimScenario) -> tuple[FieldTruth, VirtualSurvey, VirtualSurvey]:
    """Handheld and robot surveys over one shared truth field."""
    t = scenario.truth
    truth = generate_field(t.grid, t.model, t.mean_msm, t.seed)
    return truth, run_virtual_survey(scenario, False, truth), run_virtual_survey(scenario, True, truth)


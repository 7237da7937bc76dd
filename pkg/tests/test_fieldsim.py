import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from ecasurvey.calibration import SensorMountConfig
from ecasurvey.fieldsim import (
    DriveConfig,
    GenerationError,
    RobotState,
    SimScenario,
    SimulationError,
    TruthConfig,
    arc_step,
    generate_field,
    integrate_open_loop,
    plan_serpentine,
    run_virtual_survey,
    sense_eca,
    simulate_drive,
    twin_surveys,
)
from ecasurvey.geocore import GridSpec, PlanarPoint
from ecasurvey.geostat import VariogramModel

SMALL = TruthConfig(GridSpec(PlanarPoint(0, 0), 1.0, 20, 12), VariogramModel(0.2, 4.0, 6.0), 19.0, 3)


def _small_scenario(**kw):
    base = dict(truth=SMALL, row_spacing_m=3.0, sensor_noise_rel=0.0)
    base.update(kw)
    return SimScenario(**base)


def test_zero_sill_field_is_constant():
    g = GridSpec(PlanarPoint(0, 0), 1.0, 5, 4)
    f = generate_field(g, VariogramModel(0.0, 0.0, 1.0), 19.0, 0)
    assert (f.values == 19.0).all()


def test_field_is_deterministic():
    g = GridSpec(PlanarPoint(0, 0), 1.0, 10, 10)
    m = VariogramModel(0.5, 4.5, 8.0)
    a, b = generate_field(g, m, 0.0, 42), generate_field(g, m, 0.0, 42)
    assert np.array_equal(a.values, b.values)
    assert not np.array_equal(a.values, generate_field(g, m, 0.0, 43).values)


def test_field_variance_near_sill():
    # one realization of a 64 x 64 field with a short range
    g = GridSpec(PlanarPoint(0, 0), 1.0, 64, 64)
    f = generate_field(g, VariogramModel(0.5, 4.5, 2.0), 0.0, 0)
    assert f.values.var(ddof=1) == pytest.approx(5.0, rel=0.15)


def test_field_size_limit():
    with pytest.raises(GenerationError):
        generate_field(GridSpec(PlanarPoint(0, 0), 1.0, 101, 100), VariogramModel(0, 1, 1), 0, 0)


def test_bilinear_sampling():
    g = GridSpec(PlanarPoint(0, 0), 1.0, 2, 2)
    f = generate_field(g, VariogramModel(0.0, 1.0, 1.0), 0.0, 1)
    v = f.values
    assert f.sample(0.5, 0.5) == (pytest.approx(v[0, 0]), False)
    assert f.sample(1.0, 1.0)[0] == pytest.approx(v.mean())
    val, clamped = f.sample(-3.0, 0.5)
    assert clamped and val == pytest.approx(v[0, 0])


def test_serpentine_six_rows():
    wp = plan_serpentine((0, 0, 50, 30), 5.0, 1.0)
    assert len(wp) == 12
    ys = wp[::2, 1]
    assert ys.tolist() == pytest.approx(np.linspace(1, 29, 6).tolist())
    for i in range(6):
        a, b = wp[2 * i], wp[2 * i + 1]
        assert a[1] == b[1]
        assert (b[0] > a[0]) == (i % 2 == 0)
    gaps = np.hypot(*np.diff(wp, axis=0).T)
    assert gaps.max() <= 48 + 28 / 5 + 1e-9


def test_serpentine_single_row():
    wp = plan_serpentine((0, 0, 50, 4), 10.0, 1.0)
    assert wp.tolist() == [[1.0, 2.0], [49.0, 2.0]]


def test_serpentine_tall_field_runs_along_y():
    wp = plan_serpentine((0, 0, 10, 40), 4.0, 1.0)
    assert wp[0, 0] == wp[1, 0]


def test_straight_line_closed_form():
    s = integrate_open_loop(RobotState(0.0, 0.0, 0.0), 0.7, 0.0, 10.0)
    assert s.x_m == pytest.approx(7.0, abs=1e-9) and abs(s.y_m) < 1e-12


@given(st.floats(0.1, 2.0), st.floats(-1.5, 1.5).filter(lambda w: abs(w) > 1e-3),
       st.floats(0.5, 20.0))
def test_arc_matches_circle(v, w, t):
    s = integrate_open_loop(RobotState(0.0, 0.0, 0.0), v, w, t)
    r = v / w
    assert s.x_m == pytest.approx(r * math.sin(w * t), abs=1e-6)
    assert s.y_m == pytest.approx(r * (1 - math.cos(w * t)), abs=1e-6)
    assert -math.pi < s.heading_rad <= math.pi


def test_arc_step_straight_limit():
    x, y, th = arc_step(0.0, 0.0, 0.3, 1.0, 1e-14, 2.0)
    assert (x, y) == pytest.approx((2 * math.cos(0.3), 2 * math.sin(0.3)))


def test_drive_reaches_all_waypoints():
    plan = plan_serpentine((0, 0, 20, 10), 4.0, 1.0)
    log = simulate_drive(plan, 0.5, DriveConfig(), np.random.default_rng(0))
    assert np.hypot(*(log.truth[-1, :2] - plan[-1])) <= 0.3
    # GNSS at 1 Hz over the run
    assert len(log.gnss_t) == pytest.approx(log.duration_s + 1, abs=1)


def test_drive_timeout_names_waypoint():
    cfg = DriveConfig(max_omega_rps=1e-6, timeout_slack_s=1.0)
    plan = np.array([[0.0, 0.0], [5.0, 0.0], [5.0, 5.0]])
    with pytest.raises(SimulationError, match="waypoint"):
        simulate_drive(plan, 0.5, cfg, np.random.default_rng(0))


def test_sense_handheld_exact():
    f = generate_field(SMALL.grid, SMALL.model, 19.0, 0)
    val, flag = sense_eca(f, 3.3, 4.4, 0.0, 0.0, None)
    assert val == f.sample(3.3, 4.4)[0] and not flag


def test_sense_robot_bias():
    f = generate_field(SMALL.grid, SMALL.model, 19.0, 0)
    bias = SimScenario().robot_bias()
    assert bias == pytest.approx(251 / 19)
    val, _ = sense_eca(f, 3.3, 4.4, bias, 0.0, None)
    assert val == pytest.approx(f.sample(3.3, 4.4)[0] + 251 / 19)


@given(st.floats(-2000, 2000), st.floats(0, 500))
def test_sense_range(bias, sd):
    f = generate_field(GridSpec(PlanarPoint(0, 0), 1.0, 3, 3), VariogramModel(0, 1, 1), 19, 0)
    val, _ = sense_eca(f, 1.0, 1.0, bias, sd, np.random.default_rng(0))
    assert 0.0 <= val <= 1000.0


def test_scenario_json_round_trip():
    s = _small_scenario(seed=9, mount=SensorMountConfig(300.0))
    assert SimScenario.from_dict(s.to_dict()) == s


def test_scenario_validation():
    with pytest.raises(ValueError):
        SimScenario(speed_mps=0.0)
    with pytest.raises(ValueError):
        SimScenario(gnss_noise_sd_m=-1.0)


def test_handheld_zero_noise_equals_truth():
    s = _small_scenario(gnss_noise_sd_m=0.0)
    truth = generate_field(SMALL.grid, SMALL.model, SMALL.mean_msm, SMALL.seed)
    vs = run_virtual_survey(s, False, truth)
    expect = [truth.sample(x, y)[0] for x, y in vs.true_xy]
    assert vs.survey.values == pytest.approx(expect, abs=1e-12)


def test_robot_mean_carries_bias():
    s = _small_scenario(sensor_noise_rel=0.04, sample_rate_hz=4.0)
    _, hand, robot = twin_surveys(s)
    assert len(robot.survey) >= 500
    gap = np.mean(robot.survey.values) - np.mean(hand.survey.values)
    assert gap == pytest.approx(robot.bias_msm, rel=0.02)


def test_slower_speed_more_samples():
    s = _small_scenario()
    _, hand, robot = twin_surveys(s)
    ratio = len(robot.survey) / len(hand.survey)
    assert ratio == pytest.approx(s.handheld_speed_mps / s.speed_mps, rel=0.15)


def test_virtual_survey_deterministic():
    s = _small_scenario(seed=5)
    a = run_virtual_survey(s, True)
    b = run_virtual_survey(s, True)
    assert a.survey == b.survey

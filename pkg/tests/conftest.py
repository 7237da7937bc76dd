import numpy as np
import pytest

from ecasurvey.fieldsim import (
    DriveConfig,
    EkfNoise,
    PoseEstimate,
    dead_reckon,
    ekf_fuse,
    plan_serpentine,
    simulate_drive,
)


def localization_run(seed: int, duration_s: float = 100.0, gnss_sd: float = 0.3):
    """Drive the 50 x 30 m serpentine for ``duration_s`` and localize it two ways.

    Returns (truth xy, EKF trace, dead-reckoned poses) on the shared step times.
    """
    cfg = DriveConfig(gnss_sd_m=gnss_sd, gnss_rate_hz=1.0)
    plan = plan_serpentine((0, 0, 50, 30), 3.0, 1.0)
    log = simulate_drive(plan, 0.5, cfg, np.random.default_rng(seed))
    n = int(round(duration_s / cfg.dt_s)) + 1
    assert len(log.t) >= n, "plan too short for the requested duration"
    t, odom = log.t[:n], log.odom[:n]
    g = log.gnss_t <= t[-1]
    start = log.truth[0]
    P0 = np.diag([gnss_sd ** 2 + 1e-6, gnss_sd ** 2 + 1e-6, 0.05])
    trace = ekf_fuse(t, odom, log.gnss_t[g], log.gnss_xy[g], PoseEstimate(start, P0),
                     EkfNoise(cfg.odom_v_sd, cfg.odom_omega_sd, max(gnss_sd, 1e-3)))
    dr_log = type(log)(t, log.truth[:n], odom, log.gnss_t[g], log.gnss_xy[g])
    return log.truth[:n, :2], trace, dead_reckon(dr_log, tuple(start))


def rmse(a, b):
    return float(np.sqrt(np.mean(np.sum((np.asarray(a) - np.asarray(b)) ** 2, axis=1))))


@pytest.fixture(scope="session")
def ekf_run_seed0():
    return localization_run(0)


ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])

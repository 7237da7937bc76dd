"""Unicycle robot kinematics with a pure-pursuit waypoint follower."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..ingest import wrap_angle


class SimulationError(RuntimeError):
    pass


@dataclass
class RobotState:
    x_m: float
    y_m: float
    heading_rad: float
    v_mps: float = 0.0
    omega_rps: float = 0.0

    def __post_init__(self):
        self.heading_rad = wrap_angle(self.heading_rad)


@dataclass(frozen=True)
class DriveConfig:
    dt_s: float = 0.02
    capture_radius_m: float = 0.3
    lookahead_m: float = 0.5
    max_omega_rps: float = 2.0
    odom_v_sd: float = 0.02      # m/s
    odom_omega_sd: float = 0.02  # rad/s
    gnss_sd_m: float = 0.3
    gnss_rate_hz: float = 1.0
    timeout_factor: float = 3.0
    timeout_slack_s: float = 30.0


@dataclass
class DriveLog:
    """Time-stamped streams from one run.

    ``t`` and ``truth`` (x, y, heading) are sampled every integration step;
    odometry shares those timestamps and carries the (v, omega) applied over
    the step that ends there. GNSS fixes are a subsequence of the step times.
    """

    t: np.ndarray
    truth: np.ndarray
    odom: np.ndarray
    gnss_t: np.ndarray
    gnss_xy: np.ndarray

    @property
    def duration_s(self) -> float:
        return float(self.t[-1] - self.t[0])


def arc_step(x: float, y: float, th: float, v: float, w: float, dt: float):
    """Exact pose after driving at constant (v, w) for dt."""
    if abs(w) < 1e-12:
        return x + v * dt * math.cos(th), y + v * dt * math.sin(th), th
    th2 = th + w * dt
    r = v / w
    return x + r * (math.sin(th2) - math.sin(th)), y - r * (math.cos(th2) - math.cos(th)), th2


def integrate_open_loop(state: RobotState, v: float, omega: float, duration_s: float,
                        dt_s: float = 0.02) -> RobotState:
    x, y, th = state.x_m, state.y_m, state.heading_rad
    n = int(math.floor(duration_s / dt_s + 1e-9))
    for _ in range(n):
        x, y, th = arc_step(x, y, th, v, omega, dt_s)
    rem = duration_s - n * dt_s
    if rem > 0:
        x, y, th = arc_step(x, y, th, v, omega, rem)
    return RobotState(x, y, th, v, omega)


def _pursuit_omega(x, y, th, a, b, lookahead, v, max_w):
    """Steer toward the point ``lookahead`` ahead of our projection on segment a->b."""
    ab = b - a
    seg = float(np.hypot(*ab))
    if seg < 1e-9:
        tx, ty = b
    else:
        u = ab / seg
        s = float((x - a[0]) * u[0] + (y - a[1]) * u[1])
        s = min(max(s, 0.0) + lookahead, seg)
        tx, ty = a + u * s
    alpha = wrap_angle(math.atan2(ty - y, tx - x) - th)
    ld = max(math.hypot(tx - x, ty - y), 1e-6)
    w = 2.0 * v * math.sin(alpha) / ld
    return min(max(w, -max_w), max_w)


def simulate_drive(
    plan: np.ndarray,
    speed_mps: float,
    cfg: DriveConfig,
    rng: np.random.Generator,
    t0: float = 0.0,
) -> DriveLog:
    """Drive the waypoint plan from its first waypoint, facing the second.

    Odometry is the commanded (v, omega) plus Gaussian noise; GNSS fixes
    are the true position plus isotropic Gaussian noise at ``gnss_rate_hz``.
    """
    plan = np.asarray(plan, dtype=float).reshape(-1, 2)
    if len(plan) == 0:
        raise SimulationError("empty plan")
    if not speed_mps > 0:
        raise ValueError("speed must be positive")
    dt = cfg.dt_s
    x, y = plan[0]
    th = math.atan2(plan[1, 1] - y, plan[1, 0] - x) if len(plan) > 1 else 0.0
    gnss_every = max(1, int(round(1.0 / (cfg.gnss_rate_hz * dt))))

    ts = [t0]
    truth = [(x, y, th)]
    odom = [(0.0, 0.0)]
    target = 1
    step = 0
    seg_start = 0
    while target < len(plan):
        a, b = plan[target - 1], plan[target]
        limit = (cfg.timeout_factor * float(np.hypot(*(b - a))) / speed_mps
                 + cfg.timeout_slack_s)
        if (step - seg_start) * dt > limit:
            raise SimulationError(f"waypoint {target} {tuple(b)} not reached")
        w = _pursuit_omega(x, y, th, a, b, cfg.lookahead_m, speed_mps, cfg.max_omega_rps)
        x, y, th = arc_step(x, y, th, speed_mps, w, dt)
        th = wrap_angle(th)
        step += 1
        ts.append(t0 + step * dt)
        truth.append((x, y, th))
        odom.append((speed_mps, w))
        if math.hypot(b[0] - x, b[1] - y) <= cfg.capture_radius_m:
            target += 1
            seg_start = step
    t = np.array(ts)
    truth_a = np.array(truth)
    odom_a = np.array(odom)
    odom_a[1:, 0] += rng.normal(0.0, cfg.odom_v_sd, len(t) - 1) if cfg.odom_v_sd else 0.0
    odom_a[1:, 1] += rng.normal(0.0, cfg.odom_omega_sd, len(t) - 1) if cfg.odom_omega_sd else 0.0
    gi = np.arange(0, len(t), gnss_every)
    gnss_xy = truth_a[gi, :2].copy()
    if cfg.gnss_sd_m:
        gnss_xy += rng.normal(0.0, cfg.gnss_sd_m, gnss_xy.shape)
    return DriveLog(t, truth_a, odom_a, t[gi].copy(), gnss_xy)


def dead_reckon(log: DriveLog, start: tuple[float, float, float]) -> np.ndarray:
    """Integrate odometry alone from a known start pose."""
    out = np.empty((len(log.t), 3))
    x, y, th = start
    out[0] = start
    for i in range(1, len(log.t)):
        dt = log.t[i] - log.t[i - 1]
        x, y, th = arc_step(x, y, th, log.odom[i, 0], log.odom[i, 1], dt)
        out[i] = (x, y, wrap_angle(th))
    return out

"""Extended Kalman filter fusing wheel/IMU odometry with GNSS positions.

State is the planar pose (x, y, heading). Prediction uses the exact
constant-(v, omega) arc over each odometry interval; updates use the GNSS
position through the linear 2x3 measurement H = [I 0].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from ..ingest import wrap_angle
from .drive import arc_step

H = np.array([[1.0, 0.0, 0.0], [0.0, 1.0, 0.0]])


class FilterDivergenceError(RuntimeError):
    pass


@dataclass(frozen=True)
class PoseEstimate:
    mean: np.ndarray
    covariance: np.ndarray

    def __post_init__(self):
        P = np.asarray(self.covariance, dtype=float)
        if P.shape != (3, 3) or np.abs(P - P.T).max() >= 1e-10:
            raise ValueError("covariance must be a symmetric 3x3 matrix")
        try:
            np.linalg.cholesky(P)
        except np.linalg.LinAlgError as exc:
            raise ValueError("covariance is not positive definite") from exc


@dataclass(frozen=True)
class EkfNoise:
    v_sd: float = 0.02
    omega_sd: float = 0.02
    gnss_sd_m: float = 0.3
    process_floor: float = 1e-9  # keeps P strictly positive definite under exact odometry


@dataclass
class EkfTrace:
    t: np.ndarray
    mean: np.ndarray        # (n, 3)
    covariance: np.ndarray  # (n, 3, 3)
    prior_trace: np.ndarray  # trace(P) before any GNSS update at each step


def _jacobians(th, v, w, dt):
    th_m = th + 0.5 * w * dt
    c, s = math.cos(th_m), math.sin(th_m)
    F = np.array([[1.0, 0.0, -v * dt * s],
                  [0.0, 1.0, v * dt * c],
                  [0.0, 0.0, 1.0]])
    V = np.array([[dt * c, -0.5 * v * dt * dt * s],
                  [dt * s, 0.5 * v * dt * dt * c],
                  [0.0, dt]])
    return F, V


def ekf_fuse(
    odom_t: np.ndarray,
    odom: np.ndarray,
    gnss_t: np.ndarray,
    gnss_xy: np.ndarray,
    initial: PoseEstimate,
    noise: EkfNoise = EkfNoise(),
) -> EkfTrace:
    """Filter over the odometry timeline.

    ``odom[i]`` is the (v, omega) applied over ``(odom_t[i-1], odom_t[i]]``;
    ``odom[0]`` is unused. GNSS fixes falling in that interval are applied
    after the prediction to ``odom_t[i]``; fixes at or before ``odom_t[0]``
    are applied to the initial estimate.
    """
    odom_t = np.asarray(odom_t, dtype=float)
    odom = np.asarray(odom, dtype=float)
    gnss_t = np.asarray(gnss_t, dtype=float)
    gnss_xy = np.asarray(gnss_xy, dtype=float).reshape(-1, 2)
    if np.any(np.diff(odom_t) < 0) or np.any(np.diff(gnss_t) < 0):
        raise ValueError("streams must be time-ordered")
    n = len(odom_t)
    M = np.diag([noise.v_sd ** 2, noise.omega_sd ** 2])
    R = np.eye(2) * noise.gnss_sd_m ** 2
    Qf = np.eye(3) * noise.process_floor
    I3 = np.eye(3)

    mu = np.array(initial.mean, dtype=float)
    P = np.array(initial.covariance, dtype=float)
    means = np.empty((n, 3))
    covs = np.empty((n, 3, 3))
    prior_tr = np.empty(n)
    g = 0
    for i in range(n):
        if i > 0:
            dt = odom_t[i] - odom_t[i - 1]
            v, w = odom[i]
            F, V = _jacobians(mu[2], v, w, dt)
            x, y, th = arc_step(mu[0], mu[1], mu[2], v, w, dt)
            mu = np.array([x, y, wrap_angle(th)])
            P = F @ P @ F.T + V @ M @ V.T + Qf
            P = 0.5 * (P + P.T)
        prior_tr[i] = np.trace(P)
        while g < len(gnss_t) and gnss_t[g] <= odom_t[i]:
            z = gnss_xy[g]
            g += 1
            S = H @ P @ H.T + R
            K = np.linalg.solve(S, H @ P).T
            mu = mu + K @ (z - mu[:2])
            mu[2] = wrap_angle(mu[2])
            A = I3 - K @ H
            P = A @ P @ A.T + K @ R @ K.T
            P = 0.5 * (P + P.T)
        try:
            np.linalg.cholesky(P)
        except np.linalg.LinAlgError as exc:
            raise FilterDivergenceError(f"covariance lost definiteness at step {i}") from exc
        means[i] = mu
        covs[i] = P
    return EkfTrace(odom_t.copy(), means, covs, prior_tr)

"""Per-frame fusion of learned inertial odometry, IMU kinematics and VI odometry.

For camera frame ``k``:

1. the inertial model turns the IMU segment ``k-1 -> k`` into a body-frame
   translation with covariance, rotated into the world by the fused
   orientation of frame ``k-1``;
2. the segment is preintegrated from the same orientation; the heading of
   the integrated orientation is replaced by the compass reading;
3. the window gains a node, slides, and is solved; its newest position is
   the inertial position estimate;
4. the EKF carries the previous fused pose forward by the VI relative
   motion, inflates its covariance, and is corrected by the inertial
   position and the compass-corrected orientation.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import LengthMismatch
from ..geometry import Pose, axis_angle, compose, inverse, quat_mul, quat_to_matrix, yaw_of
from .ekf import EkfState, ekf_propagate, ekf_update
from .preintegration import preintegrate
from .window import NetworkObservation, Window, slide, window_optimize

INNOVATION_COLUMNS = (
    "frame",
    "t",
    "rot_x",
    "rot_y",
    "rot_z",
    "pos_x",
    "pos_y",
    "pos_z",
    "nis",
    "trace_p",
)


@dataclass(frozen=True, eq=False)
class FusedTrajectory:
    t: np.ndarray
    quat: np.ndarray  # (M, 4)
    position: np.ndarray  # (M, 3)
    innovations: list = field(default_factory=list)

    def __len__(self):
        return len(self.t)

    def pose(self, j) -> Pose:
        return Pose(self.quat[j], self.position[j])

    def poses(self):
        return [self.pose(j) for j in range(len(self.t))]


def _imu_indices(imu, times):
    rate = 1.0 / (imu.t[1] - imu.t[0])
    idx = np.rint(np.asarray(times) * rate).astype(int)
    if np.any(idx < 0) or np.any(idx >= len(imu.t)) or not np.allclose(imu.t[idx], times, rtol=0, atol=1e-9):
        raise LengthMismatch("VI timestamps do not fall on IMU samples")
    return idx


def _with_heading(q, heading):
    return quat_mul(axis_angle((0.0, 0.0, 1.0), heading - yaw_of(q)), q)


def fuse_trajectory(vi, imu, model, compass, cfg, imu_noise=None) -> FusedTrajectory:
    """Drift-corrected poses, one per VI frame.

    ``model`` is anything with ``predict(segment) -> GaussianTranslation``
    (a trained network or an oracle); ``cfg`` is a
    :class:`visc.config.FusionConfig`; ``imu_noise`` supplies the per-sample
    sigmas used for the preintegration covariance.
    """
    m = len(vi)
    if len(compass.t) != m:
        raise LengthMismatch("compass and VI streams differ in length")
    if not cfg.use_ekf:
        return FusedTrajectory(vi.t.copy(), vi.quat.copy(), vi.position.copy())

    idx = _imu_indices(imu, vi.t)
    accel_sigma = getattr(imu_noise, "accel_sigma", 0.0)
    gyro_sigma = getattr(imu_noise, "gyro_sigma", 0.0)
    # an exact IMU still gets a small covariance so the normal equations stay finite
    kin_floor = 1e-10 * np.eye(6)

    rot_var = np.radians(cfg.tilt_sigma_deg) ** 2
    R_rot = np.diag([rot_var, rot_var, np.radians(cfg.compass_sigma_deg) ** 2])
    W = np.diag([cfg.process_noise_rot] * 3 + [cfg.process_noise_pos] * 3)
    ekf_propagate(EkfState(Pose.identity(), np.zeros((6, 6))), W)  # validates W once

    quat = np.empty((m, 4))
    pos = np.empty((m, 3))
    quat[0], pos[0] = vi.quat[0], vi.position[0]
    state = EkfState(
        vi.pose(0),
        np.diag([cfg.init_rotation_sigma**2] * 3 + [cfg.init_position_sigma**2] * 3),
    )
    v0 = (vi.position[1] - vi.position[0]) / (vi.t[1] - vi.t[0]) if m > 1 else np.zeros(3)
    window = Window.start(
        cfg.window_size,
        np.concatenate([vi.position[0], v0]),
        np.diag([cfg.init_position_sigma**2] * 3 + [cfg.init_velocity_sigma**2] * 3),
    )
    innovations = []
    vi_prev = vi.pose(0)
    for k in range(1, m):
        seg = imu.segment(idx[k - 1], idx[k])
        q_prev = state.pose.q
        R_prev = quat_to_matrix(q_prev)
        g = model.predict(seg)
        net = NetworkObservation(R_prev @ g.t_hat, R_prev @ g.gamma @ R_prev.T)
        pre = preintegrate(seg, q_prev, accel_sigma, gyro_sigma)
        pre = type(pre)(pre.delta_p, pre.delta_v, pre.delta_R, pre.dt, pre.covariance + kin_floor)
        window = slide(window, net, pre)
        est = window_optimize(window)
        p_inertial = est.positions[-1]
        if cfg.position_cov == "window":
            j = 6 * (window.size - 1)
            pos_cov = est.covariance[j : j + 3, j : j + 3]
        else:
            pos_cov = net.covariance
        q_inertial = _with_heading(quat_mul(q_prev, pre.delta_R), compass.heading[k])

        vi_k = vi.pose(k)
        prior = EkfState(compose(state.pose, compose(inverse(vi_prev), vi_k)), state.cov)
        prior = ekf_propagate(prior, W, validate=False)
        state, info = ekf_update(prior, p_inertial, pos_cov, q_inertial, R_rot, return_info=True)
        vi_prev = vi_k
        quat[k], pos[k] = state.pose.q, state.pose.t
        innovations.append((k, float(vi.t[k]), *info.innovation, info.nis, float(np.trace(state.cov))))
    return FusedTrajectory(vi.t.copy(), quat, pos, innovations)

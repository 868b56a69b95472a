"""IMU preintegration between two camera frames (midpoint rule)."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import EmptySegment, NonMonotoneTime
from ..geometry import matrix_to_quat, quat_to_matrix


@dataclass(frozen=True, eq=False)
class Preintegration:
    """Relative motion over ``dt`` seconds.

    ``delta_p`` and ``delta_v`` are world-frame increments (the start
    orientation ``R0`` has been applied) of a gravity-free body, so that
    ``p1 = p0 + v0 dt + delta_p`` and ``v1 = v0 + delta_v``.  ``delta_R``
    is the body rotation from the first to the last sample.  ``covariance``
    is the 6x6 (position, velocity) block in world axes.
    """

    delta_p: np.ndarray
    delta_v: np.ndarray
    delta_R: np.ndarray
    dt: float
    covariance: np.ndarray


_EYE3 = np.eye(3)


def _skew_batch(W):
    K = np.zeros((len(W), 3, 3))
    K[:, 0, 1], K[:, 0, 2] = -W[:, 2], W[:, 1]
    K[:, 1, 0], K[:, 1, 2] = W[:, 2], -W[:, 0]
    K[:, 2, 0], K[:, 2, 1] = -W[:, 1], W[:, 0]
    return K


def _so3_exp_batch(W):
    """Rodrigues formula for each row of ``W`` (rotation vectors)."""
    theta = np.sqrt(np.einsum("ij,ij->i", W, W))
    K = _skew_batch(W)
    small = theta < 1e-8
    safe = np.where(small, 1.0, theta)
    a = np.where(small, 1.0 - theta**2 / 6.0, np.sin(safe) / safe)
    b = np.where(small, 0.5 - theta**2 / 24.0, (1.0 - np.cos(safe)) / (safe * safe))
    return _EYE3 + a[:, None, None] * K + b[:, None, None] * (K @ K)


def preintegrate(segment, R0=(1.0, 0.0, 0.0, 0.0), accel_sigma=0.0, gyro_sigma=0.0) -> Preintegration:
    """Integrate an :class:`~visc.sim.sensors.ImuSegment` (or list of samples).

    Rotation uses the mean angular rate of consecutive samples; position and
    velocity use the mean of the two rotated accelerations.  ``accel_sigma``
    and ``gyro_sigma`` are per-sample white-noise standard deviations and
    drive a first-order propagation of the (p, v, theta) error covariance.
    A single sample spans no time and yields a zero increment with ``dt = 0``.
    """
    if isinstance(segment, (list, tuple)):
        if not segment:
            raise EmptySegment("preintegration needs at least one sample")
        t = np.array([s.timestamp for s in segment], dtype=float)
        acc = np.array([s.accel for s in segment], dtype=float)
        gyr = np.array([s.gyro for s in segment], dtype=float)
    else:
        t, acc, gyr = segment.t, segment.accel, segment.gyro
    if len(t) == 0:
        raise EmptySegment("preintegration needs at least one sample")
    dts = np.diff(t)
    if np.any(dts <= 0):
        raise NonMonotoneTime("IMU timestamps must be strictly increasing")

    n = len(dts)
    dR = _so3_exp_batch(0.5 * (gyr[:-1] + gyr[1:]) * dts[:, None])
    Rs = np.empty((n + 1, 3, 3))
    Rs[0] = _EYE3
    for k in range(n):
        Rs[k + 1] = Rs[k] @ dR[k]
    a_body = (Rs @ acc[:, :, None])[:, :, 0]  # start-frame accelerations
    a_mid = 0.5 * (a_body[:-1] + a_body[1:])
    dv = a_mid * dts[:, None]
    v_before = np.vstack([np.zeros(3), np.cumsum(dv, axis=0)[:-1]]) if n else np.zeros((0, 3))
    p = np.sum(v_before * dts[:, None] + 0.5 * a_mid * (dts * dts)[:, None], axis=0)
    v = dv.sum(axis=0)

    C = np.zeros((9, 9))
    qa, qg = accel_sigma * accel_sigma, gyro_sigma * gyro_sigma
    if n and (qa > 0.0 or qg > 0.0):
        # step transitions F_k and noise Q_k of the (p, v, theta) error
        Ra = Rs[:-1] @ _skew_batch(acc[:-1])
        F = np.tile(np.eye(9), (n, 1, 1))
        F[:, 0:3, 3:6] = _EYE3 * dts[:, None, None]
        F[:, 0:3, 6:9] = (-0.5 * dts * dts)[:, None, None] * Ra
        F[:, 3:6, 6:9] = -dts[:, None, None] * Ra
        F[:, 6:9, 6:9] = np.transpose(dR, (0, 2, 1))
        # accel noise enters through a rotation, so its covariance stays isotropic
        h = 0.5 * dts * dts
        Q = np.zeros((n, 9, 9))
        Q[:, 0:3, 0:3] = (qa * h * h)[:, None, None] * _EYE3
        Q[:, 0:3, 3:6] = Q[:, 3:6, 0:3] = (qa * h * dts)[:, None, None] * _EYE3
        Q[:, 3:6, 3:6] = (qa * dts * dts)[:, None, None] * _EYE3
        Q[:, 6:9, 6:9] = (qg * dts * dts)[:, None, None] * _EYE3
        # C = sum_k Psi_k Q_k Psi_k^T with Psi_k = F_{n-1} ... F_{k+1}
        Psi = np.empty((n, 9, 9))
        Psi[-1] = np.eye(9)
        for k in range(n - 2, -1, -1):
            Psi[k] = Psi[k + 1] @ F[k + 1]
        C = (Psi @ Q @ np.transpose(Psi, (0, 2, 1))).sum(axis=0)

    R0m = quat_to_matrix(np.asarray(R0, dtype=float))
    B = np.zeros((6, 6))
    B[0:3, 0:3] = R0m
    B[3:6, 3:6] = R0m
    cov = B @ C[0:6, 0:6] @ B.T
    return Preintegration(R0m @ p, R0m @ v, matrix_to_quat(Rs[-1]), float(t[-1] - t[0]), 0.5 * (cov + cov.T))

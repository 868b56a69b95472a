"""Proprioceptive sensor streams: IMU, drifting VI odometry and compass."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .._rng import substream
from ..errors import EmptySegment, InvalidConfig, NonMonotoneTime
from ..geometry import Pose, axis_angle, quat_mul
from .trajectory import Trajectory


@dataclass(frozen=True)
class ImuSample:
    timestamp: float
    accel: np.ndarray  # m/s^2, body frame, gravity removed
    gyro: np.ndarray  # rad/s, body frame


@dataclass(eq=False)
class ImuSegment:
    """IMU samples spanning one camera interval, both boundary samples included.

    ``target`` is the body-frame translation over the interval (expressed in
    the body frame at the first sample) and is only set for training data.
    """

    t: np.ndarray
    accel: np.ndarray
    gyro: np.ndarray
    target: Optional[np.ndarray] = None

    def __post_init__(self):
        self.t = np.asarray(self.t, dtype=float).reshape(-1)
        self.accel = np.asarray(self.accel, dtype=float).reshape(-1, 3)
        self.gyro = np.asarray(self.gyro, dtype=float).reshape(-1, 3)
        if len(self.t) == 0:
            raise EmptySegment("IMU segment has no samples")
        if not (len(self.t) == len(self.accel) == len(self.gyro)):
            raise ValueError("t, accel and gyro lengths differ")
        if np.any(np.diff(self.t) <= 0):
            raise NonMonotoneTime("IMU timestamps must be strictly increasing")

    @classmethod
    def from_samples(cls, samples, target=None):
        samples = list(samples)
        if not samples:
            raise EmptySegment("IMU segment has no samples")
        return cls(
            [s.timestamp for s in samples],
            [s.accel for s in samples],
            [s.gyro for s in samples],
            target,
        )

    def __len__(self):
        return len(self.t)

    def features(self):
        """``(n, 6)`` per-sample network input ``accel || gyro``."""
        return np.hstack([self.accel, self.gyro])


@dataclass(frozen=True, eq=False)
class ImuNoise:
    accel_sigma: float = 0.0
    gyro_sigma: float = 0.0
    accel_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))
    gyro_bias: np.ndarray = field(default_factory=lambda: np.zeros(3))


@dataclass(frozen=True, eq=False)
class ImuStream:
    t: np.ndarray
    accel: np.ndarray
    gyro: np.ndarray
    noise: ImuNoise

    def __len__(self):
        return len(self.t)

    def samples(self):
        for k in range(len(self.t)):
            yield ImuSample(float(self.t[k]), self.accel[k], self.gyro[k])

    def segment(self, start, stop, target=None) -> ImuSegment:
        """Samples ``start..stop`` inclusive."""
        return ImuSegment(self.t[start : stop + 1], self.accel[start : stop + 1], self.gyro[start : stop + 1], target)


def simulate_imu(traj: Trajectory, noise: ImuNoise = ImuNoise(), seed=0) -> ImuStream:
    """Body-frame specific force (gravity already removed) and angular rate."""
    if noise.accel_sigma < 0 or noise.gyro_sigma < 0:
        raise InvalidConfig("IMU noise sigmas must be non-negative")
    c, s = np.cos(traj.yaw), np.sin(traj.yaw)
    a = traj.accel
    accel = np.stack([c * a[:, 0] + s * a[:, 1], -s * a[:, 0] + c * a[:, 1], a[:, 2]], axis=1)
    gyro = traj.omega_body

    rng = substream(seed, "imu")
    n = len(traj)
    na = rng.standard_normal((n, 3))
    ng = rng.standard_normal((n, 3))
    accel = accel + np.asarray(noise.accel_bias, dtype=float) + noise.accel_sigma * na
    gyro = gyro + np.asarray(noise.gyro_bias, dtype=float) + noise.gyro_sigma * ng
    return ImuStream(traj.t.copy(), accel, gyro, noise)


@dataclass(frozen=True, eq=False)
class ViOdometryStream:
    t: np.ndarray
    quat: np.ndarray  # (M, 4)
    position: np.ndarray  # (M, 3)

    def __len__(self):
        return len(self.t)

    def pose(self, j) -> Pose:
        return Pose(self.quat[j], self.position[j])

    def poses(self):
        return [self.pose(j) for j in range(len(self.t))]


def camera_indices(traj: Trajectory, camera_rate):
    step = traj.rate / camera_rate
    if abs(step - round(step)) > 1e-9:
        raise InvalidConfig("IMU rate must be an integer multiple of the camera rate")
    step = int(round(step))
    return np.arange(0, len(traj), step)


def simulate_vi_odometry(
    traj: Trajectory, translation_sigma=0.05, heading_sigma=0.0, seed=0, camera_rate=20.0
) -> ViOdometryStream:
    """VI odometry at camera rate with random-walk translation drift.

    ``translation_sigma`` is in m/sqrt(s); ``heading_sigma`` (rad) is a white
    yaw error on every frame but the first, so it stays bounded.
    """
    if translation_sigma < 0 or heading_sigma < 0:
        raise InvalidConfig("drift sigmas must be non-negative")
    idx = camera_indices(traj, camera_rate)
    m = len(idx)
    rng = substream(seed, "vi_odometry")
    steps = rng.standard_normal((m, 3)) * (translation_sigma * np.sqrt(1.0 / camera_rate))
    steps[0] = 0.0
    drift = np.cumsum(steps, axis=0)
    dyaw = rng.standard_normal(m) * heading_sigma
    dyaw[0] = 0.0

    q_true = traj.quat[idx]
    quat = np.empty((m, 4))
    for j in range(m):
        if dyaw[j] == 0.0:
            quat[j] = q_true[j]
        else:
            quat[j] = Pose(quat_mul(axis_angle((0, 0, 1), dyaw[j]), q_true[j]), np.zeros(3)).q
    return ViOdometryStream(traj.t[idx].copy(), quat, traj.position[idx] + drift)


@dataclass(frozen=True, eq=False)
class CompassStream:
    t: np.ndarray
    heading: np.ndarray  # yaw, rad


def simulate_compass(traj: Trajectory, sigma=0.0, seed=0, camera_rate=20.0) -> CompassStream:
    idx = camera_indices(traj, camera_rate)
    rng = substream(seed, "compass")
    return CompassStream(traj.t[idx].copy(), traj.yaw[idx] + sigma * rng.standard_normal(len(idx)))

"""Smooth ground-truth ego trajectories sampled at the IMU rate.

Each profile is an analytic (or quintic-spline) position curve with closed
form velocity and acceleration, so stored velocities are exact rather than
finite-differenced.  The body frame is x-forward, y-left, z-up and follows
the horizontal direction of travel (yaw only), like a ground vehicle.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.interpolate import make_interp_spline

from .._rng import substream
from ..errors import InvalidConfig
from ..geometry import Pose

PROFILES = ("straight", "circle", "figure-eight", "piecewise-random")


@dataclass(frozen=True, eq=False)
class Trajectory:
    """Body-in-world states at a uniform rate.

    ``t[k] = k / rate``; both end points are included, so a run of
    ``duration`` seconds has ``duration * rate + 1`` samples.
    """

    rate: float
    t: np.ndarray
    position: np.ndarray  # (N, 3) world
    velocity: np.ndarray  # (N, 3) world
    accel: np.ndarray  # (N, 3) world, gravity free
    yaw: np.ndarray  # (N,)
    yaw_rate: np.ndarray  # (N,)

    def __len__(self):
        return len(self.t)

    @property
    def quat(self):
        half = 0.5 * self.yaw
        q = np.zeros((len(self.t), 4))
        q[:, 0] = np.cos(half)
        q[:, 3] = np.sin(half)
        q[q[:, 0] < 0] *= -1.0
        return q

    @property
    def omega_body(self):
        w = np.zeros((len(self.t), 3))
        w[:, 2] = self.yaw_rate
        return w

    def rotation(self, k):
        c, s = np.cos(self.yaw[k]), np.sin(self.yaw[k])
        return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])

    def pose(self, k) -> Pose:
        half = 0.5 * self.yaw[k]
        return Pose([np.cos(half), 0.0, 0.0, np.sin(half)], self.position[k])

    def index(self, time):
        k = int(round(time * self.rate))
        if k < 0 or k >= len(self.t) or abs(k / self.rate - time) > 1e-9:
            raise IndexError(f"time {time} is not a sample of this trajectory")
        return k


class _Straight:
    def __init__(self, velocity, height):
        self.v = np.asarray(velocity, dtype=float)
        self.p0 = np.array([0.0, 0.0, height])

    def __call__(self, t):
        t = t[:, None]
        return self.p0 + self.v * t, np.broadcast_to(self.v, (len(t), 3)).copy(), np.zeros((len(t), 3))


class _Circle:
    def __init__(self, radius, speed, height):
        self.r, self.v, self.h = radius, speed, height
        self.w = speed / radius

    def __call__(self, t):
        a = self.w * t
        s, c = np.sin(a), np.cos(a)
        z = np.zeros_like(t)
        pos = np.stack([self.r * s, self.r * (1.0 - c), z + self.h], axis=1)
        vel = np.stack([self.v * c, self.v * s, z], axis=1)
        acc = np.stack([-self.v * self.w * s, self.v * self.w * c, z], axis=1)
        return pos, vel, acc


class _FigureEight:
    """Lemniscate of Gerono, ``x = A sin(wt)``, ``y = (A/2) sin(2wt)``."""

    def __init__(self, half_width, speed, height):
        self.A, self.h = half_width, height
        th = np.linspace(0.0, 2.0 * np.pi, 4096, endpoint=False)
        mean_rate = np.mean(np.hypot(half_width * np.cos(th), half_width * np.cos(2 * th)))
        self.w = speed / mean_rate

    def __call__(self, t):
        A, w = self.A, self.w
        a = w * t
        z = np.zeros_like(t)
        pos = np.stack([A * np.sin(a), 0.5 * A * np.sin(2 * a), z + self.h], axis=1)
        vel = np.stack([A * w * np.cos(a), A * w * np.cos(2 * a), z], axis=1)
        acc = np.stack([-A * w * w * np.sin(a), -2.0 * A * w * w * np.sin(2 * a), z], axis=1)
        return pos, vel, acc


class _PiecewiseRandom:
    """Quintic (C4) spline through seeded random waypoints."""

    def __init__(self, duration, speed, height, rng, spacing=2.0):
        n = int(np.ceil(duration / spacing)) + 4
        knots_t = (np.arange(n) - 1) * spacing
        heading = np.cumsum(rng.normal(0.0, 0.35, n))
        step = speed * spacing * rng.uniform(0.85, 1.15, n)
        xy = np.cumsum(np.stack([step * np.cos(heading), step * np.sin(heading)], axis=1), axis=0)
        xy -= xy[1]
        z = height + rng.normal(0.0, 0.2, n)
        z -= z[1] - height
        pts = np.column_stack([xy, z])
        self.spline = make_interp_spline(knots_t, pts, k=5)

    def __call__(self, t):
        return self.spline(t), self.spline(t, 1), self.spline(t, 2)


def _profile(profile, duration, speed, radius, height, velocity, seed):
    if profile == "straight":
        v = velocity if velocity is not None else (speed, 0.0, 0.0)
        return _Straight(v, height)
    if profile == "circle":
        if radius <= 0:
            raise InvalidConfig("circle radius must be positive")
        return _Circle(radius, speed, height)
    if profile == "figure-eight":
        return _FigureEight(radius, speed, height)
    if profile == "piecewise-random":
        return _PiecewiseRandom(duration, speed, height, substream(seed, "trajectory"))
    raise InvalidConfig(f"unknown trajectory profile {profile!r}; expected one of {PROFILES}")


def generate_trajectory(
    profile="figure-eight",
    duration=20.0,
    seed=0,
    *,
    speed=5.0,
    radius=20.0,
    height=1.5,
    velocity=None,
    rate=100.0,
) -> Trajectory:
    if not duration > 0:
        raise InvalidConfig("duration must be positive")
    if not rate > 0:
        raise InvalidConfig("rate must be positive")
    n = int(round(duration * rate))
    t = np.arange(n + 1) / rate
    curve = _profile(profile, duration, speed, radius, height, velocity, seed)
    pos, vel, acc = curve(t)

    vx, vy, ax, ay = vel[:, 0], vel[:, 1], acc[:, 0], acc[:, 1]
    v2 = vx * vx + vy * vy
    moving = v2 > 1e-12
    yaw = np.zeros(n + 1)
    yaw_rate = np.zeros(n + 1)
    if np.any(moving):
        yaw[moving] = np.arctan2(vy[moving], vx[moving])
        # hold heading through stops
        idx = np.where(moving, np.arange(n + 1), 0)
        np.maximum.accumulate(idx, out=idx)
        first = np.argmax(moving)
        idx[:first] = first
        yaw = np.unwrap(yaw[idx])
        yaw_rate[moving] = (vx * ay - vy * ax)[moving] / v2[moving]

    for a in (t, pos, vel, acc, yaw, yaw_rate):
        a.setflags(write=False)
    return Trajectory(rate, t, pos, vel, acc, yaw, yaw_rate)

"""Pinhole camera rigidly attached to the radar."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import InvalidConfig
from .geometry import Pose, transform_point

MIN_DEPTH = 1e-6  # m


@dataclass(frozen=True, eq=False)
class PinholeCamera:
    fx: float = 500.0
    fy: float = 500.0
    cx: float = 320.0
    cy: float = 240.0
    width: int = 640
    height: int = 480
    extrinsic: Pose = Pose.identity()  # radar -> camera coordinates

    def __post_init__(self):
        if not (self.fx > 0 and self.fy > 0):
            raise InvalidConfig("camera focal lengths must be positive")

    @classmethod
    def from_config(cls, cfg):
        return cls(cfg.fx, cfg.fy, cfg.cx, cfg.cy, cfg.width, cfg.height, Pose.from_array(cfg.extrinsic))

    def to_camera(self, s_radar):
        return transform_point(self.extrinsic, s_radar)

    def project(self, p_cam):
        """Pixel coordinates of camera-frame points ``(N, 3) -> (N, 2)``."""
        p = np.asarray(p_cam, dtype=float)
        z = p[..., 2]
        return np.stack([self.fx * p[..., 0] / z + self.cx, self.fy * p[..., 1] / z + self.cy], axis=-1)

    def in_front(self, p_cam):
        return np.asarray(p_cam)[..., 2] > MIN_DEPTH

    def in_view(self, p_cam):
        p = np.asarray(p_cam, dtype=float)
        ok = self.in_front(p)
        uv = np.full(p.shape[:-1] + (2,), np.nan)
        uv[ok] = self.project(p[ok])
        inside = (uv[..., 0] >= 0) & (uv[..., 0] < self.width) & (uv[..., 1] >= 0) & (uv[..., 1] < self.height)
        return ok & inside

    def pixel_flow(self, src_cam, dst_cam):
        """``project(dst) - project(src)`` for camera-frame points."""
        return self.project(dst_cam) - self.project(src_cam)

"""Kinematic-learned sensor fusion: window optimisation and EKF drift correction."""

from .ekf import EkfState, UpdateInfo, ekf_propagate, ekf_update, kalman_update
from .pipeline import INNOVATION_COLUMNS, FusedTrajectory, fuse_trajectory
from .preintegration import Preintegration, preintegrate
from .window import (
    NetworkObservation,
    Window,
    WindowEstimate,
    append,
    linearize,
    marginalize_oldest,
    slide,
    window_optimize,
)

__all__ = [
    "INNOVATION_COLUMNS",
    "EkfState",
    "FusedTrajectory",
    "NetworkObservation",
    "Preintegration",
    "UpdateInfo",
    "Window",
    "WindowEstimate",
    "append",
    "linearize",
    "ekf_propagate",
    "ekf_update",
    "fuse_trajectory",
    "kalman_update",
    "marginalize_oldest",
    "preintegrate",
    "slide",
    "window_optimize",
]

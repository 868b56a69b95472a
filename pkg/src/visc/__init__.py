"""Radar scene flow with inertial drift correction and cross-modal supervision.

Subpackages and modules:

* :mod:`visc.geometry`, :mod:`visc.camera`: rigid transforms and projection
* :mod:`visc.sim`: deterministic vehicle, sensor and world simulator
* :mod:`visc.inertial`: LSTM inertial odometry network
* :mod:`visc.fusion`: sliding-window and EKF fusion of VI, IMU and compass
* :mod:`visc.supervision`: pseudo labels and training losses
* :mod:`visc.estimator`: radar scene-flow estimator
* :mod:`visc.metrics`: flow and transform accuracy
* :mod:`visc.cli`: the ``visc`` command
"""

__version__ = "0.1.0"

from .config import RunConfig  # noqa: E402
from .errors import ConfigError, ContractViolation, DataError, ViscError  # noqa: E402
from .geometry import Pose, compose, inverse, relative, static_scene_flow  # noqa: E402

__all__ = [
    "ConfigError",
    "ContractViolation",
    "DataError",
    "Pose",
    "RunConfig",
    "ViscError",
    "__version__",
    "compose",
    "inverse",
    "relative",
    "static_scene_flow",
]

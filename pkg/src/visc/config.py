"""Run configuration: nested dataclasses that round-trip through JSON.

Every knob that changes numerical output lives here so that a run manifest
(config + seed + code version) is enough to reproduce a run bit-for-bit.
Values that are not pinned down by any measurement are declared defaults,
not calibrated constants.
"""

from __future__ import annotations

import dataclasses
import json
import typing
from dataclasses import dataclass, field
from pathlib import Path

from .errors import InvalidConfig, IoError


@dataclass
class ScenarioConfig:
    profile: str = "figure-eight"  # straight | circle | figure-eight | piecewise-random
    duration: float = 20.0  # s
    speed: float = 5.0  # m/s
    radius: float = 20.0  # m, circle radius / figure-eight half-width
    velocity: typing.Optional[typing.List[float]] = None  # straight profile override
    height: float = 1.5  # m
    imu_rate: float = 100.0
    camera_rate: float = 20.0
    radar_rate: float = 10.0


@dataclass
class ImuNoiseConfig:
    accel_sigma: float = 0.02  # m/s^2 per sample
    gyro_sigma: float = 1e-3  # rad/s per sample
    accel_bias: typing.List[float] = field(default_factory=lambda: [0.0, 0.0, 0.0])
    gyro_bias: typing.List[float] = field(default_factory=lambda: [0.0, 0.0, 0.0])


@dataclass
class ViDriftConfig:
    translation_sigma: float = 0.05  # m / sqrt(s), random walk
    heading_sigma_deg: float = 0.1  # white, bounded


@dataclass
class CompassConfig:
    sigma_deg: float = 0.5


@dataclass
class WorldConfig:
    landmark_density: float = 1.0  # landmarks per metre of path
    min_landmarks: int = 60
    lookahead: float = 40.0  # m of landmark corridor beyond the end of the path
    lateral_range: typing.List[float] = field(default_factory=lambda: [3.0, 30.0])
    height_range: typing.List[float] = field(default_factory=lambda: [-1.0, 4.0])
    n_objects: int = 4
    object_points: int = 6
    object_speed: typing.List[float] = field(default_factory=lambda: [1.0, 6.0])
    object_segment: float = 3.0  # s between velocity changes
    object_lateral: typing.List[float] = field(default_factory=lambda: [4.0, 12.0])


@dataclass
class RadarConfig:
    max_range: float = 150.0  # m
    min_range: float = 0.5
    fov_azimuth_deg: float = 120.0  # full width
    fov_elevation_deg: float = 30.0
    azimuth_resolution_deg: float = 1.4
    elevation_resolution_deg: float = 18.0
    angular_noise_scale: float = 0.0  # angular sigma as a fraction of resolution
    position_sigma: float = 0.02  # m, isotropic
    rrv_sigma: float = 0.05  # m/s
    ghost_rate: float = 0.03  # ghosts per real return
    dropout_rate: float = 0.03
    extrinsic: typing.List[float] = field(
        default_factory=lambda: [1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0]
    )  # radar -> body pose, qw qx qy qz tx ty tz


@dataclass
class CameraConfig:
    fx: float = 500.0
    fy: float = 500.0
    cx: float = 320.0
    cy: float = 240.0
    width: int = 640
    height: int = 480
    # radar -> camera; default looks along radar +x with image x right, y down
    extrinsic: typing.List[float] = field(
        default_factory=lambda: [0.5, 0.5, -0.5, 0.5, 0.0, 0.0, 0.0]
    )


@dataclass
class VisualNoiseConfig:
    flow_sigma_px: float = 0.5
    mask_error_rate: float = 0.02
    recon_sigma: float = 0.05  # m
    dropout_rate: float = 0.0
    smoke_level: float = 0.0  # [0, 1]; degrades the visual oracle only
    smoke_sigma_gain: float = 4.0
    smoke_dropout_gain: float = 0.8


@dataclass
class FusionConfig:
    window_size: int = 10
    process_noise_rot: float = 1e-4  # rad^2 per frame per axis
    process_noise_pos: float = 1e-4  # m^2 per frame per axis
    compass_sigma_deg: float = 0.5
    tilt_sigma_deg: float = 5.0
    init_position_sigma: float = 1e-3
    init_velocity_sigma: float = 0.5
    init_rotation_sigma: float = 1e-3
    position_cov: str = "network"  # network | window
    use_ekf: bool = True


@dataclass
class InertialTrainConfig:
    hidden: int = 64
    layers: int = 2
    lr: float = 1e-3
    momentum: float = 0.9
    epochs: int = 60
    batch_size: int = 32
    loss_mode: str = "mahalanobis"  # mse | mahalanobis | unweighted
    mse_warmup_epochs: int = 20
    normalize: bool = True
    target: str = "vi"  # vi | truth
    grad_clip: float = 10.0


@dataclass
class EstimatorConfig:
    hidden: int = 32
    k: int = 8
    lr: float = 0.03
    momentum: float = 0.9
    epochs: int = 150
    lambda_opt: float = 0.1
    trans_weight: float = 1.0
    bce_weight: float = 0.1
    w_rv: float = 1.0
    w_ch: float = 1.0
    chamfer_tau: float = 0.01  # m^2
    chamfer_clip: float = 0.5  # m, saturation distance of the Chamfer term
    rv_clip: float = 1.0  # m/s, saturation of the range-rate term
    opt_pixel_scale: float = 0.01  # px -> loss units; see supervision.loss_opt


@dataclass
class RunConfig:
    seed: int = 0
    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    imu_noise: ImuNoiseConfig = field(default_factory=ImuNoiseConfig)
    vi_drift: ViDriftConfig = field(default_factory=ViDriftConfig)
    compass: CompassConfig = field(default_factory=CompassConfig)
    world: WorldConfig = field(default_factory=WorldConfig)
    radar: RadarConfig = field(default_factory=RadarConfig)
    camera: CameraConfig = field(default_factory=CameraConfig)
    visual: VisualNoiseConfig = field(default_factory=VisualNoiseConfig)
    fusion: FusionConfig = field(default_factory=FusionConfig)
    inertial: InertialTrainConfig = field(default_factory=InertialTrainConfig)
    estimator: EstimatorConfig = field(default_factory=EstimatorConfig)
    train_fraction: float = 0.7  # radar pairs used for estimator training

    def to_dict(self):
        return dataclasses.asdict(self)

    def to_json(self):
        return json.dumps(self.to_dict(), indent=2, sort_keys=True)

    @classmethod
    def from_dict(cls, d):
        cfg = _build(cls, d or {}, "config")
        validate(cfg)
        return cfg

    @classmethod
    def load(cls, path):
        path = Path(path)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise IoError(path) from exc
        try:
            d = json.loads(text)
        except json.JSONDecodeError as exc:
            raise InvalidConfig(f"{path}: {exc}") from exc
        return cls.from_dict(d)


def _build(cls, d, where):
    if not isinstance(d, dict):
        raise InvalidConfig(f"{where}: expected an object")
    hints = typing.get_type_hints(cls)
    names = {f.name for f in dataclasses.fields(cls)}
    unknown = set(d) - names
    if unknown:
        raise InvalidConfig(f"{where}: unknown keys {sorted(unknown)}")
    kwargs = {}
    for name, value in d.items():
        tp = hints[name]
        if dataclasses.is_dataclass(tp):
            kwargs[name] = _build(tp, value, f"{where}.{name}")
        else:
            kwargs[name] = value
    return cls(**kwargs)


def validate(cfg: RunConfig):
    s = cfg.scenario
    if not s.duration > 0:
        raise InvalidConfig("scenario.duration must be positive")
    for name in ("imu_rate", "camera_rate", "radar_rate"):
        if not getattr(s, name) > 0:
            raise InvalidConfig(f"scenario.{name} must be positive")
    ratio_ic = s.imu_rate / s.camera_rate
    ratio_cr = s.camera_rate / s.radar_rate
    if abs(ratio_ic - round(ratio_ic)) > 1e-9 or abs(ratio_cr - round(ratio_cr)) > 1e-9:
        raise InvalidConfig("imu_rate/camera_rate and camera_rate/radar_rate must be integers")
    if abs(s.duration * s.imu_rate - round(s.duration * s.imu_rate)) > 1e-6:
        raise InvalidConfig("duration must be a whole number of IMU periods")
    if cfg.fusion.window_size < 2:
        raise InvalidConfig("fusion.window_size must be >= 2")
    if not 0.0 <= cfg.visual.smoke_level <= 1.0:
        raise InvalidConfig("visual.smoke_level must lie in [0, 1]")
    if cfg.inertial.loss_mode not in ("mse", "mahalanobis", "unweighted"):
        raise InvalidConfig(f"unknown inertial.loss_mode {cfg.inertial.loss_mode!r}")
    if cfg.inertial.target not in ("vi", "truth"):
        raise InvalidConfig(f"unknown inertial.target {cfg.inertial.target!r}")
    if cfg.fusion.position_cov not in ("network", "window"):
        raise InvalidConfig(f"unknown fusion.position_cov {cfg.fusion.position_cov!r}")
    if not 0.0 < cfg.train_fraction < 1.0:
        raise InvalidConfig("train_fraction must lie in (0, 1)")
    if cfg.seed < 0 or cfg.seed >= 2**64:
        raise InvalidConfig("seed must be an unsigned 64-bit integer")

"""Deterministic simulator standing in for the vehicle, its sensors and the world."""

from dataclasses import dataclass

from ..camera import PinholeCamera
from ..geometry import Pose
from .radar import (
    DynamicObject,
    RadarFrame,
    VisualOracle,
    World,
    generate_world,
    radial_velocity,
    simulate_radar,
    simulate_visual_oracle,
)
from .sensors import (
    CompassStream,
    ImuNoise,
    ImuSample,
    ImuSegment,
    ImuStream,
    ViOdometryStream,
    camera_indices,
    simulate_compass,
    simulate_imu,
    simulate_vi_odometry,
)
from .trajectory import PROFILES, Trajectory, generate_trajectory

import numpy as np


@dataclass(eq=False)
class Scenario:
    """Everything one simulated run produces."""

    trajectory: Trajectory
    imu: ImuStream
    vi: ViOdometryStream
    compass: CompassStream
    world: World
    radar: list
    visual: list
    camera: PinholeCamera
    radar_extrinsic: Pose


def imu_noise_from_config(cfg):
    return ImuNoise(cfg.accel_sigma, cfg.gyro_sigma, np.asarray(cfg.accel_bias, float), np.asarray(cfg.gyro_bias, float))


def simulate_scenario(cfg, threads=1, with_radar=True) -> Scenario:
    """Run every generator of a :class:`visc.config.RunConfig` from one root seed."""
    s = cfg.scenario
    traj = generate_trajectory(
        s.profile,
        s.duration,
        cfg.seed,
        speed=s.speed,
        radius=s.radius,
        height=s.height,
        velocity=s.velocity,
        rate=s.imu_rate,
    )
    imu = simulate_imu(traj, imu_noise_from_config(cfg.imu_noise), cfg.seed)
    vi = simulate_vi_odometry(
        traj, cfg.vi_drift.translation_sigma, np.radians(cfg.vi_drift.heading_sigma_deg), cfg.seed, s.camera_rate
    )
    compass = simulate_compass(traj, np.radians(cfg.compass.sigma_deg), cfg.seed, s.camera_rate)
    camera = PinholeCamera.from_config(cfg.camera)
    world = radar = visual = None
    if with_radar:
        world = generate_world(traj, cfg.world, cfg.seed)
        radar = simulate_radar(traj, world, cfg.radar, cfg.seed, s.radar_rate, threads)
        visual = simulate_visual_oracle(traj, world, radar, camera, cfg.visual, cfg.seed, cfg.radar, threads)
    return Scenario(traj, imu, vi, compass, world, radar, visual, camera, Pose.from_array(cfg.radar.extrinsic))


__all__ = [
    "PROFILES",
    "CompassStream",
    "DynamicObject",
    "ImuNoise",
    "ImuSample",
    "ImuSegment",
    "ImuStream",
    "RadarFrame",
    "Scenario",
    "Trajectory",
    "ViOdometryStream",
    "VisualOracle",
    "World",
    "camera_indices",
    "generate_trajectory",
    "generate_world",
    "imu_noise_from_config",
    "radial_velocity",
    "simulate_compass",
    "simulate_imu",
    "simulate_radar",
    "simulate_scenario",
    "simulate_vi_odometry",
    "simulate_visual_oracle",
]

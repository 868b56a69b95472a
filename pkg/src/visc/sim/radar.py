"""World model, mmWave radar frames and the visual supervision oracle.

The radar sees static landmarks and the points of rigid moving objects.  The
visual oracle stands in for segmentation masks, dense optical flow and
dynamic 3D reconstruction: it returns the true quantities plus configurable
noise, and it is the only stream that smoke degrades.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .._parallel import ordered_map
from .._rng import substream
from ..camera import PinholeCamera
from ..errors import InvalidConfig
from ..geometry import Pose, compose, inverse, transform_point
from .trajectory import Trajectory

OBJECT_ID_BASE = 1_000_000
GHOST_ID_BASE = 2_000_000_000


@dataclass(frozen=True, eq=False)
class DynamicObject:
    """Rigid body translating with piecewise-constant velocity."""

    ids: np.ndarray  # (K,)
    offsets: np.ndarray  # (K, 3) world-aligned offsets from the centre
    start: np.ndarray  # (3,) centre at t = 0
    knots: np.ndarray  # (S + 1,) segment boundaries, knots[0] = 0
    velocities: np.ndarray  # (S, 3)

    def _segment(self, t):
        return int(np.clip(np.searchsorted(self.knots, t, side="right") - 1, 0, len(self.velocities) - 1))

    def velocity(self, t):
        return self.velocities[self._segment(t)]

    def centre(self, t):
        s = self._segment(t)
        dur = np.diff(self.knots[: s + 1])
        travelled = (dur[:, None] * self.velocities[:s]).sum(axis=0) if s else np.zeros(3)
        return self.start + travelled + (t - self.knots[s]) * self.velocities[s]

    def points(self, t):
        return self.centre(t) + self.offsets


@dataclass(frozen=True, eq=False)
class World:
    landmarks: np.ndarray  # (M, 3)
    objects: tuple = ()

    def __post_init__(self):
        if len(self.landmarks) == 0 and not self.objects:
            raise InvalidConfig("world must contain at least one landmark or object")

    def snapshot(self, t):
        """All point ids, world positions and world velocities at time ``t``."""
        ids = [np.arange(len(self.landmarks))]
        pos = [self.landmarks]
        vel = [np.zeros_like(self.landmarks)]
        dyn = [np.zeros(len(self.landmarks), dtype=bool)]
        for obj in self.objects:
            ids.append(obj.ids)
            pos.append(obj.points(t))
            vel.append(np.broadcast_to(obj.velocity(t), obj.offsets.shape))
            dyn.append(np.ones(len(obj.ids), dtype=bool))
        return (
            np.concatenate(ids).astype(np.int64),
            np.vstack(pos),
            np.vstack(vel),
            np.concatenate(dyn),
        )


def generate_world(traj: Trajectory, cfg, seed=0) -> World:
    """Landmarks scattered beside the path plus a few moving objects.

    ``cfg`` is a :class:`visc.config.WorldConfig`.
    """
    rng = substream(seed, "world")
    pos = traj.position
    seg = np.linalg.norm(np.diff(pos[:, :2], axis=0), axis=1)
    arc = np.concatenate([[0.0], np.cumsum(seg)])
    length = arc[-1] + cfg.lookahead
    n = max(cfg.min_landmarks, int(round(cfg.landmark_density * length)))

    s = rng.uniform(0.0, max(length, 1e-9), n)
    k = np.clip(np.searchsorted(arc, s), 0, len(arc) - 1)
    yaw = traj.yaw[k]
    beyond = np.maximum(s - arc[-1], 0.0)  # past the end: continue along the final heading
    side = rng.choice([-1.0, 1.0], n)
    lateral = side * rng.uniform(*cfg.lateral_range, n)
    along = rng.uniform(-5.0, 5.0, n) + beyond
    normal = np.stack([-np.sin(yaw), np.cos(yaw)], axis=1)
    tangent = np.stack([np.cos(yaw), np.sin(yaw)], axis=1)
    xy = pos[k, :2] + lateral[:, None] * normal + along[:, None] * tangent
    z = rng.uniform(*cfg.height_range, n)
    landmarks = np.column_stack([xy, z])

    duration = traj.t[-1]
    objects = []
    for j in range(cfg.n_objects):
        t0 = rng.uniform(0.0, duration)
        k0 = traj.index(round(t0 * traj.rate) / traj.rate)
        heading = traj.yaw[k0] + rng.uniform(-0.4, 0.4) + (np.pi if rng.random() < 0.3 else 0.0)
        lat = rng.choice([-1.0, 1.0]) * rng.uniform(*cfg.object_lateral)
        normal = np.array([-np.sin(traj.yaw[k0]), np.cos(traj.yaw[k0]), 0.0])
        n_seg = int(np.ceil(duration / cfg.object_segment)) + 1
        headings = heading + np.cumsum(np.concatenate([[0.0], rng.normal(0.0, 0.3, n_seg - 1)]))
        speeds = rng.uniform(*cfg.object_speed, n_seg)
        vel = np.stack([speeds * np.cos(headings), speeds * np.sin(headings), np.zeros(n_seg)], axis=1)
        knots = np.arange(n_seg + 1) * cfg.object_segment
        # place the object so it passes the chosen path point at t0
        centre_t0 = pos[k0] + lat * normal
        centre_t0[2] = 0.5
        tmp = DynamicObject(np.zeros(0), np.zeros((0, 3)), np.zeros(3), knots, vel)
        start = centre_t0 - tmp.centre(t0)
        c, s_ = np.cos(heading), np.sin(heading)
        body = rng.uniform([-2.0, -0.9, 0.0], [2.0, 0.9, 1.5], (cfg.object_points, 3))
        offsets = np.stack([c * body[:, 0] - s_ * body[:, 1], s_ * body[:, 0] + c * body[:, 1], body[:, 2]], axis=1)
        ids = OBJECT_ID_BASE + 1000 * j + np.arange(cfg.object_points)
        objects.append(DynamicObject(ids, offsets, start, knots, vel))
    return World(landmarks, tuple(objects))


@dataclass(frozen=True, eq=False)
class RadarFrame:
    """One radar sweep, points sorted by id.

    ``true_flow`` is the displacement to the next sweep (target-frame minus
    source-frame coordinates); it is NaN for ghosts and for the last sweep.
    The truth fields exist only in simulation and must never feed inference.
    """

    t: float
    positions: np.ndarray  # (N, 3) radar frame
    rrv: np.ndarray  # (N,) m/s, positive when receding
    ids: np.ndarray  # (N,) int64
    is_dynamic: np.ndarray  # (N,) bool
    is_ghost: np.ndarray  # (N,) bool
    true_flow: np.ndarray  # (N, 3)

    def __len__(self):
        return len(self.ids)

    def radar_only(self):
        """Copy with every simulation-only label stripped."""
        n = len(self.ids)
        return RadarFrame(
            self.t,
            self.positions,
            self.rrv,
            self.ids,
            np.zeros(n, dtype=bool),
            np.zeros(n, dtype=bool),
            np.full((n, 3), np.nan),
        )


def radar_indices(traj: Trajectory, radar_rate):
    step = traj.rate / radar_rate
    if abs(step - round(step)) > 1e-9:
        raise InvalidConfig("IMU rate must be an integer multiple of the radar rate")
    return np.arange(0, len(traj), int(round(step)))


def _radar_pose(traj, k, extrinsic):
    return compose(traj.pose(k), extrinsic)


def _in_fov(s, cfg):
    r = np.linalg.norm(s, axis=1)
    az = np.degrees(np.arctan2(s[:, 1], s[:, 0]))
    el = np.degrees(np.arctan2(s[:, 2], np.hypot(s[:, 0], s[:, 1])))
    return (
        (r <= cfg.max_range)
        & (r >= cfg.min_range)
        & (np.abs(az) <= 0.5 * cfg.fov_azimuth_deg)
        & (np.abs(el) <= 0.5 * cfg.fov_elevation_deg)
    )


def _true_radar_points(traj, world, k, k_next, extrinsic):
    """Visible-candidate geometry of sweep ``k`` before any noise."""
    t = traj.t[k]
    ids, X, V, dyn = world.snapshot(t)
    T_wr = _radar_pose(traj, k, extrinsic)
    T_rw = inverse(T_wr)
    s = transform_point(T_rw, X)

    R_wb = traj.rotation(k)
    v_radar = traj.velocity[k] + R_wb @ np.cross(traj.omega_body[k], extrinsic.t)
    v_rel = (V - v_radar) @ T_wr.R  # rows: R_rw (V - v_radar)

    if k_next is not None:
        _, X2, _, _ = world.snapshot(traj.t[k_next])
        s2 = transform_point(inverse(_radar_pose(traj, k_next, extrinsic)), X2)
        flow = s2 - s
    else:
        flow = np.full_like(s, np.nan)
    return ids, s, v_rel, dyn, flow


def radial_velocity(s, v_rel):
    """Range rate of points at radar-frame ``s`` with relative velocity ``v_rel``."""
    r = np.linalg.norm(s, axis=-1)
    return np.einsum("...i,...i->...", s, v_rel) / r


def simulate_radar(traj: Trajectory, world: World, cfg, seed=0, radar_rate=10.0, threads=1):
    """Radar sweeps at ``radar_rate``; ``cfg`` is a :class:`visc.config.RadarConfig`."""
    idx = radar_indices(traj, radar_rate)
    extrinsic = Pose.from_array(cfg.extrinsic)

    def frame(j):
        k = idx[j]
        k_next = idx[j + 1] if j + 1 < len(idx) else None
        ids, s, v_rel, dyn, flow = _true_radar_points(traj, world, k, k_next, extrinsic)
        vis = _in_fov(s, cfg)
        ids, s, v_rel, dyn, flow = ids[vis], s[vis], v_rel[vis], dyn[vis], flow[vis]
        rrv = radial_velocity(s, v_rel)

        rng = substream(seed, "radar", j)
        n = len(ids)
        keep = rng.random(n) >= cfg.dropout_rate
        meas = s.copy()
        if cfg.angular_noise_scale > 0:
            r = np.linalg.norm(s, axis=1)
            az = np.arctan2(s[:, 1], s[:, 0]) + rng.standard_normal(n) * np.radians(
                cfg.angular_noise_scale * cfg.azimuth_resolution_deg
            )
            el = np.arcsin(s[:, 2] / r) + rng.standard_normal(n) * np.radians(
                cfg.angular_noise_scale * cfg.elevation_resolution_deg
            )
            meas = np.stack([r * np.cos(el) * np.cos(az), r * np.cos(el) * np.sin(az), r * np.sin(el)], axis=1)
        meas = meas + cfg.position_sigma * rng.standard_normal((n, 3))
        rrv_meas = rrv + cfg.rrv_sigma * rng.standard_normal(n)

        n_ghost = int(rng.poisson(cfg.ghost_rate * n)) if n else 0
        g_r = rng.uniform(max(cfg.min_range, 1.0), 0.5 * cfg.max_range, n_ghost)
        g_az = np.radians(rng.uniform(-0.5, 0.5, n_ghost) * cfg.fov_azimuth_deg)
        g_el = np.radians(rng.uniform(-0.5, 0.5, n_ghost) * cfg.fov_elevation_deg)
        ghosts = np.stack(
            [g_r * np.cos(g_el) * np.cos(g_az), g_r * np.cos(g_el) * np.sin(g_az), g_r * np.sin(g_el)], axis=1
        )
        g_rrv = rng.uniform(-15.0, 15.0, n_ghost)

        keep &= _in_fov(meas, cfg) if n else keep
        positions = np.vstack([meas[keep], ghosts])
        out_ids = np.concatenate([ids[keep], GHOST_ID_BASE + 1000 * j + np.arange(n_ghost)]).astype(np.int64)
        order = np.argsort(out_ids, kind="stable")
        return RadarFrame(
            float(traj.t[k]),
            positions[order],
            np.concatenate([rrv_meas[keep], g_rrv])[order],
            out_ids[order],
            np.concatenate([dyn[keep], np.zeros(n_ghost, dtype=bool)])[order],
            np.concatenate([np.zeros(keep.sum(), dtype=bool), np.ones(n_ghost, dtype=bool)])[order],
            np.vstack([flow[keep], np.full((n_ghost, 3), np.nan)])[order],
        )

    return ordered_map(frame, range(len(idx)), threads)


@dataclass(frozen=True, eq=False)
class VisualOracle:
    """Camera-derived supervision for the radar sweep pair ``t_src -> t_dst``.

    One row per radar point visible in both images; ``recon_*`` are the
    reconstructed radar-frame positions of points the mask calls dynamic
    (NaN otherwise).
    """

    t_src: float
    t_dst: float
    ids: np.ndarray
    flow_px: np.ndarray  # (M, 2)
    dynamic: np.ndarray  # (M,) bool
    recon_src: np.ndarray  # (M, 3)
    recon_dst: np.ndarray  # (M, 3)
    n_dropped: int = 0
    camera: PinholeCamera = field(default_factory=PinholeCamera)


def simulate_visual_oracle(traj, world, radar_frames, camera: PinholeCamera, noise, seed=0, radar_cfg=None, threads=1):
    """Noisy optical flow, dynamic masks and 3D reconstructions per sweep pair.

    ``noise`` is a :class:`visc.config.VisualNoiseConfig`.  Random draws
    are made for every candidate point before smoke is applied, so raising
    the smoke level can only drop more points, never fewer.
    """
    if not (camera.fx > 0 and camera.fy > 0):
        raise InvalidConfig("camera focal lengths must be positive")
    extrinsic = Pose.from_array(radar_cfg.extrinsic) if radar_cfg is not None else Pose.identity()
    smoke = float(noise.smoke_level)
    sigma_px = noise.flow_sigma_px * (1.0 + noise.smoke_sigma_gain * smoke)
    sigma_rec = noise.recon_sigma * (1.0 + noise.smoke_sigma_gain * smoke)
    p_drop = noise.dropout_rate + noise.smoke_dropout_gain * smoke * (1.0 - noise.dropout_rate)
    p_drop = min(max(p_drop, 0.0), 1.0)

    def pair(j):
        f1, f2 = radar_frames[j], radar_frames[j + 1]
        k1, k2 = traj.index(f1.t), traj.index(f2.t)
        ids_all, s_all, _, dyn_all, flow_all = _true_radar_points(traj, world, k1, k2, extrinsic)
        real = ~f1.is_ghost
        ids = f1.ids[real]
        pos = np.searchsorted(ids_all, ids)
        s1 = s_all[pos]
        s2 = s1 + flow_all[pos]
        dyn = dyn_all[pos]

        rng = substream(seed, "visual", j)
        m = len(ids)
        u_drop = rng.random(m)
        u_mask = rng.random(m)
        n_flow = rng.standard_normal((m, 2))
        n_r1 = rng.standard_normal((m, 3))
        n_r2 = rng.standard_normal((m, 3))

        c1, c2 = camera.to_camera(s1), camera.to_camera(s2)
        vis = camera.in_view(c1) & camera.in_view(c2)
        dropped = vis & (u_drop < p_drop)
        sel = vis & ~dropped

        flow_px = camera.pixel_flow(c1[sel], c2[sel]) + sigma_px * n_flow[sel]
        mask = dyn[sel] ^ (u_mask[sel] < noise.mask_error_rate)
        r1 = np.full((sel.sum(), 3), np.nan)
        r2 = np.full((sel.sum(), 3), np.nan)
        r1[mask] = s1[sel][mask] + sigma_rec * n_r1[sel][mask]
        r2[mask] = s2[sel][mask] + sigma_rec * n_r2[sel][mask]
        return VisualOracle(f1.t, f2.t, ids[sel], flow_px, mask, r1, r2, int(dropped.sum()), camera)

    return ordered_map(pair, range(len(radar_frames) - 1), threads)

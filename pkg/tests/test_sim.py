import numpy as np
import pytest
from scipy.stats import chi2

from visc.camera import PinholeCamera
from visc.config import RadarConfig, RunConfig, ScenarioConfig, VisualNoiseConfig, WorldConfig
from visc.errors import InvalidConfig
from visc.geometry import Pose, compose, inverse, relative, static_scene_flow, transform_point
from visc.sim import (
    DynamicObject,
    ImuNoise,
    World,
    generate_trajectory,
    generate_world,
    simulate_imu,
    simulate_radar,
    simulate_scenario,
    simulate_vi_odometry,
    simulate_visual_oracle,
)
from visc.sim.radar import GHOST_ID_BASE


def quiet_radar(**kw):
    base = dict(position_sigma=0.0, rrv_sigma=0.0, ghost_rate=0.0, dropout_rate=0.0)
    base.update(kw)
    return RadarConfig(**base)


def quiet_visual(**kw):
    base = dict(flow_sigma_px=0.0, mask_error_rate=0.0, recon_sigma=0.0)
    base.update(kw)
    return VisualNoiseConfig(**base)


# -- trajectory ---------------------------------------------------------------


def test_straight_profile_endpoint():
    traj = generate_trajectory("straight", 10.0, velocity=(1.0, 0.0, 0.0), height=0.0)
    np.testing.assert_allclose(traj.position[-1], (10.0, 0.0, 0.0), atol=1e-12)
    assert np.all(traj.omega_body == 0.0)
    assert len(traj) == 1001


def test_circle_angular_rate():
    traj = generate_trajectory("circle", 20.0, radius=20.0, speed=5.0)
    np.testing.assert_allclose(traj.omega_body[:, 2], 0.25, atol=1e-12)
    np.testing.assert_allclose(np.linalg.norm(traj.velocity, axis=1), 5.0, atol=1e-12)


@pytest.mark.parametrize("profile", ["straight", "circle", "figure-eight", "piecewise-random"])
def test_trajectory_deterministic_and_uniform(profile):
    a = generate_trajectory(profile, 12.0, seed=5)
    b = generate_trajectory(profile, 12.0, seed=5)
    for name in ("t", "position", "velocity", "accel", "yaw"):
        np.testing.assert_array_equal(getattr(a, name), getattr(b, name))
    np.testing.assert_allclose(np.diff(a.t), 0.01, rtol=0, atol=1e-12)
    assert np.all(np.diff(a.t) > 0)


def test_piecewise_random_depends_on_seed():
    a = generate_trajectory("piecewise-random", 12.0, seed=1)
    b = generate_trajectory("piecewise-random", 12.0, seed=2)
    assert not np.allclose(a.position, b.position)


@pytest.mark.parametrize("profile", ["straight", "circle", "figure-eight", "piecewise-random"])
def test_velocity_matches_position_derivative(profile):
    traj = generate_trajectory(profile, 20.0, seed=3)
    p, h = traj.position, 1.0 / traj.rate
    # fourth-order central difference so the stencil error stays far below 1e-6 m/s
    fd = (p[:-4] - 8 * p[1:-3] + 8 * p[3:-1] - p[4:]) / (12 * h)
    np.testing.assert_allclose(fd, traj.velocity[2:-2], rtol=0, atol=1e-6)


@pytest.mark.parametrize("profile", ["circle", "figure-eight", "piecewise-random"])
def test_yaw_follows_heading(profile):
    traj = generate_trajectory(profile, 20.0, seed=4)
    fwd = np.stack([np.cos(traj.yaw), np.sin(traj.yaw)], axis=1)
    v = traj.velocity[:, :2]
    np.testing.assert_allclose(fwd[:, 0] * v[:, 1] - fwd[:, 1] * v[:, 0], 0.0, atol=1e-9)
    assert np.all(np.einsum("ij,ij->i", fwd, v) > 0)
    yaw_fd = np.gradient(traj.yaw, 1.0 / traj.rate)
    np.testing.assert_allclose(yaw_fd[1:-1], traj.yaw_rate[1:-1], atol=1e-3)


@pytest.mark.parametrize("kw", [dict(duration=0.0), dict(duration=-1.0), dict(rate=0.0), dict(profile="spiral")])
def test_trajectory_rejects_bad_input(kw):
    args = dict(profile="straight", duration=1.0)
    args.update(kw)
    profile, duration = args.pop("profile"), args.pop("duration")
    with pytest.raises(InvalidConfig):
        generate_trajectory(profile, duration, **args)


# -- IMU ------------------------------------------------------------------------


def test_imu_straight_constant_velocity_is_zero():
    imu = simulate_imu(generate_trajectory("straight", 5.0))
    assert np.all(imu.accel == 0.0)
    assert np.all(imu.gyro == 0.0)


def test_imu_circle_centripetal():
    imu = simulate_imu(generate_trajectory("circle", 10.0, radius=20.0, speed=5.0))
    np.testing.assert_allclose(np.linalg.norm(imu.accel, axis=1), 1.25, atol=1e-12)
    # body frame: x forward, y left, so the centripetal pull is +y on a left turn
    np.testing.assert_allclose(imu.accel[:, 1], 1.25, atol=1e-12)
    np.testing.assert_allclose(imu.gyro[:, 2], 0.25, atol=1e-12)


def test_imu_noise_mean_is_bias():
    traj = generate_trajectory("circle", 1000.0)
    clean = simulate_imu(traj)
    bias = np.array([0.3, -0.2, 0.05])
    noisy = simulate_imu(traj, ImuNoise(accel_sigma=0.1, accel_bias=bias), seed=11)
    err = noisy.accel - clean.accel
    n = len(err)
    assert n >= 100_000
    assert np.all(np.abs(err.mean(axis=0) - bias) < 3 * 0.1 / np.sqrt(n))
    np.testing.assert_allclose(err.std(axis=0), 0.1, rtol=0.02)


def test_imu_segment_bounds_inclusive():
    imu = simulate_imu(generate_trajectory("straight", 1.0))
    seg = imu.segment(0, 5)
    assert len(seg) == 6
    np.testing.assert_allclose(seg.t[-1] - seg.t[0], 0.05)


# -- VI odometry ----------------------------------------------------------------


def test_vi_without_drift_is_truth():
    traj = generate_trajectory("figure-eight", 10.0)
    vi = simulate_vi_odometry(traj, 0.0, 0.0, seed=3)
    idx = np.arange(0, len(traj), 5)
    np.testing.assert_array_equal(vi.position, traj.position[idx])
    np.testing.assert_array_equal(vi.quat, traj.quat[idx])
    assert len(vi) == 201


def test_vi_deterministic():
    traj = generate_trajectory("circle", 10.0)
    a = simulate_vi_odometry(traj, 0.05, 0.01, seed=9)
    b = simulate_vi_odometry(traj, 0.05, 0.01, seed=9)
    np.testing.assert_array_equal(a.position, b.position)
    np.testing.assert_array_equal(a.quat, b.quat)


def endpoint_errors(traj, seeds, sigma=0.05):
    return np.array(
        [np.linalg.norm(simulate_vi_odometry(traj, sigma, 0.0, s).position[-1] - traj.position[-1]) for s in seeds]
    )


def test_vi_drift_endpoint_statistics():
    sigma, T = 0.05, 100.0
    traj = generate_trajectory("straight", T)
    errs = endpoint_errors(traj, range(200))
    # independent oracle: Brownian endpoint is N(0, sigma^2 T I), norm is sigma sqrt(T) chi_3
    oracle_rng = np.random.default_rng(12345)
    mc = np.linalg.norm(oracle_rng.standard_normal((200_000, 3)) * sigma * np.sqrt(T), axis=1)
    analytic = sigma * np.sqrt(T) * np.sqrt(chi2.ppf(0.5, 3))
    assert abs(np.median(mc) - analytic) / analytic < 0.01
    assert abs(np.median(errs) - np.median(mc)) / np.median(mc) < 0.10


def test_vi_drift_grows_with_duration():
    long = generate_trajectory("straight", 200.0)
    seeds = range(400)
    n50 = 50 * 20 + 1
    hits = 0
    for s in seeds:
        vi = simulate_vi_odometry(long, 0.05, 0.0, s)
        e200 = np.linalg.norm(vi.position[-1] - long.position[-1])
        e50 = np.linalg.norm(vi.position[n50 - 1] - long.position[(n50 - 1) * 5])
        hits += e200 > e50
    # P(|W(200)| > |W(50)|) for a 3-D Brownian path, computed by direct sampling
    rng = np.random.default_rng(7)
    a = rng.standard_normal((400_000, 3))
    b = a + np.sqrt(3.0) * rng.standard_normal((400_000, 3))
    p = np.mean(np.linalg.norm(b, axis=1) > np.linalg.norm(a, axis=1))
    frac = hits / len(seeds)
    assert frac > 0.5
    assert abs(frac - p) < 4 * np.sqrt(p * (1 - p) / len(seeds))


# -- radar ----------------------------------------------------------------------


def test_stationary_ego_static_world_has_zero_rrv():
    traj = generate_trajectory("straight", 1.0, velocity=(0.0, 0.0, 0.0))
    rng = np.random.default_rng(0)
    world = World(np.column_stack([rng.uniform(5, 60, 40), rng.uniform(-20, 20, 40), rng.uniform(0, 3, 40)]))
    frames = simulate_radar(traj, world, quiet_radar())
    assert sum(len(f) for f in frames) > 0
    for f in frames:
        assert np.all(f.rrv == 0.0)


def test_closing_rrv_dead_ahead():
    traj = generate_trajectory("straight", 1.0, velocity=(10.0, 0.0, 0.0), height=1.5)
    world = World(np.array([[50.0, 0.0, 1.5]]))
    f = simulate_radar(traj, world, quiet_radar())[0]
    assert len(f) == 1
    np.testing.assert_allclose(f.rrv, [-10.0], atol=1e-12)


def test_receding_object_rrv():
    traj = generate_trajectory("straight", 1.0, velocity=(0.0, 0.0, 0.0), height=0.0)
    obj = DynamicObject(
        ids=np.array([1_000_000]),
        offsets=np.zeros((1, 3)),
        start=np.array([20.0, 0.0, 0.0]),
        knots=np.array([0.0, 10.0]),
        velocities=np.array([[5.0, 0.0, 0.0]]),
    )
    frames = simulate_radar(traj, World(np.zeros((0, 3)), (obj,)), quiet_radar())
    for f in frames:
        np.testing.assert_allclose(f.rrv, [5.0], atol=1e-12)
        assert f.is_dynamic.all()


def turning_scenario(extrinsic=(1.0, 0.0, 0.0, 0.0, 0.4, -0.2, 0.3)):
    traj = generate_trajectory("circle", 6.0, radius=15.0, speed=6.0)
    world = generate_world(traj, WorldConfig(landmark_density=4.0), seed=2)
    cfg = quiet_radar(extrinsic=list(extrinsic))
    return traj, world, cfg, simulate_radar(traj, world, cfg)


def test_rrv_consistency_for_static_points():
    traj, world, cfg, frames = turning_scenario()
    ext = Pose.from_array(cfg.extrinsic)
    checked = 0
    for j, f in enumerate(frames):
        k = 10 * j
        static = ~f.is_dynamic
        R_wr = compose(traj.pose(k), ext).R
        omega_w = np.array([0.0, 0.0, traj.yaw_rate[k]])
        v_radar_w = traj.velocity[k] + np.cross(omega_w, traj.rotation(k) @ ext.t)
        v_r = R_wr.T @ v_radar_w
        s = f.positions[static]
        u = s / np.linalg.norm(s, axis=1)[:, None]
        np.testing.assert_allclose(f.rrv[static] + u @ v_r, 0.0, atol=1e-9)
        checked += static.sum()
    assert checked > 100


def test_rrv_matches_range_rate():
    # range rate by central difference on an independently resampled trajectory
    traj = generate_trajectory("circle", 2.0, radius=15.0, speed=6.0, rate=100.0)
    fine = generate_trajectory("circle", 2.0, radius=15.0, speed=6.0, rate=10_000.0)
    X = np.array([[20.0, 12.0, 1.0], [8.0, -5.0, 2.5]])
    frames = simulate_radar(traj, World(X), quiet_radar())
    f = frames[5]  # t = 0.5 s
    k = 5000
    ranges = [np.linalg.norm(X - fine.position[k + d], axis=1) for d in (-1, 1)]
    rate = (ranges[1] - ranges[0]) / (2 / fine.rate)
    order = np.argsort(f.ids)
    np.testing.assert_allclose(f.rrv[order], rate[f.ids[order]], atol=1e-6)


def test_true_flow_static_and_dynamic():
    traj, world, cfg, frames = turning_scenario()
    ext = Pose.from_array(cfg.extrinsic)
    n_dyn = 0
    for j in range(len(frames) - 1):
        f = frames[j]
        k1, k2 = 10 * j, 10 * (j + 1)
        T1, T2 = compose(traj.pose(k1), ext), compose(traj.pose(k2), ext)
        T12 = relative(T1, T2)
        static = ~f.is_dynamic
        np.testing.assert_allclose(
            f.true_flow[static], static_scene_flow(T12, f.positions[static]), rtol=0, atol=1e-10
        )
        for obj in world.objects:
            sel = np.isin(f.ids, obj.ids)
            if not sel.any():
                continue
            # rigid object motion in the world, then ego motion
            M = Pose.from_translation(obj.centre(traj.t[k2]) - obj.centre(traj.t[k1]))
            T_obj = compose(inverse(T2), compose(M, T1))
            expected = transform_point(T_obj, f.positions[sel]) - f.positions[sel]
            np.testing.assert_allclose(f.true_flow[sel], expected, rtol=0, atol=1e-10)
            n_dyn += sel.sum()
    assert n_dyn > 0
    assert np.all(np.isnan(frames[-1].true_flow))


def test_frames_respect_frustum_and_ordering():
    cfg = RunConfig()
    sc = simulate_scenario(cfg)
    rc = cfg.radar
    for f in sc.radar:
        r = np.linalg.norm(f.positions, axis=1)
        az = np.degrees(np.arctan2(f.positions[:, 1], f.positions[:, 0]))
        el = np.degrees(np.arcsin(f.positions[:, 2] / r))
        assert np.all((r <= rc.max_range) & (r >= rc.min_range))
        assert np.all(np.abs(az) <= rc.fov_azimuth_deg / 2)
        assert np.all(np.abs(el) <= rc.fov_elevation_deg / 2)
        assert np.all(np.diff(f.ids) > 0)
        assert np.array_equal(f.is_ghost, f.ids >= GHOST_ID_BASE)
        assert np.all(np.isnan(f.true_flow[f.is_ghost]))


def test_radar_threads_bit_identical():
    cfg = RunConfig()
    cfg.scenario.duration = 5.0
    a = simulate_scenario(cfg, threads=1)
    b = simulate_scenario(cfg, threads=4)
    for fa, fb in zip(a.radar, b.radar):
        np.testing.assert_array_equal(fa.positions, fb.positions)
        np.testing.assert_array_equal(fa.rrv, fb.rrv)
        np.testing.assert_array_equal(fa.ids, fb.ids)
    for va, vb in zip(a.visual, b.visual):
        np.testing.assert_array_equal(va.flow_px, vb.flow_px)


def test_radar_only_strips_truth():
    sc = simulate_scenario(RunConfig(scenario=ScenarioConfig(duration=2.0)))
    f = sc.radar[0].radar_only()
    assert not f.is_dynamic.any() and not f.is_ghost.any()
    assert np.all(np.isnan(f.true_flow))
    np.testing.assert_array_equal(f.positions, sc.radar[0].positions)


# -- visual oracle --------------------------------------------------------------


def axis_camera():
    # camera looks along radar +x; camera frame x = -radar y, y = -radar z, z = radar x
    return PinholeCamera(extrinsic=Pose.from_array([0.5, 0.5, -0.5, 0.5, 0, 0, 0]))


def test_camera_extrinsic_axes():
    cam = axis_camera()
    np.testing.assert_allclose(cam.to_camera([10.0, 0.0, 0.0]), [0, 0, 10], atol=1e-12)
    np.testing.assert_allclose(cam.to_camera([0.0, 1.0, 0.0]), [-1, 0, 0], atol=1e-12)
    np.testing.assert_allclose(cam.to_camera([0.0, 0.0, 1.0]), [0, -1, 0], atol=1e-12)


def _single_point_visual(point_radar, velocity):
    traj = generate_trajectory("straight", 1.0, velocity=velocity, height=0.0)
    world = World(np.array([point_radar], dtype=float))
    frames = simulate_radar(traj, world, quiet_radar())
    return simulate_visual_oracle(traj, world, frames, axis_camera(), quiet_visual(), radar_cfg=quiet_radar())


def test_visual_flow_zero_along_optical_axis():
    # camera-frame point (0,0,10) is radar (10,0,0); camera moving +1 m per frame along its axis
    vis = _single_point_visual((10.0, 0.0, 0.0), (10.0, 0.0, 0.0))
    np.testing.assert_allclose(vis[0].flow_px, [[0.0, 0.0]], atol=1e-9)


def test_visual_flow_off_axis_matches_pinhole():
    # camera-frame (1,0,10) is radar (10,-1,0); after 1 m of travel it is at (1,0,9)
    vis = _single_point_visual((10.0, -1.0, 0.0), (10.0, 0.0, 0.0))
    expected_u = 500 * 1 / 9 - 500 * 1 / 10
    np.testing.assert_allclose(vis[0].flow_px, [[expected_u, 0.0]], atol=1e-9)
    assert expected_u > 0


def test_visual_static_scene_identity_motion():
    traj = generate_trajectory("straight", 2.0, velocity=(0.0, 0.0, 0.0))
    rng = np.random.default_rng(1)
    world = World(np.column_stack([rng.uniform(5, 40, 50), rng.uniform(-10, 10, 50), rng.uniform(-1, 3, 50)]))
    frames = simulate_radar(traj, world, quiet_radar())
    vis = simulate_visual_oracle(traj, world, frames, axis_camera(), quiet_visual(), radar_cfg=quiet_radar())
    assert sum(len(v.ids) for v in vis) > 0
    for v in vis:
        np.testing.assert_array_equal(v.flow_px, 0.0)


def test_noiseless_visual_flow_is_projection_difference():
    cfg = RunConfig()
    cfg.scenario.duration = 4.0
    cfg.visual = quiet_visual()
    cfg.radar = quiet_radar()
    sc = simulate_scenario(cfg)
    cam = sc.camera
    checked = 0
    for j, v in enumerate(sc.visual):
        f = sc.radar[j]
        rows = np.searchsorted(f.ids, v.ids)
        s1 = f.positions[rows]
        s2 = s1 + f.true_flow[rows]
        expected = cam.project(cam.to_camera(s2)) - cam.project(cam.to_camera(s1))
        np.testing.assert_allclose(v.flow_px, expected, rtol=0, atol=1e-9)
        np.testing.assert_array_equal(v.dynamic, f.is_dynamic[rows])
        np.testing.assert_allclose(v.recon_src[v.dynamic], s1[v.dynamic], atol=1e-12)
        assert np.all(np.isnan(v.recon_src[~v.dynamic]))
        checked += len(rows)
    assert checked > 100


def test_smoke_dropout_monotone():
    base = RunConfig()
    base.scenario.duration = 6.0
    dropped = []
    for level in (0.0, 0.3, 0.6, 0.9, 1.0):
        cfg = RunConfig.from_dict(base.to_dict())
        cfg.visual.smoke_level = level
        sc = simulate_scenario(cfg)
        dropped.append([v.n_dropped for v in sc.visual])
    d = np.array(dropped)
    assert np.all(np.diff(d, axis=0) >= 0)
    assert d[-1].sum() > d[0].sum()


def test_smoke_leaves_radar_untouched():
    base = RunConfig()
    base.scenario.duration = 3.0
    radar = []
    for level in (0.0, 0.9):
        cfg = RunConfig.from_dict(base.to_dict())
        cfg.visual.smoke_level = level
        radar.append(simulate_scenario(cfg).radar)
    for a, b in zip(*radar):
        np.testing.assert_array_equal(a.positions, b.positions)
        np.testing.assert_array_equal(a.rrv, b.rrv)


def test_invalid_camera():
    with pytest.raises(InvalidConfig):
        PinholeCamera(fx=0.0)

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from visc.camera import PinholeCamera
from visc.config import RunConfig
from visc.errors import BehindCamera, EmptyFrame, FrameGap, IdMismatch, NoVisiblePoints
from visc.geometry import Pose, axis_angle, compose, inverse, kabsch_fit, transform_point
from visc.sim import simulate_scenario
from visc.supervision import (
    LOSS_COLUMNS,
    SupervisionBundle,
    extract_bundle,
    extract_bundles,
    loss_dyn,
    loss_flow,
    loss_opt,
    loss_report,
    loss_self,
    loss_trans,
    loss_trans_surrogate,
    project_flow,
    project_flows,
    pseudo_gt_transform,
)

FRONT = PinholeCamera()  # identity extrinsic: radar frame is the camera frame


def quiet_config(seed=0, duration=2.0, **world):
    cfg = RunConfig(seed=seed)
    cfg.scenario.duration = duration
    r = cfg.radar
    r.position_sigma = r.rrv_sigma = r.ghost_rate = r.dropout_rate = 0.0
    v = cfg.visual
    v.flow_sigma_px = v.mask_error_rate = v.recon_sigma = 0.0
    for k, val in world.items():
        setattr(cfg.world, k, val)
    return cfg


@pytest.fixture(scope="module")
def quiet():
    return simulate_scenario(quiet_config(seed=2))


def random_pose(rng, scale=1.0):
    return Pose.from_rotvec(rng.normal(0, 0.5, 3), rng.normal(0, scale, 3))


def numeric_grad(fn, x, h=1e-6):
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        g[idx] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g


# -- pseudo ground truth ---------------------------------------------------------


def test_pseudo_gt_identical_poses_is_identity():
    P = Pose.from_rotvec([0.1, -0.2, 0.3], [4.0, 5.0, 6.0])
    E = Pose.from_rotvec([0.0, 0.0, 0.4], [0.5, 0.0, 0.2])
    assert pseudo_gt_transform(P, P, E).allclose(Pose.identity(), atol=1e-12)


def test_pseudo_gt_pure_translation_warps_static_point():
    Pi, Pj = Pose.identity(), Pose.from_translation([1.0, 0.0, 0.0])
    T = pseudo_gt_transform(Pi, Pj, Pose.identity())
    np.testing.assert_allclose(T.t, [-1.0, 0.0, 0.0], atol=1e-15)
    X = np.array([7.0, 2.0, -1.0])  # world point
    s_i = transform_point(inverse(Pi), X)
    s_j = transform_point(inverse(Pj), X)
    np.testing.assert_allclose(transform_point(T, s_i), s_j, atol=1e-12)


@pytest.mark.parametrize("seed", range(5))
def test_pseudo_gt_matches_matrix_conjugation(seed):
    rng = np.random.default_rng(seed)
    Pi, Pj = random_pose(rng, 5.0), random_pose(rng, 5.0)
    E = Pose(np.array([np.cos(np.pi / 4), 0.0, 0.0, np.sin(np.pi / 4)]), rng.normal(0, 0.3, 3))  # 90 deg yaw
    M = np.linalg.inv(E.matrix()) @ np.linalg.inv(Pj.matrix()) @ Pi.matrix() @ E.matrix()
    np.testing.assert_allclose(pseudo_gt_transform(Pi, Pj, E).matrix(), M, atol=1e-12)


def test_pseudo_gt_extrinsic_rotates_translation_axis():
    E = Pose(axis_angle([0, 0, 1], np.pi / 2), np.zeros(3))
    T = pseudo_gt_transform(Pose.identity(), Pose.from_translation([1.0, 0.0, 0.0]), E)
    # body +x is radar -y under a 90 degree yaw mount
    np.testing.assert_allclose(T.t, [0.0, 1.0, 0.0], atol=1e-12)


def test_pseudo_gt_warps_simulated_static_points(quiet):
    sc = quiet
    for j in (0, 7, 15):
        f1 = sc.radar[j]
        T = pseudo_gt_transform(
            sc.trajectory.pose(sc.trajectory.index(f1.t)),
            sc.trajectory.pose(sc.trajectory.index(sc.radar[j + 1].t)),
            sc.radar_extrinsic,
        )
        st_ = ~f1.is_dynamic
        np.testing.assert_allclose(transform_point(T, f1.positions[st_]), f1.positions[st_] + f1.true_flow[st_], atol=1e-9)


# -- loss_trans -------------------------------------------------------------------


def test_loss_trans_equal_transforms_is_zero():
    rng = np.random.default_rng(0)
    T = random_pose(rng)
    assert loss_trans(T, T, rng.normal(0, 10, (20, 3))) < 1e-14


def test_loss_trans_pure_translation():
    rng = np.random.default_rng(1)
    T = Pose.from_translation([3.0, 4.0, 0.0])
    assert loss_trans(T, Pose.identity(), rng.normal(0, 10, (9, 3))) == pytest.approx(5.0, abs=1e-12)


def test_loss_trans_rotation_single_point():
    T = Pose(axis_angle([0, 0, 1], np.pi / 2), np.zeros(3))
    assert loss_trans(T, Pose.identity(), [[1.0, 0.0, 0.0]]) == pytest.approx(np.sqrt(2.0), abs=1e-12)


def test_loss_trans_empty():
    with pytest.raises(EmptyFrame):
        loss_trans(Pose.identity(), Pose.identity(), np.zeros((0, 3)))


@pytest.mark.parametrize("seed", range(10))
def test_loss_trans_invariant_to_common_rotation(seed):
    rng = np.random.default_rng(seed)
    T, T_hat = random_pose(rng), random_pose(rng)
    s = rng.normal(0, 10, (15, 3))
    Q = Pose.from_rotvec(rng.normal(0, 1, 3))
    base = loss_trans(T, T_hat, s)
    # both transforms pre-composed by the same rotation
    assert abs(loss_trans(compose(T, Q), compose(T_hat, Q), s) - base) < 1e-9
    # the whole problem expressed in a rotated frame
    rot = lambda P: compose(Q, compose(P, inverse(Q)))  # noqa: E731
    assert abs(loss_trans(rot(T), rot(T_hat), transform_point(Q, s)) - base) < 1e-9


def test_loss_trans_permutation_invariant():
    rng = np.random.default_rng(4)
    T, T_hat = random_pose(rng), random_pose(rng)
    s = rng.normal(0, 10, (30, 3))
    perm = rng.permutation(30)
    assert loss_trans(T, T_hat, s[perm]) == pytest.approx(loss_trans(T, T_hat, s), rel=1e-14)


def test_trans_surrogate_agrees_with_rigid_flows():
    # flows generated by T_hat make the surrogate the rigid-form residual
    rng = np.random.default_rng(5)
    T = random_pose(rng)
    T_hat = Pose(T.q, T.t + [0.3, -0.4, 0.0])
    s = rng.normal(0, 10, (12, 3))
    f = transform_point(T_hat, s) - s
    assert loss_trans_surrogate(T, s, f) == pytest.approx(0.5, abs=1e-12)
    assert loss_trans(T, T_hat, s) == pytest.approx(0.5, abs=1e-12)


def test_trans_surrogate_gradient():
    rng = np.random.default_rng(6)
    T = random_pose(rng)
    s = rng.normal(0, 5, (6, 3))
    f = rng.normal(0, 1, (6, 3))
    w = rng.uniform(0.1, 1.0, 6)
    _, g = loss_trans_surrogate(T, s, f, w, return_grad=True)
    np.testing.assert_allclose(g, numeric_grad(lambda x: loss_trans_surrogate(T, s, x, w), f), atol=1e-8)


# -- loss_dyn ---------------------------------------------------------------------


@pytest.mark.parametrize(
    "targets, flows, expected",
    [
        ([[1.0, 2.0, 3.0]], [[1.0, 2.0, 3.0]], 0.0),
        ([[0.0, 0.0, 2.0]], [[0.0, 0.0, 0.0]], 4.0),
        ([[1.0, 0.0, 0.0], [0.0, 3.0, 0.0]], [[0.0, 0.0, 0.0], [0.0, 0.0, 0.0]], 5.0),
    ],
)
def test_loss_dyn_examples(targets, flows, expected):
    assert loss_dyn(targets, flows) == pytest.approx(expected, abs=1e-15)


def test_loss_dyn_aligns_by_id():
    coarse_ids = np.array([5, 9, 2, 7])
    flows = np.arange(12.0).reshape(4, 3)
    targets = flows[[2, 0]] + [[0.0, 0.0, 1.0], [0.0, 0.0, 0.0]]
    assert loss_dyn(targets, flows, [2, 5], coarse_ids) == pytest.approx(0.5)


def test_loss_dyn_id_mismatch():
    with pytest.raises(IdMismatch):
        loss_dyn([[0.0, 0.0, 0.0]], np.zeros((2, 3)), [4], [1, 2])
    with pytest.raises(IdMismatch):
        loss_dyn(np.zeros((2, 3)), np.zeros((3, 3)))
    with pytest.raises(IdMismatch):
        loss_dyn(np.zeros((0, 3)), np.zeros((0, 3)))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 10**6))
def test_loss_dyn_zero_iff_equal_and_permutation_invariant(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 10))
    fc = rng.normal(0, 1, (n, 3))
    assert loss_dyn(fc, fc) == 0.0
    f = fc.copy()
    f[rng.integers(n)] += rng.normal(0, 1, 3) + 1e-3
    assert loss_dyn(fc, f) > 0.0
    perm = rng.permutation(n)
    assert loss_dyn(fc[perm], f[perm]) == pytest.approx(loss_dyn(fc, f), rel=1e-13)


# -- projection and loss_opt --------------------------------------------------------


def test_project_flow_zero():
    np.testing.assert_array_equal(project_flow(FRONT, [1.0, 2.0, 10.0], [0.0, 0.0, 0.0]), [0.0, 0.0])


def test_project_flow_lateral():
    np.testing.assert_allclose(project_flow(FRONT, [0.0, 0.0, 10.0], [1.0, 0.0, 0.0]), [50.0, 0.0], atol=1e-12)


def test_project_flow_radial_through_principal_point():
    np.testing.assert_allclose(project_flow(FRONT, [0.0, 0.0, 10.0], [0.0, 0.0, 3.0]), [0.0, 0.0], atol=1e-12)


@pytest.mark.parametrize("s, f", [([0.0, 0.0, -1.0], [0.0, 0.0, 0.0]), ([0.0, 0.0, 1.0], [0.0, 0.0, -2.0])])
def test_project_flow_behind_camera(s, f):
    with pytest.raises(BehindCamera):
        project_flow(FRONT, s, f)


def test_project_flows_validity_mask():
    s = np.array([[0.0, 0.0, 10.0], [0.0, 0.0, -5.0], [100.0, 0.0, 1.0], [0.0, 0.0, 1.0]])
    f = np.array([[1.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, 0.0], [0.0, 0.0, -3.0]])
    px, valid = project_flows(FRONT, s, f)
    np.testing.assert_array_equal(valid, [True, False, False, False])
    assert np.all(np.isnan(px[~valid]))


def test_project_flow_uses_extrinsic():
    cam = PinholeCamera.from_config(RunConfig().camera)  # looks along radar +x
    # radar +y is image left; a point ahead moving to radar +y moves to smaller u
    px = project_flow(cam, [10.0, 0.0, 0.0], [0.0, 1.0, 0.0])
    np.testing.assert_allclose(px, [-50.0, 0.0], atol=1e-9)


def test_loss_opt_examples():
    s = np.array([[1.0, -1.0, 8.0]])
    f = np.array([[0.3, 0.2, -0.5]])
    exact = project_flow(FRONT, s[0], f[0])[None]
    assert loss_opt(exact, s, f, FRONT) == (pytest.approx(0.0, abs=1e-20), 0)
    assert loss_opt(exact + [3.0, 4.0], s, f, FRONT)[0] == pytest.approx(25.0, abs=1e-12)


def test_loss_opt_excludes_invisible_points():
    s = np.array([[0.0, 0.0, 10.0], [0.0, 0.0, -5.0]])
    f = np.zeros((2, 3))
    value, excluded = loss_opt([[2.0, 0.0], [100.0, 100.0]], s, f, FRONT)
    assert value == pytest.approx(4.0)
    assert excluded == 1
    with pytest.raises(NoVisiblePoints):
        loss_opt([[0.0, 0.0]], s[1:], f[1:], FRONT)


def test_loss_opt_permutation_invariant_and_gradient():
    rng = np.random.default_rng(7)
    cam = PinholeCamera(extrinsic=Pose.from_rotvec([0.05, -0.1, 0.02], [0.1, 0.0, 0.0]))
    s = np.column_stack([rng.uniform(-2, 2, 8), rng.uniform(-2, 2, 8), rng.uniform(6, 15, 8)])
    f = rng.normal(0, 0.3, (8, 3))
    o = rng.normal(0, 20, (8, 2))
    v, _, g = loss_opt(o, s, f, cam, return_grad=True)
    perm = rng.permutation(8)
    assert loss_opt(o[perm], s[perm], f[perm], cam)[0] == pytest.approx(v, rel=1e-13)
    fd = numeric_grad(lambda x: loss_opt(o, s, x, cam)[0], f)
    np.testing.assert_allclose(g, fd, rtol=1e-6, atol=1e-6)


# -- loss_self ----------------------------------------------------------------------


def test_loss_self_static_zero_motion():
    rng = np.random.default_rng(8)
    s = rng.uniform(2, 20, (10, 3))
    assert loss_self(s, np.zeros(10), s, np.zeros((10, 3)), 0.1) == pytest.approx(0.0, abs=1e-12)


def test_loss_self_radial_term_single_point():
    # receding at 2 m/s for 0.1 s along the line of sight
    s1 = np.array([[10.0, 0.0, 0.0]])
    _, (radial, _) = loss_self(s1, [2.0], s1 + [0.2, 0.0, 0.0], [[0.2, 0.0, 0.0]], 0.1, return_terms=True)
    assert radial == pytest.approx(0.0, abs=1e-20)


def separated_subset(points, min_sep=1.0):
    keep = []
    for i, p in enumerate(points):
        if all(np.linalg.norm(p - points[j]) >= min_sep for j in keep):
            keep.append(i)
    return np.array(keep)


def test_loss_self_chamfer_vanishes_on_ground_truth(quiet):
    f1, f2 = quiet.radar[4], quiet.radar[5]
    common = np.intersect1d(f1.ids, f2.ids)
    r1 = np.searchsorted(f1.ids, common)
    r2 = np.searchsorted(f2.ids, common)
    sel = separated_subset(f2.positions[r2])
    assert len(sel) > 10
    s1, s2 = f1.positions[r1[sel]], f2.positions[r2[sel]]
    _, (_, chamfer) = loss_self(s1, f1.rrv[r1[sel]], s2, f1.true_flow[r1[sel]], f2.t - f1.t, return_terms=True)
    assert chamfer < 1e-10


def test_loss_self_saturates_for_unmatched_points():
    s1 = np.array([[10.0, 0.0, 0.0]])
    far = np.array([[50.0, 50.0, 0.0]])
    value = loss_self(s1, [1e3], far, np.zeros((1, 3)), 0.1, clip=0.5, rv_clip=1.0)
    assert value == pytest.approx(1.0 + 0.25, rel=1e-9)


def test_loss_self_empty():
    with pytest.raises(EmptyFrame):
        loss_self(np.zeros((0, 3)), [], np.ones((2, 3)), np.zeros((0, 3)), 0.1)


@pytest.mark.parametrize("seed", range(4))
def test_loss_self_gradient(seed):
    rng = np.random.default_rng(seed)
    s1 = rng.uniform(3, 10, (6, 3))
    s2 = s1 + rng.normal(0, 0.2, (6, 3))
    f = rng.normal(0, 0.15, (6, 3))
    rrv = rng.normal(0, 2, 6)
    fn = lambda x: loss_self(s1, rrv, s2, x, 0.1, 1.0, 0.7, 0.05)  # noqa: E731
    _, g = loss_self(s1, rrv, s2, f, 0.1, 1.0, 0.7, 0.05, return_grad=True)
    np.testing.assert_allclose(g, numeric_grad(fn, f), rtol=1e-6, atol=1e-7)


@pytest.mark.parametrize("seed", range(5))
def test_losses_continuous_in_flow(seed):
    rng = np.random.default_rng(seed)
    n = 8
    s1 = np.column_stack([rng.uniform(-2, 2, n), rng.uniform(-2, 2, n), rng.uniform(6, 15, n)])
    s2 = s1 + rng.normal(0, 0.3, (n, 3))
    f = rng.normal(0, 0.3, (n, 3))
    d = rng.normal(0, 1, (n, 3))
    d /= np.linalg.norm(d)
    T = random_pose(rng, 0.3)
    fns = [
        lambda x: loss_dyn(s2 - s1, x),
        lambda x: loss_opt(rng_o, s1, x, FRONT)[0],
        lambda x: loss_self(s1, rrv, s2, x, 0.1),
        lambda x: loss_trans_surrogate(T, s1, x),
    ]
    rng_o = rng.normal(0, 10, (n, 2))
    rrv = rng.normal(0, 2, n)
    for fn in fns:
        base = fn(f)
        ratios = [abs(fn(f + eps * d) - base) / eps for eps in (1e-3, 1e-4, 1e-5, 1e-6)]
        assert max(ratios) < 1e3
        assert abs(fn(f + 1e-9 * d) - base) < 1e-5


# -- loss_flow and reports -----------------------------------------------------------


@pytest.mark.parametrize(
    "l_opt, l_self, l_dyn, lam, expected",
    [(0.0, 0.0, 0.0, 0.1, 0.0), (10.0, 1.0, 2.0, 0.1, 4.0), (7.5, 1.25, 2.0, 0.0, 3.25)],
)
def test_loss_flow_examples(l_opt, l_self, l_dyn, lam, expected):
    assert loss_flow(l_opt, l_self, l_dyn, lam) == expected


@given(
    st.floats(0, 1e6, allow_nan=False),
    st.floats(0, 1e6, allow_nan=False),
    st.floats(0, 1e6, allow_nan=False),
    st.floats(0, 10, allow_nan=False),
)
def test_loss_flow_composition(l_opt, l_self, l_dyn, lam):
    assert loss_flow(l_opt, l_self, l_dyn, lam) == pytest.approx(lam * l_opt + l_self + l_dyn, rel=1e-12, abs=1e-12)


def test_loss_report_composition_identity():
    cfg = RunConfig(seed=1)
    cfg.scenario.duration = 2.0
    sc = simulate_scenario(cfg)
    bundles = extract_bundles(sc.trajectory, sc.visual, sc.radar, sc.radar_extrinsic)
    rng = np.random.default_rng(0)
    for lam in (0.0, 0.1, 2.5):
        for b in bundles[::4]:
            f1, f2 = sc.radar[b.frame], sc.radar[b.frame + 1]
            flows = rng.normal(0, 0.5, (len(f1), 3))
            rep = loss_report(b, f1, f2, flows, random_pose(rng, 0.2), sc.camera, cfg.estimator, lam)
            assert abs(rep.l_flow - (lam * rep.l_opt + rep.l_self + rep.l_dyn)) <= 1e-12 * max(1.0, rep.l_flow)
            assert min(rep.l_trans, rep.l_dyn, rep.l_opt, rep.l_self) >= 0.0
            assert len(rep.row()) == len(LOSS_COLUMNS)


def test_end_to_end_zero_residual(quiet):
    """Noiseless oracles with ground-truth flows and transforms leave no residual."""
    sc = quiet
    bundles = extract_bundles(sc.trajectory, sc.visual, sc.radar, sc.radar_extrinsic)
    n_dyn = 0
    for b in bundles:
        f1, f2 = sc.radar[b.frame], sc.radar[b.frame + 1]
        static = ~f1.is_dynamic
        T_hat = kabsch_fit(f1.positions[static], f1.positions[static] + f1.true_flow[static])
        rep = loss_report(b, f1, f2, f1.true_flow, T_hat, sc.camera)
        assert rep.l_trans < 1e-9
        assert rep.l_dyn < 1e-9
        assert rep.l_opt < 1e-9
        n_dyn += rep.n_dynamic
    assert n_dyn > 0


def test_radial_term_on_ground_truth_is_small(quiet):
    # the range rate is instantaneous while the flow spans a sweep interval,
    # so the radial term is a small discretisation residual rather than zero
    sc = quiet
    for j in range(0, len(sc.radar) - 1, 5):
        f1, f2 = sc.radar[j], sc.radar[j + 1]
        _, (radial, _) = loss_self(f1.positions, f1.rrv, f2.positions, f1.true_flow, f2.t - f1.t, return_terms=True)
        assert radial < 0.05


# -- bundles ------------------------------------------------------------------------


def test_extract_bundle_noiseless_dynamic_targets(quiet):
    sc = quiet
    bundles = extract_bundles(sc.trajectory, sc.visual, sc.radar, sc.radar_extrinsic)
    total = 0
    for b in bundles:
        f1 = sc.radar[b.frame]
        rows = np.searchsorted(f1.ids, b.dynamic_ids)
        assert np.all(f1.is_dynamic[rows])
        np.testing.assert_allclose(b.dynamic_flow, f1.true_flow[rows], atol=1e-10)
        labelled = np.searchsorted(f1.ids, b.mask_ids)
        np.testing.assert_array_equal(b.mask_dynamic, f1.is_dynamic[labelled])
        total += len(b.dynamic_ids)
    assert total > 0


def test_extract_bundle_all_static_scene():
    sc = simulate_scenario(quiet_config(seed=2, n_objects=0))
    for b in extract_bundles(sc.trajectory, sc.visual, sc.radar, sc.radar_extrinsic):
        assert len(b.dynamic_ids) == 0
        assert not b.mask_dynamic.any()
        assert len(b.mask_ids) > 0


def test_extract_bundle_mask_error_rate():
    cfg = quiet_config(seed=4, duration=10.0)
    cfg.visual.mask_error_rate = 0.1
    sc = simulate_scenario(cfg)
    wrong = n = 0
    for b in extract_bundles(sc.trajectory, sc.visual, sc.radar, sc.radar_extrinsic):
        f1 = sc.radar[b.frame]
        truth = f1.is_dynamic[np.searchsorted(f1.ids, b.mask_ids)]
        wrong += int(np.sum(truth != b.mask_dynamic))
        n += len(truth)
    assert n >= 1000
    sigma = np.sqrt(0.1 * 0.9 / n)
    assert abs(wrong / n - 0.1) < 3 * sigma


def test_extract_bundle_deterministic(quiet):
    sc = quiet
    a = extract_bundles(sc.trajectory, sc.visual, sc.radar, sc.radar_extrinsic, threads=1)
    b = extract_bundles(sc.trajectory, sc.visual, sc.radar, sc.radar_extrinsic, threads=3)
    for x, y in zip(a, b):
        np.testing.assert_array_equal(x.pseudo_T.to_array(), y.pseudo_T.to_array())
        np.testing.assert_array_equal(x.optical_flow, y.optical_flow)
        np.testing.assert_array_equal(x.dynamic_flow, y.dynamic_flow)


def test_extract_bundle_frame_gaps(quiet):
    sc = quiet
    with pytest.raises(FrameGap):
        extract_bundle(sc.trajectory, sc.visual[3], sc.radar[4], sc.radar[5], sc.radar_extrinsic)
    with pytest.raises(FrameGap):
        extract_bundles(sc.trajectory, sc.visual[:-1], sc.radar, sc.radar_extrinsic)

    class Sparse:
        t = np.array([0.0])

        def pose(self, j):
            return Pose.identity()

    with pytest.raises(FrameGap):
        extract_bundle(Sparse(), sc.visual[0], sc.radar[0], sc.radar[1], sc.radar_extrinsic)


def test_bundle_invariants_enforced():
    kw = dict(frame=0, t_src=0.0, t_dst=0.1, pseudo_T=Pose.identity(), dynamic_flow=np.zeros((1, 3)), optical_ids=np.array([1, 2]))
    with pytest.raises(IdMismatch):
        SupervisionBundle(
            dynamic_ids=np.array([1]),
            optical_flow=np.zeros((2, 2)),
            mask_ids=np.array([1, 2]),
            mask_dynamic=np.array([False, True]),
            **kw,
        )
    with pytest.raises(ValueError):
        SupervisionBundle(
            dynamic_ids=np.array([2]),
            optical_flow=np.array([[0.0, np.nan], [0.0, 0.0]]),
            mask_ids=np.array([1, 2]),
            mask_dynamic=np.array([False, True]),
            **kw,
        )

"""Supervision for a radar scene-flow estimator from fused odometry and camera oracles.

Two signals are produced per radar sweep pair:

* a pseudo ground-truth rigid transform of the radar, from the fused
  vehicle poses and the radar extrinsic;
* per-point targets from the camera: dynamic masks, 3D flow of dynamic
  points from reconstructed positions, and pixel flow.

The loss functions take the estimator's coarse flows ``f_hat`` and, when
``return_grad`` is set, also return the gradient with respect to them so
that training can backpropagate without a framework.  ``loss_trans`` uses
the unsquared norm while ``loss_dyn`` and ``loss_opt`` use squared norms.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .camera import MIN_DEPTH, PinholeCamera
from .errors import BehindCamera, EmptyFrame, FrameGap, IdMismatch, NoVisiblePoints
from .geometry import Pose, compose, inverse

DEFAULT_LAMBDA_OPT = 0.1
_NORM_EPS = 1e-12


# -- pseudo ground truth -----------------------------------------------------------


def pseudo_gt_transform(pose_i: Pose, pose_j: Pose, extrinsic: Pose) -> Pose:
    """Radar-frame transform mapping sweep ``i`` coordinates to sweep ``j`` coordinates.

    ``pose_*`` are body-to-world poses and ``extrinsic`` maps radar to body,
    so ``T = E^-1 o pose_j^-1 o pose_i o E`` and a static point obeys
    ``s_j = T s_i``.
    """
    return compose(inverse(extrinsic), compose(inverse(pose_j), compose(pose_i, extrinsic)))


# -- individual losses -------------------------------------------------------------


def loss_trans(T: Pose, T_hat: Pose, points, return_residuals=False):
    """Mean of ``|(R R_hat^T - I) s + t - t_hat|`` over ``points``."""
    s = np.asarray(points, dtype=float).reshape(-1, 3)
    if len(s) == 0:
        raise EmptyFrame("loss_trans needs at least one point")
    M = T.R @ T_hat.R.T - np.eye(3)
    r = s @ M.T + (T.t - T_hat.t)
    norms = np.sqrt(np.einsum("ij,ij->i", r, r))
    value = float(norms.mean())
    return (value, norms) if return_residuals else value


def loss_trans_surrogate(T: Pose, points, f_hat, weights=None, return_grad=False):
    """Weighted mean of ``|static_flow(T, s_i) - f_hat_i|``.

    This is the per-point form of :func:`loss_trans` with the estimator's
    rigid fit replaced by each point's own predicted motion; its gradient
    reaches the flows directly.
    """
    s = np.asarray(points, dtype=float).reshape(-1, 3)
    f = np.asarray(f_hat, dtype=float).reshape(-1, 3)
    if len(s) == 0:
        raise EmptyFrame("loss_trans needs at least one point")
    w = np.ones(len(s)) if weights is None else np.asarray(weights, dtype=float)
    wsum = w.sum()
    if wsum <= 0:
        return (0.0, np.zeros_like(f)) if return_grad else 0.0
    r = (s @ T.R.T + T.t - s) - f
    norms = np.sqrt(np.einsum("ij,ij->i", r, r))
    value = float(w @ norms / wsum)
    if not return_grad:
        return value
    grad = -(w / (wsum * np.maximum(norms, _NORM_EPS)))[:, None] * r
    return value, grad


def _align(target_ids, coarse_ids):
    """Row indices into ``coarse_ids`` for each of ``target_ids``."""
    target_ids = np.asarray(target_ids)
    coarse_ids = np.asarray(coarse_ids)
    order = np.argsort(coarse_ids, kind="stable")
    pos = np.searchsorted(coarse_ids, target_ids, sorter=order)
    pos = np.minimum(pos, len(coarse_ids) - 1) if len(coarse_ids) else pos
    if len(coarse_ids) == 0 or np.any(coarse_ids[order[pos]] != target_ids):
        raise IdMismatch("target ids missing from the coarse flow")
    return order[pos]


def loss_dyn(targets, f_hat, target_ids=None, coarse_ids=None, return_grad=False):
    """Mean of ``|f_C_i - f_hat_i|^2`` over dynamic targets.

    Without ids the rows must already correspond; with ids each target is
    matched to the coarse flow carrying the same id.  The gradient has the
    shape of the full ``f_hat``.
    """
    fc = np.asarray(targets, dtype=float).reshape(-1, 3)
    f = np.asarray(f_hat, dtype=float).reshape(-1, 3)
    if target_ids is None:
        if fc.shape != f.shape:
            raise IdMismatch(f"{len(fc)} targets for {len(f)} flows")
        rows = np.arange(len(f))
    else:
        rows = _align(target_ids, coarse_ids)
    if len(fc) == 0:
        raise IdMismatch("loss_dyn needs at least one target")
    r = fc - f[rows]
    value = float(np.einsum("ij,ij->", r, r) / len(fc))
    if not return_grad:
        return value
    grad = np.zeros_like(f)
    np.add.at(grad, rows, -2.0 * r / len(fc))
    return value, grad


def project_flows(camera: PinholeCamera, points, f_hat):
    """Pixel flow of radar-frame ``points`` moved by ``f_hat``.

    Returns ``(pixels (N, 2), valid (N,))``; a point is valid when both ends
    lie in front of the camera and the start projects inside the image.
    Invalid rows are NaN.
    """
    s = np.asarray(points, dtype=float).reshape(-1, 3)
    f = np.asarray(f_hat, dtype=float).reshape(-1, 3)
    c1 = camera.to_camera(s)
    c2 = camera.to_camera(s + f)
    valid = camera.in_view(c1) & camera.in_front(c2)
    px = np.full((len(s), 2), np.nan)
    px[valid] = camera.pixel_flow(c1[valid], c2[valid])
    return px, valid


def project_flow(camera: PinholeCamera, point, f_hat):
    """Pixel flow ``proj(s + f_hat) - proj(s)`` of a single radar-frame point."""
    c1 = camera.to_camera(np.asarray(point, dtype=float))
    c2 = camera.to_camera(np.asarray(point, dtype=float) + np.asarray(f_hat, dtype=float))
    if not (c1[2] > MIN_DEPTH and c2[2] > MIN_DEPTH):
        raise BehindCamera("point or its flowed position is behind the camera")
    return camera.pixel_flow(c1, c2)


def loss_opt(optical, points, f_hat, camera: PinholeCamera, return_grad=False):
    """Mean of ``|o_i - project_flow(s_i, f_hat_i)|^2`` over visible points.

    Returns ``(value, n_excluded)`` or ``(value, n_excluded, grad)``.
    """
    o = np.asarray(optical, dtype=float).reshape(-1, 2)
    s = np.asarray(points, dtype=float).reshape(-1, 3)
    f = np.asarray(f_hat, dtype=float).reshape(-1, 3)
    px, valid = project_flows(camera, s, f)
    n = int(valid.sum())
    if n == 0:
        raise NoVisiblePoints("no point projects into the camera")
    r = o[valid] - px[valid]
    value = float(np.einsum("ij,ij->", r, r) / n)
    excluded = len(s) - n
    if not return_grad:
        return value, excluded
    c2 = camera.to_camera(s[valid] + f[valid])
    x, y, z = c2[:, 0], c2[:, 1], c2[:, 2]
    # d(pixel)/d(camera point), then through the extrinsic rotation
    J = np.zeros((n, 2, 3))
    J[:, 0, 0] = camera.fx / z
    J[:, 0, 2] = -camera.fx * x / (z * z)
    J[:, 1, 1] = camera.fy / z
    J[:, 1, 2] = -camera.fy * y / (z * z)
    J = J @ camera.extrinsic.R
    grad = np.zeros_like(f)
    grad[valid] = -2.0 / n * np.einsum("ni,nij->nj", r, J)
    return value, excluded, grad


def loss_self(
    points1,
    rrv1,
    points2,
    f_hat,
    dt,
    w_rv=1.0,
    w_ch=1.0,
    tau=0.01,
    clip=0.5,
    rv_clip=1.0,
    return_grad=False,
    return_terms=False,
):
    """Self-supervised radar consistency.

    ``w_rv`` weighs the gap ``e`` between the flow's line-of-sight rate
    ``f_hat . s_hat / dt`` and the measured range rate, averaged as
    ``rv_clip^2 (1 - exp(-e^2 / rv_clip^2))`` (squared error near zero,
    bounded for ghosts and gross outliers); ``w_ch`` weighs
    a soft one-sided Chamfer term: for each warped point ``s + f_hat`` the
    softmax-weighted (temperature ``tau`` in m^2) mean squared distance
    ``d`` to the second sweep, saturated as ``clip^2 (1 - exp(-d / clip^2))``
    so that points with no counterpart (dropouts, ghosts, points leaving
    the field of view) stop pulling.  Both terms vanish for exact flows on
    noiseless data.
    """
    s1 = np.asarray(points1, dtype=float).reshape(-1, 3)
    s2 = np.asarray(points2, dtype=float).reshape(-1, 3)
    f = np.asarray(f_hat, dtype=float).reshape(-1, 3)
    rrv = np.asarray(rrv1, dtype=float).reshape(-1)
    if len(s1) == 0 or len(s2) == 0:
        raise EmptyFrame("loss_self needs two non-empty sweeps")
    n = len(s1)
    los = s1 / np.linalg.norm(s1, axis=1, keepdims=True)
    e = np.einsum("ij,ij->i", f, los) / dt - rrv
    rc2 = rv_clip * rv_clip
    sat_rv = np.exp(-(e * e) / rc2)
    radial = float(np.mean(rc2 * (1.0 - sat_rv)))

    w = s1 + f
    diff = w[:, None, :] - s2[None, :, :]  # (n, m, 3)
    d2 = np.einsum("nmk,nmk->nm", diff, diff)
    logits = -(d2 - d2.min(axis=1, keepdims=True)) / tau
    p = np.exp(logits)
    p /= p.sum(axis=1, keepdims=True)
    soft = np.einsum("nm,nm->n", p, d2)
    c2 = clip * clip
    sat = np.exp(-soft / c2)
    chamfer = float(np.mean(c2 * (1.0 - sat)))
    value = w_rv * radial + w_ch * chamfer
    out = (value, (radial, chamfer)) if return_terms else (value,)
    if not return_grad:
        return out if return_terms else value
    # d soft_i / d w_i = sum_j p_ij g_ij - (1/tau) sum_j p_ij (d2_ij - soft_i) g_ij, g_ij = 2 diff_ij
    coef = sat[:, None] * p * (1.0 - (d2 - soft[:, None]) / tau)
    g_ch = 2.0 * np.einsum("nm,nmk->nk", coef, diff) / n
    g_rv = (2.0 / (n * dt)) * (sat_rv * e)[:, None] * los
    return out + (w_rv * g_rv + w_ch * g_ch,)


def loss_flow(l_opt, l_self, l_dyn, lambda_opt=DEFAULT_LAMBDA_OPT):
    """``lambda_opt * l_opt + l_self + l_dyn``."""
    return lambda_opt * l_opt + l_self + l_dyn


# -- bundles -----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class SupervisionBundle:
    """Targets for the radar sweep pair starting at ``frame``.

    ``mask_ids``/``mask_dynamic`` label the points the camera saw; other
    points are unlabelled.  ``dynamic_*`` hold 3D flow targets of points the
    mask calls dynamic and ``optical_*`` the pixel flow of every labelled
    point.
    """

    frame: int
    t_src: float
    t_dst: float
    pseudo_T: Pose
    dynamic_ids: np.ndarray
    dynamic_flow: np.ndarray  # (D, 3)
    optical_ids: np.ndarray
    optical_flow: np.ndarray  # (V, 2) px
    mask_ids: np.ndarray
    mask_dynamic: np.ndarray  # (V,) bool

    def __post_init__(self):
        dyn_set = set(self.mask_ids[self.mask_dynamic].tolist())
        if not set(self.dynamic_ids.tolist()) <= dyn_set:
            raise IdMismatch("every dynamic target must be masked dynamic")
        if not np.all(np.isfinite(self.optical_flow)):
            raise ValueError("pixel flows must be finite")


def extract_bundle(fused, visual, frame1, frame2, extrinsic: Pose, frame=0) -> SupervisionBundle:
    """Supervision for one sweep pair.

    ``fused`` is anything with ``t`` and ``pose(j)`` (a fused or VI
    trajectory); ``visual`` is the camera oracle for the same pair.
    """
    if abs(visual.t_src - frame1.t) > 1e-6 or abs(visual.t_dst - frame2.t) > 1e-6:
        raise FrameGap(f"camera oracle {visual.t_src:.3f}->{visual.t_dst:.3f} does not match sweeps")
    times = np.asarray(fused.t)
    T = pseudo_gt_transform(fused.pose(_index_of(times, frame1.t)), fused.pose(_index_of(times, frame2.t)), extrinsic)
    dyn = visual.dynamic
    return SupervisionBundle(
        frame,
        float(frame1.t),
        float(frame2.t),
        T,
        visual.ids[dyn].copy(),
        visual.recon_dst[dyn] - visual.recon_src[dyn],
        visual.ids.copy(),
        visual.flow_px.copy(),
        visual.ids.copy(),
        dyn.copy(),
    )


def _index_of(times, t):
    j = int(np.searchsorted(times, t - 1e-9))
    if j >= len(times) or abs(times[j] - t) > 1e-6:
        raise FrameGap(f"no fused pose at t={t:.6f}")
    return j


def extract_bundles(fused, visual, radar, extrinsic: Pose, threads=1):
    """Bundles for every consecutive sweep pair."""
    from ._parallel import ordered_map

    if len(visual) != len(radar) - 1:
        raise FrameGap(f"{len(visual)} camera oracles for {len(radar)} sweeps")
    return ordered_map(
        lambda j: extract_bundle(fused, visual[j], radar[j], radar[j + 1], extrinsic, j),
        range(len(visual)),
        threads,
    )


# -- loss report -------------------------------------------------------------------

LOSS_COLUMNS = ("frame", "l_trans", "l_dyn", "l_opt", "l_self", "l_flow", "n_dynamic", "n_excluded")


@dataclass(frozen=True, eq=False)
class LossReport:
    frame: int
    l_trans: float
    l_dyn: float
    l_opt: float
    l_self: float
    l_flow: float
    n_dynamic: int
    n_excluded: int
    residuals: dict = field(default_factory=dict)

    def row(self):
        return tuple(getattr(self, c) for c in LOSS_COLUMNS)


def loss_report(bundle, frame1, frame2, flows, T_hat, camera, cfg=None, lambda_opt=None) -> LossReport:
    """Every loss for one sweep pair given the estimator's flows and transform.

    ``cfg`` is an :class:`visc.config.EstimatorConfig` supplying the
    ``loss_self`` weights and ``lambda_opt``.  Terms with no eligible points
    (no dynamic targets, nothing visible) are reported as zero.
    """
    w_rv = getattr(cfg, "w_rv", 1.0)
    w_ch = getattr(cfg, "w_ch", 1.0)
    tau = getattr(cfg, "chamfer_tau", 0.01)
    clip = getattr(cfg, "chamfer_clip", 0.5)
    rv_clip = getattr(cfg, "rv_clip", 1.0)
    if lambda_opt is None:
        lambda_opt = getattr(cfg, "lambda_opt", DEFAULT_LAMBDA_OPT)
    flows = np.asarray(flows, dtype=float)
    l_trans, r_trans = loss_trans(bundle.pseudo_T, T_hat, frame1.positions, return_residuals=True)

    n_dyn = len(bundle.dynamic_ids)
    l_dyn = loss_dyn(bundle.dynamic_flow, flows, bundle.dynamic_ids, frame1.ids) if n_dyn else 0.0

    dyn_opt = bundle.mask_dynamic
    n_excluded = 0
    l_opt = 0.0
    if dyn_opt.any():
        rows = _align(bundle.optical_ids[dyn_opt], frame1.ids)
        try:
            l_opt, n_excluded = loss_opt(bundle.optical_flow[dyn_opt], frame1.positions[rows], flows[rows], camera)
        except NoVisiblePoints:
            n_excluded = int(dyn_opt.sum())
    dt = frame2.t - frame1.t
    l_self = loss_self(frame1.positions, frame1.rrv, frame2.positions, flows, dt, w_rv, w_ch, tau, clip, rv_clip)
    return LossReport(
        bundle.frame,
        l_trans,
        l_dyn,
        l_opt,
        l_self,
        loss_flow(l_opt, l_self, l_dyn, lambda_opt),
        n_dyn,
        n_excluded,
        {"trans": r_trans},
    )


__all__ = [
    "DEFAULT_LAMBDA_OPT",
    "LOSS_COLUMNS",
    "LossReport",
    "SupervisionBundle",
    "extract_bundle",
    "extract_bundles",
    "loss_dyn",
    "loss_flow",
    "loss_opt",
    "loss_report",
    "loss_self",
    "loss_trans",
    "loss_trans_surrogate",
    "project_flow",
    "project_flows",
    "pseudo_gt_transform",
]

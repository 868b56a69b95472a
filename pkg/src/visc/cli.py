"""Command-line front end: ``visc <command> [--config F] [--seed N] [--out DIR] [--threads N]``.

Every command reads and writes fixed file names inside the run directory
``--out``.  The configuration comes from ``--config`` if given, otherwise
from the run directory's manifest, otherwise the defaults; ``--seed``
overrides it.  Exit codes: 0 success, 2 configuration error, 3 data error,
4 radar-only contract violation.  ``VISC_LOG`` sets the log level.
"""

from __future__ import annotations

import argparse
import dataclasses
import logging
import os
import sys
import types
from pathlib import Path

import numpy as np

from . import __version__
from . import io as vio
from .camera import PinholeCamera
from .config import RunConfig, validate
from .errors import ViscError
from .estimator import infer_sequence, init_estimator, load_estimator, predict, save_estimator, train_estimator, training_pair
from .fusion import INNOVATION_COLUMNS, fuse_trajectory
from .geometry import Pose, relative
from .inertial import (
    LstmInertialModel,
    OracleInertialModel,
    fit_normalization,
    init_params,
    load_params,
    save_params,
    train,
    training_segments,
)
from .metrics import METRIC_COLUMNS, FramePrediction, FrameTruth, evaluate_run
from .sim import ViOdometryStream, imu_noise_from_config, simulate_scenario
from .sim.sensors import camera_indices
from .supervision import LOSS_COLUMNS, extract_bundles, loss_report, pseudo_gt_transform

log = logging.getLogger("visc")


# -- helpers ------------------------------------------------------------------------


def _path(args, key):
    return Path(args.out) / vio.FILES[key]


def _config(args) -> RunConfig:
    manifest = Path(args.out) / vio.FILES["manifest"]
    if args.config:
        cfg = RunConfig.load(args.config)
    elif manifest.exists():
        cfg = vio.read_manifest(manifest)
    else:
        cfg = RunConfig()
    if args.seed is not None:
        cfg = dataclasses.replace(cfg, seed=int(args.seed))
    validate(cfg)
    return cfg


def _camera_reference(traj, cfg):
    idx = camera_indices(traj, cfg.scenario.camera_rate)
    return ViOdometryStream(traj.t[idx].copy(), traj.quat[idx], traj.position[idx].copy())


def _radar_poses(traj_like, times, extrinsic):
    """Radar-in-world poses at ``times`` from anything with ``t`` and ``pose(j)``."""
    t = np.asarray(traj_like.t)
    out = []
    for x in times:
        j = int(np.argmin(np.abs(t - x)))
        out.append(traj_like.pose(j))
    return out


# -- commands -----------------------------------------------------------------------


def cmd_simulate(args):
    cfg = _config(args)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    sc = simulate_scenario(cfg, threads=args.threads)
    vio.write_imu(_path(args, "imu"), sc.imu)
    vio.write_poses(_path(args, "vi_odom"), "vi_odom", sc.vi)
    vio.write_compass(_path(args, "compass"), sc.compass)
    vio.write_truth(_path(args, "truth"), sc.trajectory)
    vio.write_radar(_path(args, "radar"), sc.radar)
    vio.write_radar_truth(_path(args, "radar_truth"), sc.radar)
    vio.write_visual(_path(args, "visual"), sc.visual)
    vio.write_manifest(_path(args, "manifest"), cfg, "simulate", __version__)
    log.info("simulated %.1f s: %d IMU samples, %d radar sweeps", cfg.scenario.duration, len(sc.imu), len(sc.radar))


def cmd_train_inertial(args):
    cfg = _config(args)
    imu = vio.read_imu(_path(args, "imu"), imu_noise_from_config(cfg.imu_noise))
    if cfg.inertial.target == "truth":
        reference = _camera_reference(vio.read_truth(_path(args, "truth"), cfg.scenario.imu_rate), cfg)
    else:
        reference = vio.read_vi(_path(args, "vi_odom"))
    segments = training_segments(imu, reference)
    hyper = types.SimpleNamespace(**dataclasses.asdict(cfg.inertial), seed=cfg.seed)
    if args.resume:
        params, state = load_params(args.resume)
    else:
        params = fit_normalization(init_params(cfg.inertial.hidden, cfg.inertial.layers, cfg.seed), segments)
        state = None
    res = train(params, segments, hyper, state)
    save_params(_path(args, "inertial_weights"), res.params, res.state)
    vio.write_csv(_path(args, "inertial_trace"), ("epoch", "mode", "loss"), [(r["epoch"], r["mode"], r["loss"]) for r in res.trace])
    log.info("inertial network: %d segments, final loss %.6g", len(segments), res.trace[-1]["loss"])


def cmd_fuse(args):
    cfg = _config(args)
    imu = vio.read_imu(_path(args, "imu"), imu_noise_from_config(cfg.imu_noise))
    vi = vio.read_vi(_path(args, "vi_odom"))
    compass = vio.read_compass(_path(args, "compass"))
    truth_path = _path(args, "truth")
    if args.oracle_sigma is not None:
        model = OracleInertialModel(vio.read_truth(truth_path, cfg.scenario.imu_rate), args.oracle_sigma, cfg.seed)
    else:
        params, _ = load_params(args.weights or _path(args, "inertial_weights"))
        model = LstmInertialModel(params)
    fused = fuse_trajectory(vi, imu, model, compass, cfg.fusion, imu_noise_from_config(cfg.imu_noise))
    vio.write_fused(_path(args, "fused_odom"), fused)
    vio.write_csv(_path(args, "innovations"), INNOVATION_COLUMNS, fused.innovations)
    if truth_path.exists():
        ref = _camera_reference(vio.read_truth(truth_path, cfg.scenario.imu_rate), cfg)
        vio.write_json(_path(args, "drift_report"), drift_report(vi, fused, ref))


def drift_report(vi, fused, truth):
    """Endpoint and per-frame relative errors of VI and fused odometry against truth."""

    def errors(stream):
        end = float(np.linalg.norm(stream.position[-1] - truth.position[-1]))
        rte = []
        for j in range(1, len(truth.t)):
            T_est = relative(stream.pose(j - 1), stream.pose(j))
            T_gt = relative(truth.pose(j - 1), truth.pose(j))
            rte.append(float(np.linalg.norm(T_est.t - T_gt.t)))
        return end, np.array(rte)

    vi_end, vi_rte = errors(vi)
    fu_end, fu_rte = errors(fused)
    return {
        "vi_endpoint_error_m": vi_end,
        "fused_endpoint_error_m": fu_end,
        "vi_rte_mean_m": float(vi_rte.mean()) if len(vi_rte) else 0.0,
        "fused_rte_mean_m": float(fu_rte.mean()) if len(fu_rte) else 0.0,
        "fraction_frames_fused_better": float(np.mean(fu_rte < vi_rte)) if len(vi_rte) else 0.0,
    }


def cmd_extract(args):
    cfg = _config(args)
    camera = PinholeCamera.from_config(cfg.camera)
    fused = vio.read_fused(_path(args, "fused_odom"))
    radar = vio.read_radar(_path(args, "radar"))
    visual = vio.read_visual(_path(args, "visual"), camera)
    bundles = extract_bundles(fused, visual, radar, Pose.from_array(cfg.radar.extrinsic), threads=args.threads)
    vio.write_bundles(_path(args, "supervision"), bundles)


def cmd_train_flow(args):
    cfg = _config(args)
    camera = PinholeCamera.from_config(cfg.camera)
    bundles = vio.read_bundles(_path(args, "supervision"))
    radar = vio.read_radar(_path(args, "radar"))
    k = cfg.estimator.k
    pairs = [training_pair(radar[b.frame], radar[b.frame + 1], b, k) for b in bundles]
    n_train = max(1, int(cfg.train_fraction * len(pairs)))
    model = init_estimator(cfg.estimator.hidden, k, cfg.seed)
    res = train_estimator(model, pairs[:n_train], cfg.estimator, camera)
    save_estimator(_path(args, "estimator"), res.model)
    vio.write_csv(_path(args, "flow_trace"), ("epoch", "objective"), list(enumerate(res.trace, start=1)))
    rows = []
    for b in bundles:
        f1, f2 = radar[b.frame], radar[b.frame + 1]
        r = predict(res.model, f1, f2)
        rows.append(loss_report(b, f1, f2, r.flows, r.T_hat, camera, cfg.estimator).row())
    vio.write_csv(_path(args, "loss_report"), LOSS_COLUMNS, rows)


def cmd_infer(args):
    _config(args)
    radar = vio.read_radar(args.radar or _path(args, "radar"), strict=True)
    model = load_estimator(args.model or _path(args, "estimator"))
    results = infer_sequence(model, radar)
    vio.write_predictions(_path(args, "predictions"), results, radar)


def cmd_evaluate(args):
    cfg = _config(args)
    radar = vio.read_radar(_path(args, "radar"), _path(args, "radar_truth"))
    traj = vio.read_truth(_path(args, "truth"), cfg.scenario.imu_rate)
    extrinsic = Pose.from_array(cfg.radar.extrinsic)
    preds = [FramePrediction(f, ids, flows, T) for f, ids, flows, T in vio.read_predictions(_path(args, "predictions"))]
    truth = []
    for j in range(len(radar) - 1):
        f1, f2 = radar[j], radar[j + 1]
        T = pseudo_gt_transform(traj.pose(traj.index(f1.t)), traj.pose(traj.index(f2.t)), extrinsic)
        truth.append(FrameTruth(j, f1.ids, f1.true_flow, f1.is_ghost, T))
    ev = evaluate_run(preds, truth)
    vio.write_csv(_path(args, "metrics"), METRIC_COLUMNS, [r.row() for r in ev.frames])
    summary = ev.summary()
    split = max(1, int(cfg.train_fraction * len(truth)))
    held = [p for p in preds if p.frame >= split]
    if held:
        summary["held_out"] = {"first_frame": split, **evaluate_run(held, truth).summary()}
    vio.write_json(_path(args, "summary"), summary)
    vio.write_csv(
        _path(args, "error_series"),
        ("frame", "t", "epe", "rte_m", "rae_deg"),
        [(r.frame, radar[r.frame].t, r.flow.epe, r.pose.rte, r.pose.rae) for r in ev.frames],
    )


def cmd_pipeline(args):
    """Every stage in order inside one run directory."""
    cmd_simulate(args)
    args.config = None  # later stages read the manifest just written
    args.seed = None
    if args.oracle_sigma is None:
        cmd_train_inertial(args)
    cmd_fuse(args)
    cmd_extract(args)
    cmd_train_flow(args)
    cmd_infer(args)
    cmd_evaluate(args)


COMMANDS = {
    "simulate": cmd_simulate,
    "train-inertial": cmd_train_inertial,
    "fuse": cmd_fuse,
    "extract": cmd_extract,
    "train-flow": cmd_train_flow,
    "infer": cmd_infer,
    "evaluate": cmd_evaluate,
    "pipeline": cmd_pipeline,
}


def build_parser():
    parser = argparse.ArgumentParser(prog="visc", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"visc {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="JSON run configuration")
        p.add_argument("--seed", type=int, help="root seed (overrides the config)")
        p.add_argument("--out", default="run", help="run directory (default: run)")
        p.add_argument("--threads", type=int, default=1)
        if name == "train-inertial":
            p.add_argument("--resume", help="weight file to continue training from")
        if name in ("fuse", "pipeline"):
            p.add_argument("--weights", help="inertial weight file (default: run directory)")
            p.add_argument("--oracle-sigma", type=float, help="use ground truth plus noise of this sigma (m) as the inertial model")
        if name == "infer":
            p.add_argument("--radar", help="radar log (default: run directory)")
            p.add_argument("--model", help="estimator file (default: run directory)")
        if name == "pipeline":
            p.set_defaults(resume=None, radar=None, model=None)
    return parser


def main(argv=None):
    logging.basicConfig(level=os.environ.get("VISC_LOG", "WARNING").upper(), format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    if args.threads < 1:
        print("error: --threads must be at least 1", file=sys.stderr)
        return 2
    try:
        COMMANDS[args.command](args)
    except ViscError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code
    return 0


if __name__ == "__main__":
    sys.exit(main())

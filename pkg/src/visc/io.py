"""Run-directory files: JSONL sensor logs, CSV tables and the run manifest.

Every JSONL line is one object with a ``"type"`` field.  Floats are written
with Python's shortest round-trip representation, so reading a log back
gives bit-identical arrays; NaN is written as ``null``.
"""

from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .config import RunConfig
from .errors import ContractViolation, IoError, ParseError
from .fusion import FusedTrajectory
from .geometry import Pose
from .sim import CompassStream, ImuNoise, ImuStream, RadarFrame, Trajectory, ViOdometryStream, VisualOracle
from .supervision import SupervisionBundle

FILES = {
    "manifest": "manifest.json",
    "imu": "imu.jsonl",
    "vi_odom": "vi_odom.jsonl",
    "compass": "compass.jsonl",
    "radar": "radar.jsonl",
    "radar_truth": "radar_truth.jsonl",
    "visual": "visual.jsonl",
    "truth": "truth.jsonl",
    "inertial_weights": "inertial.bin",
    "inertial_trace": "inertial_trace.csv",
    "fused_odom": "fused_odom.jsonl",
    "innovations": "innovations.csv",
    "drift_report": "drift_report.json",
    "supervision": "supervision.jsonl",
    "estimator": "estimator.bin",
    "flow_trace": "flow_trace.csv",
    "loss_report": "losses.csv",
    "predictions": "predictions.jsonl",
    "metrics": "metrics.csv",
    "summary": "summary.json",
    "error_series": "error_series.csv",
}

RADAR_ONLY_KEYS = frozenset({"type", "frame", "t", "ids", "positions", "rrv"})


# -- primitives ---------------------------------------------------------------------


def plain(x):
    """JSON-ready copy of ``x``: arrays become lists and NaN becomes None."""
    if isinstance(x, dict):
        return {k: plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [plain(v) for v in x]
    if isinstance(x, np.ndarray):
        if x.dtype.kind == "f":
            obj = x.astype(object)
            obj[~np.isfinite(x)] = None
            return obj.tolist()
        return x.tolist()
    if isinstance(x, (np.floating, float)):
        return float(x) if np.isfinite(x) else None
    if isinstance(x, np.integer):
        return int(x)
    if isinstance(x, np.bool_):
        return bool(x)
    return x


def dumps(record):
    return json.dumps(plain(record), separators=(",", ":"), allow_nan=False)


def write_jsonl(path, records):
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="\n") as fh:
            for r in records:
                fh.write(dumps(r))
                fh.write("\n")
    except OSError as exc:
        raise IoError(path, "cannot write file") from exc


def read_jsonl(path, kind=None):
    """``(line_number, record)`` pairs; ``kind`` checks every record's type."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(path) from exc
    out = []
    for n, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rec = json.loads(line)
        except json.JSONDecodeError as exc:
            raise ParseError(path, n, f"invalid JSON ({exc.msg})") from None
        if not isinstance(rec, dict):
            raise ParseError(path, n, "expected a JSON object")
        if kind is not None and rec.get("type") != kind:
            raise ParseError(path, n, f"expected a {kind!r} record, found {rec.get('type')!r}")
        out.append((n, rec))
    return out


def _array(path, n, rec, key, shape=None, dtype=float):
    try:
        v = rec[key]
        a = np.array([np.nan if x is None else x for x in _flatten(v)], dtype=dtype) if dtype is float else np.array(v, dtype=dtype)
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(path, n, f"bad or missing field {key!r}") from exc
    if shape is not None:
        try:
            a = a.reshape(shape)
        except ValueError as exc:
            raise ParseError(path, n, f"field {key!r} has the wrong size") from exc
    return a


def _flatten(v):
    if isinstance(v, list):
        for x in v:
            yield from _flatten(x)
    else:
        yield v


def _scalar(path, n, rec, key, cast=float):
    try:
        return cast(rec[key])
    except (KeyError, TypeError, ValueError) as exc:
        raise ParseError(path, n, f"bad or missing field {key!r}") from exc


def write_csv(path, columns, rows):
    path = Path(path)
    try:
        with path.open("w", encoding="utf-8", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for r in rows:
                w.writerow([_cell(x) for x in r])
    except OSError as exc:
        raise IoError(path, "cannot write file") from exc


def _cell(x):
    if isinstance(x, (bool, np.bool_)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return repr(float(x)) if np.isfinite(x) else "nan"
    return x


def write_json(path, obj):
    path = Path(path)
    try:
        path.write_text(json.dumps(plain(obj), indent=2, sort_keys=True, allow_nan=False) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoError(path, "cannot write file") from exc


def read_json(path):
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoError(path) from exc
    try:
        return json.loads(text)
    except json.JSONDecodeError as exc:
        raise ParseError(path, exc.lineno, exc.msg) from None


# -- manifest -----------------------------------------------------------------------


def write_manifest(path, cfg: RunConfig, command, version):
    write_json(path, {"command": command, "version": version, "seed": cfg.seed, "config": cfg.to_dict()})


def read_manifest(path) -> RunConfig:
    d = read_json(path)
    if not isinstance(d, dict) or "config" not in d:
        raise ParseError(path, 0, "manifest has no config")
    return RunConfig.from_dict(d["config"])


# -- streams ------------------------------------------------------------------------


def write_imu(path, imu: ImuStream):
    write_jsonl(path, ({"type": "imu", "t": imu.t[k], "accel": imu.accel[k], "gyro": imu.gyro[k]} for k in range(len(imu))))


def read_imu(path, noise: ImuNoise = ImuNoise()) -> ImuStream:
    recs = read_jsonl(path, "imu")
    if len(recs) < 2:
        raise ParseError(path, len(recs), "need at least two IMU samples")
    t = np.array([_scalar(path, n, r, "t") for n, r in recs])
    accel = np.stack([_array(path, n, r, "accel", (3,)) for n, r in recs])
    gyro = np.stack([_array(path, n, r, "gyro", (3,)) for n, r in recs])
    return ImuStream(t, accel, gyro, noise)


def write_poses(path, kind, stream):
    write_jsonl(path, ({"type": kind, "t": stream.t[j], "q": stream.quat[j], "p": stream.position[j]} for j in range(len(stream.t))))


def read_poses(path, kind):
    recs = read_jsonl(path, kind)
    t = np.array([_scalar(path, n, r, "t") for n, r in recs])
    q = np.stack([_array(path, n, r, "q", (4,)) for n, r in recs]) if recs else np.zeros((0, 4))
    p = np.stack([_array(path, n, r, "p", (3,)) for n, r in recs]) if recs else np.zeros((0, 3))
    return t, q, p


def read_vi(path) -> ViOdometryStream:
    return ViOdometryStream(*read_poses(path, "vi_odom"))


def write_fused(path, fused: FusedTrajectory):
    write_poses(path, "fused_odom", fused)


def read_fused(path) -> FusedTrajectory:
    return FusedTrajectory(*read_poses(path, "fused_odom"))


def write_compass(path, compass: CompassStream):
    write_jsonl(path, ({"type": "compass", "t": compass.t[j], "heading": compass.heading[j]} for j in range(len(compass.t))))


def read_compass(path) -> CompassStream:
    recs = read_jsonl(path, "compass")
    return CompassStream(
        np.array([_scalar(path, n, r, "t") for n, r in recs]), np.array([_scalar(path, n, r, "heading") for n, r in recs])
    )


def write_truth(path, traj: Trajectory):
    write_jsonl(
        path,
        (
            {
                "type": "truth",
                "t": traj.t[k],
                "p": traj.position[k],
                "v": traj.velocity[k],
                "a": traj.accel[k],
                "yaw": traj.yaw[k],
                "yaw_rate": traj.yaw_rate[k],
            }
            for k in range(len(traj))
        ),
    )


def read_truth(path, rate) -> Trajectory:
    recs = read_jsonl(path, "truth")
    if not recs:
        raise ParseError(path, 0, "empty truth log")
    return Trajectory(
        float(rate),
        np.array([_scalar(path, n, r, "t") for n, r in recs]),
        np.stack([_array(path, n, r, "p", (3,)) for n, r in recs]),
        np.stack([_array(path, n, r, "v", (3,)) for n, r in recs]),
        np.stack([_array(path, n, r, "a", (3,)) for n, r in recs]),
        np.array([_scalar(path, n, r, "yaw") for n, r in recs]),
        np.array([_scalar(path, n, r, "yaw_rate") for n, r in recs]),
    )


def write_radar(path, frames):
    """Radar-only sweeps: nothing the simulator knows beyond the measurement."""
    write_jsonl(
        path,
        ({"type": "radar", "frame": j, "t": f.t, "ids": f.ids, "positions": f.positions, "rrv": f.rrv} for j, f in enumerate(frames)),
    )


def write_radar_truth(path, frames):
    write_jsonl(
        path,
        (
            {"type": "radar_truth", "frame": j, "ids": f.ids, "is_dynamic": f.is_dynamic, "is_ghost": f.is_ghost, "true_flow": f.true_flow}
            for j, f in enumerate(frames)
        ),
    )


def read_radar(path, truth_path=None, strict=False):
    """Radar sweeps, optionally joined with their simulator labels.

    ``strict`` enforces the radar-only contract: any record that is not a
    plain radar measurement raises :class:`ContractViolation`.
    """
    if strict:
        for n, rec in read_jsonl(path):
            if rec.get("type") != "radar" or not set(rec) <= RADAR_ONLY_KEYS:
                raise ContractViolation(f"{path}:{n}: inference accepts radar measurements only")
    recs = read_jsonl(path, "radar")
    truth = {}
    if truth_path is not None:
        for n, r in read_jsonl(truth_path, "radar_truth"):
            truth[_scalar(truth_path, n, r, "frame", int)] = (n, r)
    frames = []
    for j, (n, r) in enumerate(recs):
        if _scalar(path, n, r, "frame", int) != j:
            raise ParseError(path, n, f"expected frame {j}")
        ids = _array(path, n, r, "ids", dtype=np.int64).reshape(-1)
        m = len(ids)
        pos = _array(path, n, r, "positions", (m, 3))
        rrv = _array(path, n, r, "rrv", (m,))
        if truth_path is None:
            frames.append(RadarFrame(_scalar(path, n, r, "t"), pos, rrv, ids, np.zeros(m, bool), np.zeros(m, bool), np.full((m, 3), np.nan)))
            continue
        if j not in truth:
            raise ParseError(truth_path, 0, f"no labels for frame {j}")
        tn, tr = truth[j]
        if not np.array_equal(_array(truth_path, tn, tr, "ids", dtype=np.int64).reshape(-1), ids):
            raise ParseError(truth_path, tn, f"ids differ from the radar log in frame {j}")
        frames.append(
            RadarFrame(
                _scalar(path, n, r, "t"),
                pos,
                rrv,
                ids,
                _array(truth_path, tn, tr, "is_dynamic", dtype=bool).reshape(m),
                _array(truth_path, tn, tr, "is_ghost", dtype=bool).reshape(m),
                _array(truth_path, tn, tr, "true_flow", (m, 3)),
            )
        )
    return frames


def write_visual(path, visual):
    write_jsonl(
        path,
        (
            {
                "type": "visual",
                "frame": j,
                "t_src": v.t_src,
                "t_dst": v.t_dst,
                "ids": v.ids,
                "flow_px": v.flow_px,
                "dynamic": v.dynamic,
                "recon_src": v.recon_src,
                "recon_dst": v.recon_dst,
                "n_dropped": v.n_dropped,
            }
            for j, v in enumerate(visual)
        ),
    )


def read_visual(path, camera):
    out = []
    for n, r in read_jsonl(path, "visual"):
        ids = _array(path, n, r, "ids", dtype=np.int64).reshape(-1)
        m = len(ids)
        out.append(
            VisualOracle(
                _scalar(path, n, r, "t_src"),
                _scalar(path, n, r, "t_dst"),
                ids,
                _array(path, n, r, "flow_px", (m, 2)),
                _array(path, n, r, "dynamic", dtype=bool).reshape(m),
                _array(path, n, r, "recon_src", (m, 3)),
                _array(path, n, r, "recon_dst", (m, 3)),
                _scalar(path, n, r, "n_dropped", int),
                camera,
            )
        )
    return out


def write_bundles(path, bundles):
    write_jsonl(
        path,
        (
            {
                "type": "supervision",
                "frame": b.frame,
                "t_src": b.t_src,
                "t_dst": b.t_dst,
                "pseudo_T": b.pseudo_T.to_array(),
                "dynamic_ids": b.dynamic_ids,
                "dynamic_flow": b.dynamic_flow,
                "optical_ids": b.optical_ids,
                "optical_flow": b.optical_flow,
                "mask_ids": b.mask_ids,
                "mask_dynamic": b.mask_dynamic,
            }
            for b in bundles
        ),
    )


def read_bundles(path):
    out = []
    for n, r in read_jsonl(path, "supervision"):
        d_ids = _array(path, n, r, "dynamic_ids", dtype=np.int64).reshape(-1)
        o_ids = _array(path, n, r, "optical_ids", dtype=np.int64).reshape(-1)
        m_ids = _array(path, n, r, "mask_ids", dtype=np.int64).reshape(-1)
        out.append(
            SupervisionBundle(
                _scalar(path, n, r, "frame", int),
                _scalar(path, n, r, "t_src"),
                _scalar(path, n, r, "t_dst"),
                Pose.from_array(_array(path, n, r, "pseudo_T", (7,))),
                d_ids,
                _array(path, n, r, "dynamic_flow", (len(d_ids), 3)),
                o_ids,
                _array(path, n, r, "optical_flow", (len(o_ids), 2)),
                m_ids,
                _array(path, n, r, "mask_dynamic", dtype=bool).reshape(len(m_ids)),
            )
        )
    return out


def write_predictions(path, results, frames):
    write_jsonl(
        path,
        (
            {
                "type": "prediction",
                "frame": j,
                "t": frames[j].t,
                "ids": r.ids,
                "flows": r.flows,
                "static_prob": r.static_prob,
                "T_hat": r.T_hat.to_array(),
                "fallback": r.fallback,
            }
            for j, r in enumerate(results)
        ),
    )


def read_predictions(path):
    """``(frame, ids, flows, T_hat)`` per prediction record."""
    out = []
    for n, r in read_jsonl(path, "prediction"):
        ids = _array(path, n, r, "ids", dtype=np.int64).reshape(-1)
        out.append(
            (
                _scalar(path, n, r, "frame", int),
                ids,
                _array(path, n, r, "flows", (len(ids), 3)),
                Pose.from_array(_array(path, n, r, "T_hat", (7,))),
            )
        )
    return out


__all__ = [
    "FILES",
    "dumps",
    "plain",
    "read_bundles",
    "read_compass",
    "read_fused",
    "read_imu",
    "read_json",
    "read_jsonl",
    "read_manifest",
    "read_predictions",
    "read_radar",
    "read_truth",
    "read_vi",
    "read_visual",
    "write_bundles",
    "write_compass",
    "write_csv",
    "write_fused",
    "write_imu",
    "write_json",
    "write_jsonl",
    "write_manifest",
    "write_poses",
    "write_predictions",
    "write_radar",
    "write_radar_truth",
    "write_truth",
    "write_visual",
]

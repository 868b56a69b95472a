"""Scene-flow and rigid-transform accuracy metrics.

Flow errors are end-point errors over points with a physical
correspondence; ghosts are excluded and counted.  Run-level aggregates are
point-pooled (primary) and per-frame means and medians.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import AlignmentError, NoValidPoints
from .geometry import Pose, rotation_error

STRICT = 0.05  # m
RELAXED = 0.1  # m

METRIC_COLUMNS = ("frame", "epe", "acc_s", "acc_r", "rte_m", "rae_deg", "n_points")


@dataclass(frozen=True)
class FlowMetrics:
    epe: float
    acc_s: float
    acc_r: float
    n_points: int
    n_excluded: int = 0


@dataclass(frozen=True)
class PoseMetrics:
    rte: float  # m
    rae: float  # deg


def point_errors(pred, gt, ghost=None):
    """End-point errors of the non-ghost points and the number excluded."""
    pred = np.asarray(pred, dtype=float).reshape(-1, 3)
    gt = np.asarray(gt, dtype=float).reshape(-1, 3)
    if pred.shape != gt.shape:
        raise AlignmentError(f"{len(pred)} predicted flows for {len(gt)} ground-truth flows")
    keep = np.ones(len(gt), dtype=bool) if ghost is None else ~np.asarray(ghost, dtype=bool)
    return np.linalg.norm(pred[keep] - gt[keep], axis=1), int((~keep).sum())


def flow_metrics(pred, gt, ghost=None, strict=STRICT, relaxed=RELAXED) -> FlowMetrics:
    """EPE and the fractions of points with error below ``strict`` and ``relaxed``."""
    err, excluded = point_errors(pred, gt, ghost)
    if len(err) == 0:
        raise NoValidPoints("no non-ghost points to score")
    if not np.all(np.isfinite(err)):
        raise AlignmentError("non-finite flow on a scored point")
    return FlowMetrics(float(err.mean()), float(np.mean(err < strict)), float(np.mean(err < relaxed)), len(err), excluded)


def pose_metrics(T_hat: Pose, T_gt: Pose) -> PoseMetrics:
    """Translation distance and rotation angle (deg) between two frame-to-frame transforms."""
    return PoseMetrics(float(np.linalg.norm(T_hat.t - T_gt.t)), float(np.degrees(rotation_error(T_hat, T_gt))))


@dataclass(frozen=True)
class FrameEval:
    frame: int
    flow: FlowMetrics
    pose: PoseMetrics

    def row(self):
        return (self.frame, self.flow.epe, self.flow.acc_s, self.flow.acc_r, self.pose.rte, self.pose.rae, self.flow.n_points)


@dataclass(frozen=True)
class FramePrediction:
    frame: int
    ids: np.ndarray
    flows: np.ndarray
    T_hat: Pose


@dataclass(frozen=True)
class FrameTruth:
    frame: int
    ids: np.ndarray
    flows: np.ndarray
    ghost: np.ndarray
    T: Pose


@dataclass(frozen=True)
class RunEvaluation:
    frames: list  # FrameEval per frame, in order
    pooled: FlowMetrics
    n_excluded: int

    def summary(self):
        """Pooled and per-frame aggregates as a plain dict."""
        rows = np.array([r.row()[1:6] for r in self.frames], dtype=float)
        names = ("epe", "acc_s", "acc_r", "rte_m", "rae_deg")
        return {
            "n_frames": len(self.frames),
            "n_points": self.pooled.n_points,
            "n_excluded": self.n_excluded,
            "pooled": {"epe": self.pooled.epe, "acc_s": self.pooled.acc_s, "acc_r": self.pooled.acc_r},
            "frame_mean": dict(zip(names, rows.mean(axis=0).tolist())),
            "frame_median": dict(zip(names, np.median(rows, axis=0).tolist())),
        }


def evaluate_run(predictions, truth, strict=STRICT, relaxed=RELAXED) -> RunEvaluation:
    """Per-frame and aggregate metrics of aligned prediction and truth streams.

    Items are :class:`FramePrediction` and :class:`FrameTruth` matched by
    frame index; predicted ids must equal the truth ids of that frame.
    """
    predictions, truth = list(predictions), list(truth)
    if not predictions:
        raise AlignmentError("no predictions to evaluate")
    by_frame = {t.frame: t for t in truth}
    rows, errors, excluded = [], [], 0
    for p in predictions:
        t = by_frame.get(p.frame)
        if t is None:
            raise AlignmentError(f"no ground truth for frame {p.frame}")
        if len(p.ids) != len(t.ids) or np.any(np.asarray(p.ids) != np.asarray(t.ids)):
            raise AlignmentError(f"point ids differ in frame {p.frame}")
        err, n_ex = point_errors(p.flows, t.flows, t.ghost)
        fm = flow_metrics(p.flows, t.flows, t.ghost, strict, relaxed)
        rows.append(FrameEval(p.frame, fm, pose_metrics(p.T_hat, t.T)))
        errors.append(err)
        excluded += n_ex
    err = np.concatenate(errors)
    pooled = FlowMetrics(float(err.mean()), float(np.mean(err < strict)), float(np.mean(err < relaxed)), len(err), excluded)
    return RunEvaluation(rows, pooled, excluded)


__all__ = [
    "METRIC_COLUMNS",
    "RELAXED",
    "STRICT",
    "FlowMetrics",
    "FrameEval",
    "FramePrediction",
    "FrameTruth",
    "PoseMetrics",
    "RunEvaluation",
    "evaluate_run",
    "flow_metrics",
    "point_errors",
    "pose_metrics",
]

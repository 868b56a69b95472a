"""Error-state Kalman filter correcting a drifting odometry pose.

The error state is ``e = [d_theta, d_p]`` with a world-frame (left)
rotation perturbation: ``q_true = Exp(d_theta) * q_est``.  Propagation is
trivial because the odometry already carries the motion; only the
covariance grows.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..errors import NonPsdMeasurement, NonPsdNoise
from ..geometry import Pose, quat_conj, quat_exp, quat_log, quat_mul

_PSD_TOL = 1e-12


@dataclass(frozen=True, eq=False)
class EkfState:
    pose: Pose
    cov: np.ndarray  # (6, 6) over (d_theta, d_p)


def _is_psd(M, tol=_PSD_TOL):
    M = np.asarray(M, dtype=float)
    if not np.all(np.isfinite(M)) or not np.allclose(M, M.T, rtol=0.0, atol=tol * max(1.0, np.abs(M).max())):
        return False
    return np.linalg.eigvalsh(0.5 * (M + M.T)).min() >= -tol * max(1.0, np.abs(M).max())


def ekf_propagate(s: EkfState, W, validate=True) -> EkfState:
    """``P <- P + W``; the pose is carried over unchanged.

    ``validate=False`` skips the PSD check for a noise matrix the caller
    has already checked.
    """
    W = np.asarray(W, dtype=float)
    if validate and (W.shape != (6, 6) or not _is_psd(W)):
        raise NonPsdNoise("process noise must be a symmetric PSD 6x6 matrix")
    if not np.any(W):
        return s
    return EkfState(s.pose, s.cov + W)


def kalman_update(x, P, z, R, H=None):
    """Linear Kalman update with Joseph-form covariance.

    Returns ``(x_post, P_post, innovation, S)``.  ``R`` must be symmetric
    positive definite.
    """
    x = np.atleast_1d(np.asarray(x, dtype=float))
    P = np.atleast_2d(np.asarray(P, dtype=float))
    z = np.atleast_1d(np.asarray(z, dtype=float))
    R = np.atleast_2d(np.asarray(R, dtype=float))
    H = np.eye(len(z), len(x)) if H is None else np.atleast_2d(np.asarray(H, dtype=float))
    if np.abs(R - R.T).max() > _PSD_TOL * max(1.0, np.abs(R).max()):
        raise NonPsdMeasurement("measurement covariance is not symmetric")
    try:
        np.linalg.cholesky(R)
    except np.linalg.LinAlgError:
        raise NonPsdMeasurement("measurement covariance is not positive definite") from None
    y = z - H @ x
    S = H @ P @ H.T + R
    K = np.linalg.solve(S.T, H @ P.T).T  # P H^T S^-1 with S symmetric
    I_KH = np.eye(len(x)) - K @ H
    P_post = I_KH @ P @ I_KH.T + K @ R @ K.T
    return x + K @ y, 0.5 * (P_post + P_post.T), y, S


@dataclass(frozen=True, eq=False)
class UpdateInfo:
    innovation: np.ndarray  # (6,)
    nis: float  # normalised innovation squared


def ekf_update(s: EkfState, position, position_cov, rotation, rotation_cov, return_info=False):
    """Correct ``s`` with an absolute position and orientation measurement.

    ``rotation`` is a quaternion; ``rotation_cov`` is the 3x3 covariance of
    its world-frame rotation-vector error (roll, pitch, heading).
    """
    R = np.zeros((6, 6))
    R[0:3, 0:3] = rotation_cov
    R[3:6, 3:6] = position_cov
    z = np.concatenate([quat_log(quat_mul(np.asarray(rotation, float), quat_conj(s.pose.q))), position - s.pose.t])
    e, P, y, S = kalman_update(np.zeros(6), s.cov, z, R)
    pose = Pose(quat_mul(quat_exp(e[0:3]), s.pose.q), s.pose.t + e[3:6])
    out = EkfState(pose, P)
    if return_info:
        return out, UpdateInfo(y, float(y @ np.linalg.solve(S, y)))
    return out

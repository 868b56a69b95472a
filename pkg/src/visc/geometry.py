"""Rigid-body geometry shared by every other module.

Conventions
-----------
* Quaternions are Hamilton, scalar first ``(w, x, y, z)``, kept unit norm and
  canonicalised to ``w >= 0``.
* ``Pose(q, t)`` maps coordinates expressed in a source frame into a target
  frame: ``p_target = R(q) @ p_source + t``.  A body pose in the world is
  therefore the body->world map.
* Scene flow of a point is its target-frame coordinates minus its
  source-frame coordinates, ``(R - I) p + t``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DegenerateConfiguration

_EYE3 = np.eye(3)


def quat_mul(a, b):
    aw, ax, ay, az = a
    bw, bx, by, bz = b
    return np.array(
        [
            aw * bw - ax * bx - ay * by - az * bz,
            aw * bx + ax * bw + ay * bz - az * by,
            aw * by - ax * bz + ay * bw + az * bx,
            aw * bz + ax * by - ay * bx + az * bw,
        ]
    )


def quat_conj(q):
    return np.array([q[0], -q[1], -q[2], -q[3]])


def quat_normalize(q):
    q = np.asarray(q, dtype=float)
    n = math.sqrt(float(q @ q))
    if n == 0.0 or not math.isfinite(n):
        raise ValueError("quaternion must be finite and non-zero")
    q = q / n
    if q[0] < 0.0:
        q = -q
    return q


def quat_to_matrix(q):
    w, x, y, z = q
    return np.array(
        [
            [1 - 2 * (y * y + z * z), 2 * (x * y - w * z), 2 * (x * z + w * y)],
            [2 * (x * y + w * z), 1 - 2 * (x * x + z * z), 2 * (y * z - w * x)],
            [2 * (x * z - w * y), 2 * (y * z + w * x), 1 - 2 * (x * x + y * y)],
        ]
    )


def matrix_to_quat(R):
    """Shepperd's method; picks the best-conditioned pivot."""
    R = np.asarray(R, dtype=float)
    tr = R[0, 0] + R[1, 1] + R[2, 2]
    pivots = (tr, R[0, 0], R[1, 1], R[2, 2])
    k = int(np.argmax(pivots))
    if k == 0:
        s = 2.0 * math.sqrt(1.0 + tr)
        q = [0.25 * s, (R[2, 1] - R[1, 2]) / s, (R[0, 2] - R[2, 0]) / s, (R[1, 0] - R[0, 1]) / s]
    elif k == 1:
        s = 2.0 * math.sqrt(1.0 + R[0, 0] - R[1, 1] - R[2, 2])
        q = [(R[2, 1] - R[1, 2]) / s, 0.25 * s, (R[0, 1] + R[1, 0]) / s, (R[0, 2] + R[2, 0]) / s]
    elif k == 2:
        s = 2.0 * math.sqrt(1.0 + R[1, 1] - R[0, 0] - R[2, 2])
        q = [(R[0, 2] - R[2, 0]) / s, (R[0, 1] + R[1, 0]) / s, 0.25 * s, (R[1, 2] + R[2, 1]) / s]
    else:
        s = 2.0 * math.sqrt(1.0 + R[2, 2] - R[0, 0] - R[1, 1])
        q = [(R[1, 0] - R[0, 1]) / s, (R[0, 2] + R[2, 0]) / s, (R[1, 2] + R[2, 1]) / s, 0.25 * s]
    return quat_normalize(q)


def quat_exp(rotvec):
    """Rotation vector (axis * angle, rad) to unit quaternion."""
    v = np.asarray(rotvec, dtype=float)
    theta = math.sqrt(float(v @ v))
    half = 0.5 * theta
    if theta < 1e-8:
        # second-order series keeps the norm exact to rounding
        k = 0.5 - theta * theta / 48.0
        return quat_normalize([1.0 - theta * theta / 8.0, k * v[0], k * v[1], k * v[2]])
    k = math.sin(half) / theta
    return quat_normalize([math.cos(half), k * v[0], k * v[1], k * v[2]])


def quat_log(q):
    """Unit quaternion to rotation vector with angle in [0, pi]."""
    q = quat_normalize(q)
    v = q[1:]
    s = math.sqrt(float(v @ v))
    if s < 1e-12:
        return 2.0 * v / q[0]
    return 2.0 * math.atan2(s, q[0]) * v / s


def axis_angle(axis, angle):
    axis = np.asarray(axis, dtype=float)
    return quat_exp(axis / np.linalg.norm(axis) * angle)


def rotation_angle(q):
    """Angle in radians of the rotation encoded by ``q``."""
    q = np.asarray(q, dtype=float)
    return 2.0 * math.atan2(math.sqrt(q[1] ** 2 + q[2] ** 2 + q[3] ** 2), abs(q[0]))


def yaw_of(q):
    R = quat_to_matrix(q)
    return math.atan2(R[1, 0], R[0, 0])


def skew(v):
    x, y, z = v
    return np.array([[0.0, -z, y], [z, 0.0, -x], [-y, x, 0.0]])


def _frozen(a):
    a = np.array(a, dtype=float)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class Pose:
    """Element of SE(3): unit quaternion rotation plus translation (m)."""

    q: np.ndarray
    t: np.ndarray

    def __post_init__(self):
        t = np.asarray(self.t, dtype=float).reshape(3)
        object.__setattr__(self, "q", _frozen(quat_normalize(self.q)))
        object.__setattr__(self, "t", _frozen(t))

    @classmethod
    def identity(cls):
        return cls(np.array([1.0, 0.0, 0.0, 0.0]), np.zeros(3))

    @classmethod
    def from_translation(cls, t):
        return cls(np.array([1.0, 0.0, 0.0, 0.0]), t)

    @classmethod
    def from_rotvec(cls, rotvec, t=(0.0, 0.0, 0.0)):
        return cls(quat_exp(rotvec), t)

    @classmethod
    def from_matrix(cls, M):
        M = np.asarray(M, dtype=float)
        return cls(matrix_to_quat(M[:3, :3]), M[:3, 3])

    @classmethod
    def from_array(cls, a):
        a = np.asarray(a, dtype=float)
        return cls(a[:4], a[4:7])

    @property
    def R(self):
        return quat_to_matrix(self.q)

    def matrix(self):
        M = np.eye(4)
        M[:3, :3] = self.R
        M[:3, 3] = self.t
        return M

    def to_array(self):
        """7 floats ``qw, qx, qy, qz, tx, ty, tz``."""
        return np.concatenate([self.q, self.t])

    def __matmul__(self, other):
        return compose(self, other)

    def inverse(self):
        return inverse(self)

    def apply(self, p):
        return transform_point(self, p)

    def allclose(self, other, atol=1e-10):
        dq = quat_mul(self.q, quat_conj(other.q))
        return rotation_angle(dq) <= atol and np.allclose(self.t, other.t, rtol=0.0, atol=atol)

    def __repr__(self):
        q = ", ".join(f"{x:.6g}" for x in self.q)
        t = ", ".join(f"{x:.6g}" for x in self.t)
        return f"Pose(q=[{q}], t=[{t}])"


def transform_point(T: Pose, p):
    """``R p + t`` for a single point or an ``(N, 3)`` array."""
    p = np.asarray(p, dtype=float)
    return p @ T.R.T + T.t


def compose(T_a: Pose, T_b: Pose) -> Pose:
    """``T_a o T_b``: apply ``T_b`` first."""
    return Pose(quat_mul(T_a.q, T_b.q), T_a.R @ T_b.t + T_a.t)


def inverse(T: Pose) -> Pose:
    qi = quat_conj(T.q)
    return Pose(qi, -(quat_to_matrix(qi) @ T.t))


def relative(T_i: Pose, T_j: Pose) -> Pose:
    """Map from frame ``i`` coordinates to frame ``j`` coordinates.

    With ``T_i``, ``T_j`` the frame-to-world poses this is ``T_j^-1 o T_i``.
    """
    return compose(inverse(T_j), T_i)


def static_scene_flow(T: Pose, p):
    """Displacement of a static point: ``(R - I) p + t``."""
    p = np.asarray(p, dtype=float)
    return transform_point(T, p) - p


def rotation_error(T_a: Pose, T_b: Pose) -> float:
    """Angle (rad) of ``R_a R_b^T``."""
    return rotation_angle(quat_mul(T_a.q, quat_conj(T_b.q)))


def kabsch_fit(src, dst, weights=None, rank_tol=1e-10) -> Pose:
    """Weighted least-squares rigid fit mapping ``src`` onto ``dst``.

    Minimises ``sum_i w_i |R src_i + t - dst_i|^2`` over proper rotations.

    Raises
    ------
    DegenerateConfiguration
        Total weight is not positive, fewer than three points carry weight,
        or the weighted cross-covariance has rank below two (coincident or
        collinear points).
    """
    src = np.asarray(src, dtype=float).reshape(-1, 3)
    dst = np.asarray(dst, dtype=float).reshape(-1, 3)
    if src.shape != dst.shape:
        raise ValueError(f"src {src.shape} and dst {dst.shape} differ")
    w = np.ones(len(src)) if weights is None else np.asarray(weights, dtype=float)
    if w.shape != (len(src),) or np.any(w < 0) or not np.all(np.isfinite(w)):
        raise ValueError("weights must be finite, non-negative, one per point")
    total = w.sum()
    if total <= 0.0 or np.count_nonzero(w) < 3:
        raise DegenerateConfiguration("need three or more points with positive weight")

    wn = w / total
    c_src = wn @ src
    c_dst = wn @ dst
    H = (src - c_src).T @ ((dst - c_dst) * wn[:, None])
    U, S, Vt = np.linalg.svd(H)
    if not S[0] > 0.0 or S[1] <= rank_tol * S[0]:
        raise DegenerateConfiguration("points are coincident or collinear")
    d = 1.0 if np.linalg.det(Vt.T @ U.T) >= 0.0 else -1.0
    R = Vt.T @ np.diag([1.0, 1.0, d]) @ U.T
    q = matrix_to_quat(R)
    return Pose(q, c_dst - quat_to_matrix(q) @ c_src)

"""Sliding-window weighted least squares over positions and velocities.

Each node is ``x_i = [p_i, v_i]`` in world coordinates.  Two kinds of edge
link consecutive nodes:

* a network edge: ``p_{i+1} - p_i = t_hat`` with covariance ``Gamma``;
* a kinematic edge (preintegration): ``p_{i+1} - p_i - v_i dt = delta_p``
  and ``v_{i+1} - v_i = delta_v`` with a joint 6x6 covariance.

The problem is linear.  It is solved for a correction about a reference
point obtained by chaining the edge measurements forward from the prior
mean, so round-off scales with the (small) inconsistency between
measurements rather than with the absolute coordinates.  The oldest node
carries a Gaussian prior; it fixes the translation gauge and absorbs
everything marginalised out of the window.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np
from scipy.linalg import cho_factor, cho_solve

from ..errors import NonPsdMeasurement, SingularSystem
from .preintegration import Preintegration

NODE = 6


@dataclass(frozen=True, eq=False)
class NetworkObservation:
    """World-frame translation between consecutive nodes."""

    translation: np.ndarray
    covariance: np.ndarray


def _spd_inverse(cov, what):
    cov = np.asarray(cov, dtype=float)
    try:
        L = np.linalg.cholesky(cov)
    except np.linalg.LinAlgError:
        raise NonPsdMeasurement(f"{what} covariance is not positive definite") from None
    Li = np.linalg.inv(L)
    return Li.T @ Li


def _kinematic_jacobian(dt):
    J = np.zeros((6, 2 * NODE))
    J[0:3, 0:3] = J[3:6, 3:6] = -np.eye(3)
    J[0:3, 3:6] = -dt * np.eye(3)
    J[0:3, 6:9] = J[3:6, 9:12] = np.eye(3)
    return J


_NET_J = np.hstack([-np.eye(3), np.zeros((3, 3)), np.eye(3), np.zeros((3, 3))])


@dataclass(frozen=True, eq=False)
class _Edge:
    """Measurements of one edge and their constant normal-equation blocks.

    The stacked residual is ``r = z - J [x_i; x_{i+1}]`` with ``z`` the
    network translation (3 rows, if present) followed by the kinematic
    increments (6 rows, if present).
    """

    net_z: Optional[np.ndarray]
    kin_z: Optional[np.ndarray]
    dt: float
    z: np.ndarray  # (k,) stacked measurement
    J: np.ndarray  # (k, 12)
    L: np.ndarray  # (k, k) block-diagonal information
    H: np.ndarray  # (12, 12) = J^T L J
    JtL: np.ndarray  # (12, k)

    def predict(self, x):
        """Chain node ``x`` forward through the measurements."""
        p, v = x[0:3], x[3:6]
        if self.kin_z is not None:
            p_next = p + self.dt * v + self.kin_z[0:3]
            v_next = v + self.kin_z[3:6]
        else:
            p_next, v_next = p, v
        if self.net_z is not None:
            p_next = p + self.net_z
        return np.concatenate([p_next, v_next])

    def residual(self, xa, xb):
        dp = xb[0:3] - xa[0:3]
        parts = []
        if self.net_z is not None:
            parts.append(self.net_z - dp)
        if self.kin_z is not None:
            parts.append(self.kin_z[0:3] - (dp - self.dt * xa[3:6]))
            parts.append(self.kin_z[3:6] - (xb[3:6] - xa[3:6]))
        return np.concatenate(parts) if parts else np.zeros(0)

    def normal(self, xa, xb):
        """``(H, g, c)`` of this edge about the node pair ``(xa, xb)``.

        The cost of a correction ``d`` is ``d^T H d - 2 g^T d + c``.
        """
        r = self.residual(xa, xb)
        return self.H.copy(), self.JtL @ r, float(r @ self.L @ r)


def _make_edge(net: Optional[NetworkObservation], kin: Optional[Preintegration]) -> _Edge:
    net_z = kin_z = None
    dt = 0.0
    Js, Ls = [], []
    if net is not None:
        net_z = np.asarray(net.translation, dtype=float).reshape(3)
        Js.append(_NET_J)
        Ls.append(_spd_inverse(net.covariance, "network"))
    if kin is not None:
        kin_z = np.concatenate([kin.delta_p, kin.delta_v]).astype(float)
        dt = float(kin.dt)
        Js.append(_kinematic_jacobian(dt))
        Ls.append(_spd_inverse(kin.covariance, "preintegration"))
    J = np.vstack(Js) if Js else np.zeros((0, 2 * NODE))
    k = J.shape[0]
    L = np.zeros((k, k))
    i = 0
    for B in Ls:
        L[i : i + len(B), i : i + len(B)] = B
        i += len(B)
    JtL = J.T @ L
    z = np.concatenate([a for a in (net_z, kin_z) if a is not None]) if Js else np.zeros(0)
    return _Edge(net_z, kin_z, dt, z, J, L, JtL @ J, JtL)


@dataclass(frozen=True, eq=False)
class Window:
    """Up to ``capacity`` nodes, the prior on the oldest, and the edges between them.

    The prior cost is ``(x_0 - mean)^T info (x_0 - mean) + const``.
    """

    capacity: int
    prior_info: np.ndarray  # (6, 6)
    prior_mean: np.ndarray  # (6,)
    prior_const: float = 0.0
    net: tuple = ()
    kin: tuple = ()
    _edges: tuple = ()
    _ref: tuple = ()  # linearisation point per node

    @classmethod
    def start(cls, capacity, mean, covariance=None, information=None):
        """Window with one node and a Gaussian prior on it.

        Give either ``covariance`` or ``information`` (which may be singular,
        e.g. zero on velocities that nothing constrains).
        """
        if capacity < 2:
            raise ValueError("window capacity must be at least 2")
        mean = np.asarray(mean, dtype=float).reshape(NODE)
        if information is None:
            information = _spd_inverse(covariance, "prior")
        return cls(capacity, np.asarray(information, dtype=float), mean, _ref=(mean,))

    @property
    def size(self):
        return len(self.net) + 1

    def reference(self):
        """Node states chained forward through the measurements.

        Any point gives the same solution since the problem is linear; a
        chained one keeps corrections small.
        """
        if len(self._ref) == self.size:
            return np.array(self._ref)
        X = np.empty((self.size, NODE))
        X[0] = self.prior_mean
        for i, e in enumerate(self._edges):
            X[i + 1] = e.predict(X[i])
        return X

    def objective(self, x):
        """Weighted squared residual sum at stacked states ``x`` of shape ``(size, 6)``."""
        x = np.asarray(x, dtype=float).reshape(self.size, NODE)
        r = x[0] - self.prior_mean
        total = float(r @ self.prior_info @ r) + self.prior_const
        for i, e in enumerate(self._edges):
            total += e.normal(x[i], x[i + 1])[2]
        return total


def linearize(w: Window, reference=None):
    """Normal equations about ``reference`` (default :meth:`Window.reference`).

    Returns ``(H, g, c, reference)``; the cost of a correction ``d`` to the
    stacked reference states is ``d^T H d - 2 g^T d + c``.
    """
    X = w.reference() if reference is None else np.asarray(reference, dtype=float)
    n = w.size
    H = np.zeros((NODE * n, NODE * n))
    g = np.zeros(NODE * n)
    r0 = w.prior_mean - X[0]
    H[:NODE, :NODE] = w.prior_info
    g[:NODE] = w.prior_info @ r0
    c = w.prior_const + float(r0 @ w.prior_info @ r0)
    edges = w._edges
    if not edges:
        return H, g, c, X
    if len({len(e.z) for e in edges}) == 1:
        # every edge has the same layout: evaluate residuals in one pass
        pairs = np.hstack([X[:-1], X[1:]])
        R = np.stack([e.z for e in edges]) - (np.stack([e.J for e in edges]) @ pairs[:, :, None])[:, :, 0]
        G = (np.stack([e.JtL for e in edges]) @ R[:, :, None])[:, :, 0]
        c += float(np.sum(R * (np.stack([e.L for e in edges]) @ R[:, :, None])[:, :, 0]))
        for i, e in enumerate(edges):
            s = slice(NODE * i, NODE * (i + 2))
            H[s, s] += e.H
            g[s] += G[i]
        return H, g, c, X
    for i, e in enumerate(edges):
        He, ge, ce = e.normal(X[i], X[i + 1])
        s = slice(NODE * i, NODE * (i + 2))
        H[s, s] += He
        g[s] += ge
        c += ce
    return H, g, c, X


class WindowEstimate:
    """Window solution; the posterior covariance is formed on first access."""

    def __init__(self, positions, velocities, objective, factor, free):
        self.positions = positions  # (n, 3)
        self.velocities = velocities  # (n, 3)
        self.objective = objective
        self._factor = factor
        self._free = free
        self._cov = None

    @property
    def covariance(self):
        """``(6n, 6n)`` inverse information; NaN rows/cols for unconstrained coordinates."""
        if self._cov is None:
            free = self._free
            cov = np.full((free.size, free.size), np.nan)
            cov[np.ix_(free, free)] = cho_solve(self._factor, np.eye(int(free.sum())), check_finite=False)
            self._cov = cov
        return self._cov


def window_optimize(w: Window) -> WindowEstimate:
    """Minimise the window objective.

    Coordinates that no factor touches (an exactly zero diagonal entry) are
    left out of the solve and reported as NaN; any remaining rank deficiency
    raises :class:`SingularSystem`.
    """
    H, g, c, X = linearize(w)
    free = np.diag(H) > 0.0
    x = np.full(len(g), np.nan)
    Hf = H if free.all() else H[np.ix_(free, free)]
    try:
        fac = cho_factor(Hf, check_finite=False)
    except np.linalg.LinAlgError:
        raise SingularSystem("window normal equations are not positive definite") from None
    if not np.all(np.isfinite(fac[0])):
        raise SingularSystem("window normal equations are not finite")
    d = cho_solve(fac, g[free], check_finite=False)
    x[free] = X.reshape(-1)[free] + d
    obj = float(c - g[free] @ d)
    x = x.reshape(-1, NODE)
    return WindowEstimate(x[:, 0:3], x[:, 3:6], obj, fac, free)


def _pinv_psd(M):
    vals, vecs = np.linalg.eigh(0.5 * (M + M.T))
    tol = max(vals.max(initial=0.0), 0.0) * M.shape[0] * np.finfo(float).eps
    inv = np.where(vals > tol, 1.0 / np.where(vals > tol, vals, 1.0), 0.0)
    return (vecs * inv) @ vecs.T


def _inv_psd(M):
    """Inverse of a PSD matrix, falling back to the pseudo-inverse when singular."""
    try:
        return cho_solve(cho_factor(M, check_finite=False), np.eye(len(M)), check_finite=False)
    except np.linalg.LinAlgError:
        return _pinv_psd(M)


def append(w: Window, net=None, kin=None) -> Window:
    """Add a node joined to the newest one; the window may exceed capacity."""
    e = _make_edge(net, kin)
    return Window(
        w.capacity,
        w.prior_info,
        w.prior_mean,
        w.prior_const,
        w.net + (net,),
        w.kin + (kin,),
        w._edges + (e,),
        w._ref + (e.predict(w._ref[-1]),) if len(w._ref) == w.size else (),
    )


def marginalize_oldest(w: Window) -> Window:
    """Fold the oldest node's prior and first edge into a prior on the next node."""
    if w.size < 2:
        raise ValueError("nothing to marginalise")
    e = w._edges[0]
    x0 = w.prior_mean
    x1 = w._ref[1] if len(w._ref) == w.size else e.predict(x0)
    H, g, c = e.normal(x0, x1)
    H[:NODE, :NODE] += w.prior_info
    A00, A01, A11 = H[:NODE, :NODE], H[:NODE, NODE:], H[NODE:, NODE:]
    A00_inv = _inv_psd(A00)
    info = A11 - A01.T @ A00_inv @ A01
    info = 0.5 * (info + info.T)
    vec = g[NODE:] - A01.T @ A00_inv @ g[:NODE]
    const = c - g[:NODE] @ A00_inv @ g[:NODE]
    # complete the square about the reference of node 1
    shift = _inv_psd(info) @ vec
    ref = w._ref[1:] if len(w._ref) == w.size else ()
    return Window(
        w.capacity, info, x1 + shift, float(const - vec @ shift), w.net[1:], w.kin[1:], w._edges[1:], ref
    )


def slide(w: Window, net=None, kin=None) -> Window:
    """Append a node and, once over capacity, marginalise the oldest one.

    Marginalisation is exact for this linear-Gaussian problem, so the
    estimates of the retained nodes match a batch solve over the whole
    history.
    """
    w = append(w, net, kin)
    while w.size > w.capacity:
        w = marginalize_oldest(w)
    return w

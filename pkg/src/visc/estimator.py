"""Radar-only scene-flow estimator with a rigid-transform head.

Per point of the first sweep the features are its range rate and the
offsets to its ``k`` nearest neighbours in the second sweep (nearest
first), taken relative to the sweep-wide median nearest offset.  Only
relative offsets enter, so translating both sweeps together leaves the
prediction unchanged.  A one-hidden-layer tanh trunk feeds two heads:

* flow: a soft choice ``sum_j softmax(Wa h + ba)_j c_j`` among ``k + 2``
  candidates, namely the ``k`` neighbour offsets, the median offset and a
  regressed displacement ``W2 h + b2``;
* a static-probability logit ``ws . h + bs``.

The rigid transform is a weighted Kabsch fit over points whose static
probability exceeds one half.

Inference only ever sees ``positions``, ``rrv``, ``ids`` and ``t`` of the
sweeps; simulation labels are stripped before anything is computed.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.spatial import cKDTree

from ._rng import substream
from .camera import PinholeCamera
from .errors import (
    DegenerateConfiguration,
    EmptyBatch,
    EmptyFrame,
    InvalidHyper,
    IoError,
    NoVisiblePoints,
    ParseError,
)
from .geometry import Pose, kabsch_fit
from .supervision import _align, loss_dyn, loss_opt, loss_self, loss_trans_surrogate

MAGIC = b"VISCEST1"
VERSION = 1
RRV_SCALE = 5.0  # m/s, feature scaling
OFFSET_SCALE = 5.0  # m, feature scaling
_BETA2 = 0.999
_ADAM_EPS = 1e-8
_HEADER = struct.Struct("<8sIIII")


def feature_dim(k):
    return 4 + 3 * k


@dataclass(eq=False)
class EstimatorModel:
    W1: np.ndarray  # (H, D)
    b1: np.ndarray  # (H,)
    W2: np.ndarray  # (3, H) flow head
    b2: np.ndarray  # (3,)
    ws: np.ndarray  # (H,) static head
    bs: np.ndarray  # (1,)
    Wa: np.ndarray  # (k + 2, H) candidate logits
    ba: np.ndarray  # (k + 2,)
    k: int = 8

    @property
    def hidden(self):
        return self.W1.shape[0]

    def arrays(self):
        return [self.W1, self.b1, self.W2, self.b2, self.ws, self.bs, self.Wa, self.ba]

    def with_arrays(self, arrays):
        return EstimatorModel(*[np.array(a, dtype=float) for a in arrays], k=self.k)

    def copy(self):
        return self.with_arrays(self.arrays())

    def flat(self):
        return np.concatenate([a.ravel() for a in self.arrays()])

    def from_flat(self, v):
        v = np.asarray(v, dtype=float)
        out, i = [], 0
        for a in self.arrays():
            out.append(v[i : i + a.size].reshape(a.shape))
            i += a.size
        if i != v.size:
            raise ValueError("flat parameter vector has the wrong length")
        return self.with_arrays(out)


def init_estimator(hidden=32, k=8, seed=0) -> EstimatorModel:
    rng = substream(seed, "estimator_init")
    D = feature_dim(k)
    return EstimatorModel(
        rng.standard_normal((hidden, D)) / np.sqrt(D),
        np.zeros(hidden),
        0.01 * rng.standard_normal((3, hidden)) / np.sqrt(hidden),
        np.zeros(3),
        0.1 * rng.standard_normal(hidden) / np.sqrt(hidden),
        np.zeros(1),
        0.1 * rng.standard_normal((k + 2, hidden)) / np.sqrt(hidden),
        np.zeros(k + 2),
        k,
    )


def zero_estimator(hidden=32, k=8) -> EstimatorModel:
    D = feature_dim(k)
    return EstimatorModel(
        np.zeros((hidden, D)),
        np.zeros(hidden),
        np.zeros((3, hidden)),
        np.zeros(3),
        np.zeros(hidden),
        np.zeros(1),
        np.zeros((k + 2, hidden)),
        np.zeros(k + 2),
        k,
    )


# -- features and forward pass ----------------------------------------------------


def neighbour_offsets(positions1, positions2, k):
    """``(N, k + 1, 3)`` candidate displacements of each first-sweep point.

    The first ``k`` are offsets to the nearest second-sweep points (nearest
    first; the farthest is repeated when the second sweep is small).  The
    last is the sweep-wide median of the nearest offsets, a robust guess of
    the dominant motion for points whose neighbours are unreliable.
    """
    s1 = np.asarray(positions1, dtype=float).reshape(-1, 3)
    s2 = np.asarray(positions2, dtype=float).reshape(-1, 3)
    if len(s1) == 0 or len(s2) == 0:
        raise EmptyFrame("both sweeps must contain points")
    kk = min(k, len(s2))
    _, idx = cKDTree(s2).query(s1, k=kk)
    idx = np.asarray(idx).reshape(len(s1), kk)
    if kk < k:
        idx = np.hstack([idx, np.repeat(idx[:, -1:], k - kk, axis=1)])
    O = s2[idx] - s1[:, None, :]
    median = np.median(O[:, 0, :], axis=0)
    return np.concatenate([O, np.broadcast_to(median, (len(s1), 1, 3))], axis=1)


def point_features(rrv1, offsets):
    """``(N, 4 + 3k)`` features from :func:`neighbour_offsets`.

    Scaled range rate, the scaled sweep median, then each neighbour offset
    relative to that median.
    """
    n = offsets.shape[0]
    median = offsets[:, -1, :]
    rel = offsets[:, :-1, :] - median[:, None, :]
    return np.hstack(
        [
            np.asarray(rrv1, dtype=float).reshape(-1, 1) / RRV_SCALE,
            median / OFFSET_SCALE,
            rel.reshape(n, -1) / OFFSET_SCALE,
        ]
    )


def _forward(model, X, O):
    h = np.tanh(X @ model.W1.T + model.b1)
    a = h @ model.Wa.T + model.ba
    alpha = np.exp(a - a.max(axis=1, keepdims=True))
    alpha /= alpha.sum(axis=1, keepdims=True)
    C = np.concatenate([O, (h @ model.W2.T + model.b2)[:, None, :]], axis=1)
    flows = np.einsum("nk,nkj->nj", alpha, C)
    logits = h @ model.ws + model.bs[0]
    return h, alpha, C, flows, logits


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


@dataclass(frozen=True, eq=False)
class EstimateResult:
    ids: np.ndarray
    flows: np.ndarray  # (N, 3) coarse flow
    static_prob: np.ndarray  # (N,)
    T_hat: Pose
    fallback: bool = False  # T_hat copied from the previous pair


def predict(model: EstimatorModel, frame1, frame2, previous: Pose | None = None) -> EstimateResult:
    """Flows, static probabilities and rigid transform for a sweep pair.

    The rigid transform falls back to ``previous`` (identity if None) when
    the static points cannot determine one.
    """
    frame1, frame2 = frame1.radar_only(), frame2.radar_only()
    if len(frame1) == 0 or len(frame2) == 0:
        raise EmptyFrame("both sweeps must contain points")
    O = neighbour_offsets(frame1.positions, frame2.positions, model.k)
    _, _, _, flows, logits = _forward(model, point_features(frame1.rrv, O), O)
    p = _sigmoid(logits)
    T_hat, fallback = kabsch_head(frame1.positions, flows, p, previous)
    return EstimateResult(frame1.ids.copy(), flows, p, T_hat, fallback)


def kabsch_head(positions, flows, static_prob, previous: Pose | None = None):
    """Rigid transform fitted to ``positions -> positions + flows``.

    Points with ``static_prob > 0.5`` take part, weighted by it.  Returns
    ``(T_hat, fallback)``; on a degenerate fit ``T_hat`` is ``previous``
    (identity if None) and ``fallback`` is True.
    """
    s = np.asarray(positions, dtype=float)
    p = np.asarray(static_prob, dtype=float)
    w = np.where(p > 0.5, p, 0.0)
    try:
        return kabsch_fit(s, s + np.asarray(flows, dtype=float), w), False
    except DegenerateConfiguration:
        return (previous if previous is not None else Pose.identity()), True


def infer_sequence(model: EstimatorModel, radar):
    """:func:`predict` over consecutive sweeps; ``n`` sweeps give ``n - 1`` results."""
    out = []
    prev = None
    for j in range(len(radar) - 1):
        r = predict(model, radar[j], radar[j + 1], prev)
        prev = r.T_hat
        out.append(r)
    return out


# -- training ----------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TrainingPair:
    """A sweep pair with its supervision, reduced to what the objective needs."""

    frame: int
    X: np.ndarray
    O: np.ndarray  # (N, k + 1, 3) candidate displacements
    positions1: np.ndarray
    rrv1: np.ndarray
    positions2: np.ndarray
    dt: float
    pseudo_T: Pose
    dyn_rows: np.ndarray
    dyn_flow: np.ndarray
    opt_rows: np.ndarray
    opt_flow: np.ndarray
    label_rows: np.ndarray
    label_static: np.ndarray  # 1.0 static, 0.0 dynamic


def training_pair(frame1, frame2, bundle, k) -> TrainingPair:
    f1, f2 = frame1.radar_only(), frame2.radar_only()
    O = neighbour_offsets(f1.positions, f2.positions, k)
    dyn_rows = _align(bundle.dynamic_ids, f1.ids) if len(bundle.dynamic_ids) else np.zeros(0, int)
    opt_ids = bundle.optical_ids[bundle.mask_dynamic]
    opt_rows = _align(opt_ids, f1.ids) if len(opt_ids) else np.zeros(0, int)
    label_rows = _align(bundle.mask_ids, f1.ids) if len(bundle.mask_ids) else np.zeros(0, int)
    return TrainingPair(
        bundle.frame,
        point_features(f1.rrv, O),
        O,
        f1.positions,
        f1.rrv,
        f2.positions,
        float(f2.t - f1.t),
        bundle.pseudo_T,
        dyn_rows,
        bundle.dynamic_flow,
        opt_rows,
        bundle.optical_flow[bundle.mask_dynamic],
        label_rows,
        (~bundle.mask_dynamic).astype(float),
    )


def _pair_objective(model, pair: TrainingPair, hyper, camera):
    """Objective of one pair and its gradient with respect to flows and logits."""
    h, alpha, C, flows, logits = _forward(model, pair.X, pair.O)
    p = _sigmoid(logits)
    n = len(flows)
    g_f = np.zeros_like(flows)
    g_z = np.zeros(n)

    # rigid term: per-point residuals weighted by static probability
    r = (pair.positions1 @ pair.pseudo_T.R.T + pair.pseudo_T.t - pair.positions1) - flows
    norms = np.sqrt(np.einsum("ij,ij->i", r, r))
    l_trans, g = loss_trans_surrogate(pair.pseudo_T, pair.positions1, flows, p, return_grad=True)
    psum = p.sum()
    g_f += hyper.trans_weight * g
    g_z += hyper.trans_weight * (norms - l_trans) / psum * p * (1.0 - p)
    J = hyper.trans_weight * l_trans

    if len(pair.dyn_rows):
        l_dyn, g = loss_dyn(pair.dyn_flow, flows[pair.dyn_rows], return_grad=True)
        np.add.at(g_f, pair.dyn_rows, g)
        J += l_dyn
    if len(pair.opt_rows):
        try:
            l_opt, _, g = loss_opt(pair.opt_flow, pair.positions1[pair.opt_rows], flows[pair.opt_rows], camera, True)
            w = hyper.lambda_opt * hyper.opt_pixel_scale
            np.add.at(g_f, pair.opt_rows, w * g)
            J += w * l_opt
        except NoVisiblePoints:
            pass
    l_self, g = loss_self(
        pair.positions1,
        pair.rrv1,
        pair.positions2,
        flows,
        pair.dt,
        hyper.w_rv,
        hyper.w_ch,
        hyper.chamfer_tau,
        hyper.chamfer_clip,
        hyper.rv_clip,
        return_grad=True,
    )
    g_f += g
    J += l_self

    if len(pair.label_rows) and hyper.bce_weight:
        y = pair.label_static
        z = logits[pair.label_rows]
        # numerically stable binary cross-entropy on logits
        bce = np.mean(np.maximum(z, 0) - z * y + np.log1p(np.exp(-np.abs(z))))
        J += hyper.bce_weight * bce
        np.add.at(g_z, pair.label_rows, hyper.bce_weight * (_sigmoid(z) - y) / len(y))
    return float(J), (h, alpha, C), g_f, g_z


def objective_and_gradient(model: EstimatorModel, pairs, hyper, camera=None):
    """Mean training objective over ``pairs`` and its gradient (list of arrays)."""
    if not pairs:
        raise EmptyBatch("no training pairs")
    camera = camera or PinholeCamera()
    grads = [np.zeros_like(a) for a in model.arrays()]
    total = 0.0
    for pair in pairs:
        J, (h, alpha, C), g_f, g_z = _pair_objective(model, pair, hyper, camera)
        total += J
        # flow = sum_j alpha_j C_j with alpha = softmax(Wa h + ba), C_last = W2 h + b2
        d_alpha = np.einsum("nj,nkj->nk", g_f, C)
        d_logit = alpha * (d_alpha - np.sum(alpha * d_alpha, axis=1, keepdims=True))
        g_reg = alpha[:, -1:] * g_f
        grads[6] += d_logit.T @ h
        grads[7] += d_logit.sum(axis=0)
        dh = g_reg @ model.W2 + np.outer(g_z, model.ws) + d_logit @ model.Wa
        da = dh * (1.0 - h * h)
        grads[0] += da.T @ pair.X
        grads[1] += da.sum(axis=0)
        grads[2] += g_reg.T @ h
        grads[3] += g_reg.sum(axis=0)
        grads[4] += h.T @ g_z
        grads[5] += g_z.sum(keepdims=True)
    m = len(pairs)
    return total / m, [g / m for g in grads]


@dataclass(frozen=True, eq=False)
class EstimatorTrainResult:
    model: EstimatorModel
    trace: list = field(default_factory=list)  # objective per epoch, before the step


def train_estimator(model: EstimatorModel, pairs, hyper, camera=None) -> EstimatorTrainResult:
    """Full-batch adaptive gradient descent on the joint objective.

    The objective's terms differ in curvature by orders of magnitude (the
    range-rate term divides by the sweep interval squared), so each
    parameter's step is normalised by a running RMS of its gradient
    (first-moment decay ``hyper.momentum``, second-moment decay 0.999).
    ``hyper`` is an :class:`visc.config.EstimatorConfig`.  The result is a
    deterministic function of its inputs.
    """
    if not (hyper.lr >= 0):
        raise InvalidHyper("lr must be non-negative")
    if int(hyper.epochs) < 1:
        raise InvalidHyper("epochs must be at least 1")
    if hyper.lambda_opt < 0 or not 0 <= hyper.momentum < 1:
        raise InvalidHyper("lambda_opt must be >= 0 and momentum in [0, 1)")
    if not pairs:
        raise EmptyBatch("no training pairs")
    params = [a.copy() for a in model.arrays()]
    m1 = [np.zeros_like(a) for a in params]
    m2 = [np.zeros_like(a) for a in params]
    b1, b2 = hyper.momentum, _BETA2
    trace = []
    for epoch in range(1, int(hyper.epochs) + 1):
        cur = model.with_arrays(params)
        J, grads = objective_and_gradient(cur, pairs, hyper, camera)
        trace.append(J)
        if hyper.lr == 0:
            continue
        c1, c2 = 1.0 - b1**epoch, 1.0 - b2**epoch
        for a, v, g, p in zip(m1, m2, grads, params):
            a *= b1
            a += (1.0 - b1) * g
            v *= b2
            v += (1.0 - b2) * g * g
            p -= hyper.lr * (a / c1) / (np.sqrt(v / c2) + _ADAM_EPS)
    return EstimatorTrainResult(model.with_arrays(params) if hyper.lr else model.copy(), trace)


# -- model file --------------------------------------------------------------------


def save_estimator(path, model: EstimatorModel):
    """Little-endian header (magic, version, input dim, hidden, k) then float64 parameters."""
    D = feature_dim(model.k)
    data = _HEADER.pack(MAGIC, VERSION, D, model.hidden, model.k)
    data += b"".join(np.ascontiguousarray(a, dtype="<f8").tobytes() for a in model.arrays())
    Path(path).write_bytes(data)


def load_estimator(path) -> EstimatorModel:
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoError(path) from exc
    if len(data) < _HEADER.size:
        raise ParseError(path, 0, "truncated header")
    magic, version, D, H, k = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ParseError(path, 0, "not an estimator model file")
    if version != VERSION or D != feature_dim(k):
        raise ParseError(path, 0, f"unsupported version {version} or inconsistent dims")
    template = zero_estimator(H, k)
    n = template.flat().size
    body = data[_HEADER.size :]
    if len(body) != 8 * n:
        raise ParseError(path, 0, f"expected {8 * n} parameter bytes, found {len(body)}")
    return template.from_flat(np.frombuffer(body, dtype="<f8").astype(float))


__all__ = [
    "EstimateResult",
    "EstimatorModel",
    "EstimatorTrainResult",
    "TrainingPair",
    "feature_dim",
    "infer_sequence",
    "init_estimator",
    "kabsch_head",
    "load_estimator",
    "neighbour_offsets",
    "objective_and_gradient",
    "point_features",
    "predict",
    "save_estimator",
    "train_estimator",
    "training_pair",
    "zero_estimator",
]

"""Two-layer LSTM mapping an IMU segment to a translation with uncertainty.

The network reads the per-sample 6-vectors ``accel || gyro`` of one camera
interval and emits a 12-vector through a fully connected layer.  Slots 0-2
are the translation ``t_hat`` (body frame at the segment start), slots 3-5
the log-std coefficients ``c`` with ``gamma = diag(exp(2 c))``; slots 6-11
are computed and stored but carry no meaning.

Forward and backward passes are plain numpy, batched over segments of
equal length.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from ._rng import substream
from .errors import EmptyBatch, EmptySegment, InvalidHyper, IoError, LengthMismatch, ParseError
from .sim.sensors import ImuSegment

INPUT_DIM = 6
OUTPUT_DIM = 12
MAGIC = b"VISCNET1"
FORMAT_VERSION = 1
LOSS_MODES = ("mse", "mahalanobis", "unweighted")


@dataclass(eq=False)
class LstmParams:
    """Weights of the stacked LSTM plus input standardisation statistics.

    Gate blocks inside ``W``, ``U`` and ``b`` are ordered input, forget,
    cell, output.
    """

    W: list  # per layer (4H, in)
    U: list  # per layer (4H, H)
    b: list  # per layer (4H,)
    fc_W: np.ndarray  # (12, H)
    fc_b: np.ndarray  # (12,)
    mean: np.ndarray = field(default_factory=lambda: np.zeros(INPUT_DIM))
    std: np.ndarray = field(default_factory=lambda: np.ones(INPUT_DIM))

    @property
    def hidden(self):
        return self.U[0].shape[1]

    @property
    def layers(self):
        return len(self.W)

    def arrays(self):
        """Trainable arrays in serialisation order."""
        out = []
        for l in range(self.layers):
            out += [self.W[l], self.U[l], self.b[l]]
        return out + [self.fc_W, self.fc_b]

    def with_arrays(self, arrays):
        arrays = list(arrays)
        L = self.layers
        W = [arrays[3 * l] for l in range(L)]
        U = [arrays[3 * l + 1] for l in range(L)]
        b = [arrays[3 * l + 2] for l in range(L)]
        return LstmParams(W, U, b, arrays[3 * L], arrays[3 * L + 1], self.mean.copy(), self.std.copy())

    def copy(self):
        return self.with_arrays([a.copy() for a in self.arrays()])

    def zeros_like(self):
        return self.with_arrays([np.zeros_like(a) for a in self.arrays()])

    def flat(self):
        return np.concatenate([a.ravel() for a in self.arrays()])

    def from_flat(self, v):
        out, i = [], 0
        for a in self.arrays():
            out.append(np.asarray(v[i : i + a.size], dtype=float).reshape(a.shape))
            i += a.size
        return self.with_arrays(out)


def init_params(hidden=64, layers=2, seed=0, input_dim=INPUT_DIM, output_dim=OUTPUT_DIM) -> LstmParams:
    """Uniform ``+-1/sqrt(fan_in)`` weights, zero biases."""
    rng = substream(seed, "inertial_init")
    W, U, b = [], [], []
    for l in range(layers):
        n_in = input_dim if l == 0 else hidden
        W.append(rng.uniform(-1, 1, (4 * hidden, n_in)) / np.sqrt(n_in))
        U.append(rng.uniform(-1, 1, (4 * hidden, hidden)) / np.sqrt(hidden))
        b.append(np.zeros(4 * hidden))
    fc_W = rng.uniform(-1, 1, (output_dim, hidden)) / np.sqrt(hidden)
    return LstmParams(W, U, b, fc_W, np.zeros(output_dim))


def zero_params(hidden=64, layers=2):
    p = init_params(hidden, layers)
    return p.zeros_like()


def fit_normalization(params: LstmParams, segments) -> LstmParams:
    """Per-channel mean/std over every sample of ``segments``."""
    X = np.vstack([s.features() for s in segments])
    std = X.std(axis=0)
    std[std < 1e-12] = 1.0
    out = params.copy()
    out.mean = X.mean(axis=0)
    out.std = std
    return out


@dataclass(frozen=True, eq=False)
class GaussianTranslation:
    t_hat: np.ndarray
    c: np.ndarray
    raw: np.ndarray = None

    @property
    def gamma(self):
        return np.diag(np.exp(2.0 * np.asarray(self.c, dtype=float)))

    @classmethod
    def from_cov(cls, t_hat, sigma):
        sigma = np.broadcast_to(np.asarray(sigma, dtype=float), (3,))
        return cls(np.asarray(t_hat, dtype=float), np.log(sigma))


def _sigmoid(x):
    return 0.5 * (1.0 + np.tanh(0.5 * x))


def _forward_batch(p: LstmParams, X):
    """``X`` is ``(B, T, 6)`` raw features; returns outputs ``(B, 12)`` and a cache."""
    H = p.hidden
    B, T, _ = X.shape
    seq = (X - p.mean) / p.std
    cache = []
    for l in range(p.layers):
        W, U, b = p.W[l], p.U[l], p.b[l]
        h = np.zeros((B, H))
        c = np.zeros((B, H))
        xw = seq @ W.T + b  # input projection for every step at once
        steps = []
        hs = np.empty((B, T, H))
        for t in range(T):
            z = xw[:, t] + h @ U.T
            i = _sigmoid(z[:, :H])
            f = _sigmoid(z[:, H : 2 * H])
            g = np.tanh(z[:, 2 * H : 3 * H])
            o = _sigmoid(z[:, 3 * H :])
            c_prev, h_prev = c, h
            c = f * c_prev + i * g
            tc = np.tanh(c)
            h = o * tc
            hs[:, t] = h
            steps.append((i, f, g, o, c_prev, h_prev, tc))
        cache.append((seq, steps))
        seq = hs
    out = seq[:, -1] @ p.fc_W.T + p.fc_b
    return out, (cache, seq[:, -1])


def _backward_batch(p: LstmParams, cache, dout):
    H = p.hidden
    layer_cache, h_last = cache
    grads = p.zeros_like()
    grads.fc_W = dout.T @ h_last
    grads.fc_b = dout.sum(axis=0)
    B = dout.shape[0]
    T = len(layer_cache[0][1])
    d_seq = np.zeros((B, T, H))
    d_seq[:, -1] = dout @ p.fc_W
    for l in reversed(range(p.layers)):
        x_seq, steps = layer_cache[l]
        W, U = p.W[l], p.U[l]
        dz_all = np.empty((B, T, 4 * H))
        dh_next = np.zeros((B, H))
        dc_next = np.zeros((B, H))
        dU = np.zeros_like(U)
        for t in reversed(range(T)):
            i, f, g, o, c_prev, h_prev, tc = steps[t]
            dh = d_seq[:, t] + dh_next
            do = dh * tc
            dc = dc_next + dh * o * (1.0 - tc * tc)
            dz = np.concatenate(
                [dc * g * i * (1.0 - i), dc * c_prev * f * (1.0 - f), dc * i * (1.0 - g * g), do * o * (1.0 - o)],
                axis=1,
            )
            dc_next = dc * f
            dh_next = dz @ U
            dU += dz.T @ h_prev
            dz_all[:, t] = dz
        flat_dz = dz_all.reshape(B * T, 4 * H)
        grads.W[l] = flat_dz.T @ x_seq.reshape(B * T, -1)
        grads.U[l] = dU
        grads.b[l] = flat_dz.sum(axis=0)
        d_seq = dz_all @ W
    return grads


def forward(params: LstmParams, seg: ImuSegment) -> GaussianTranslation:
    if len(seg) == 0:
        raise EmptySegment("IMU segment has no samples")
    out, _ = _forward_batch(params, seg.features()[None])
    out = out[0]
    return GaussianTranslation(out[0:3].copy(), out[3:6].copy(), out)


def forward_batch(params: LstmParams, segments):
    """Forward many segments, grouping equal lengths; returns ``(N, 12)``."""
    out = np.empty((len(segments), OUTPUT_DIM))
    for idx, X in _groups(segments):
        out[idx], _ = _forward_batch(params, X)
    return out


def _groups(segments):
    by_len = {}
    for n, s in enumerate(segments):
        if len(s) == 0:
            raise EmptySegment(f"segment {n} has no samples")
        by_len.setdefault(len(s), []).append(n)
    for length in sorted(by_len):
        idx = np.array(by_len[length])
        yield idx, np.stack([segments[n].features() for n in idx])


def _stack_preds(targets, preds):
    targets = np.asarray(targets, dtype=float).reshape(-1, 3)
    if len(targets) != len(preds):
        raise LengthMismatch(f"{len(targets)} targets but {len(preds)} predictions")
    if len(targets) == 0:
        raise LengthMismatch("need at least one target")
    t_hat = np.array([p.t_hat for p in preds], dtype=float).reshape(-1, 3)
    c = np.array([p.c for p in preds], dtype=float).reshape(-1, 3)
    return targets, t_hat, c


def loss_mse(targets, preds) -> float:
    """Mean squared translation error over segments."""
    t, t_hat, _ = _stack_preds(targets, preds)
    return float(np.mean(np.sum((t - t_hat) ** 2, axis=1)))


def loss_ml(targets, preds, mode="mahalanobis") -> float:
    """Gaussian negative log-likelihood (without the constant).

    ``mode="mahalanobis"`` weights the residual by the inverse covariance;
    ``mode="unweighted"`` keeps the unweighted residual next to the
    log-determinant, which is unbounded below in ``c`` and only useful for
    comparison.
    """
    t, t_hat, c = _stack_preds(targets, preds)
    return _loss_from_outputs(np.hstack([t_hat, c]), t, mode)[0]


def _loss_from_outputs(out, targets, mode):
    """Mean loss over rows and its gradient with respect to ``out``."""
    N = len(targets)
    r = targets - out[:, 0:3]
    dout = np.zeros_like(out)
    if mode == "mse":
        loss = np.sum(r * r) / N
        dout[:, 0:3] = -2.0 * r / N
        return float(loss), dout
    c = out[:, 3:6]
    if mode == "mahalanobis":
        w = np.exp(-2.0 * c)
        loss = 0.5 * np.sum(2.0 * c + r * r * w) / N
        dout[:, 0:3] = -r * w / N
        dout[:, 3:6] = (1.0 - r * r * w) / N
    elif mode == "unweighted":
        loss = 0.5 * np.sum(2.0 * c + r * r) / N
        dout[:, 0:3] = -r / N
        dout[:, 3:6] = 1.0 / N
    else:
        raise ValueError(f"unknown loss mode {mode!r}")
    return float(loss), dout


def loss_and_gradient(params: LstmParams, segments, mode="mahalanobis", targets=None):
    """Mean loss over ``segments`` and its exact gradient (backprop through time)."""
    if len(segments) == 0:
        raise EmptyBatch("gradient needs at least one segment")
    if targets is None:
        targets = np.array([s.target for s in segments], dtype=float)
    targets = np.asarray(targets, dtype=float).reshape(-1, 3)
    N = len(segments)
    total = 0.0
    grads = None
    for idx, X in _groups(segments):
        out, cache = _forward_batch(params, X)
        loss, dout = _loss_from_outputs(out, targets[idx], mode)
        # rescale the group mean to the global mean
        w = len(idx) / N
        total += w * loss
        g = _backward_batch(params, cache, dout * w)
        grads = g if grads is None else grads.with_arrays([a + b for a, b in zip(grads.arrays(), g.arrays())])
    return total, grads


def gradient(params: LstmParams, segments, mode="mahalanobis"):
    return loss_and_gradient(params, segments, mode)[1]


def dataset_loss(params, segments, mode):
    targets = np.array([s.target for s in segments], dtype=float)
    return _loss_from_outputs(forward_batch(params, segments), targets, mode)[0]


@dataclass
class TrainState:
    epoch: int
    velocity: LstmParams


@dataclass
class TrainResult:
    params: LstmParams
    trace: list
    state: TrainState


def train(params: LstmParams, dataset, hyper, state: TrainState = None) -> TrainResult:
    """Mini-batch gradient descent with heavy-ball momentum.

    ``hyper`` is an :class:`visc.config.InertialTrainConfig` (or anything
    with the same attributes) plus a ``seed``.  ``state`` resumes an earlier
    run exactly: shuffling depends only on ``(seed, epoch)``.
    """
    if hyper.lr < 0 or not np.isfinite(hyper.lr):
        raise InvalidHyper("lr must be non-negative")
    if hyper.epochs < 1:
        raise InvalidHyper("epochs must be >= 1")
    if hyper.loss_mode not in LOSS_MODES:
        raise InvalidHyper(f"unknown loss mode {hyper.loss_mode!r}")
    if len(dataset) == 0:
        raise EmptyBatch("training set is empty")
    seed = getattr(hyper, "seed", 0)
    batch = max(1, int(hyper.batch_size))
    warmup = int(getattr(hyper, "mse_warmup_epochs", 0))
    clip = getattr(hyper, "grad_clip", 0.0) or 0.0

    params = params.copy()
    if state is None:
        state = TrainState(0, params.zeros_like())
    velocity = state.velocity.copy()
    start = state.epoch
    trace = []
    for epoch in range(start, start + hyper.epochs):
        mode = "mse" if epoch < warmup else hyper.loss_mode
        order = substream(seed, "inertial_shuffle", epoch).permutation(len(dataset))
        for lo in range(0, len(order), batch):
            members = [dataset[n] for n in order[lo : lo + batch]]
            _, g = loss_and_gradient(params, members, mode)
            garr = g.arrays()
            if clip > 0:
                norm = np.sqrt(sum(float(np.sum(a * a)) for a in garr))
                if norm > clip:
                    garr = [a * (clip / norm) for a in garr]
            new_v = [hyper.momentum * v - hyper.lr * a for v, a in zip(velocity.arrays(), garr)]
            velocity = velocity.with_arrays(new_v)
            params = params.with_arrays([p + v for p, v in zip(params.arrays(), new_v)])
        trace.append({"epoch": epoch, "mode": mode, "loss": dataset_loss(params, dataset, mode)})
    return TrainResult(params, trace, TrainState(start + hyper.epochs, velocity))


def training_segments(imu, reference):
    """IMU segments between consecutive ``reference`` frames with translation targets.

    ``reference`` is anything with ``t`` and ``pose(j)`` on IMU sample times
    (VI odometry or ground truth).  The target of segment ``j -> j + 1`` is
    the translation expressed in the body frame of pose ``j``.
    """
    times = np.asarray(reference.t, dtype=float)
    rate = 1.0 / (imu.t[1] - imu.t[0])
    idx = np.rint(times * rate).astype(int)
    if np.any(idx < 0) or np.any(idx >= len(imu.t)) or not np.allclose(imu.t[idx], times, rtol=0, atol=1e-9):
        raise LengthMismatch("reference timestamps do not fall on IMU samples")
    out = []
    for j in range(len(times) - 1):
        a, b = reference.pose(j), reference.pose(j + 1)
        out.append(imu.segment(idx[j], idx[j + 1], a.R.T @ (b.t - a.t)))
    return out


class LstmInertialModel:
    """Adapter exposing a trained network as an inertial translation source."""

    def __init__(self, params: LstmParams):
        self.params = params

    def predict(self, seg: ImuSegment) -> GaussianTranslation:
        return forward(self.params, seg)


class OracleInertialModel:
    """Ground-truth body-frame translation plus white Gaussian noise.

    Stands in for a network of known accuracy ``sigma`` (m per axis); the
    reported covariance is exactly ``sigma^2 I``.
    """

    def __init__(self, traj, sigma=0.002, seed=0):
        self.traj = traj
        self.sigma = float(sigma)
        self.seed = seed

    def predict(self, seg: ImuSegment) -> GaussianTranslation:
        k0, k1 = self.traj.index(seg.t[0]), self.traj.index(seg.t[-1])
        t_body = self.traj.rotation(k0).T @ (self.traj.position[k1] - self.traj.position[k0])
        noise = substream(self.seed, "oracle_inertial", k0).standard_normal(3)
        sigma = max(self.sigma, 1e-6)
        return GaussianTranslation.from_cov(t_body + self.sigma * noise, sigma)


# -- weight file ---------------------------------------------------------------
#
# magic "VISCNET1" | u32 version | u32 input_dim | u32 hidden | u32 layers |
# u32 output_dim | u32 flags | f64[input_dim] mean | f64[input_dim] std |
# per layer: W (4H x in), U (4H x H), b (4H) | fc_W (out x H) | fc_b (out)
# if flags & 1: u32 epoch | momentum buffers in the same order
# All little endian, matrices row major.

_HEADER = struct.Struct("<8sIIIIII")


def save_params(path, params: LstmParams, state: TrainState = None):
    L, H = params.layers, params.hidden
    flags = 1 if state is not None else 0
    chunks = [_HEADER.pack(MAGIC, FORMAT_VERSION, INPUT_DIM, H, L, params.fc_b.size, flags)]
    chunks += [np.asarray(params.mean, "<f8").tobytes(), np.asarray(params.std, "<f8").tobytes()]
    chunks += [np.ascontiguousarray(a, "<f8").tobytes() for a in params.arrays()]
    if state is not None:
        chunks.append(struct.pack("<I", state.epoch))
        chunks += [np.ascontiguousarray(a, "<f8").tobytes() for a in state.velocity.arrays()]
    Path(path).write_bytes(b"".join(chunks))


def load_params(path):
    """Returns ``(params, state)``; ``state`` is None when no optimiser section is present."""
    path = Path(path)
    try:
        data = path.read_bytes()
    except OSError as exc:
        raise IoError(path) from exc
    if len(data) < _HEADER.size:
        raise ParseError(path, 0, "truncated header")
    magic, version, n_in, H, L, n_out, flags = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise ParseError(path, 0, f"bad magic {magic!r}")
    if version != FORMAT_VERSION:
        raise ParseError(path, 0, f"unsupported version {version}")
    off = _HEADER.size

    def take(shape):
        nonlocal off
        n = int(np.prod(shape))
        if off + 8 * n > len(data):
            raise ParseError(path, 0, "truncated body")
        a = np.frombuffer(data, "<f8", n, off).astype(float).reshape(shape)
        off += 8 * n
        return a

    mean, std = take((n_in,)), take((n_in,))

    def take_arrays():
        W, U, b = [], [], []
        for l in range(L):
            W.append(take((4 * H, n_in if l == 0 else H)))
            U.append(take((4 * H, H)))
            b.append(take((4 * H,)))
        return W, U, b, take((n_out, H)), take((n_out,))

    params = LstmParams(*take_arrays(), mean, std)
    state = None
    if flags & 1:
        (epoch,) = struct.unpack_from("<I", data, off)
        off += 4
        state = TrainState(epoch, LstmParams(*take_arrays(), mean.copy(), std.copy()))
    if off != len(data):
        raise ParseError(path, 0, "trailing bytes")
    return params, state

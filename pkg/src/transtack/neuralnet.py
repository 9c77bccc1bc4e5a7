"""Single-hidden-layer sigmoid network trained by per-pattern SGD.

The prediction for an input window ``x`` is::

    g(bo + sum_h v[h] * g(bh[h] + sum_d w[d, h] * x[d]))

with ``g`` the logistic sigmoid on both layers. Training minimises the
per-pattern loss ``0.5 * (prediction - target)**2``; RMSE is the reported
metric.

The scalar kernels below are shared by :func:`forward`, :func:`predict_batch`,
:func:`gradient` and :func:`train_sgd`, so a stacked feature computed in bulk
is bit-identical to a single forward call and one SGD step is exactly
``theta - lr * gradient``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numba
import numpy as np

from transtack.errors import DimensionMismatch, EmptyDataset, EmptyInput, LengthMismatch

_U64 = 2**64


@dataclass(frozen=True, eq=False)
class NetworkParams:
    """All weights of one network.

    ``w`` is ``(D, H)``, ``hidden_bias`` and ``v`` have length ``H`` and
    ``output_bias`` is a scalar. Gradients are returned in the same shape.
    """

    w: np.ndarray
    hidden_bias: np.ndarray
    v: np.ndarray
    output_bias: float

    def __post_init__(self):
        w = np.array(self.w, dtype=np.float64)
        if w.ndim != 2 or w.shape[0] < 1 or w.shape[1] < 1:
            raise DimensionMismatch(f"input-to-hidden weights must be a non-empty D x H matrix, got shape {w.shape}")
        H = w.shape[1]
        hidden_bias = np.array(self.hidden_bias, dtype=np.float64).reshape(-1)
        v = np.array(self.v, dtype=np.float64).reshape(-1)
        if hidden_bias.shape != (H,) or v.shape != (H,):
            raise DimensionMismatch(f"hidden bias {hidden_bias.shape} and output weights {v.shape} must have length H={H}")
        output_bias = float(self.output_bias)
        for arr in (w, hidden_bias, v):
            if not np.all(np.isfinite(arr)):
                raise ValueError("network weights must be finite")
            arr.flags.writeable = False
        if not math.isfinite(output_bias):
            raise ValueError("network weights must be finite")
        object.__setattr__(self, "w", w)
        object.__setattr__(self, "hidden_bias", hidden_bias)
        object.__setattr__(self, "v", v)
        object.__setattr__(self, "output_bias", output_bias)

    @property
    def input_dim(self) -> int:
        return self.w.shape[0]

    @property
    def hidden_count(self) -> int:
        return self.w.shape[1]

    @property
    def size(self) -> int:
        D, H = self.w.shape
        return D * H + 2 * H + 1

    def to_vector(self) -> np.ndarray:
        """Flatten as ``w`` (row-major by d then h), hidden bias, v, output bias."""
        return np.concatenate([self.w.ravel(), self.hidden_bias, self.v, [self.output_bias]])

    @classmethod
    def from_vector(cls, D: int, H: int, vector) -> "NetworkParams":
        vec = np.asarray(vector, dtype=np.float64).reshape(-1)
        if vec.size != D * H + 2 * H + 1:
            raise DimensionMismatch(f"expected {D * H + 2 * H + 1} values for D={D}, H={H}, got {vec.size}")
        dh = D * H
        return cls(vec[:dh].reshape(D, H), vec[dh:dh + H], vec[dh + H:dh + 2 * H], vec[-1])

    def equals(self, other: "NetworkParams") -> bool:
        """Bit-level equality of shapes and all weights."""
        return self.w.shape == other.w.shape and np.array_equal(self.to_vector(), other.to_vector())

    def dumps(self) -> str:
        """Text form: ``D H`` header, then one weight per line at full precision."""
        D, H = self.w.shape
        return f"{D} {H}\n" + "\n".join(repr(float(x)) for x in self.to_vector()) + "\n"

    @classmethod
    def loads(cls, text: str) -> "NetworkParams":
        tokens = text.split()
        if len(tokens) < 2:
            raise ValueError("network text is missing its 'D H' header")
        D, H = int(tokens[0]), int(tokens[1])
        return cls.from_vector(D, H, [float(t) for t in tokens[2:]])


@dataclass(frozen=True)
class TrainingConfig:
    epochs: int = 2000
    learning_rate: float = 0.1
    seed: int = 0
    shuffle_each_epoch: bool = True

    def __post_init__(self):
        if int(self.epochs) != self.epochs or self.epochs < 1:
            raise ValueError(f"epochs must be a positive integer, got {self.epochs!r}")
        if not (self.learning_rate > 0 and math.isfinite(self.learning_rate)):
            raise ValueError(f"learning_rate must be positive, got {self.learning_rate!r}")

    def with_seed(self, seed: int) -> "TrainingConfig":
        return TrainingConfig(self.epochs, self.learning_rate, seed, self.shuffle_each_epoch)


@dataclass(frozen=True)
class TrainingTrace:
    """Training-set RMSE recorded after every epoch."""

    rmse: np.ndarray

    @property
    def final(self) -> float:
        return float(self.rmse[-1])

    def __len__(self) -> int:
        return self.rmse.shape[0]


def sigmoid(z):
    return 1.0 / (1.0 + np.exp(-z))


@numba.njit(cache=True)
def _g(z):
    return 1.0 / (1.0 + math.exp(-z))


@numba.njit(cache=True)
def _forward_one(w, bh, v, bo, x, hidden):
    D, H = w.shape
    s = bo
    for h in range(H):
        z = bh[h]
        for d in range(D):
            z += w[d, h] * x[d]
        a = _g(z)
        hidden[h] = a
        s += v[h] * a
    return _g(s)


@numba.njit(cache=True)
def _predict_kernel(w, bh, v, bo, X, out):
    hidden = np.empty(w.shape[1])
    for i in range(X.shape[0]):
        out[i] = _forward_one(w, bh, v, bo, X[i], hidden)


@numba.njit(cache=True)
def _grad_one(w, bh, v, bo, x, y, hidden, gw, gbh, gv):
    """Fill gw/gbh/gv and return the output-bias gradient."""
    D, H = w.shape
    out = _forward_one(w, bh, v, bo, x, hidden)
    delta_o = (out - y) * out * (1.0 - out)
    for h in range(H):
        a = hidden[h]
        gv[h] = delta_o * a
        delta_h = delta_o * v[h] * a * (1.0 - a)
        gbh[h] = delta_h
        for d in range(D):
            gw[d, h] = delta_h * x[d]
    return delta_o


@numba.njit(cache=True)
def _sgd_epoch(w, bh, v, bo_cell, X, Y, order, lr):
    D, H = w.shape
    hidden = np.empty(H)
    gw = np.empty((D, H))
    gbh = np.empty(H)
    gv = np.empty(H)
    for k in range(order.shape[0]):
        i = order[k]
        gbo = _grad_one(w, bh, v, bo_cell[0], X[i], Y[i], hidden, gw, gbh, gv)
        for h in range(H):
            for d in range(D):
                w[d, h] = w[d, h] - lr * gw[d, h]
            bh[h] = bh[h] - lr * gbh[h]
            v[h] = v[h] - lr * gv[h]
        bo_cell[0] = bo_cell[0] - lr * gbo


def _rng(seed: int, stream: int = 0) -> np.random.Generator:
    return np.random.default_rng([stream, int(seed) % _U64])


def init_network(D: int, H: int, seed: int) -> NetworkParams:
    """Draw every weight i.i.d. from U[-0.5, 0.5] with a generator seeded by ``seed``."""
    if D < 1 or H < 1:
        raise ValueError(f"D and H must be positive, got D={D}, H={H}")
    rng = _rng(seed)
    w = rng.uniform(-0.5, 0.5, size=(D, H))
    hidden_bias = rng.uniform(-0.5, 0.5, size=H)
    v = rng.uniform(-0.5, 0.5, size=H)
    output_bias = rng.uniform(-0.5, 0.5)
    return NetworkParams(w, hidden_bias, v, output_bias)


def _check_input(params: NetworkParams, x) -> np.ndarray:
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 1 or x.shape[0] != params.input_dim:
        raise DimensionMismatch(f"input of shape {x.shape} does not match network input dim {params.input_dim}")
    return x


def _check_dataset(params: NetworkParams, dataset) -> tuple[np.ndarray, np.ndarray]:
    X = np.ascontiguousarray(dataset.inputs, dtype=np.float64)
    Y = np.ascontiguousarray(dataset.targets, dtype=np.float64)
    if X.ndim != 2 or X.shape[1] != params.input_dim:
        raise DimensionMismatch(f"dataset inputs of shape {X.shape} do not match network input dim {params.input_dim}")
    return X, Y


def forward(params: NetworkParams, x) -> float:
    x = _check_input(params, x)
    hidden = np.empty(params.hidden_count)
    return float(_forward_one(params.w, params.hidden_bias, params.v, params.output_bias, x, hidden))


def gradient(params: NetworkParams, x, target: float) -> NetworkParams:
    """Analytic gradient of ``0.5 * (forward(params, x) - target)**2``."""
    x = _check_input(params, x)
    D, H = params.w.shape
    hidden = np.empty(H)
    gw, gbh, gv = np.empty((D, H)), np.empty(H), np.empty(H)
    gbo = _grad_one(params.w, params.hidden_bias, params.v, params.output_bias, x, float(target),
                    hidden, gw, gbh, gv)
    return NetworkParams(gw, gbh, gv, gbo)


def predict_batch(params: NetworkParams, dataset) -> np.ndarray:
    """Forward pass over every pattern of ``dataset`` in order."""
    X, _ = _check_dataset(params, dataset)
    out = np.empty(X.shape[0])
    if X.shape[0]:
        _predict_kernel(params.w, params.hidden_bias, params.v, params.output_bias, X, out)
    return out


def rmse(observed, predicted) -> float:
    a = np.asarray(observed, dtype=np.float64).reshape(-1)
    b = np.asarray(predicted, dtype=np.float64).reshape(-1)
    if a.shape != b.shape:
        raise LengthMismatch(f"observed has {a.size} values, predicted has {b.size}")
    if a.size == 0:
        raise EmptyInput("rmse of empty vectors")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def train_sgd(params: NetworkParams, dataset, config: TrainingConfig) -> tuple[NetworkParams, TrainingTrace]:
    """Per-pattern SGD for ``config.epochs`` passes over ``dataset``.

    The visiting order is reshuffled each epoch from a generator seeded by
    ``config.seed`` (file order when shuffling is off). The input ``params``
    are not modified.
    """
    X, Y = _check_dataset(params, dataset)
    n = X.shape[0]
    if n == 0:
        raise EmptyDataset("cannot train on an empty dataset")
    w = params.w.copy()
    bh = params.hidden_bias.copy()
    v = params.v.copy()
    bo = np.array([params.output_bias])
    rng = _rng(config.seed, stream=1)
    fixed_order = np.arange(n)
    trace = np.empty(config.epochs)
    preds = np.empty(n)
    lr = float(config.learning_rate)
    for epoch in range(config.epochs):
        order = rng.permutation(n) if config.shuffle_each_epoch else fixed_order
        _sgd_epoch(w, bh, v, bo, X, Y, order, lr)
        _predict_kernel(w, bh, v, bo[0], X, preds)
        trace[epoch] = rmse(Y, preds)
    trained = NetworkParams(w, bh, v, bo[0])
    return trained, TrainingTrace(trace)

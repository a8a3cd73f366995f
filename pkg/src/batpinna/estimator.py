"""60-9-1 backpropagation network regressing one angle from a feature vector.

The hidden layer is tanh; the single sigmoid output is mapped linearly
onto ``[angle_min, angle_max]``.  Training minimises the mean squared
error of the normalised target by mini-batch gradient descent.
"""

from __future__ import annotations

import math
import struct
from dataclasses import dataclass, asdict, replace
from pathlib import Path

import numpy as np

from ._kv import read_kv, write_kv

N_INPUT = 60
N_HIDDEN = 9
MAGIC = b"PNN1"
FORMAT_VERSION = 1


class DivergenceError(FloatingPointError):
    def __init__(self, epoch: int):
        super().__init__(f"training loss became non-finite at epoch {epoch}")
        self.epoch = epoch


@dataclass(frozen=True)
class NetworkParams:
    W1: np.ndarray  # (hidden, input)
    b1: np.ndarray  # (hidden,)
    w2: np.ndarray  # (hidden,)
    b2: float
    angle_min: float
    angle_max: float
    activation: str = "tanh"

    def __post_init__(self):
        if not self.angle_min < self.angle_max:
            raise ValueError("angle_min must be below angle_max")
        for a in (self.W1, self.b1, self.w2):
            if not np.all(np.isfinite(a)):
                raise ValueError("non-finite weights")

    @property
    def n_parameters(self) -> int:
        return self.W1.size + self.b1.size + self.w2.size + 1

    def flat(self) -> np.ndarray:
        return np.concatenate([self.W1.ravel(), self.b1, self.w2, [self.b2]])

    def with_flat(self, theta: np.ndarray) -> "NetworkParams":
        h, d = self.W1.shape
        i = 0
        W1 = theta[i:i + h * d].reshape(h, d); i += h * d
        b1 = theta[i:i + h]; i += h
        w2 = theta[i:i + h]; i += h
        return replace(self, W1=W1.copy(), b1=b1.copy(), w2=w2.copy(), b2=float(theta[i]))


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float = 0.01
    epochs: int = 500
    batch_size: int = 32
    seed: int = 0
    patience: int = 50
    validation_fraction: float = 0.1
    optimizer: str = "adam"
    loss: str = "squared_error"

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning rate must be positive")
        if self.epochs < 1:
            raise ValueError("epochs must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.optimizer not in ("sgd", "adam"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if self.loss != "squared_error":
            raise ValueError("only squared_error loss is supported")


def init_network(seed: int, output_range: tuple[float, float], n_input: int = N_INPUT, n_hidden: int = N_HIDDEN) -> NetworkParams:
    """Glorot-uniform weights, zero biases."""
    rng = np.random.default_rng(seed)
    lim1 = math.sqrt(6.0 / (n_input + n_hidden))
    lim2 = math.sqrt(6.0 / (n_hidden + 1))
    return NetworkParams(
        W1=rng.uniform(-lim1, lim1, (n_hidden, n_input)),
        b1=np.zeros(n_hidden),
        w2=rng.uniform(-lim2, lim2, n_hidden),
        b2=0.0,
        angle_min=float(output_range[0]),
        angle_max=float(output_range[1]),
    )


def _sigmoid(z):
    return 0.5 * (1.0 + np.tanh(0.5 * z))


def _check_inputs(p: NetworkParams, X: np.ndarray) -> np.ndarray:
    X = np.asarray(getattr(X, "values", X), dtype=float)
    if X.shape[-1] != p.W1.shape[1]:
        raise ValueError(f"expected {p.W1.shape[1]} features, got {X.shape[-1]}")
    return X


def forward_unit(p: NetworkParams, X) -> np.ndarray:
    """Sigmoid output in (0, 1) for a batch of rows."""
    X = _check_inputs(p, X)
    return _sigmoid(np.tanh(X @ p.W1.T + p.b1) @ p.w2 + p.b2)


def predict(p: NetworkParams, x) -> float | np.ndarray:
    """Angle in degrees for one feature vector, or an array for a batch."""
    X = _check_inputs(p, x)
    y = forward_unit(p, np.atleast_2d(X))
    angles = p.angle_min + y * (p.angle_max - p.angle_min)
    return float(angles[0]) if X.ndim == 1 else angles


def normalise_targets(p: NetworkParams, angles) -> np.ndarray:
    return (np.asarray(angles, dtype=float) - p.angle_min) / (p.angle_max - p.angle_min)


def _views(theta: np.ndarray, h: int, d: int):
    W1 = theta[: h * d].reshape(h, d)
    return W1, theta[h * d:h * d + h], theta[h * d + h:h * d + 2 * h], theta[h * d + 2 * h:]


def _loss_grad(theta, h, d, X, t, grad):
    """Squared-error loss; writes the flat gradient into ``grad``."""
    W1, b1, w2, b2 = _views(theta, h, d)
    gW1, gb1, gw2, gb2 = _views(grad, h, d)
    n = X.shape[0]
    H = np.tanh(X @ W1.T + b1)
    y = 0.5 * (1.0 + np.tanh(0.5 * (H @ w2 + b2[0])))
    r = y - t
    dz = (2.0 / n) * r * y * (1.0 - y)
    gw2[:] = H.T @ dz
    gb2[0] = dz.sum()
    dA = np.outer(dz, w2) * (1.0 - H * H)
    gW1[:] = dA.T @ X
    gb1[:] = dA.sum(axis=0)
    return float(r @ r) / n


def loss_and_grad(p: NetworkParams, X: np.ndarray, t: np.ndarray) -> tuple[float, np.ndarray]:
    """Mean squared error over normalised targets and its gradient (flat, matching ``p.flat()``)."""
    theta = p.flat()
    grad = np.empty_like(theta)
    h, d = p.W1.shape
    value = _loss_grad(theta, h, d, np.asarray(X, dtype=float), np.asarray(t, dtype=float), grad)
    return value, grad


def loss(p: NetworkParams, X, t) -> float:
    return float(np.mean((forward_unit(p, X) - t) ** 2))


def train(p: NetworkParams, X, angles, cfg: TrainConfig = TrainConfig(), history: list | None = None) -> NetworkParams:
    """Fit the network; returns the parameters with the best validation loss.

    With ``validation_fraction = 0`` (or too few samples) the training
    loss stands in for the validation loss.  Per-epoch mean training losses
    are appended to ``history`` when given.
    """
    X = np.asarray(X, dtype=float)
    angles = np.asarray(angles, dtype=float)
    if X.ndim != 2 or len(X) == 0:
        raise ValueError("need a nonempty 2D sample matrix")
    if len(X) != len(angles):
        raise ValueError("samples and targets differ in length")
    if np.any(angles < p.angle_min) or np.any(angles > p.angle_max):
        raise ValueError("targets outside the network output range")
    _check_inputs(p, X)
    t = normalise_targets(p, angles)

    rng = np.random.default_rng(cfg.seed)
    n_val = int(round(cfg.validation_fraction * len(X)))
    if n_val >= 1 and len(X) - n_val >= 1:
        perm = rng.permutation(len(X))
        val, tr = perm[:n_val], perm[n_val:]
        Xv, tv = X[val], t[val]
        X, t = X[tr], t[tr]
    else:
        Xv = tv = None

    h, d = p.W1.shape
    theta = p.flat()
    grad = np.empty_like(theta)
    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    beta1, beta2, eps = 0.9, 0.999, 1e-8
    step = 0
    best_theta, best_loss, stale = theta.copy(), math.inf, 0
    n = len(X)
    for epoch in range(cfg.epochs):
        order = rng.permutation(n)
        total = 0.0
        for s in range(0, n, cfg.batch_size):
            idx = order[s:s + cfg.batch_size]
            total += _loss_grad(theta, h, d, X[idx], t[idx], grad) * len(idx)
            if cfg.optimizer == "sgd":
                theta -= cfg.learning_rate * grad
            else:
                step += 1
                m *= beta1
                m += (1 - beta1) * grad
                v *= beta2
                v += (1 - beta2) * grad * grad
                lr_t = cfg.learning_rate * math.sqrt(1 - beta2**step) / (1 - beta1**step)
                theta -= lr_t * m / (np.sqrt(v) + eps)
        epoch_loss = total / n
        if not (math.isfinite(epoch_loss) and np.all(np.isfinite(theta))):
            raise DivergenceError(epoch)
        if history is not None:
            history.append(epoch_loss)
        if Xv is not None:
            monitor = _loss_grad(theta, h, d, Xv, tv, grad)
        else:
            monitor = epoch_loss
        if monitor < best_loss:
            best_theta, best_loss, stale = theta.copy(), monitor, 0
        else:
            stale += 1
            if cfg.patience and stale >= cfg.patience:
                break
    return p.with_flat(best_theta)


# --- persistence ------------------------------------------------------------


def save_network(p: NetworkParams, path, config: TrainConfig | None = None) -> None:
    """Binary weights (``PNN1`` header, little-endian float64) plus a text sidecar."""
    path = Path(path)
    h, d = p.W1.shape
    header = MAGIC + struct.pack("<IIII", FORMAT_VERSION, d, h, 1)
    body = struct.pack("<2d", p.angle_min, p.angle_max) + np.asarray(p.flat(), dtype="<f8").tobytes()
    path.write_bytes(header + body)
    side = {"activation": p.activation, "angle_min": p.angle_min, "angle_max": p.angle_max}
    if config is not None:
        side.update({f"train.{k}": v for k, v in asdict(config).items()})
    write_kv(path.with_suffix(path.suffix + ".txt"), side)


def load_network(path) -> NetworkParams:
    path = Path(path)
    raw = path.read_bytes()
    if raw[:4] != MAGIC:
        raise ValueError(f"{path} is not a PNN1 weight file")
    version, d, h, out = struct.unpack_from("<IIII", raw, 4)
    if version != FORMAT_VERSION or out != 1:
        raise ValueError(f"unsupported weight file version {version}")
    lo, hi = struct.unpack_from("<2d", raw, 20)
    theta = np.frombuffer(raw, dtype="<f8", offset=36).astype(float)
    expected = h * d + 2 * h + 1
    if theta.size != expected:
        raise ValueError(f"weight file holds {theta.size} values, expected {expected}")
    side = path.with_suffix(path.suffix + ".txt")
    activation = read_kv(side).get("activation", "tanh") if side.exists() else "tanh"
    shell = NetworkParams(np.zeros((h, d)), np.zeros(h), np.zeros(h), 0.0, lo, hi, activation)
    return shell.with_flat(theta)

"""Feed-forward sigmoid network trained by per-sample backpropagation.

Weights live in one matrix per layer with shape (fan_out, fan_in) and are
initialized uniformly in [-1/sqrt(fan_in), +1/sqrt(fan_in)], drawn layer
by layer in row-major order from a seeded SplitMix64 stream so that a
seed pins the network exactly. Training is plain online gradient descent
on the mean squared error, one sample at a time.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .rng import SplitMix64


class TrainingDiverged(RuntimeError):
    """Raised when an epoch produces a non-finite loss."""

    def __init__(self, epoch: int):
        super().__init__(f"training diverged: non-finite loss at epoch {epoch}")
        self.epoch = epoch


@dataclass(eq=False)
class MlpNetwork:
    layer_sizes: list[int]
    weights: list[np.ndarray] = field(repr=False)
    biases: list[np.ndarray] = field(repr=False)

    def __post_init__(self):
        if len(self.layer_sizes) < 2 or any(s < 1 for s in self.layer_sizes):
            raise ValueError(f"invalid layer sizes {self.layer_sizes}")
        for l, w in enumerate(self.weights):
            expect = (self.layer_sizes[l + 1], self.layer_sizes[l])
            if w.shape != expect:
                raise ValueError(f"weight matrix {l} has shape {w.shape}, expected {expect}")
            if not np.isfinite(w).all():
                raise ValueError(f"non-finite weights in layer {l}")

    @property
    def n_inputs(self) -> int:
        return self.layer_sizes[0]

    @property
    def n_outputs(self) -> int:
        return self.layer_sizes[-1]

    def copy(self) -> "MlpNetwork":
        return MlpNetwork(
            list(self.layer_sizes),
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
        )


@dataclass(frozen=True, eq=False)
class TrainingSet:
    """Column-oriented samples: inputs (d, n) paired with targets (k, n).

    Multi-row targets must be one-hot columns; a single-row target may be
    any value in [0, 1] (a 1-unit output cannot express one-hot 0, and
    matching an arbitrary sigmoid output must stay representable).
    """

    inputs: np.ndarray
    targets: np.ndarray

    def __post_init__(self):
        x = np.asarray(self.inputs, dtype=np.float64)
        t = np.asarray(self.targets, dtype=np.float64)
        if x.ndim != 2 or t.ndim != 2:
            raise ValueError("inputs and targets must be 2-D matrices")
        if x.shape[1] != t.shape[1]:
            raise ValueError(
                f"inputs have {x.shape[1]} columns but targets have {t.shape[1]}"
            )
        if ((t < 0.0) | (t > 1.0)).any():
            raise ValueError("target entries must lie in [0, 1]")
        if t.shape[0] > 1 and (
            not np.isin(t, (0.0, 1.0)).all() or not np.allclose(t.sum(axis=0), 1.0)
        ):
            raise ValueError("each target column must be one-hot")
        object.__setattr__(self, "inputs", x)
        object.__setattr__(self, "targets", t)

    @property
    def n_samples(self) -> int:
        return self.inputs.shape[1]


@dataclass(frozen=True)
class TrainConfig:
    learning_rate: float
    max_epochs: int
    target_mse: float = 0.0
    seed: int = 0
    shuffle: bool = True

    def __post_init__(self):
        if self.learning_rate <= 0:
            raise ValueError("learning_rate must be positive")
        if self.max_epochs < 1:
            raise ValueError("max_epochs must be at least 1")
        if self.target_mse < 0:
            raise ValueError("target_mse must be non-negative")


def sigmoid(z: np.ndarray) -> np.ndarray:
    with np.errstate(over="ignore"):
        return 1.0 / (1.0 + np.exp(-z))


def init_network(layer_sizes: list[int], seed: int) -> MlpNetwork:
    """Seeded uniform init in +-1/sqrt(fan_in); biases start at zero."""
    if len(layer_sizes) < 2 or any(s < 1 for s in layer_sizes):
        raise ValueError(f"invalid layer sizes {layer_sizes}")
    rng = SplitMix64(seed)
    weights = []
    biases = []
    for fan_in, fan_out in zip(layer_sizes, layer_sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        w = rng.uniform_array(-bound, bound, fan_out * fan_in).reshape(fan_out, fan_in)
        weights.append(w)
        biases.append(np.zeros(fan_out))
    return MlpNetwork(list(layer_sizes), weights, biases)


def forward(net: MlpNetwork, x) -> np.ndarray:
    x = np.asarray(x, dtype=np.float64).ravel()
    if x.size != net.n_inputs:
        raise ValueError(f"input has {x.size} values, network expects {net.n_inputs}")
    a = x
    for w, b in zip(net.weights, net.biases):
        a = sigmoid(w @ a + b)
    return a


def forward_batch(net: MlpNetwork, xs: np.ndarray) -> np.ndarray:
    """Forward pass of many row-vector inputs at once, shape (n, d) -> (n, k)."""
    a = np.asarray(xs, dtype=np.float64)
    if a.ndim != 2 or a.shape[1] != net.n_inputs:
        raise ValueError(f"batch shape {a.shape} does not match input size {net.n_inputs}")
    for w, b in zip(net.weights, net.biases):
        a = sigmoid(a @ w.T + b)
    return a


def _forward_trace(net: MlpNetwork, x: np.ndarray) -> list[np.ndarray]:
    activations = [x]
    for w, b in zip(net.weights, net.biases):
        activations.append(sigmoid(w @ activations[-1] + b))
    return activations


def _sample_loss(output: np.ndarray, target: np.ndarray) -> float:
    d = output - target
    return float(d @ d) / d.size


def train_backprop(
    net: MlpNetwork, data: TrainingSet, cfg: TrainConfig
) -> tuple[MlpNetwork, list[float]]:
    """Online SGD on mean squared error; mutates and returns the given network.

    Visits samples once per epoch (seeded shuffle when cfg.shuffle), records
    the mean of per-sample losses as that epoch's MSE, and stops early once
    it reaches cfg.target_mse. Raises TrainingDiverged if the loss goes
    non-finite.
    """
    if data.inputs.shape[0] != net.n_inputs:
        raise ValueError(
            f"training inputs have {data.inputs.shape[0]} rows, network expects {net.n_inputs}"
        )
    if data.targets.shape[0] != net.n_outputs:
        raise ValueError(
            f"training targets have {data.targets.shape[0]} rows, network expects {net.n_outputs}"
        )
    rng = SplitMix64(cfg.seed)
    n = data.n_samples
    history: list[float] = []
    order = list(range(n))
    for epoch in range(cfg.max_epochs):
        if cfg.shuffle:
            order = list(range(n))
            rng.shuffle(order)
        total = 0.0
        for idx in order:
            x = data.inputs[:, idx]
            t = data.targets[:, idx]
            acts = _forward_trace(net, x)
            out = acts[-1]
            total += _sample_loss(out, t)
            delta = (2.0 / out.size) * (out - t) * out * (1.0 - out)
            for l in range(len(net.weights) - 1, -1, -1):
                grad_w = np.outer(delta, acts[l])
                grad_b = delta
                if l > 0:
                    delta = (net.weights[l].T @ delta) * acts[l] * (1.0 - acts[l])
                net.weights[l] -= cfg.learning_rate * grad_w
                net.biases[l] -= cfg.learning_rate * grad_b
        mse = total / n
        if not np.isfinite(mse):
            raise TrainingDiverged(epoch)
        history.append(mse)
        if mse <= cfg.target_mse:
            break
    return net, history


def _loss_at(net: MlpNetwork, x: np.ndarray, t: np.ndarray) -> float:
    return _sample_loss(forward(net, x), t)


def gradient_check(net: MlpNetwork, sample: tuple, eps: float) -> float:
    """Max relative error between backprop and central-difference gradients.

    Perturbs every weight and bias by +-eps; the relative error denominator
    is max(|analytic|, |numeric|, 1e-12).
    """
    if eps <= 0:
        raise ValueError("eps must be positive")
    x = np.asarray(sample[0], dtype=np.float64).ravel()
    t = np.asarray(sample[1], dtype=np.float64).ravel()

    acts = _forward_trace(net, x)
    out = acts[-1]
    delta = (2.0 / out.size) * (out - t) * out * (1.0 - out)
    grads_w = [None] * len(net.weights)
    grads_b = [None] * len(net.weights)
    for l in range(len(net.weights) - 1, -1, -1):
        grads_w[l] = np.outer(delta, acts[l])
        grads_b[l] = delta
        if l > 0:
            delta = (net.weights[l].T @ delta) * acts[l] * (1.0 - acts[l])

    worst = 0.0
    for l in range(len(net.weights)):
        for arr, grad in ((net.weights[l], grads_w[l]), (net.biases[l], grads_b[l])):
            gflat = grad.ravel()
            for i in range(arr.size):
                pos = np.unravel_index(i, arr.shape)
                saved = arr[pos]
                arr[pos] = saved + eps
                up = _loss_at(net, x, t)
                arr[pos] = saved - eps
                down = _loss_at(net, x, t)
                arr[pos] = saved
                numeric = (up - down) / (2.0 * eps)
                denom = max(abs(gflat[i]), abs(numeric), 1e-12)
                worst = max(worst, abs(gflat[i] - numeric) / denom)
    return worst


def classify(net: MlpNetwork, x) -> tuple[int, float, float]:
    """Predicted class, its output value, and squared distance to its one-hot.

    Ties go to the lowest class index.
    """
    out = forward(net, x)
    idx = int(np.argmax(out))
    onehot = np.zeros_like(out)
    onehot[idx] = 1.0
    err = float(np.sum((out - onehot) ** 2))
    return idx, float(out[idx]), err

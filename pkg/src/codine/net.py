"""Small fully-connected network with hand-written backpropagation.

Parameters are plain numpy arrays; ``weights[k]`` has shape
``(fan_in, fan_out)`` so a layer computes ``h @ W + b``. Hidden layers use a
smooth activation (softplus or tanh); the single output unit is linear, the
generator-specific squashing happens in the trainer.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .fgen import softplus

__all__ = [
    "MlpParams",
    "TrainConfig",
    "NonFiniteError",
    "init_params",
    "forward",
    "backward",
    "Optimizer",
    "Adam",
    "SGD",
    "make_optimizer",
    "optimizer_step",
]

HIDDEN_ACTIVATIONS = ("softplus", "tanh")
LR_SCHEDULES = ("cosine", "constant")
INPUT_TRANSFORMS = ("linear", "probit")


class NonFiniteError(FloatingPointError):
    """Raised when a gradient, objective or parameter stops being finite."""


@dataclass
class MlpParams:
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_activation: str = "softplus"

    def __post_init__(self):
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"unknown hidden activation {self.hidden_activation!r}")
        if len(self.weights) != len(self.biases) or not self.weights:
            raise ValueError("weights and biases must be non-empty lists of equal length")
        for k, (w, b) in enumerate(zip(self.weights, self.biases)):
            if w.ndim != 2 or b.shape != (w.shape[1],):
                raise ValueError(f"layer {k}: weight {w.shape} and bias {b.shape} do not match")
            if k and w.shape[0] != self.weights[k - 1].shape[1]:
                raise ValueError(f"layer {k}: input width {w.shape[0]} does not chain")
        if self.weights[-1].shape[1] != 1:
            raise ValueError("output layer must have exactly one unit")

    @property
    def layer_sizes(self) -> list[int]:
        return [self.weights[0].shape[0]] + [w.shape[1] for w in self.weights]

    @property
    def input_dim(self) -> int:
        return self.weights[0].shape[0]

    def arrays(self) -> list[np.ndarray]:
        """Flat list ``[W0, b0, W1, b1, ...]``; the arrays are shared, not copied."""
        out = []
        for w, b in zip(self.weights, self.biases):
            out.extend((w, b))
        return out

    def copy(self) -> "MlpParams":
        return MlpParams(
            [w.copy() for w in self.weights],
            [b.copy() for b in self.biases],
            self.hidden_activation,
        )

    def all_finite(self) -> bool:
        return all(np.all(np.isfinite(a)) for a in self.arrays())

    def to_dict(self) -> dict:
        return {
            "layer_sizes": self.layer_sizes,
            "hidden_activation": self.hidden_activation,
            "weights": [w.tolist() for w in self.weights],
            "biases": [b.tolist() for b in self.biases],
        }

    @classmethod
    def from_dict(cls, data: dict) -> "MlpParams":
        params = cls(
            [np.asarray(w, dtype=float).reshape(-1, len(b)) for w, b in zip(data["weights"], data["biases"])],
            [np.asarray(b, dtype=float) for b in data["biases"]],
            data["hidden_activation"],
        )
        if params.layer_sizes != list(data["layer_sizes"]):
            raise ValueError("stored layer sizes do not match parameter shapes")
        return params


@dataclass
class TrainConfig:
    epochs: int = 100
    batch_size: int = 256
    learning_rate: float = 2e-3
    seed: int = 0
    optimizer: str = "adam"
    hidden: tuple[int, ...] = (64, 64)
    hidden_activation: str = "softplus"
    lr_schedule: str = "cosine"
    input_transform: str = "linear"

    def __post_init__(self):
        self.hidden = tuple(int(h) for h in self.hidden)
        if self.epochs < 1:
            raise ValueError("epochs must be positive")
        if self.batch_size < 1:
            raise ValueError("batch_size must be positive")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate must be positive")
        if not 0 <= int(self.seed) < 2**64:
            raise ValueError("seed must be a 64-bit unsigned integer")
        if self.optimizer not in ("adam", "sgd"):
            raise ValueError(f"unknown optimizer {self.optimizer!r}")
        if any(h < 1 for h in self.hidden):
            raise ValueError("hidden sizes must be positive")
        if self.hidden_activation not in HIDDEN_ACTIVATIONS:
            raise ValueError(f"unknown hidden activation {self.hidden_activation!r}")
        if self.lr_schedule not in LR_SCHEDULES:
            raise ValueError(f"unknown learning-rate schedule {self.lr_schedule!r}")
        if self.input_transform not in INPUT_TRANSFORMS:
            raise ValueError(f"unknown input transform {self.input_transform!r}")

    def learning_rate_at(self, progress: float) -> float:
        """Step size after a fraction ``progress`` in [0, 1] of training."""
        if self.lr_schedule == "cosine":
            return self.learning_rate * 0.5 * (1.0 + np.cos(np.pi * min(max(progress, 0.0), 1.0)))
        return self.learning_rate

    def to_dict(self) -> dict:
        return {
            "epochs": int(self.epochs),
            "batch_size": int(self.batch_size),
            "learning_rate": float(self.learning_rate),
            "seed": int(self.seed),
            "optimizer": self.optimizer,
            "hidden": list(self.hidden),
            "hidden_activation": self.hidden_activation,
            "lr_schedule": self.lr_schedule,
            "input_transform": self.input_transform,
        }


def init_params(layer_sizes, rng: np.random.Generator, hidden_activation: str = "softplus") -> MlpParams:
    """Uniform fan-in initialization ``U(-1/sqrt(fan_in), 1/sqrt(fan_in))``; zero biases."""
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2 or any(s < 1 for s in sizes):
        raise ValueError(f"invalid layer sizes {sizes}")
    weights, biases = [], []
    for fan_in, fan_out in zip(sizes[:-1], sizes[1:]):
        bound = 1.0 / np.sqrt(fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_in, fan_out)))
        biases.append(np.zeros(fan_out))
    return MlpParams(weights, biases, hidden_activation)


def _act(z, kind):
    if kind == "tanh":
        return np.tanh(z)
    return softplus(z)


def _act_grad(z, a, kind):
    if kind == "tanh":
        return 1.0 - a * a
    return -np.expm1(-a)


def _check_batch(params: MlpParams, batch) -> np.ndarray:
    x = np.asarray(batch, dtype=float)
    if x.ndim != 2 or x.shape[1] != params.input_dim:
        raise ValueError(f"batch shape {x.shape} does not match network input width {params.input_dim}")
    return x


def forward(params: MlpParams, batch, cache: bool = False):
    """Raw (pre-activation) outputs, shape ``(m,)``.

    With ``cache=True`` also returns the per-layer ``(pre, post)`` activations
    needed by :func:`backward`.
    """
    h = _check_batch(params, batch)
    trace = [(None, h)]
    last = len(params.weights) - 1
    for k, (w, b) in enumerate(zip(params.weights, params.biases)):
        z = h @ w + b
        h = z if k == last else _act(z, params.hidden_activation)
        trace.append((z, h))
    out = h[:, 0]
    return (out, trace) if cache else out


def backward(params: MlpParams, batch, output_gradient, trace=None):
    """Gradients of ``sum(output_gradient * forward(params, batch))``.

    Returns ``(weight_grads, bias_grads)`` shaped like the parameters.
    """
    x = _check_batch(params, batch)
    g = np.asarray(output_gradient, dtype=float)
    if g.shape != (x.shape[0],):
        raise ValueError(f"output_gradient shape {g.shape} does not match batch of {x.shape[0]}")
    if trace is None:
        _, trace = forward(params, x, cache=True)
    n_layers = len(params.weights)
    dw = [None] * n_layers
    db = [None] * n_layers
    delta = g[:, None]
    for k in range(n_layers - 1, -1, -1):
        h_in = trace[k][1]
        dw[k] = h_in.T @ delta
        db[k] = delta.sum(axis=0)
        if k:
            z, a = trace[k]
            delta = (delta @ params.weights[k].T) * _act_grad(z, a, params.hidden_activation)
    return dw, db


class Optimizer:
    """Gradient-ascent optimizer over an :class:`MlpParams` instance."""

    def step(self, params: MlpParams, grads) -> None:
        raise NotImplementedError


class SGD(Optimizer):
    def __init__(self, lr: float):
        self.lr = lr

    def step(self, params, grads):
        dw, db = grads
        for p, g in zip(params.arrays(), _interleave(dw, db)):
            p += self.lr * g


class Adam(Optimizer):
    # bias-corrected Adam, ascent direction
    def __init__(self, lr: float, beta1: float = 0.9, beta2: float = 0.999, eps: float = 1e-8):
        self.lr = lr
        self.beta1 = beta1
        self.beta2 = beta2
        self.eps = eps
        self.t = 0
        self.m: list[np.ndarray] | None = None
        self.v: list[np.ndarray] | None = None

    def step(self, params, grads):
        dw, db = grads
        flat = _interleave(dw, db)
        arrays = params.arrays()
        if self.m is None:
            self.m = [np.zeros_like(a) for a in arrays]
            self.v = [np.zeros_like(a) for a in arrays]
        self.t += 1
        bc1 = 1.0 - self.beta1**self.t
        bc2 = 1.0 - self.beta2**self.t
        for p, g, m, v in zip(arrays, flat, self.m, self.v):
            m *= self.beta1
            m += (1.0 - self.beta1) * g
            v *= self.beta2
            v += (1.0 - self.beta2) * (g * g)
            p += self.lr * (m / bc1) / (np.sqrt(v / bc2) + self.eps)


def _interleave(dw, db):
    out = []
    for w, b in zip(dw, db):
        out.extend((w, b))
    return out


def make_optimizer(config: TrainConfig) -> Optimizer:
    if config.optimizer == "sgd":
        return SGD(config.learning_rate)
    return Adam(config.learning_rate)


def optimizer_step(params: MlpParams, grads, optimizer: Optimizer) -> MlpParams:
    """Apply one ascent step in place and return ``params``.

    Raises :class:`NonFiniteError` if a gradient or updated parameter is not
    finite; parameters are left untouched when the gradient is bad.
    """
    dw, db = grads
    for k, (w, b) in enumerate(zip(dw, db)):
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(b))):
            raise NonFiniteError(f"non-finite gradient in layer {k}")
    optimizer.step(params, grads)
    if not params.all_finite():
        raise NonFiniteError("parameters became non-finite after optimizer step")
    return params

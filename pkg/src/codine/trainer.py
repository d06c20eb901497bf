"""Copula density estimation by maximizing the f-divergence value function.

Given pseudo-observations ``u ~ c`` and uniform draws ``u' ~ pi``, the
critic ``T`` maximizes

    J_f(T) = mean(T(u)) - mean(f*(T(u')))

and at the optimum ``c(u) = (f*)'(T(u))``. The network sees ``2u - 1`` so
its inputs are centred; ``T`` is the generator activation of the raw output.
"""

from __future__ import annotations

import json
import logging
import time
from dataclasses import dataclass, field
from typing import Callable

import numpy as np
from scipy import special

from . import net
from .fgen import FGenerator, make_generator
from .net import INPUT_TRANSFORMS, MlpParams, NonFiniteError, TrainConfig

__all__ = [
    "CopulaModel",
    "TrainingError",
    "value_function",
    "train",
    "train_critic",
    "evaluate_density",
    "uniform_negatives",
    "MODEL_FORMAT",
    "MODEL_VERSION",
]

log = logging.getLogger(__name__)

MODEL_FORMAT = "codine-model"
MODEL_VERSION = 1
BOUNDARY_EPS = 1e-12

NegativeSampler = Callable[[np.ndarray, np.random.Generator], np.ndarray]


class TrainingError(RuntimeError):
    """Training produced a non-finite objective, gradient or parameter."""


PROBIT_CLIP = 3.0


def net_input(u: np.ndarray, transform: str = "linear") -> np.ndarray:
    """Map cube points to network inputs.

    ``linear`` is ``2u - 1``. ``probit`` is ``clip(ndtri(u), -3, 3) / 3``,
    which spreads out the corners where Gaussian-like copulas concentrate.
    """
    if transform == "linear":
        return 2.0 * u - 1.0
    if transform == "probit":
        z = special.ndtri(np.clip(u, BOUNDARY_EPS, 1.0 - BOUNDARY_EPS))
        return np.clip(z, -PROBIT_CLIP, PROBIT_CLIP) / PROBIT_CLIP
    raise ValueError(f"unknown input transform {transform!r}")


def critic(gen: FGenerator, params: MlpParams, u, transform: str = "linear") -> np.ndarray:
    """Critic values ``T(u)`` (activation applied) for points in the cube."""
    return gen.activation(net.forward(params, net_input(np.asarray(u, dtype=float), transform)))


def value_function(gen: FGenerator, params: MlpParams, pseudo_batch, uniform_batch) -> float:
    """Monte-Carlo estimate of ``J_f`` on one positive and one reference batch."""
    t_pos = critic(gen, params, pseudo_batch)
    t_neg = critic(gen, params, uniform_batch)
    assert np.all(gen.in_domain(t_pos)) and np.all(gen.in_domain(t_neg))
    return float(np.mean(t_pos) - np.mean(gen.f_star(t_neg)))


def uniform_negatives(batch: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    return rng.random(batch.shape)


@dataclass
class CopulaModel:
    """Trained critic plus generator tag; callable as a copula density."""

    params: MlpParams
    generator: str
    d: int
    metadata: dict = field(default_factory=dict)
    input_transform: str = "linear"

    def __post_init__(self):
        if self.params.input_dim != self.d:
            raise ValueError(f"network input width {self.params.input_dim} != d={self.d}")
        if self.input_transform not in INPUT_TRANSFORMS:
            raise ValueError(f"unknown input transform {self.input_transform!r}")
        self._gen = make_generator(self.generator)

    @property
    def gen(self) -> FGenerator:
        return self._gen

    def critic(self, points) -> np.ndarray:
        return critic(self._gen, self.params, points, self.input_transform)

    def __call__(self, points) -> np.ndarray:
        return evaluate_density(self, points)

    def to_dict(self) -> dict:
        return {
            "format": MODEL_FORMAT,
            "version": MODEL_VERSION,
            "generator": self.generator,
            "d": self.d,
            "input_transform": self.input_transform,
            "network": self.params.to_dict(),
            "metadata": self.metadata,
        }

    @classmethod
    def from_dict(cls, data: dict) -> "CopulaModel":
        if data.get("format") != MODEL_FORMAT or data.get("version") != MODEL_VERSION:
            raise ValueError(
                f"unsupported model file (format={data.get('format')!r}, "
                f"version={data.get('version')!r}); expected {MODEL_FORMAT} v{MODEL_VERSION}"
            )
        return cls(
            MlpParams.from_dict(data["network"]),
            data["generator"],
            int(data["d"]),
            data.get("metadata", {}),
            data.get("input_transform", "linear"),
        )

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "CopulaModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def evaluate_density(model: CopulaModel, points) -> np.ndarray:
    """Estimated copula density at ``points`` (an ``(m, d)`` array in the unit cube)."""
    u = np.asarray(points, dtype=float)
    if u.ndim == 1:
        u = u[None, :] if model.d > 1 else u[:, None]
    if u.ndim != 2 or u.shape[1] != model.d:
        raise ValueError(f"points must have shape (m, {model.d}), got {u.shape}")
    if np.any(~((u >= 0.0) & (u <= 1.0))):
        raise ValueError("points must lie in the unit cube [0, 1]^d")
    u = np.clip(u, BOUNDARY_EPS, 1.0 - BOUNDARY_EPS)
    return model.gen.f_star_prime(model.critic(u))


def train_critic(
    positives: np.ndarray,
    gen: FGenerator,
    config: TrainConfig,
    negatives: NegativeSampler = uniform_negatives,
    callback: Callable[[dict], None] | None = None,
) -> tuple[MlpParams, list[dict]]:
    """Maximize ``J_f`` by minibatch gradient ascent.

    ``negatives(batch, rng)`` draws the reference sample for each positive
    batch (fresh uniforms by default). Returns the parameters and the
    per-epoch curve of mean batch objectives.
    """
    u = np.asarray(positives, dtype=float)
    n, d = u.shape
    batch_size = min(config.batch_size, n)
    rng = np.random.default_rng(config.seed)
    params = net.init_params((d, *config.hidden, 1), rng, config.hidden_activation)
    opt = net.make_optimizer(config)
    curve = []
    n_steps = config.epochs * -(-n // batch_size)
    step = 0
    start = time.perf_counter()
    for epoch in range(config.epochs):
        order = rng.permutation(n)
        total, count = 0.0, 0
        for b, lo in enumerate(range(0, n, batch_size)):
            pos = u[order[lo:lo + batch_size]]
            neg = negatives(pos, rng)
            m_pos, m_neg = len(pos), len(neg)
            x = net_input(np.concatenate([pos, neg]), config.input_transform)
            raw, trace = net.forward(params, x, cache=True)
            t = gen.activation(raw)
            t_pos, t_neg = t[:m_pos], t[m_pos:]
            objective = float(np.mean(t_pos) - np.mean(gen.f_star(t_neg)))
            if not np.isfinite(objective):
                raise TrainingError(f"non-finite objective at epoch {epoch}, batch {b}")
            dt = np.empty_like(t)
            dt[:m_pos] = 1.0 / m_pos
            dt[m_pos:] = -gen.f_star_prime(t_neg) / m_neg
            grads = net.backward(params, x, dt * gen.activation_grad(raw), trace)
            opt.lr = config.learning_rate_at(step / n_steps)
            step += 1
            try:
                net.optimizer_step(params, grads, opt)
            except NonFiniteError as exc:
                raise TrainingError(f"{exc} at epoch {epoch}, batch {b}") from exc
            total += objective * m_pos
            count += m_pos
        record = {
            "epoch": epoch,
            "objective": total / count,
            "wall_time": time.perf_counter() - start,
        }
        curve.append(record)
        if callback is not None:
            callback(record)
        log.debug("epoch %d J=%.6f", epoch, record["objective"])
    return params, curve


def train(pseudo, gen_name: str, config: TrainConfig, callback=None) -> CopulaModel:
    """Fit a copula density model to pseudo-observations in (0, 1)^d."""
    u = np.asarray(pseudo, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    if u.ndim != 2 or len(u) < 1:
        raise ValueError("pseudo-observations must be a non-empty (n, d) array")
    if np.any(~((u > 0.0) & (u < 1.0))):
        raise ValueError("pseudo-observations must lie strictly inside (0, 1)")
    gen = make_generator(gen_name)
    params, curve = train_critic(u, gen, config, callback=callback)
    metadata = {
        "epochs": config.epochs,
        "n_train": int(len(u)),
        "final_objective": curve[-1]["objective"],
        "train_config": config.to_dict(),
        "curve": [c["objective"] for c in curve],
    }
    return CopulaModel(params, gen.name, u.shape[1], metadata, config.input_transform)

"""Mutual information through copula densities.

Two estimators:

* ``three-copula``: train joint, X-block and Y-block copula models and
  average ``log c_UV - log c_U - log c_V`` over held-out pseudo-observations.
  One-dimensional blocks have the constant density 1 and are not trained.
* ``direct-ratio``: a single critic on ``(u, v)`` contrasted against the
  product ``c_U c_V``, sampled by permuting the v-block rows of each batch.
  With the KL generator the estimate is the held-out value of
  ``mean T(u, v) - mean exp(T(u', v') - 1)``.

All reported values are in bits.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np

from .fgen import make_generator
from .marginals import as_sample_matrix, fit_marginals, pit
from .net import TrainConfig
from .oracle import AwgnSpec, nats_to_bits, sample_channel, true_mi
from .trainer import TrainingError, critic, train, train_critic

__all__ = [
    "MiConfig",
    "MiEstimate",
    "METHODS",
    "mi_three_copula",
    "mi_direct_ratio",
    "mi_sweep",
    "permute_block",
    "SWEEP_COLUMNS",
]

log = logging.getLogger(__name__)

METHODS = ("direct-ratio", "three-copula")
SWEEP_COLUMNS = (
    "snr_db", "d", "rho", "generator", "method", "mi_bits", "truth_bits", "stderr", "seed", "status",
)
DENSITY_FLOOR = 1e-12


@dataclass
class MiConfig:
    train: TrainConfig = field(default_factory=lambda: TrainConfig(input_transform="probit"))
    generators: tuple[str, ...] = ("kl",)
    methods: tuple[str, ...] = ("direct-ratio",)
    train_fraction: float = 0.8
    n_samples: int = 10_000
    eval_permutations: int = 10
    seed: int = 0

    def __post_init__(self):
        self.generators = tuple(self.generators)
        self.methods = tuple(self.methods)
        if not self.generators:
            raise ValueError("at least one generator is required")
        for g in self.generators:
            make_generator(g)
        if not self.methods:
            raise ValueError("at least one method is required")
        for m in self.methods:
            if m not in METHODS:
                raise ValueError(f"unknown MI method {m!r}; expected one of {', '.join(METHODS)}")
        if not 0.0 < self.train_fraction < 1.0:
            raise ValueError("train_fraction must lie in (0, 1)")
        if self.n_samples < 10:
            raise ValueError("n_samples must be at least 10")
        if self.eval_permutations < 1:
            raise ValueError("eval_permutations must be positive")

    def to_dict(self) -> dict:
        return {
            "train": self.train.to_dict(),
            "generators": list(self.generators),
            "methods": list(self.methods),
            "train_fraction": self.train_fraction,
            "n_samples": self.n_samples,
            "eval_permutations": self.eval_permutations,
            "seed": self.seed,
        }


@dataclass
class MiEstimate:
    value: float
    method: str
    stderr: float
    generator: str = "kl"
    metadata: dict = field(default_factory=dict)


def permute_block(batch: np.ndarray, start: int, rng: np.random.Generator) -> np.ndarray:
    """Copy of ``batch`` with columns ``start:`` shuffled jointly across rows."""
    out = batch.copy()
    out[:, start:] = batch[rng.permutation(len(batch)), start:]
    return out


def _pseudo_split(x, y, config: MiConfig):
    x = as_sample_matrix(x, min_rows=2, name="x")
    y = as_sample_matrix(y, min_rows=2, name="y")
    if len(x) != len(y):
        raise ValueError(f"x and y need equal row counts, got {len(x)} and {len(y)}")
    xy = np.hstack([x, y])
    w = pit(fit_marginals(xy), xy)
    rng = np.random.default_rng(config.seed)
    order = rng.permutation(len(w))
    n_train = int(round(config.train_fraction * len(w)))
    if n_train < 1 or n_train >= len(w):
        raise ValueError("train/eval split leaves an empty part")
    return w[order[:n_train]], w[order[n_train:]], x.shape[1]


def _child_seeds(seed: int, k: int) -> list[int]:
    return [int(s.generate_state(1, np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(k)]


def mi_three_copula(x, y, config: MiConfig | None = None, generator: str = "kl") -> MiEstimate:
    """MI from joint and block copula densities."""
    config = config or MiConfig()
    w_train, w_eval, dx = _pseudo_split(x, y, config)
    seeds = _child_seeds(config.train.seed, 3)
    blocks = {
        "joint": (slice(None), seeds[0]),
        "x-block": (slice(0, dx), seeds[1]),
        "y-block": (slice(dx, None), seeds[2]),
    }
    log_terms = {}
    for name, (cols, seed) in blocks.items():
        part_train, part_eval = w_train[:, cols], w_eval[:, cols]
        if part_train.shape[1] == 1:
            log_terms[name] = np.zeros(len(w_eval))
            continue
        try:
            model = train(part_train, generator, replace(config.train, seed=seed))
        except TrainingError as exc:
            raise TrainingError(f"{name} copula: {exc}") from exc
        log_terms[name] = np.log(np.maximum(model(part_eval), DENSITY_FLOOR))
    ratio = log_terms["joint"] - log_terms["x-block"] - log_terms["y-block"]
    n_eval = len(ratio)
    return MiEstimate(
        value=float(nats_to_bits(ratio.mean())),
        method="three-copula",
        stderr=float(nats_to_bits(ratio.std(ddof=1) / np.sqrt(n_eval))),
        generator=generator,
        metadata={"n_train": len(w_train), "n_eval": n_eval},
    )


def mi_direct_ratio(x, y, config: MiConfig | None = None, generator: str = "kl") -> MiEstimate:
    """MI from a critic contrasting the joint copula with the product of block copulas."""
    config = config or MiConfig()
    w_train, w_eval, dx = _pseudo_split(x, y, config)
    gen = make_generator(generator)
    try:
        params, curve = train_critic(
            w_train, gen, config.train, negatives=lambda b, rng: permute_block(b, dx, rng)
        )
    except TrainingError as exc:
        raise TrainingError(f"direct-ratio critic: {exc}") from exc

    rng = np.random.default_rng(_child_seeds(config.seed, 1)[0])
    t_pos = critic(gen, params, w_eval, config.train.input_transform)
    negs = np.vstack([permute_block(w_eval, dx, rng) for _ in range(config.eval_permutations)])
    t_neg = critic(gen, params, negs, config.train.input_transform)
    log_ratio = np.log(np.maximum(gen.f_star_prime(t_pos), DENSITY_FLOOR))
    n_eval = len(t_pos)
    if gen.name == "kl":
        f_neg = gen.f_star(t_neg)
        value = t_pos.mean() - f_neg.mean()
        stderr = np.sqrt(t_pos.var(ddof=1) / n_eval + f_neg.var(ddof=1) / len(f_neg))
    else:
        value = log_ratio.mean()
        stderr = log_ratio.std(ddof=1) / np.sqrt(n_eval)
    return MiEstimate(
        value=float(nats_to_bits(value)),
        method="direct-ratio",
        stderr=float(nats_to_bits(stderr)),
        generator=gen.name,
        metadata={
            "n_train": len(w_train),
            "n_eval": n_eval,
            "mean_log_ratio_bits": float(nats_to_bits(log_ratio.mean())),
            "final_objective": curve[-1]["objective"],
        },
    )


_ESTIMATORS = {"three-copula": mi_three_copula, "direct-ratio": mi_direct_ratio}


def mi_sweep(spec_grid, config: MiConfig | None = None) -> list[dict]:
    """One row per (channel spec, generator, method); failed cells get ``status`` set."""
    config = config or MiConfig()
    specs = list(spec_grid)
    if not specs:
        raise ValueError("spec grid is empty")
    rows = []
    for spec in specs:
        if not isinstance(spec, AwgnSpec):
            raise TypeError(f"expected AwgnSpec, got {type(spec).__name__}")
        x, y = sample_channel(spec, config.n_samples, config.seed)
        truth = true_mi(spec)
        for generator in config.generators:
            for method in config.methods:
                row = {
                    "snr_db": spec.snr_db,
                    "d": spec.d,
                    "rho": spec.rho,
                    "generator": generator,
                    "method": method,
                    "mi_bits": float("nan"),
                    "truth_bits": truth,
                    "stderr": float("nan"),
                    "seed": config.seed,
                    "status": "ok",
                }
                try:
                    est = _ESTIMATORS[method](x, y, config, generator)
                    row["mi_bits"] = est.value
                    row["stderr"] = est.stderr
                except (TrainingError, ValueError, FloatingPointError) as exc:
                    log.warning("MI cell %s/%s/%s failed: %s", spec.to_dict(), generator, method, exc)
                    row["status"] = f"error: {exc}"
                rows.append(row)
    return rows

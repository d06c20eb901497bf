"""Systematic-scan Gibbs sampling from a copula density.

Each conditional ``c(u_j | u_-j)`` is discretized on a midpoint grid of
``grid_size`` cells along axis ``j``; a cell is drawn with probability
proportional to the density at its midpoint and the new coordinate is
placed uniformly inside that cell. Chains are advanced in lock-step so the
density is evaluated on one ``(n_chains * grid_size, d)`` batch per axis.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from .marginals import MarginalModel, inverse_pit

__all__ = [
    "GibbsConfig",
    "GibbsResult",
    "conditional_slice",
    "run_gibbs",
    "gibbs_sample",
    "generate",
    "lag1_autocorrelation",
]

log = logging.getLogger(__name__)

EDGE = 1e-12


@dataclass
class GibbsConfig:
    grid_size: int = 256
    burn_in: int = 500
    thinning: int = 5
    n_chains: int = 256
    seed: int = 0

    def __post_init__(self):
        if self.grid_size < 16:
            raise ValueError("grid_size must be at least 16")
        if self.burn_in < 0:
            raise ValueError("burn_in must be non-negative")
        if self.thinning < 1:
            raise ValueError("thinning must be at least 1")
        if self.n_chains < 1:
            raise ValueError("n_chains must be positive")

    def to_dict(self) -> dict:
        return {
            "grid_size": self.grid_size,
            "burn_in": self.burn_in,
            "thinning": self.thinning,
            "n_chains": self.n_chains,
            "seed": self.seed,
        }


@dataclass
class GibbsResult:
    samples: np.ndarray
    n_fallback: int = 0
    n_updates: int = 0
    autocorrelation: np.ndarray = field(default_factory=lambda: np.zeros(0))


def _midpoints(grid_size: int) -> np.ndarray:
    return (np.arange(grid_size) + 0.5) / grid_size


def _slice_probabilities(model, states: np.ndarray, axis: int, grid_size: int):
    """Normalized conditional cell probabilities, shape ``(n_chains, grid_size)``.

    Rows whose densities are all zero or non-finite fall back to uniform;
    the number of such rows is returned alongside.
    """
    n, d = states.shape
    pts = np.repeat(states, grid_size, axis=0)
    pts[:, axis] = np.tile(_midpoints(grid_size), n)
    dens = np.asarray(model(pts), dtype=float).reshape(n, grid_size)
    dens = np.where(np.isfinite(dens) & (dens > 0), dens, 0.0)
    total = dens.sum(axis=1, keepdims=True)
    bad = total[:, 0] <= 0
    if bad.any():
        dens[bad] = 1.0
        total[bad] = grid_size
    return dens / total, int(bad.sum())


def conditional_slice(model, current, axis: int, grid_size: int = 256) -> np.ndarray:
    """Discrete conditional distribution of coordinate ``axis`` given the others.

    ``axis`` is zero-based. Returns a probability vector over ``grid_size``
    equal cells of (0, 1).
    """
    u = np.asarray(current, dtype=float).reshape(1, -1)
    if not 0 <= axis < u.shape[1]:
        raise ValueError(f"axis {axis} out of range for d={u.shape[1]}")
    if np.any(~((u >= 0.0) & (u <= 1.0))):
        raise ValueError("current state must lie in the unit cube")
    if grid_size < 1:
        raise ValueError("grid_size must be positive")
    probs, n_bad = _slice_probabilities(model, u, axis, grid_size)
    if n_bad:
        log.warning("conditional slice on axis %d was degenerate; using uniform", axis)
    return probs[0]


def lag1_autocorrelation(chains: np.ndarray) -> np.ndarray:
    """Per-coordinate lag-1 autocorrelation of kept states, pooled over chains.

    ``chains`` has shape ``(n_kept, n_chains, d)``.
    """
    if chains.shape[0] < 3:
        return np.full(chains.shape[2], np.nan)
    centred = chains - chains.mean(axis=(0, 1), keepdims=True)
    num = np.sum(centred[1:] * centred[:-1], axis=(0, 1))
    den = np.sum(centred * centred, axis=(0, 1))
    with np.errstate(invalid="ignore", divide="ignore"):
        return num / den


def run_gibbs(model, d: int, n_out: int, config: GibbsConfig | None = None) -> GibbsResult:
    """Run ``n_chains`` lock-step chains and collect ``n_out`` states.

    After ``burn_in`` sweeps every ``thinning``-th sweep contributes one
    state per chain; rows are ordered sweep-major, chain-minor.
    """
    config = config or GibbsConfig()
    if n_out < 1:
        raise ValueError("n_out must be positive")
    rng = np.random.default_rng(config.seed)
    n_chains = min(config.n_chains, n_out)
    g = config.grid_size
    states = rng.random((n_chains, d))
    n_keep = -(-n_out // n_chains)
    n_sweeps = config.burn_in + n_keep * config.thinning
    kept = []
    n_fallback = 0
    for sweep in range(1, n_sweeps + 1):
        for axis in range(d):
            probs, n_bad = _slice_probabilities(model, states, axis, g)
            n_fallback += n_bad
            cdf = np.cumsum(probs, axis=1)
            r = rng.random((n_chains, 2))
            cell = (cdf < r[:, :1] * cdf[:, -1:]).sum(axis=1)
            cell = np.minimum(cell, g - 1)
            states[:, axis] = (cell + r[:, 1]) / g
        if sweep > config.burn_in and (sweep - config.burn_in) % config.thinning == 0:
            kept.append(states.copy())
    if n_fallback:
        log.warning("%d conditional slices fell back to uniform", n_fallback)
    chains = np.clip(np.stack(kept), EDGE, 1.0 - EDGE)
    samples = chains.reshape(-1, d)[:n_out]
    return GibbsResult(
        samples=samples,
        n_fallback=n_fallback,
        n_updates=n_sweeps * d * n_chains,
        autocorrelation=lag1_autocorrelation(chains),
    )


def gibbs_sample(model, n_out: int, config: GibbsConfig | None = None, d: int | None = None) -> np.ndarray:
    """Pseudo-observations drawn from ``model``; ``d`` defaults to ``model.d``."""
    if d is None:
        d = model.d
    return run_gibbs(model, d, n_out, config).samples


def generate(model, marginal: MarginalModel, n_out: int, config: GibbsConfig | None = None) -> np.ndarray:
    """Gibbs-sample the copula and map the draws through the marginal quantiles."""
    d = getattr(model, "d", marginal.d)
    if marginal.d != d:
        raise ValueError(f"marginal dimension {marginal.d} does not match model dimension {d}")
    return inverse_pit(marginal, gibbs_sample(model, n_out, config, d=d))

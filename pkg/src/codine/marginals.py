"""Univariate marginal models and the probability integral transform.

The empirical backend ranks each column with average ranks for ties and
maps rank ``r`` to ``r / (n + 1)``, so pseudo-observations never touch the
cube boundary. CDF and quantile are piecewise-linear through the knots
``(x_(k), rank_k / (n + 1))`` and clamp outside the training range.

Two analytic backends exist for oracle work: ``gaussian`` (exact normal CDF
per column) and ``uniform`` (identity on the unit interval).
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field

import numpy as np
from scipy import special
from scipy.stats import rankdata

__all__ = [
    "MarginalModel",
    "fit_marginals",
    "gaussian_marginals",
    "uniform_marginals",
    "pit",
    "inverse_pit",
    "gaussian_cdf",
    "gaussian_quantile",
    "as_sample_matrix",
]

MARGINALS_FORMAT = "codine-marginals"
MARGINALS_VERSION = 1


def gaussian_cdf(x):
    """Standard normal CDF."""
    return special.ndtr(np.asarray(x, dtype=float))


def gaussian_quantile(u):
    """Standard normal quantile; ``u`` must lie strictly inside (0, 1)."""
    u = np.asarray(u, dtype=float)
    if np.any(~((u > 0.0) & (u < 1.0))):
        raise ValueError("gaussian_quantile requires inputs strictly inside (0, 1)")
    return special.ndtri(u)


def as_sample_matrix(samples, *, min_rows: int = 1, name: str = "samples") -> np.ndarray:
    """Coerce to a finite float ``(n, d)`` array, rejecting NaN/inf with location."""
    arr = np.asarray(samples, dtype=float)
    if arr.ndim == 1:
        arr = arr[:, None]
    if arr.ndim != 2:
        raise ValueError(f"{name} must be a 2-d array, got shape {arr.shape}")
    if arr.shape[0] < min_rows:
        raise ValueError(f"{name} needs at least {min_rows} rows, got {arr.shape[0]}")
    if arr.shape[1] < 1:
        raise ValueError(f"{name} needs at least one column")
    bad = ~np.isfinite(arr)
    if bad.any():
        row, col = map(int, np.argwhere(bad)[0])
        raise ValueError(f"{name} has a non-finite entry at row {row}, column {col}")
    return arr


@dataclass(frozen=True)
class MarginalModel:
    """Per-dimension CDF/quantile pair.

    For ``kind == "empirical"``, ``x_knots[i]`` holds the sorted distinct
    training values of column ``i`` and ``u_knots[i]`` their average-rank
    CDF levels. For ``kind == "gaussian"``, ``loc``/``scale`` give the exact
    normal marginals. ``kind == "uniform"`` is the identity.
    """

    kind: str
    d: int
    n: int = 0
    x_knots: tuple[np.ndarray, ...] = field(default=(), repr=False)
    u_knots: tuple[np.ndarray, ...] = field(default=(), repr=False)
    loc: np.ndarray | None = None
    scale: np.ndarray | None = None

    @property
    def interpolation(self) -> str:
        return "linear" if self.kind == "empirical" else "exact"

    def to_dict(self) -> dict:
        out = {
            "format": MARGINALS_FORMAT,
            "version": MARGINALS_VERSION,
            "kind": self.kind,
            "d": self.d,
            "n": self.n,
            "interpolation": self.interpolation,
        }
        if self.kind == "empirical":
            out["x_knots"] = [k.tolist() for k in self.x_knots]
            out["u_knots"] = [k.tolist() for k in self.u_knots]
        elif self.kind == "gaussian":
            out["loc"] = self.loc.tolist()
            out["scale"] = self.scale.tolist()
        return out

    @classmethod
    def from_dict(cls, data: dict) -> "MarginalModel":
        if data.get("format") != MARGINALS_FORMAT or data.get("version") != MARGINALS_VERSION:
            raise ValueError(
                f"unsupported marginals file (format={data.get('format')!r}, "
                f"version={data.get('version')!r})"
            )
        kind = data["kind"]
        if kind == "empirical":
            return cls(
                kind=kind,
                d=int(data["d"]),
                n=int(data["n"]),
                x_knots=tuple(np.asarray(k, dtype=float) for k in data["x_knots"]),
                u_knots=tuple(np.asarray(k, dtype=float) for k in data["u_knots"]),
            )
        if kind == "gaussian":
            return gaussian_marginals(data["loc"], data["scale"])
        if kind == "uniform":
            return uniform_marginals(int(data["d"]))
        raise ValueError(f"unknown marginal kind {kind!r}")

    def save(self, path) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_dict(), fh, indent=1)
            fh.write("\n")

    @classmethod
    def load(cls, path) -> "MarginalModel":
        with open(path) as fh:
            return cls.from_dict(json.load(fh))


def fit_marginals(samples) -> MarginalModel:
    """Fit rank-based empirical marginals (denominator ``n + 1``)."""
    x = as_sample_matrix(samples, min_rows=2)
    n, d = x.shape
    x_knots, u_knots = [], []
    for j in range(d):
        col = x[:, j]
        values = np.unique(col)
        if values.size < 2:
            raise ValueError(f"column {j} is constant; cannot build a continuous marginal")
        ranks = rankdata(col, method="average")
        # average rank per distinct value, in sorted order
        order = np.searchsorted(values, col)
        level = np.zeros(values.size)
        level[order] = ranks
        x_knots.append(values)
        u_knots.append(level / (n + 1.0))
    return MarginalModel(
        kind="empirical", d=d, n=n, x_knots=tuple(x_knots), u_knots=tuple(u_knots)
    )


def gaussian_marginals(loc, scale) -> MarginalModel:
    loc = np.atleast_1d(np.asarray(loc, dtype=float))
    scale = np.atleast_1d(np.asarray(scale, dtype=float))
    if loc.shape != scale.shape or loc.ndim != 1:
        raise ValueError("loc and scale must be 1-d arrays of equal length")
    if np.any(scale <= 0) or not np.all(np.isfinite(scale)):
        raise ValueError("scale must be positive and finite")
    return MarginalModel(kind="gaussian", d=loc.size, loc=loc, scale=scale)


def uniform_marginals(d: int) -> MarginalModel:
    if d < 1:
        raise ValueError("d must be positive")
    return MarginalModel(kind="uniform", d=int(d))


def _check_dim(model: MarginalModel, arr: np.ndarray) -> None:
    if arr.shape[1] != model.d:
        raise ValueError(f"dimension mismatch: model has d={model.d}, data has {arr.shape[1]} columns")


def pit(model: MarginalModel, samples) -> np.ndarray:
    """Map observations to pseudo-observations in (0, 1)."""
    x = as_sample_matrix(samples)
    _check_dim(model, x)
    if model.kind == "uniform":
        if np.any((x <= 0.0) | (x >= 1.0)):
            raise ValueError("uniform marginals need observations strictly inside (0, 1)")
        return x.copy()
    if model.kind == "gaussian":
        return gaussian_cdf((x - model.loc) / model.scale)
    u = np.empty_like(x)
    for j in range(model.d):
        xk, uk = model.x_knots[j], model.u_knots[j]
        u[:, j] = np.interp(x[:, j], xk, uk, left=uk[0], right=uk[-1])
    return u


def inverse_pit(model: MarginalModel, pseudo) -> np.ndarray:
    """Map pseudo-observations in (0, 1) back to the sample domain."""
    u = np.asarray(pseudo, dtype=float)
    if u.ndim == 1:
        u = u[:, None]
    _check_dim(model, u)
    if np.any(~((u > 0.0) & (u < 1.0))):
        raise ValueError("pseudo-observations must lie strictly inside (0, 1)")
    if model.kind == "uniform":
        return u.copy()
    if model.kind == "gaussian":
        return model.loc + model.scale * gaussian_quantile(u)
    x = np.empty_like(u)
    for j in range(model.d):
        xk, uk = model.x_knots[j], model.u_knots[j]
        x[:, j] = np.interp(u[:, j], uk, xk, left=xk[0], right=xk[-1])
    return x

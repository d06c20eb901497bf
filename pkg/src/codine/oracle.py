"""Closed-form ground truth for the Gaussian channel ``Y = X + N``.

``X ~ N(0, I_d)`` and ``N ~ N(0, sigma^2 R)`` with ``R`` tridiagonal (unit
diagonal, ``rho`` on the first off-diagonals) and ``sigma^2 = 1 / snr``.
The copula of ``Y`` is Gaussian with covariance ``A = Sigma_N + I`` and
marginal variances ``diag(A)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .marginals import gaussian_cdf, gaussian_quantile

__all__ = [
    "AwgnSpec",
    "sample_channel",
    "sample_copula",
    "true_copula_density",
    "kl_to_flat",
    "true_mi",
    "spiral_toy",
    "nats_to_bits",
    "db_to_linear",
]

LN2 = math.log(2.0)


def nats_to_bits(x):
    return x / LN2


def db_to_linear(snr_db: float) -> float:
    return 10.0 ** (snr_db / 10.0)


@dataclass(frozen=True)
class AwgnSpec:
    d: int
    snr: float
    rho: float = 0.0

    def __post_init__(self):
        if int(self.d) != self.d or self.d < 1:
            raise ValueError(f"d must be a positive integer, got {self.d}")
        if not (self.snr > 0 and math.isfinite(self.snr)):
            raise ValueError(f"snr must be positive and finite, got {self.snr}")
        if not -1.0 < self.rho < 1.0:
            raise ValueError(f"rho must lie in (-1, 1), got {self.rho}")
        try:
            np.linalg.cholesky(self.noise_cov)
        except np.linalg.LinAlgError:
            raise ValueError(f"rho={self.rho} makes the noise covariance singular for d={self.d}") from None

    @classmethod
    def from_db(cls, d: int, snr_db: float, rho: float = 0.0) -> "AwgnSpec":
        return cls(int(d), db_to_linear(snr_db), float(rho))

    @property
    def snr_db(self) -> float:
        return 10.0 * math.log10(self.snr)

    @property
    def noise_var(self) -> float:
        return 1.0 / self.snr

    @cached_property
    def noise_cov(self) -> np.ndarray:
        """``Sigma_N = sigma^2 R``."""
        r = np.eye(self.d)
        idx = np.arange(self.d - 1)
        r[idx, idx + 1] = self.rho
        r[idx + 1, idx] = self.rho
        return self.noise_var * r

    @cached_property
    def noise_cov_diag(self) -> np.ndarray:
        """``Sigma_N`` with off-diagonal entries zeroed."""
        return np.diag(np.diag(self.noise_cov))

    @cached_property
    def output_cov(self) -> np.ndarray:
        return self.noise_cov + np.eye(self.d)

    @cached_property
    def output_std(self) -> np.ndarray:
        return np.sqrt(np.diag(self.output_cov))

    def to_dict(self) -> dict:
        return {"d": self.d, "snr_db": self.snr_db, "rho": self.rho}


def sample_channel(spec: AwgnSpec, n: int, seed) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` rows of channel input ``X`` and output ``Y``."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((n, spec.d))
    chol = np.linalg.cholesky(spec.noise_cov)
    noise = rng.standard_normal((n, spec.d)) @ chol.T
    return x, x + noise


def sample_copula(spec: AwgnSpec, n: int, seed) -> np.ndarray:
    """Exact pseudo-observations of ``Y``: the channel output pushed through its true CDFs."""
    _, y = sample_channel(spec, n, seed)
    return gaussian_cdf(y / spec.output_std)


def _log_density(spec: AwgnSpec, v: np.ndarray) -> np.ndarray:
    y = gaussian_quantile(v) * spec.output_std
    a = spec.output_cov
    dmat = spec.noise_cov_diag + np.eye(spec.d)
    _, logdet_a = np.linalg.slogdet(a)
    logdet_d = float(np.sum(np.log(np.diag(dmat))))
    prec = np.linalg.inv(a) - np.diag(1.0 / np.diag(dmat))
    quad = np.einsum("ni,ij,nj->n", y, prec, y)
    return 0.5 * (logdet_d - logdet_a) - 0.5 * quad


def true_copula_density(spec: AwgnSpec, v) -> np.ndarray:
    """Gaussian copula density of the channel output at ``v`` in (0, 1)^d."""
    v = np.asarray(v, dtype=float)
    single = v.ndim == 1
    v = np.atleast_2d(v)
    if v.shape[1] != spec.d:
        raise ValueError(f"points must have {spec.d} columns, got {v.shape[1]}")
    if np.any(~((v > 0.0) & (v < 1.0))):
        raise ValueError("copula density points must lie strictly inside (0, 1)^d")
    out = np.exp(_log_density(spec, v))
    return out[0] if single else out


def true_log_copula_density(spec: AwgnSpec, v) -> np.ndarray:
    v = np.atleast_2d(np.asarray(v, dtype=float))
    return _log_density(spec, v)


def kl_to_flat(spec: AwgnSpec) -> float:
    """``KL(c || 1)`` in nats: half the log ratio of ``det(diag(A))`` to ``det(A)``."""
    _, logdet_a = np.linalg.slogdet(spec.output_cov)
    logdet_d = float(np.sum(np.log(np.diag(spec.output_cov))))
    return max(0.0, 0.5 * (logdet_d - logdet_a))


def true_mi(spec: AwgnSpec) -> float:
    """``I(X; Y)`` in bits, ``0.5 log2(det(I + Sigma_N) / det(Sigma_N))``."""
    _, logdet_a = np.linalg.slogdet(spec.output_cov)
    _, logdet_n = np.linalg.slogdet(spec.noise_cov)
    return float(nats_to_bits(0.5 * (logdet_a - logdet_n)))


def spiral_toy(n: int, sigma: float = 0.1, seed=0) -> np.ndarray:
    """``[sin t, t cos t] + noise`` with ``t ~ N(0, 1)`` and isotropic noise of std ``sigma``."""
    if n < 1:
        raise ValueError("n must be positive")
    rng = np.random.default_rng(seed)
    t = rng.standard_normal(n)
    noise = sigma * rng.standard_normal((n, 2))
    return np.column_stack([np.sin(t), t * np.cos(t)]) + noise

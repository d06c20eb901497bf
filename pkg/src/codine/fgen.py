"""f-divergence generators and their Fenchel conjugates.

Each generator bundles the convex function ``f`` (with ``f(1) = 0``), its
derivative, the conjugate ``f*`` and the conjugate derivative ``(f*)'``,
together with the output activation that maps a raw network output into
the domain where ``f*`` is finite.

The density ratio is recovered from a critic value ``t`` as ``(f*)'(t)``,
which is the inverse map of ``f'``. All logarithms are natural.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "FGenerator",
    "GENERATOR_NAMES",
    "make_generator",
    "density_from_t",
    "activation",
    "softplus",
    "sigmoid",
]

LOG4 = math.log(4.0)

Fn = Callable[[np.ndarray], np.ndarray]


def softplus(x):
    x = np.asarray(x, dtype=float)
    return np.maximum(x, 0.0) + np.log1p(np.exp(-np.abs(x)))


def sigmoid(x):
    # 1 - exp(-softplus(x)), accurate in both tails
    return -np.expm1(-softplus(x))


@dataclass(frozen=True)
class FGenerator:
    """Generator algebra for one f-divergence.

    ``t_domain`` is the open interval on which ``f_star`` is finite;
    ``activation`` maps any finite real into it and ``activation_grad`` is
    its derivative with respect to the raw input.
    """

    name: str
    f: Fn
    f_prime: Fn
    f_star: Fn
    f_star_prime: Fn
    t_domain: tuple[float, float]
    activation: Fn
    activation_grad: Fn

    def in_domain(self, t) -> np.ndarray:
        t = np.asarray(t, dtype=float)
        lo, hi = self.t_domain
        return (t > lo) & (t < hi)


def _xlogx(u):
    u = np.asarray(u, dtype=float)
    with np.errstate(divide="ignore", invalid="ignore"):
        return np.where(u > 0, u * np.log(np.where(u > 0, u, 1.0)), 0.0)


# -- KL: f(u) = u log u -------------------------------------------------------

def _kl() -> FGenerator:
    def f(u):
        return _xlogx(u)

    def f_prime(u):
        return np.log(np.asarray(u, dtype=float)) + 1.0

    def f_star(t):
        return np.exp(np.asarray(t, dtype=float) - 1.0)

    return FGenerator(
        name="kl",
        f=f,
        f_prime=f_prime,
        f_star=f_star,
        f_star_prime=f_star,
        t_domain=(-math.inf, math.inf),
        activation=lambda r: np.asarray(r, dtype=float).copy(),
        activation_grad=lambda r: np.ones_like(np.asarray(r, dtype=float)),
    )


# -- GAN: f(u) = u log u - (u+1) log(u+1) + log 4 -----------------------------
#
# The conjugate carries the -log 4 offset so that f*(f'(u)) = u f'(u) - f(u)
# holds exactly; without it the Young-Fenchel identity is off by log 4.

def _gan() -> FGenerator:
    def f(u):
        u = np.asarray(u, dtype=float)
        return _xlogx(u) - _xlogx(u + 1.0) + LOG4

    def f_prime(u):
        u = np.asarray(u, dtype=float)
        return np.log(u) - np.log1p(u)

    def f_star(t):
        t = np.asarray(t, dtype=float)
        return -np.log(-np.expm1(t)) - LOG4

    def f_star_prime(t):
        t = np.asarray(t, dtype=float)
        return np.exp(t) / -np.expm1(t)

    return FGenerator(
        name="gan",
        f=f,
        f_prime=f_prime,
        f_star=f_star,
        f_star_prime=f_star_prime,
        t_domain=(-math.inf, 0.0),
        activation=lambda r: -softplus(r),
        activation_grad=lambda r: -sigmoid(r),
    )


# -- HD: f(u) = (sqrt(u) - 1)^2 ------------------------------------------------

def _hd() -> FGenerator:
    def f(u):
        u = np.asarray(u, dtype=float)
        return (np.sqrt(u) - 1.0) ** 2

    def f_prime(u):
        u = np.asarray(u, dtype=float)
        return 1.0 - 1.0 / np.sqrt(u)

    def f_star(t):
        t = np.asarray(t, dtype=float)
        return t / (1.0 - t)

    def f_star_prime(t):
        t = np.asarray(t, dtype=float)
        return 1.0 / (1.0 - t) ** 2

    return FGenerator(
        name="hd",
        f=f,
        f_prime=f_prime,
        f_star=f_star,
        f_star_prime=f_star_prime,
        t_domain=(-math.inf, 1.0),
        activation=lambda r: 1.0 - softplus(r),
        activation_grad=lambda r: -sigmoid(r),
    )


_FACTORIES = {"kl": _kl, "gan": _gan, "hd": _hd}
GENERATOR_NAMES = tuple(_FACTORIES)


def make_generator(name: str) -> FGenerator:
    """Build the generator bundle for ``name`` (``"gan"``, ``"kl"`` or ``"hd"``)."""
    key = str(name).lower()
    if key not in _FACTORIES:
        raise ValueError(
            f"unknown generator {name!r}; expected one of {', '.join(GENERATOR_NAMES)}"
        )
    return _FACTORIES[key]()


def density_from_t(gen: FGenerator, t):
    """Density ratio encoded by critic value ``t``, i.e. ``(f*)'(t)``."""
    t = np.asarray(t, dtype=float)
    if not np.all(gen.in_domain(t)):
        raise ValueError(f"t outside the {gen.name} domain {gen.t_domain}")
    return gen.f_star_prime(t)


def activation(gen: FGenerator, raw):
    return gen.activation(raw)

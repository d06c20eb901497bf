"""Self-consistency checks and the oracle quality metric for copula densities.

Every check treats the model as a black-box callable ``density(points)``
returning one value per row of an ``(m, d)`` array, so analytic stubs and
trained :class:`~codine.trainer.CopulaModel` instances are interchangeable.
All estimates are plain Monte-Carlo averages and come with a standard error.
A check passes when ``|lhs - rhs| <= n_sigma * stderr + tol``; the mass
check defaults to ``tol = 0.05`` because a trained network is only
normalized up to optimization error, far above the Monte-Carlo error.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .oracle import AwgnSpec, kl_to_flat, nats_to_bits, sample_copula, true_log_copula_density

__all__ = [
    "MassCheck",
    "MomentCheck",
    "SpearmanCheck",
    "QcResult",
    "DiagnosticsReport",
    "check_mass",
    "check_moments",
    "check_spearman",
    "q_c",
    "diagnose",
    "DENSITY_FLOOR",
]

DENSITY_FLOOR = 1e-12
N_SIGMA = 3.0
MASS_TOL = 0.05


def _model_dim(model, d):
    d = d if d is not None else getattr(model, "d", None)
    if d is None:
        raise ValueError("dimension d is required for models without a .d attribute")
    return int(d)


def _density(model, points) -> np.ndarray:
    out = np.asarray(model(points), dtype=float)
    if out.shape == ():
        out = np.full(len(points), float(out))
    return out


def _stderr(x: np.ndarray) -> float:
    return float(x.std(ddof=1) / math.sqrt(len(x))) if len(x) > 1 else 0.0


@dataclass
class MassCheck:
    estimate: float
    stderr: float
    n_mc: int
    seed: int
    passed: bool


@dataclass
class MomentCheck:
    order: int
    dim: int
    lhs: float
    rhs: float
    stderr: float
    passed: bool


@dataclass
class SpearmanCheck:
    matrix: np.ndarray
    stderr: np.ndarray
    n_mc: int
    seed: int

    @property
    def value(self) -> float:
        """Off-diagonal estimate for a two-dimensional model."""
        if self.matrix.shape != (2, 2):
            raise ValueError("value is only defined for two-dimensional models")
        return float(self.matrix[0, 1])


@dataclass
class QcResult:
    nats: float
    stderr_nats: float
    n_mc: int
    n_floored: int
    seed: int

    @property
    def bits(self) -> float:
        return float(nats_to_bits(self.nats))

    @property
    def stderr_bits(self) -> float:
        return float(nats_to_bits(self.stderr_nats))


def check_mass(
    model,
    n_mc: int = 100_000,
    seed=0,
    d: int | None = None,
    n_sigma: float = N_SIGMA,
    tol: float = MASS_TOL,
) -> MassCheck:
    """``E_uniform[c(u)]``, which is 1 for any normalized density."""
    if n_mc < 100:
        raise ValueError("n_mc must be at least 100")
    d = _model_dim(model, d)
    rng = np.random.default_rng(seed)
    c = _density(model, rng.random((n_mc, d)))
    est, se = float(c.mean()), _stderr(c)
    return MassCheck(est, se, n_mc, seed, bool(abs(est - 1.0) <= n_sigma * se + tol))


def check_moments(
    model,
    pseudo_data,
    orders=(1, 2),
    n_mc: int = 100_000,
    seed=0,
    n_sigma: float = N_SIGMA,
    tol: float = 0.0,
) -> list[MomentCheck]:
    """Compare ``E_uniform[U_i^k c(U)]`` with the sample moment of the pseudo-data.

    One entry per (order, dimension). ``stderr`` combines the Monte-Carlo
    error of the left side and the sampling error of the right side.
    """
    u_data = np.asarray(pseudo_data, dtype=float)
    if u_data.ndim == 1:
        u_data = u_data[:, None]
    orders = [int(k) for k in orders]
    if not orders or any(k < 1 or k > 8 for k in orders):
        raise ValueError("moment orders must lie in 1..8")
    d = u_data.shape[1]
    rng = np.random.default_rng(seed)
    r = rng.random((n_mc, d))
    c = _density(model, r)
    out = []
    for k in orders:
        for i in range(d):
            lhs_terms = r[:, i] ** k * c
            rhs_terms = u_data[:, i] ** k
            lhs, rhs = float(lhs_terms.mean()), float(rhs_terms.mean())
            se = math.hypot(_stderr(lhs_terms), _stderr(rhs_terms))
            out.append(MomentCheck(k, i, lhs, rhs, se, bool(abs(lhs - rhs) <= n_sigma * se + tol)))
    return out


def check_spearman(model, n_mc: int = 100_000, seed=0, d: int | None = None) -> SpearmanCheck:
    """Spearman matrix ``12 E_uniform[U_i U_j c(U)] - 3`` for every pair ``i != j``."""
    d = _model_dim(model, d)
    if d < 2:
        raise ValueError("Spearman correlation needs at least two dimensions")
    rng = np.random.default_rng(seed)
    r = rng.random((n_mc, d))
    c = _density(model, r)
    mat = np.eye(d)
    se = np.zeros((d, d))
    for i in range(d):
        for j in range(i + 1, d):
            terms = 12.0 * r[:, i] * r[:, j] * c - 3.0
            mat[i, j] = mat[j, i] = terms.mean()
            se[i, j] = se[j, i] = _stderr(terms)
    return SpearmanCheck(mat, se, n_mc, seed)


def q_c(model, spec: AwgnSpec, n_mc: int = 100_000, seed=0) -> QcResult:
    """``KL(c || c_hat)`` by averaging the log ratio over exact copula draws.

    Estimated densities below ``DENSITY_FLOOR`` are clipped to it and counted.
    """
    v = sample_copula(spec, n_mc, seed)
    est = _density(model, v)
    floored = ~(est >= DENSITY_FLOOR)
    est = np.where(floored, DENSITY_FLOOR, est)
    terms = true_log_copula_density(spec, v) - np.log(est)
    return QcResult(float(terms.mean()), _stderr(terms), n_mc, int(floored.sum()), seed)


def _jsonable(obj):
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer, np.bool_)):
        return obj.item()
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    return obj


@dataclass
class DiagnosticsReport:
    mass: MassCheck
    moments: list[MomentCheck] = field(default_factory=list)
    spearman: SpearmanCheck | None = None
    qc: QcResult | None = None
    baseline_nats: float | None = None
    oracle: dict | None = None

    @property
    def passed(self) -> bool:
        ok = self.mass.passed and all(m.passed for m in self.moments)
        if self.qc is not None and self.baseline_nats is not None:
            ok = ok and self.qc.nats < self.baseline_nats
        return ok

    def to_dict(self) -> dict:
        out = {
            "passed": self.passed,
            "mass": asdict(self.mass),
            "moments": [asdict(m) for m in self.moments],
        }
        if self.spearman is not None:
            out["spearman"] = {
                "matrix": self.spearman.matrix,
                "stderr": self.spearman.stderr,
                "n_mc": self.spearman.n_mc,
                "seed": self.spearman.seed,
            }
        if self.qc is not None:
            out["q_c"] = {
                "nats": self.qc.nats,
                "bits": self.qc.bits,
                "stderr_nats": self.qc.stderr_nats,
                "stderr_bits": self.qc.stderr_bits,
                "n_mc": self.qc.n_mc,
                "n_floored": self.qc.n_floored,
                "seed": self.qc.seed,
            }
        if self.baseline_nats is not None:
            out["flat_baseline"] = {
                "nats": self.baseline_nats,
                "bits": float(nats_to_bits(self.baseline_nats)),
                "passed": self.qc is not None and self.qc.nats < self.baseline_nats,
            }
        if self.oracle is not None:
            out["oracle"] = self.oracle
        return _jsonable(out)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=1, sort_keys=True)


def diagnose(
    model,
    pseudo_data=None,
    spec: AwgnSpec | None = None,
    orders=(1, 2),
    n_mc: int = 100_000,
    seed: int = 0,
    n_sigma: float = N_SIGMA,
    mass_tol: float = MASS_TOL,
) -> DiagnosticsReport:
    """Run every applicable check; each one gets its own child seed."""
    d = _model_dim(model, None)
    if spec is not None and spec.d != d:
        raise ValueError(f"oracle dimension {spec.d} does not match model dimension {d}")
    seeds = [int(s.generate_state(1, np.uint64)[0]) for s in np.random.SeedSequence(seed).spawn(4)]
    if pseudo_data is None and spec is not None:
        pseudo_data = sample_copula(spec, n_mc, seeds[3])
    report = DiagnosticsReport(mass=check_mass(model, n_mc, seeds[0], d, n_sigma, mass_tol))
    if pseudo_data is not None:
        report.moments = check_moments(model, pseudo_data, orders, n_mc, seeds[1], n_sigma)
    if d >= 2:
        report.spearman = check_spearman(model, n_mc, seeds[2], d)
    if spec is not None:
        report.qc = q_c(model, spec, n_mc, seeds[3] + 1)
        report.baseline_nats = kl_to_flat(spec)
        report.oracle = spec.to_dict()
    return report

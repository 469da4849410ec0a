"""Moment estimators for site occupancy at the survival horizon.

Everything here works on per-tree occupancy reductions from the engine and
converts conditioned averages into unconditioned moments by multiplying with
the exact survival probability: the occupancy counts and the population all
vanish on extinction, so E[f(M, Z)] = P(survive) E[f(M, Z) | survive] for any
f with f(0, 0) = 0. Standard errors are delta-method for plain means and
bootstrap over trees for the derived quantities whose plug-in inputs are
estimated from the same batch.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .engine import OccupancyBatch, merge_batches, spine_occupancy
from .lattice import LatticeConfig
from .offspring import OffspringLaw, survival_exact
from .reference import CovMatrix, sqrt_factor

__all__ = [
    "KappaEstimate",
    "CovarianceEstimate",
    "FourthMomentCheck",
    "collect_occupancy",
    "estimate_mu_kappa",
    "estimate_A",
    "fourth_moment_ratio",
    "sigma_tilde",
]

DEFAULT_BATCH = 25_000
DEFAULT_BOOT = 200


def collect_occupancy(
    law: OffspringLaw,
    lattice: LatticeConfig,
    n: int,
    trials: int,
    rng: np.random.Generator,
    r: int,
    batch_size: int = DEFAULT_BATCH,
) -> OccupancyBatch:
    """Conditioned occupancy reductions for ``trials`` trees, run in batches.

    Batching caps the peak particle count; the per-tree outputs are
    concatenated so downstream estimators see one flat sample.
    """
    parts: list[OccupancyBatch] = []
    done = 0
    while done < trials:
        take = min(batch_size, trials - done)
        parts.append(spine_occupancy(law, lattice, n, take, rng, r=r))
        done += take
    return merge_batches(parts)


@dataclass(frozen=True)
class KappaEstimate:
    """Estimated limiting mean occupancy-count spectrum.

    ``kappa[j - 1]`` estimates the unconditioned mean number of sites
    holding exactly j particles at horizon n, for j = 1..r. The weighted
    total sums j * kappa_j plus the overflow mass and estimates the
    unconditioned mean population, whose exact value is 1 at criticality.
    """

    law: str
    d: int
    n: int
    r: int
    trials: int
    survival: float
    kappa: np.ndarray
    se: np.ndarray
    weighted_total: float
    weighted_total_se: float
    overflow_share: float

    def value_at(self, j: int) -> float:
        return float(self.kappa[j - 1])

    def se_at(self, j: int) -> float:
        return float(self.se[j - 1])

    def to_dict(self) -> dict:
        return {
            "law": self.law,
            "d": self.d,
            "n": self.n,
            "r": self.r,
            "trials": self.trials,
            "survival": self.survival,
            "kappa": [float(v) for v in self.kappa],
            "se": [float(v) for v in self.se],
            "weighted_total": self.weighted_total,
            "weighted_total_se": self.weighted_total_se,
            "overflow_share": self.overflow_share,
        }


def _need_sample(law, lattice, n, trials, rng, r, sample, batch_size):
    if sample is not None:
        return sample
    if trials is None or rng is None:
        raise ValueError("either a precomputed sample or trials and rng are required")
    return collect_occupancy(law, lattice, n, trials, rng, r, batch_size=batch_size)


def estimate_mu_kappa(
    law: OffspringLaw,
    lattice: LatticeConfig,
    n: int,
    trials: int | None = None,
    rng: np.random.Generator | None = None,
    r: int = 3,
    sample: OccupancyBatch | None = None,
    batch_size: int = DEFAULT_BATCH,
) -> KappaEstimate:
    """Estimate mu_n(j) = E[sites with multiplicity j] for j = 1..r.

    Conditioned tree means are scaled by the exact survival probability;
    the SE is the scaled SE of the conditioned mean (the survival factor is
    exact, so it contributes no noise).
    """
    sample = _need_sample(law, lattice, n, trials, rng, r, sample, batch_size)
    t = len(sample.z_final)
    s_n = survival_exact(law, n)
    m = sample.m_counts[:, 1 : r + 1].astype(np.float64)
    kappa = s_n * m.mean(axis=0)
    se = s_n * m.std(axis=0, ddof=1) / np.sqrt(t)
    # per-tree particle total accounted for by multiplicities 1..r, plus
    # the -overflow remainder, recovers z exactly; weighting by j gives the
    # population estimator whose unconditioned mean is exactly 1
    weights = np.arange(1, r + 1, dtype=np.float64)
    w = m @ weights
    total_mass = sample.z_final.astype(np.float64)
    weighted = s_n * total_mass.mean()
    weighted_se = s_n * total_mass.std(ddof=1) / np.sqrt(t)
    overflow = float((total_mass - w).sum() / total_mass.sum())
    return KappaEstimate(
        law=law.name,
        d=lattice.d,
        n=n,
        r=r,
        trials=t,
        survival=s_n,
        kappa=kappa,
        se=se,
        weighted_total=weighted,
        weighted_total_se=weighted_se,
        overflow_share=overflow,
    )


@dataclass(frozen=True)
class CovarianceEstimate:
    """Estimated limiting covariance of the centered occupancy counts.

    ``matrix[j - 1, k - 1]`` estimates lim E[U_j U_k] with
    U_j = M_n(j) - mu_n(j) Z_n; the plug-in mu comes from the same batch and
    the bootstrap over trees propagates that dependence into the SEs.
    """

    law: str
    d: int
    n: int
    r: int
    trials: int
    survival: float
    mu: np.ndarray
    matrix: np.ndarray
    se: np.ndarray

    def value_at(self, j: int, k: int) -> float:
        return float(self.matrix[j - 1, k - 1])

    def se_at(self, j: int, k: int) -> float:
        return float(self.se[j - 1, k - 1])

    def to_dict(self) -> dict:
        return {
            "law": self.law,
            "d": self.d,
            "n": self.n,
            "r": self.r,
            "trials": self.trials,
            "survival": self.survival,
            "mu": [float(v) for v in self.mu],
            "matrix": [[float(v) for v in row] for row in self.matrix],
            "se": [[float(v) for v in row] for row in self.se],
        }


def _a_matrix(
    m: np.ndarray, z: np.ndarray, s_n: float, mu: np.ndarray | None = None
) -> tuple[np.ndarray, np.ndarray]:
    if mu is None:
        mu = s_n * m.mean(axis=0)
    u = m - np.outer(z, mu)
    return mu, s_n * (u.T @ u) / len(z)


def estimate_A(
    law: OffspringLaw,
    lattice: LatticeConfig,
    n: int,
    trials: int | None = None,
    rng: np.random.Generator | None = None,
    r: int = 2,
    sample: OccupancyBatch | None = None,
    n_boot: int = DEFAULT_BOOT,
    boot_rng: np.random.Generator | None = None,
    batch_size: int = DEFAULT_BATCH,
    mu: np.ndarray | None = None,
) -> CovarianceEstimate:
    """Estimate A_n(j, k) = E[U_j U_k] for j, k = 1..r.

    U vanishes on extinction, so the unconditioned mean is the conditioned
    mean times the exact survival probability. The result is a positive
    combination of rank-one outer products, hence PSD by construction.

    By default the centering coefficients are the batch's own occupancy
    means, and the bootstrap re-fits them per replicate so their noise
    lands in the SEs. Passing ``mu`` (e.g. from a larger dedicated run of
    the mean estimator) pins the centering instead; that noise source then
    drops out of both the estimate and its bootstrap.
    """
    sample = _need_sample(law, lattice, n, trials, rng, r, sample, batch_size)
    if n_boot > 0 and boot_rng is None:
        if rng is None:
            raise ValueError("bootstrap requires boot_rng when rng is not given")
        boot_rng = rng
    pinned = mu
    if pinned is not None:
        pinned = np.asarray(pinned, dtype=np.float64)
        if pinned.shape != (r,):
            raise ValueError(f"mu must have shape ({r},), got {pinned.shape}")
    t = len(sample.z_final)
    s_n = survival_exact(law, n)
    m = sample.m_counts[:, 1 : r + 1].astype(np.float64)
    z = sample.z_final.astype(np.float64)
    mu, a = _a_matrix(m, z, s_n, pinned)
    if n_boot > 0:
        boots = np.empty((n_boot, r, r))
        for b in range(n_boot):
            idx = boot_rng.integers(0, t, t)
            boots[b] = _a_matrix(m[idx], z[idx], s_n, pinned)[1]
        se = boots.std(axis=0, ddof=1)
    else:
        se = np.full((r, r), np.nan)
    return CovarianceEstimate(
        law=law.name,
        d=lattice.d,
        n=n,
        r=r,
        trials=t,
        survival=s_n,
        mu=mu,
        matrix=a,
        se=se,
    )


@dataclass(frozen=True)
class FourthMomentCheck:
    """Fourth-moment growth check for one centered occupancy count.

    ``value`` estimates (1/n) E[U_j^4] at the horizon; ``companion`` is the
    limit 3 sigma^2 A(j, j)^2 predicted for it, built from the same batch;
    ``ratio`` is their quotient with a bootstrap SE.
    """

    law: str
    d: int
    n: int
    j: int
    trials: int
    value: float
    value_se: float
    companion: float
    companion_se: float
    ratio: float
    ratio_se: float

    def to_dict(self) -> dict:
        return {
            "law": self.law,
            "d": self.d,
            "n": self.n,
            "j": self.j,
            "trials": self.trials,
            "value": self.value,
            "value_se": self.value_se,
            "companion": self.companion,
            "companion_se": self.companion_se,
            "ratio": self.ratio,
            "ratio_se": self.ratio_se,
        }


def _fourth_pair(
    m: np.ndarray, z: np.ndarray, s_n: float, n: int, sigma2: float
) -> tuple[float, float]:
    mu = s_n * m.mean()
    u = m - mu * z
    value = s_n * np.mean(u**4) / n
    a_jj = s_n * np.mean(u**2)
    return float(value), float(3.0 * sigma2 * a_jj**2)


def fourth_moment_ratio(
    law: OffspringLaw,
    lattice: LatticeConfig,
    n: int,
    j: int = 1,
    trials: int | None = None,
    rng: np.random.Generator | None = None,
    sample: OccupancyBatch | None = None,
    n_boot: int = DEFAULT_BOOT,
    boot_rng: np.random.Generator | None = None,
    batch_size: int = DEFAULT_BATCH,
) -> FourthMomentCheck:
    """Compare (1/n) E[U_j^4] against its predicted limit 3 sigma^2 A(j, j)^2."""
    sample = _need_sample(law, lattice, n, trials, rng, max(j, 1), sample, batch_size)
    if n_boot > 0 and boot_rng is None:
        if rng is None:
            raise ValueError("bootstrap requires boot_rng when rng is not given")
        boot_rng = rng
    t = len(sample.z_final)
    s_n = survival_exact(law, n)
    m = sample.m_counts[:, j].astype(np.float64)
    z = sample.z_final.astype(np.float64)
    value, companion = _fourth_pair(m, z, s_n, n, law.sigma2)
    if n_boot > 0:
        vals = np.empty((n_boot, 3))
        for b in range(n_boot):
            idx = boot_rng.integers(0, t, t)
            v, c = _fourth_pair(m[idx], z[idx], s_n, n, law.sigma2)
            vals[b] = (v, c, v / c)
        value_se, companion_se, ratio_se = vals.std(axis=0, ddof=1)
    else:
        value_se = companion_se = ratio_se = np.nan
    return FourthMomentCheck(
        law=law.name,
        d=lattice.d,
        n=n,
        j=j,
        trials=t,
        value=value,
        value_se=float(value_se),
        companion=companion,
        companion_se=float(companion_se),
        ratio=value / companion,
        ratio_se=float(ratio_se),
    )


def sigma_tilde(estimate: CovarianceEstimate, law: OffspringLaw) -> CovMatrix:
    """Scaled covariance (sigma^2 / 2) A for the Laplace limit of the counts."""
    scaled = (law.sigma2 / 2.0) * (estimate.matrix + estimate.matrix.T) / 2.0
    return sqrt_factor(scaled)

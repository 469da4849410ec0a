"""Reference limit laws and quantitative approximation bounds.

Samplers for the exponential, multivariate normal and multivariate symmetric
Laplace laws, geometric (and more general) random sums of centered summands,
and the closed-form error bounds the verification suites compare Monte Carlo
distances against. The symmetric Laplace law SL_r(S) is realized as sqrt(E) Z
with E a unit exponential independent of Z ~ N(0, S); its characteristic
function is u -> 1 / (1 + u' S u / 2) and its covariance matrix is S.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable

import numpy as np

__all__ = [
    "NotPSD",
    "InvalidMu",
    "CovMatrix",
    "GeometricSumSpec",
    "sqrt_factor",
    "sample_exp",
    "sample_mvn",
    "sample_sl",
    "sl_cf",
    "sample_geometric_sum",
    "renyi_bound",
    "clt_bound",
    "mvn_compare_bound",
    "default_c_r",
    "default_c_mvn",
    "coin_summand_spec",
    "two_point_summand_spec",
    "empirical_summand_spec",
]

SYMMETRY_TOL = 1e-12
EIGENVALUE_FLOOR = -1e-10
FACTOR_TOL = 1e-9
RANK_RTOL = 1e-12


class NotPSD(ValueError):
    """Raised when a matrix has an eigenvalue below the tolerance floor."""


class InvalidMu(ValueError):
    """Raised when a random-sum bound is requested for mean <= 1."""


@dataclass(frozen=True)
class CovMatrix:
    """A validated covariance matrix together with a square-root factor."""

    entries: np.ndarray
    factor: np.ndarray

    @property
    def r(self) -> int:
        return self.entries.shape[0]

    @property
    def rank(self) -> int:
        return self.factor.shape[1]


def sqrt_factor(matrix: np.ndarray) -> CovMatrix:
    """Spectral square root with tiny negative eigenvalues clipped to zero.

    Asymmetry beyond 1e-12 or an eigenvalue below -1e-10 is an error; the
    returned factor satisfies factor @ factor.T == entries to 1e-9 in
    Frobenius norm, with one column per eigenvalue above the relative noise
    floor, so float jitter on exactly singular inputs does not inflate the
    rank.
    """
    m = np.atleast_2d(np.asarray(matrix, dtype=np.float64))
    if m.shape[0] != m.shape[1]:
        raise ValueError("matrix must be square")
    if np.abs(m - m.T).max(initial=0.0) > SYMMETRY_TOL:
        raise ValueError("matrix is not symmetric within 1e-12")
    m = (m + m.T) / 2.0
    eigvals, eigvecs = np.linalg.eigh(m)
    if eigvals.min(initial=0.0) < EIGENVALUE_FLOOR:
        raise NotPSD(f"eigenvalue {eigvals.min()} below {EIGENVALUE_FLOOR}")
    pos = eigvals > eigvals.max(initial=0.0) * RANK_RTOL
    factor = eigvecs[:, pos] * np.sqrt(eigvals[pos])
    recon = factor @ factor.T
    err = np.linalg.norm(recon - m)
    if err > FACTOR_TOL:
        raise ValueError(f"factorization residual {err} exceeds {FACTOR_TOL}")
    entries = m.copy()
    entries.setflags(write=False)
    factor.setflags(write=False)
    return CovMatrix(entries=entries, factor=factor)


def sample_exp(rate: float, rng: np.random.Generator, size=None) -> np.ndarray | float:
    """Exponential draws with mean 1 / rate."""
    if rate <= 0.0:
        raise ValueError("rate must be positive")
    return rng.exponential(1.0 / rate, size)


def sample_mvn(cov: CovMatrix, rng: np.random.Generator, size: int) -> np.ndarray:
    """(size, r) centered Gaussian draws with covariance cov.entries."""
    z = rng.standard_normal((size, cov.rank))
    return z @ cov.factor.T


def sample_sl(cov: CovMatrix, rng: np.random.Generator, size: int) -> np.ndarray:
    """Multivariate symmetric Laplace draws: sqrt(E) * Z elementwise per row."""
    e = rng.exponential(1.0, size)
    return np.sqrt(e)[:, None] * sample_mvn(cov, rng, size)


def sl_cf(cov: CovMatrix, u: np.ndarray) -> np.ndarray | float:
    """Characteristic function of SL_r(cov) at rows of u."""
    u = np.asarray(u, dtype=np.float64)
    single = u.ndim == 1
    uu = np.atleast_2d(u)
    quad = np.einsum("ij,jk,ik->i", uu, cov.entries, uu)
    out = 1.0 / (1.0 + quad / 2.0)
    return float(out[0]) if single else out


@dataclass(frozen=True)
class GeometricSumSpec:
    """A centered summand plus a stopping-time law for scaled random sums.

    ``sampler(rng, size)`` returns (size, r) centered draws. ``cov`` and
    ``abs_third_l1`` are the exact summand covariance and E[||X||_1^3],
    carried for the closed-form bound. ``stopping`` is ("geometric", p) for
    the law on {1, 2, ...} with mean 1/p, or ("deterministic", k).
    """

    name: str
    r: int
    sampler: Callable[[np.random.Generator, int], np.ndarray]
    cov: np.ndarray
    abs_third_l1: float
    stopping: tuple[str, float]

    @property
    def mu(self) -> float:
        kind, par = self.stopping
        if kind == "geometric":
            return 1.0 / par
        if kind == "deterministic":
            return float(par)
        raise ValueError(f"unknown stopping kind {kind!r}")

    def sample_counts(self, rng: np.random.Generator, size: int) -> np.ndarray:
        kind, par = self.stopping
        if kind == "geometric":
            return rng.geometric(par, size)
        if kind == "deterministic":
            return np.full(size, int(par), dtype=np.int64)
        raise ValueError(f"unknown stopping kind {kind!r}")

    def validate(self, rng: np.random.Generator, draws: int = 100_000) -> None:
        """Check the summand is centered, within 4 standard errors per component."""
        x = self.sampler(rng, draws)
        if x.shape != (draws, self.r):
            raise ValueError(f"sampler returned shape {x.shape}, wanted ({draws}, {self.r})")
        mean = x.mean(axis=0)
        se = x.std(axis=0, ddof=1) / np.sqrt(draws)
        bad = np.abs(mean) > 4.0 * np.maximum(se, 1e-300)
        if bad.any():
            raise ValueError(f"summand mean {mean} is not zero within 4 SE {se}")


def sample_geometric_sum(
    spec: GeometricSumSpec, rng: np.random.Generator, size: int
) -> np.ndarray:
    """(size, r) draws of mu^(-1/2) * sum of N summands, N from the stopping law."""
    counts = spec.sample_counts(rng, size)
    total = int(counts.sum())
    flat = spec.sampler(rng, total)
    offsets = np.concatenate([[0], np.cumsum(counts)[:-1]])
    sums = np.add.reduceat(flat, offsets, axis=0)
    # reduceat misbehaves only for zero-length segments; counts are >= 1
    return sums / np.sqrt(spec.mu)


def default_c_r(r: int) -> float:
    """Lipschitz-class constant for sums tested against L1-Lipschitz functions.

    Tracks the norm-equivalence chain: a function that is 1-Lipschitz for the
    L1 norm is sqrt(r)-Lipschitz for the Euclidean norm, and the Euclidean
    third moment is at most the L1 third moment, so the Euclidean-norm bound
    2 (2 r E|X|^3 / sqrt(n))^(1/3) becomes 2 sqrt(r) (2 r)^(1/3) times
    (E||X||_1^3 / sqrt(n))^(1/3).
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    return 2.0 * np.sqrt(r) * (2.0 * r) ** (1.0 / 3.0)


def default_c_mvn(r: int) -> float:
    """Constant for the Gaussian covariance-comparison bound.

    From the usual smoothing schema (replace the test function by a Gaussian
    mollification at scale eps, bound the second derivative of the Stein
    solution by sqrt(2/pi)/eps times the Lipschitz constant, optimize eps),
    carrying the sqrt(r) L1-to-Euclidean Lipschitz conversion.
    """
    if r < 1:
        raise ValueError("r must be >= 1")
    return 2.0 * (2.0 / np.pi) ** 0.25 * r**0.75


def renyi_bound(
    mu: float,
    abs_third_l1: float,
    cov_diag: np.ndarray | float,
    dw_stopping: float = 0.0,
    c_r: float | None = None,
    r: int | None = None,
) -> float:
    """Wasserstein error bound for scaled random sums against the Laplace law.

    mu^(-1/2) (C_r mu^(1/3) E[||X||_1^3]^(1/3)
               + sum_i sqrt(cov_ii) * d_W(stopping, geometric(1/mu)) + 3.5),
    valid for stopping-time mean mu > 1 (InvalidMu otherwise).
    """
    if mu <= 1.0:
        raise InvalidMu("stopping-time mean must exceed 1")
    diag = np.atleast_1d(np.asarray(cov_diag, dtype=np.float64))
    if r is None:
        r = len(diag)
    if c_r is None:
        c_r = default_c_r(r)
    return (
        c_r * mu ** (1.0 / 3.0) * abs_third_l1 ** (1.0 / 3.0)
        + np.sqrt(diag).sum() * dw_stopping
        + 3.5
    ) / np.sqrt(mu)


def clt_bound(r: int, n: int, third_moment: float) -> float:
    """Wasserstein CLT bound 2 (2 r E[|X|^3] / sqrt(n))^(1/3) for unit test scale."""
    if r < 1 or n < 1:
        raise ValueError("r and n must be >= 1")
    if third_moment <= 0.0:
        raise ValueError("third moment must be positive")
    return 2.0 * (2.0 * r * third_moment / np.sqrt(n)) ** (1.0 / 3.0)


def mvn_compare_bound(
    cov_a: np.ndarray, cov_b: np.ndarray, c: float | None = None
) -> float:
    """Gaussian-comparison bound C * sqrt(sum_uv |A_uv - B_uv|)."""
    a = np.atleast_2d(np.asarray(cov_a, dtype=np.float64))
    b = np.atleast_2d(np.asarray(cov_b, dtype=np.float64))
    if a.shape != b.shape:
        raise ValueError("covariance shapes differ")
    if c is None:
        c = default_c_mvn(a.shape[0])
    return c * np.sqrt(np.abs(a - b).sum())


def coin_summand_spec(p_stop: float) -> GeometricSumSpec:
    """Fair +-1 coin summand with a geometric stopping time of mean 1/p_stop."""

    def sampler(rng: np.random.Generator, size: int) -> np.ndarray:
        return (rng.integers(0, 2, size=(size, 1)) * 2 - 1).astype(np.float64)

    return GeometricSumSpec(
        name="coin",
        r=1,
        sampler=sampler,
        cov=np.array([[1.0]]),
        abs_third_l1=1.0,
        stopping=("geometric", p_stop),
    )


def two_point_summand_spec(p_stop: float, v=(1.0, 2.0)) -> GeometricSumSpec:
    """Centered two-point vector summand +-v; its covariance v v' is singular."""
    v = np.asarray(v, dtype=np.float64)

    def sampler(rng: np.random.Generator, size: int) -> np.ndarray:
        signs = rng.integers(0, 2, size=size) * 2 - 1
        return signs[:, None] * v[None, :]

    return GeometricSumSpec(
        name="two-point",
        r=len(v),
        sampler=sampler,
        cov=np.outer(v, v),
        abs_third_l1=float(np.abs(v).sum() ** 3),
        stopping=("geometric", p_stop),
    )


def empirical_summand_spec(
    name: str, pool: np.ndarray, stopping: tuple[str, float]
) -> GeometricSumSpec:
    """Summand resampled uniformly from a pool of rows, centered exactly.

    The resampling law is the empirical law of the centered pool, so its
    covariance and L1 third moment are plain averages over the pool.
    """
    pool = np.atleast_2d(np.asarray(pool, dtype=np.float64))
    centered = pool - pool.mean(axis=0)

    def sampler(rng: np.random.Generator, size: int) -> np.ndarray:
        idx = rng.integers(0, len(centered), size=size)
        return centered[idx]

    cov = centered.T @ centered / len(centered)
    third = float(np.mean(np.abs(centered).sum(axis=1) ** 3))
    return GeometricSumSpec(
        name=name,
        r=centered.shape[1],
        sampler=sampler,
        cov=cov,
        abs_third_l1=third,
        stopping=stopping,
    )

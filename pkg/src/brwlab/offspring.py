"""Critical offspring laws with exact finite-support moment bookkeeping.

A law here is a probability mass function on non-negative integers with mean
exactly one (the critical case) and positive variance. Infinite-support
families enter after truncation to a finite support and exact renormalization,
so every stored moment is a plain finite sum over the stored support.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

__all__ = [
    "LawError",
    "NotNormalized",
    "NotCritical",
    "DegenerateVariance",
    "OffspringLaw",
    "SizeBiasedLaw",
    "make_law",
    "size_biased",
    "sample",
    "pgf_iterate",
    "survival_exact",
    "binary_law",
    "geometric_law",
    "poisson_law",
    "law_by_name",
    "BUILTIN_LAWS",
]

NORMALIZATION_TOL = 1e-12
CRITICALITY_TOL = 1e-12
DEFAULT_TAIL_MASS = 1e-15


class LawError(ValueError):
    """Base class for offspring-law validation failures."""


class NotNormalized(LawError):
    pass


class NotCritical(LawError):
    pass


class DegenerateVariance(LawError):
    pass


def _frozen_array(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a)
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class OffspringLaw:
    """Finite-support critical offspring distribution.

    Instances are built through :func:`make_law`; fields hold the validated
    support, probabilities, and exact finite-sum moments.
    """

    name: str
    values: np.ndarray
    probs: np.ndarray
    mean: float
    sigma2: float
    moment3: float
    moment_high: float | None = None
    high_order: int | None = None
    cum: np.ndarray = field(repr=False, default=None)

    @property
    def pmf(self) -> dict[int, float]:
        return {int(v): float(p) for v, p in zip(self.values, self.probs)}

    @property
    def max_value(self) -> int:
        return int(self.values[-1])

    def prob_of(self, k: int) -> float:
        idx = np.searchsorted(self.values, k)
        if idx < len(self.values) and self.values[idx] == k:
            return float(self.probs[idx])
        return 0.0

    def pgf(self, s: float) -> float:
        s = min(max(float(s), 0.0), 1.0)
        return float(np.dot(self.probs, np.power(s, self.values)))

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray | int:
        u = rng.random(size)
        idx = np.searchsorted(self.cum, u, side="right")
        picked = self.values[idx]
        if size is None:
            return int(picked)
        return picked


@dataclass(frozen=True)
class SizeBiasedLaw:
    """Size-biased companion of a critical law: pmf k -> k * p(k) / mean."""

    base: OffspringLaw
    values: np.ndarray
    probs: np.ndarray
    cum: np.ndarray = field(repr=False, default=None)

    @property
    def pmf(self) -> dict[int, float]:
        return {int(v): float(p) for v, p in zip(self.values, self.probs)}

    def sample(self, rng: np.random.Generator, size=None) -> np.ndarray | int:
        u = rng.random(size)
        idx = np.searchsorted(self.cum, u, side="right")
        picked = self.values[idx]
        if size is None:
            return int(picked)
        return picked


def make_law(
    pmf: dict[int, float],
    name: str = "custom",
    high_order: int | None = 4,
) -> OffspringLaw:
    """Validate a pmf and build an immutable critical offspring law.

    Raises NotNormalized when probabilities are negative or do not sum to one
    within 1e-12, NotCritical when the mean is not one within 1e-12, and
    DegenerateVariance when the variance vanishes.
    """
    if not pmf:
        raise NotNormalized("empty pmf")
    items = sorted(pmf.items())
    values = np.array([k for k, _ in items], dtype=np.int64)
    probs = np.array([p for _, p in items], dtype=np.float64)
    if np.any(values < 0):
        raise NotNormalized("support must consist of non-negative integers")
    if np.any(probs < 0):
        raise NotNormalized("negative probabilities")
    total = float(probs.sum())
    if abs(total - 1.0) > NORMALIZATION_TOL:
        raise NotNormalized(f"probabilities sum to {total!r}, not 1")
    keep = probs > 0.0
    values = values[keep]
    probs = probs[keep] / probs[keep].sum()

    fvals = values.astype(np.float64)
    mean = float(np.dot(probs, fvals))
    if abs(mean - 1.0) > CRITICALITY_TOL:
        raise NotCritical(f"mean is {mean!r}, not 1")
    second = float(np.dot(probs, fvals**2))
    sigma2 = second - mean * mean
    if sigma2 <= 0.0:
        raise DegenerateVariance("offspring variance must be positive")
    moment3 = float(np.dot(probs, fvals**3))
    moment_high = None
    if high_order is not None:
        if high_order < 4 or high_order % 2 != 0:
            raise ValueError("high_order must be an even integer >= 4")
        moment_high = float(np.dot(probs, fvals**high_order))

    cum = np.cumsum(probs)
    cum[-1] = 1.0
    return OffspringLaw(
        name=name,
        values=_frozen_array(values),
        probs=_frozen_array(probs),
        mean=mean,
        sigma2=sigma2,
        moment3=moment3,
        moment_high=moment_high,
        high_order=high_order if moment_high is not None else None,
        cum=_frozen_array(cum),
    )


def size_biased(law: OffspringLaw) -> SizeBiasedLaw:
    """Return the size-biased law k * pmf(k) / mean on {1, 2, ...}."""
    weights = law.values.astype(np.float64) * law.probs
    keep = weights > 0.0
    values = law.values[keep]
    probs = weights[keep] / weights[keep].sum()
    cum = np.cumsum(probs)
    cum[-1] = 1.0
    return SizeBiasedLaw(
        base=law,
        values=_frozen_array(values),
        probs=_frozen_array(probs),
        cum=_frozen_array(cum),
    )


def sample(law: OffspringLaw | SizeBiasedLaw, rng: np.random.Generator, size=None):
    """Draw from the law by inversion on its cumulative table."""
    return law.sample(rng, size)


def pgf_iterate(law: OffspringLaw, n: int, s: float) -> float:
    """n-fold composition of the offspring generating function at s.

    The argument is clamped to [0, 1] at every step, so iteration is stable
    for any float input; n = 0 returns the clamped s itself.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    s = min(max(float(s), 0.0), 1.0)
    for _ in range(n):
        s = law.pgf(s)
    return s


def survival_exact(law: OffspringLaw, n: int) -> float:
    """Probability that generation n is non-empty, from iterated pgfs."""
    return 1.0 - pgf_iterate(law, n, 0.0)


def binary_law() -> OffspringLaw:
    """The two-point law {0: 1/2, 2: 1/2} (sigma2 = 1)."""
    return make_law({0: 0.5, 2: 0.5}, name="binary")


def geometric_law(p: float = 0.5, tail_mass: float = DEFAULT_TAIL_MASS) -> OffspringLaw:
    """Geometric law pmf(k) = p (1-p)^k on {0, 1, ...}, truncated and renormalized.

    The cutoff is the smallest K whose discarded tail mass is below
    ``tail_mass``; p = 1/2 gives the critical case with sigma2 = 2.
    """
    if not 0.0 < p < 1.0:
        raise ValueError("p must lie in (0, 1)")
    q = 1.0 - p
    cutoff = int(np.ceil(np.log(tail_mass) / np.log(q))) - 1
    cutoff = max(cutoff, 1)
    ks = np.arange(cutoff + 1)
    probs = p * q**ks
    probs = probs / probs.sum()
    return make_law({int(k): float(pr) for k, pr in zip(ks, probs)}, name="geometric")


def poisson_law(lam: float = 1.0, tail_mass: float = DEFAULT_TAIL_MASS) -> OffspringLaw:
    """Poisson(lam) truncated to tail mass below ``tail_mass`` and renormalized."""
    if lam <= 0.0:
        raise ValueError("lam must be positive")
    probs = [np.exp(-lam)]
    while 1.0 - sum(probs) >= tail_mass:
        k = len(probs)
        probs.append(probs[-1] * lam / k)
    arr = np.array(probs)
    arr = arr / arr.sum()
    return make_law({k: float(pr) for k, pr in enumerate(arr)}, name="poisson")


BUILTIN_LAWS = {
    "binary": binary_law,
    "geometric": geometric_law,
    "poisson": poisson_law,
}


def law_by_name(name: str) -> OffspringLaw:
    try:
        return BUILTIN_LAWS[name]()
    except KeyError:
        raise LawError(f"unknown law name {name!r}; known: {sorted(BUILTIN_LAWS)}") from None

"""Lattice embedding of branching trees and occupancy-spectrum statistics.

Each parent-child edge carries an independent displacement drawn uniformly
from the 2d + 1 vectors {0, +-e_1, ..., +-e_d}, so a particle's position is
the signed sum of the steps along its ancestral line. Occupancy statistics
group the horizon generation by exact site (full coordinate tuple), count
multiplicities up to a truncation level r, and track the overflow mass so the
per-site counts always partition the population exactly.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .offspring import OffspringLaw
from .trees import ConditionedForest, _grow_parents

__all__ = [
    "MissingLabels",
    "LatticeConfig",
    "OccupancySpectrum",
    "make_lattice",
    "embed",
    "embed_final",
    "occupancy_spectrum",
    "shared_site_count",
    "spine_block_sum_gap",
    "pack_sites",
    "site_multiplicities",
]


class MissingLabels(ValueError):
    """Raised when an operation needs ancestor labels that are not attached."""


@dataclass(frozen=True)
class LatticeConfig:
    """Dimension and step table of the nearest-neighbour-or-stay walk."""

    d: int
    steps: np.ndarray  # (2d + 1, d) int16; row 0 stays put

    @property
    def n_steps(self) -> int:
        return 2 * self.d + 1


def make_lattice(d: int) -> LatticeConfig:
    if d < 1:
        raise ValueError("d must be >= 1")
    steps = np.zeros((2 * d + 1, d), dtype=np.int16)
    for i in range(d):
        steps[1 + i, i] = 1
        steps[1 + d + i, i] = -1
    steps.setflags(write=False)
    return LatticeConfig(d=d, steps=steps)


def embed(
    forest: ConditionedForest, lattice: LatticeConfig, rng: np.random.Generator
) -> list[np.ndarray]:
    """Positions of every particle, one (z[g], d) int16 array per generation."""
    positions = [np.zeros((int(forest.z[0]), lattice.d), dtype=np.int16)]
    for g in range(1, forest.horizon + 1):
        parents = forest.parents[g]
        idx = rng.integers(0, lattice.n_steps, size=len(parents))
        positions.append(positions[g - 1][parents] + lattice.steps[idx])
    return positions


def embed_final(
    forest: ConditionedForest, lattice: LatticeConfig, rng: np.random.Generator
) -> np.ndarray:
    """Horizon-generation positions only, streaming one generation at a time."""
    pos = np.zeros((int(forest.z[0]), lattice.d), dtype=np.int16)
    for g in range(1, forest.horizon + 1):
        parents = forest.parents[g]
        idx = rng.integers(0, lattice.n_steps, size=len(parents))
        pos = pos[parents] + lattice.steps[idx]
    return pos


def pack_sites(pos: np.ndarray) -> np.ndarray:
    """Pack int16 coordinate rows into int64 key columns, exactly and reversibly."""
    n, d = pos.shape
    k = -(-d // 4) * 4
    padded = np.zeros((n, k), dtype=np.int16)
    padded[:, :d] = pos
    return np.ascontiguousarray(padded).view(np.int64)


def _run_lengths(sorted_keys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Start offsets and lengths of equal-key runs in lexicographically sorted keys."""
    n = sorted_keys.shape[0]
    if n == 0:
        return np.empty(0, dtype=np.int64), np.empty(0, dtype=np.int64)
    change = np.ones(n, dtype=bool)
    change[1:] = np.any(sorted_keys[1:] != sorted_keys[:-1], axis=1)
    starts = np.flatnonzero(change)
    lengths = np.diff(np.append(starts, n))
    return starts, lengths


def site_multiplicities(pos: np.ndarray) -> np.ndarray:
    """Multiplicity of each occupied site among the given positions."""
    if len(pos) == 0:
        return np.empty(0, dtype=np.int64)
    keys = pack_sites(pos)
    order = np.lexsort(tuple(keys[:, c] for c in range(keys.shape[1] - 1, -1, -1)))
    _, lengths = _run_lengths(keys[order])
    return lengths


@dataclass(frozen=True)
class OccupancySpectrum:
    """Horizon-site multiplicity counts truncated at r, with exact overflow."""

    z_n: int
    r: int
    m: dict[int, int]
    overflow_sites: int
    overflow_mass: int

    def __post_init__(self):
        total = sum(j * c for j, c in self.m.items()) + self.overflow_mass
        if total != self.z_n:
            raise ValueError(
                f"spectrum does not partition the population: {total} != {self.z_n}"
            )

    @property
    def counts(self) -> np.ndarray:
        out = np.zeros(self.r + 1, dtype=np.int64)
        for j, c in self.m.items():
            out[j] = c
        return out


def occupancy_spectrum(positions: np.ndarray, r: int) -> OccupancySpectrum:
    """Count sites holding exactly j particles for j = 1..r, plus overflow."""
    if r < 1:
        raise ValueError("r must be >= 1")
    mult = site_multiplicities(positions)
    m = {j: int(np.count_nonzero(mult == j)) for j in range(1, r + 1)}
    over = mult > r
    return OccupancySpectrum(
        z_n=int(len(positions)),
        r=r,
        m=m,
        overflow_sites=int(np.count_nonzero(over)),
        overflow_mass=int(mult[over].sum()),
    )


def _require_labels(forest: ConditionedForest, m: int) -> np.ndarray:
    if forest.ancestor_labels is None or forest.ancestor_depth != m:
        raise MissingLabels(
            f"forest has no ancestor labels at depth {m}; call label_ancestors first"
        )
    return forest.ancestor_labels


def shared_site_count(
    forest: ConditionedForest, positions: np.ndarray, m: int
) -> int:
    """Number of horizon particles sharing a site with a different m-ancestor.

    A particle counts as soon as its site hosts at least one particle whose
    generation-m ancestor differs, so a mixed site contributes its full
    multiplicity.
    """
    labels = _require_labels(forest, m)
    if len(positions) != len(labels):
        raise ValueError("positions and labels disagree on the population size")
    if len(positions) == 0:
        return 0
    keys = pack_sites(positions)
    order = np.lexsort(tuple(keys[:, c] for c in range(keys.shape[1] - 1, -1, -1)))
    starts, lengths = _run_lengths(keys[order])
    lab = labels[order]
    lab_min = np.minimum.reduceat(lab, starts)
    lab_max = np.maximum.reduceat(lab, starts)
    mixed = lab_min != lab_max
    return int(lengths[mixed].sum())


def _per_ancestor_count_sum(keys: np.ndarray, labels: np.ndarray, j: int) -> int:
    """Sum over ancestors of the number of sites they occupy with exactly j particles."""
    cols = [keys[:, c] for c in range(keys.shape[1] - 1, -1, -1)]
    order = np.lexsort(tuple(cols) + (labels,))
    both = np.column_stack([labels[order], keys[order]])
    _, lengths = _run_lengths(both)
    return int(np.count_nonzero(lengths == j))


def spine_block_sum_gap(
    forest: ConditionedForest,
    positions: np.ndarray,
    m: int,
    j: int,
    spine_term: str = "in_tree",
    law: OffspringLaw | None = None,
    lattice: LatticeConfig | None = None,
    rng: np.random.Generator | None = None,
) -> int:
    """Gap between the whole-tree spectrum and the ancestor-blocked sum at level j.

    The blocked sum adds, over generation-m ancestors, the number of sites
    carrying exactly j of that ancestor's descendants. With the default
    ``spine_term="in_tree"`` the spine ancestor contributes its own in-tree
    count; ``spine_term="independent"`` replaces that single term by the
    level-j count of a fresh unconditioned tree of depth horizon - m, which
    needs ``law``, ``lattice`` and ``rng``.
    """
    if j < 1:
        raise ValueError("j must be >= 1")
    labels = _require_labels(forest, m)
    if len(positions) != len(labels):
        raise ValueError("positions and labels disagree on the population size")
    total_j = int(np.count_nonzero(site_multiplicities(positions) == j))
    keys = pack_sites(positions)
    blocked = _per_ancestor_count_sum(keys, labels, j)

    if spine_term == "independent":
        if law is None or lattice is None or rng is None:
            raise ValueError("independent spine term needs law, lattice and rng")
        spine_label = int(forest.spine[m])
        on_spine = labels == spine_label
        in_tree = _per_ancestor_count_sum(keys[on_spine], labels[on_spine], j)
        blocked += _independent_block_count(law, lattice, forest.horizon - m, j, rng)
        blocked -= in_tree
    elif spine_term != "in_tree":
        raise ValueError("spine_term must be 'in_tree' or 'independent'")

    return abs(total_j - blocked)


def _independent_block_count(
    law: OffspringLaw, lattice: LatticeConfig, depth: int, j: int, rng: np.random.Generator
) -> int:
    """Level-j site count at depth ``depth`` of one unconditioned embedded tree."""
    parents = _grow_parents(law, depth, rng)
    pos = np.zeros((1, lattice.d), dtype=np.int16)
    for g in range(1, depth + 1):
        par = parents[g]
        if len(par) == 0:
            return 0
        idx = rng.integers(0, lattice.n_steps, size=len(par))
        pos = pos[par] + lattice.steps[idx]
    return int(np.count_nonzero(site_multiplicities(pos) == j))

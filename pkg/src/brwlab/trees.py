"""Critical Galton-Watson trees conditioned to survive a fixed horizon.

Two samplers produce the conditioned law. The rejection sampler grows plain
trees and keeps those with a non-empty final generation; it is the ground
truth. The spine sampler builds the tree generation by generation around the
ancestral line of the leftmost surviving particle: at each step the spine
parent draws a size-biased child count with a uniform spine position, the
whole block is resampled until every sibling subtree to the left of the spine
is extinct by the horizon, and siblings to the right grow unconditioned.

Trees are stored as flat per-generation parent-index arrays rather than
pointer structures.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .offspring import OffspringLaw, size_biased, survival_exact

__all__ = [
    "RetryBudgetExceeded",
    "ConditionedForest",
    "simulate_generation_sizes",
    "sample_conditioned_rejection",
    "sample_conditioned_spine",
    "label_ancestors",
    "validate_forest",
    "DEFAULT_BLOCK_RETRY_BUDGET",
    "DEFAULT_TREE_RETRY_BUDGET",
]

DEFAULT_BLOCK_RETRY_BUDGET = 10**6
DEFAULT_TREE_RETRY_BUDGET = 10**6


class RetryBudgetExceeded(RuntimeError):
    """Raised when a rejection loop exhausts its configured retry budget."""


@dataclass
class ConditionedForest:
    """A tree surviving to ``horizon`` with its spine marked.

    parents[g][i] is the index of particle i's parent within generation g-1
    (parents[0] is [-1]). spine[g] indexes the spine particle of generation g,
    and z[g] counts the particles of generation g. ``attempts`` records how
    many rejection rounds the sampler used in total.
    """

    horizon: int
    parents: list[np.ndarray]
    spine: np.ndarray
    z: np.ndarray
    attempts: int = 1
    keep_left: bool = True
    ancestor_depth: int | None = None
    ancestor_labels: np.ndarray | None = field(default=None, repr=False)


def simulate_generation_sizes(
    law: OffspringLaw, n: int, rng: np.random.Generator
) -> np.ndarray:
    """Population sizes Z_0..Z_n of one unconditioned tree, exiting early at death."""
    z = np.zeros(n + 1, dtype=np.int64)
    z[0] = 1
    current = 1
    for g in range(1, n + 1):
        current = int(law.sample(rng, current).sum())
        z[g] = current
        if current == 0:
            break
    return z


def _grow_parents(
    law: OffspringLaw, depth: int, rng: np.random.Generator
) -> list[np.ndarray]:
    """Per-generation parent arrays of one unconditioned tree of given depth."""
    parents = [np.array([-1], dtype=np.int64)]
    width = 1
    for _ in range(depth):
        if width == 0:
            parents.append(np.empty(0, dtype=np.int64))
            continue
        counts = law.sample(rng, width)
        parents.append(np.repeat(np.arange(width, dtype=np.int64), counts))
        width = len(parents[-1])
    return parents


def _extinct_by(law: OffspringLaw, depth: int, rng: np.random.Generator) -> bool:
    """Whether one unconditioned tree has an empty generation ``depth``."""
    width = 1
    for _ in range(depth):
        width = int(law.sample(rng, width).sum())
        if width == 0:
            return True
    return width == 0


def sample_conditioned_rejection(
    law: OffspringLaw,
    n: int,
    rng: np.random.Generator,
    max_attempts: int = DEFAULT_TREE_RETRY_BUDGET,
) -> ConditionedForest:
    """Sample a tree conditioned on Z_n >= 1 by whole-tree rejection.

    Generations are kept in planar (left-to-right) order, so the spine is
    recovered by walking up from the first particle of generation n.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    for attempt in range(1, max_attempts + 1):
        parents = _grow_parents(law, n, rng)
        if len(parents[n]) > 0:
            spine = np.zeros(n + 1, dtype=np.int64)
            for g in range(n, 0, -1):
                spine[g - 1] = parents[g][spine[g]]
            z = np.array([len(p) for p in parents], dtype=np.int64)
            return ConditionedForest(
                horizon=n, parents=parents, spine=spine, z=z, attempts=attempt
            )
    raise RetryBudgetExceeded(
        f"no surviving tree in {max_attempts} attempts"
        f" (survival_exact = {survival_exact(law, n):.3g})"
    )


class _ForestBuilder:
    """Accumulates particle runs per generation with contiguous global indexing."""

    def __init__(self, horizon: int):
        self.horizon = horizon
        self.runs: list[list[np.ndarray]] = [[] for _ in range(horizon + 1)]
        self.sizes = np.zeros(horizon + 1, dtype=np.int64)

    def append_single(self, gen: int, parent_global: int) -> int:
        idx = int(self.sizes[gen])
        self.runs[gen].append(np.array([parent_global], dtype=np.int64))
        self.sizes[gen] += 1
        return idx

    def append_subtree(self, root_gen: int, root_global: int, parents: list[np.ndarray]) -> None:
        # parents[0] is the subtree root already placed at root_global; local
        # parent indices shift by the offset at which each generation landed.
        offsets = {0: root_global}
        for g_local in range(1, len(parents)):
            run = parents[g_local]
            if len(run) == 0:
                break
            gen = root_gen + g_local
            offsets[g_local] = int(self.sizes[gen])
            self.runs[gen].append(run + offsets[g_local - 1])
            self.sizes[gen] += len(run)

    def finish(self) -> list[np.ndarray]:
        out = []
        for gen_runs in self.runs:
            if gen_runs:
                out.append(np.concatenate(gen_runs))
            else:
                out.append(np.empty(0, dtype=np.int64))
        return out


def sample_conditioned_spine(
    law: OffspringLaw,
    n: int,
    rng: np.random.Generator,
    keep_left: bool = False,
    block_retry_budget: int = DEFAULT_BLOCK_RETRY_BUDGET,
) -> ConditionedForest:
    """Sample the conditioned tree blockwise along its spine.

    For block j (spine parent at generation j-1) the child count is drawn from
    the size-biased law, the spine child position uniformly among the children,
    and the block is redrawn until all left-sibling subtrees are extinct by
    depth n - j. Right-sibling subtrees grow unconditioned. With
    ``keep_left=False`` the accepted left subtrees are dropped, so z[g] for
    g < n omits particles with no descendants at the horizon; z[n] is
    unaffected.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    sb = size_biased(law)
    builder = _ForestBuilder(n)
    spine = np.zeros(n + 1, dtype=np.int64)
    builder.append_single(0, -1)
    total_attempts = 0

    for j in range(1, n + 1):
        depth = n - j
        sp_parent = int(spine[j - 1])
        for attempt in range(1, block_retry_budget + 1):
            x = int(sb.sample(rng))
            i = int(rng.integers(1, x + 1))
            # A depth-0 subtree is its own root, so left siblings of the last
            # block can never be extinct by the horizon: only i = 1 accepts.
            if keep_left:
                lefts = [_grow_parents(law, depth, rng) for _ in range(i - 1)]
                ok = all(len(t[depth]) == 0 for t in lefts)
            else:
                lefts = None
                ok = all(_extinct_by(law, depth, rng) for _ in range(i - 1))
            if ok:
                break
        else:
            raise RetryBudgetExceeded(
                f"block {j} exceeded retry budget {block_retry_budget}"
            )
        total_attempts += attempt

        if keep_left and lefts:
            for t in lefts:
                root_global = builder.append_single(j, sp_parent)
                builder.append_subtree(j, root_global, t)
        spine[j] = builder.append_single(j, sp_parent)
        for _ in range(x - i):
            t = _grow_parents(law, depth, rng)
            root_global = builder.append_single(j, sp_parent)
            builder.append_subtree(j, root_global, t)

    parents = builder.finish()
    z = np.array([len(p) for p in parents], dtype=np.int64)
    return ConditionedForest(
        horizon=n,
        parents=parents,
        spine=spine,
        z=z,
        attempts=total_attempts if n > 0 else 1,
        keep_left=keep_left,
    )


def label_ancestors(forest: ConditionedForest, m: int) -> ConditionedForest:
    """Attach to each horizon particle the index of its generation-m ancestor."""
    if not 0 <= m <= forest.horizon:
        raise ValueError("m must lie in [0, horizon]")
    labels = np.arange(forest.z[m], dtype=np.int64)
    for g in range(m + 1, forest.horizon + 1):
        labels = labels[forest.parents[g]]
    forest.ancestor_depth = m
    forest.ancestor_labels = labels
    return forest


def validate_forest(forest: ConditionedForest) -> None:
    """Raise AssertionError unless the structural invariants hold."""
    n = forest.horizon
    assert len(forest.parents) == n + 1
    assert len(forest.z) == n + 1
    assert forest.z[0] == 1 and forest.parents[0][0] == -1
    for g in range(n + 1):
        assert forest.z[g] == len(forest.parents[g])
        assert forest.z[g] >= 1, "conditioned generations must be non-empty"
        if g > 0:
            p = forest.parents[g]
            assert p.min() >= 0 and p.max() < forest.z[g - 1]
    assert forest.spine[0] == 0
    for g in range(1, n + 1):
        assert forest.parents[g][forest.spine[g]] == forest.spine[g - 1]

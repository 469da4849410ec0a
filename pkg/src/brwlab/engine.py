"""Batched Monte Carlo engine for tree populations and occupancy statistics.

Everything here vectorizes across a whole batch of independent trees at once:
population sizes advance through an exact multinomial step (a chain of
conditional binomials over the offspring support), and embedded particles
live in flat arrays keyed by a tree-id column. The spine sampler accepts each
sibling block by drawing the left-subtree extinction indicator from its exact
Bernoulli law (probability q_D^(i-1) with q_D from the iterated pgf), which
is equivalent in law to simulating the left subtrees and discarding them, as
the per-tree reference sampler does.

Functions draw from a caller-supplied generator in a fixed documented order,
so one (generator, batch size) pair always yields the same numbers.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .lattice import LatticeConfig, pack_sites
from .offspring import OffspringLaw, pgf_iterate, size_biased
from .trees import DEFAULT_BLOCK_RETRY_BUDGET, DEFAULT_TREE_RETRY_BUDGET, RetryBudgetExceeded

__all__ = [
    "OccupancyBatch",
    "merge_batches",
    "gw_population_step",
    "unconditioned_z",
    "spine_z",
    "spine_occupancy",
    "unconditioned_occupancy",
    "rejection_z",
    "rejection_occupancy",
]


@dataclass
class OccupancyBatch:
    """Per-tree horizon statistics for one batch.

    m_counts[:, j] is the number of sites holding exactly j particles of the
    tree (column 0 is unused). ``shared`` and ``gap`` are filled only when an
    ancestor generation was tracked.
    """

    z_final: np.ndarray
    m_counts: np.ndarray
    overflow_sites: np.ndarray
    overflow_mass: np.ndarray
    attempts: int = 0
    shared: np.ndarray | None = None
    gap: np.ndarray | None = None
    ancestors_at_m: np.ndarray | None = None


def merge_batches(parts: list[OccupancyBatch]) -> OccupancyBatch:
    """Concatenate per-tree fields of several batches, preserving order."""
    if not parts:
        raise ValueError("nothing to merge")

    def cat(name: str) -> np.ndarray | None:
        fields = [getattr(p, name) for p in parts]
        if any(f is None for f in fields):
            return None
        return np.concatenate(fields)

    return OccupancyBatch(
        z_final=cat("z_final"),
        m_counts=cat("m_counts"),
        overflow_sites=cat("overflow_sites"),
        overflow_mass=cat("overflow_mass"),
        attempts=sum(p.attempts for p in parts),
        shared=cat("shared"),
        gap=cat("gap"),
        ancestors_at_m=cat("ancestors_at_m"),
    )


class _StepTables:
    """Per-law tables for the conditional-binomial multinomial chain."""

    def __init__(self, law: OffspringLaw):
        order = np.argsort(-law.probs, kind="stable")
        self.values = law.values[order].astype(np.int64)
        probs = law.probs[order]
        tails = np.cumsum(probs[::-1])[::-1]
        with np.errstate(divide="ignore", invalid="ignore"):
            self.cond_p = np.minimum(probs / tails, 1.0)
        self.cond_p[-1] = 1.0


def gw_population_step(
    z: np.ndarray, tables: _StepTables, rng: np.random.Generator
) -> np.ndarray:
    """Advance population counts one generation, exactly, per batch row."""
    rem = np.asarray(z, dtype=np.int64).copy()
    out = np.zeros_like(rem)
    last = len(tables.values) - 1
    for k in range(last + 1):
        if k == last:
            draws = rem
        else:
            draws = rng.binomial(rem, tables.cond_p[k])
        if tables.values[k] != 0:
            out += tables.values[k] * draws
        rem = rem - draws
        if k < last and not rem.any():
            break
    return out


def unconditioned_z(
    law: OffspringLaw, n: int, trials: int, rng: np.random.Generator
) -> np.ndarray:
    """Final population sizes of ``trials`` plain trees grown to depth n."""
    tables = _StepTables(law)
    z = np.ones(trials, dtype=np.int64)
    alive = np.arange(trials)
    for _ in range(n):
        za = gw_population_step(z[alive], tables, rng)
        z[alive] = za
        alive = alive[za > 0]
        if alive.size == 0:
            break
    return z


def _extinction_probs(law: OffspringLaw, n: int) -> np.ndarray:
    """q[D] = P(Z_D = 0) for D = 0..n-1, by iterating the pgf from zero."""
    q = np.empty(max(n, 1), dtype=np.float64)
    q[0] = 0.0
    for d in range(1, n):
        q[d] = law.pgf(q[d - 1])
    return q


def _accept_blocks(
    sb_values: np.ndarray,
    sb_cum: np.ndarray,
    q_depth: float,
    count: int,
    rng: np.random.Generator,
    budget: int,
) -> tuple[np.ndarray, np.ndarray]:
    """Accepted (child count, spine position) pairs for ``count`` parallel blocks.

    Each pending block redraws (x, i) and an acceptance coin with success
    probability q_depth^(i-1), the exact chance that its i - 1 left subtrees
    are all extinct by the block's remaining depth.
    """
    x = np.empty(count, dtype=np.int64)
    i = np.empty(count, dtype=np.int64)
    pending = np.arange(count)
    rounds = 0
    while pending.size:
        rounds += 1
        if rounds > budget:
            raise RetryBudgetExceeded(f"spine block exceeded retry budget {budget}")
        u = rng.random(pending.size)
        xs = sb_values[np.searchsorted(sb_cum, u, side="right")]
        iis = rng.integers(1, xs, endpoint=True)
        acc = rng.random(pending.size) < q_depth ** (iis - 1)
        sel = pending[acc]
        x[sel] = xs[acc]
        i[sel] = iis[acc]
        pending = pending[~acc]
    return x, i


def spine_z(
    law: OffspringLaw,
    n: int,
    trials: int,
    rng: np.random.Generator,
    block_retry_budget: int = DEFAULT_BLOCK_RETRY_BUDGET,
) -> np.ndarray:
    """Horizon population sizes of conditioned trees, spine construction.

    Draw order per generation: block acceptance loop, then the bulk
    population step. Left subtrees are never materialized, matching
    ``sample_conditioned_spine(keep_left=False)``.
    """
    sb = size_biased(law)
    tables = _StepTables(law)
    q = _extinction_probs(law, n)
    bulk = np.zeros(trials, dtype=np.int64)
    for j in range(1, n + 1):
        x, i = _accept_blocks(sb.values, sb.cum, q[n - j], trials, rng, block_retry_budget)
        bulk = gw_population_step(bulk, tables, rng) + (x - i)
    return bulk + 1


def _per_tree_site_stats(
    tree: np.ndarray,
    pos: np.ndarray,
    labels: np.ndarray | None,
    trials: int,
    r: int,
    gap_j: int | None,
) -> dict:
    """Group particles by (tree, site) and aggregate the per-tree statistics."""
    out: dict = {}
    z_final = np.bincount(tree, minlength=trials)
    out["z_final"] = z_final
    keys = pack_sites(pos)
    key_cols = tuple(keys[:, c] for c in range(keys.shape[1] - 1, -1, -1))
    order = np.lexsort(key_cols + (tree,))
    tree_s = tree[order]
    keys_s = keys[order]
    stacked = np.column_stack([tree_s, keys_s])
    change = np.ones(len(stacked), dtype=bool)
    if len(stacked) > 1:
        change[1:] = np.any(stacked[1:] != stacked[:-1], axis=1)
    starts = np.flatnonzero(change)
    lengths = np.diff(np.append(starts, len(stacked)))
    run_tree = tree_s[starts]

    m_counts = np.zeros((trials, r + 1), dtype=np.int64)
    for j in range(1, r + 1):
        m_counts[:, j] = np.bincount(run_tree[lengths == j], minlength=trials)
    over = lengths > r
    out["m_counts"] = m_counts
    out["overflow_sites"] = np.bincount(run_tree[over], minlength=trials)
    out["overflow_mass"] = np.bincount(
        run_tree[over], weights=lengths[over], minlength=trials
    ).astype(np.int64)

    if labels is not None:
        lab_s = labels[order]
        lab_min = np.minimum.reduceat(lab_s, starts)
        lab_max = np.maximum.reduceat(lab_s, starts)
        mixed = lab_min != lab_max
        out["shared"] = np.bincount(
            run_tree[mixed], weights=lengths[mixed], minlength=trials
        ).astype(np.int64)
        if gap_j is not None:
            order2 = np.lexsort(key_cols + (labels, tree))
            stacked2 = np.column_stack([tree[order2], labels[order2], keys[order2]])
            change2 = np.ones(len(stacked2), dtype=bool)
            if len(stacked2) > 1:
                change2[1:] = np.any(stacked2[1:] != stacked2[:-1], axis=1)
            starts2 = np.flatnonzero(change2)
            lengths2 = np.diff(np.append(starts2, len(stacked2)))
            run2_tree = stacked2[starts2, 0]
            run2_label = stacked2[starts2, 1]
            hits = lengths2 == gap_j
            out["blocked_sum"] = np.bincount(run2_tree[hits], minlength=trials)
            out["spine_blocked"] = np.bincount(
                run2_tree[hits & (run2_label == 0)], minlength=trials
            )
    return out


def spine_occupancy(
    law: OffspringLaw,
    lattice: LatticeConfig,
    n: int,
    trials: int,
    rng: np.random.Generator,
    r: int,
    m: int | None = None,
    gap_j: int | None = None,
    spine_term: str = "in_tree",
    block_retry_budget: int = DEFAULT_BLOCK_RETRY_BUDGET,
) -> OccupancyBatch:
    """Embedded conditioned trees, one batch, horizon occupancy per tree.

    With ``m`` set, generation-m ancestors are tracked: ``shared`` counts
    horizon particles sitting on ancestor-mixed sites and ``gap`` (for
    ``gap_j``) is the blocked-spectrum gap, with the spine ancestor entering
    in-tree or replaced by an independent unconditioned copy.
    """
    if spine_term not in ("in_tree", "independent"):
        raise ValueError("spine_term must be 'in_tree' or 'independent'")
    if m is not None and not 0 <= m <= n:
        raise ValueError("m must lie in [0, n]")
    sb = size_biased(law)
    tables = _StepTables(law)
    q = _extinction_probs(law, n)
    steps = lattice.steps
    n_steps = lattice.n_steps
    d = lattice.d

    spine_pos = np.zeros((trials, d), dtype=np.int16)
    tree = np.empty(0, dtype=np.int64)
    pos = np.empty((0, d), dtype=np.int16)
    labels = np.empty(0, dtype=np.int64) if m is not None else None
    track = m is not None
    labels_active = track and m == 0
    ancestors_at_m = np.ones(trials, dtype=np.int64) if labels_active else None
    tree_ids = np.arange(trials, dtype=np.int64)

    for j in range(1, n + 1):
        x, i = _accept_blocks(sb.values, sb.cum, q[n - j], trials, rng, block_retry_budget)
        right = x - i
        # right siblings spawn from the spine parent's position
        new_tree = np.repeat(tree_ids, right)
        new_pos = spine_pos[new_tree] + steps[rng.integers(0, n_steps, size=len(new_tree))]
        # bulk particles reproduce and step
        counts = law.sample(rng, len(tree)) if len(tree) else np.empty(0, dtype=np.int64)
        idx = np.repeat(np.arange(len(tree)), counts)
        tree = tree[idx]
        pos = pos[idx] + steps[rng.integers(0, n_steps, size=len(idx))]
        if labels_active:
            labels = labels[idx]
            new_labels = np.zeros(len(new_tree), dtype=np.int64)
        # the spine child takes its own step
        spine_pos += steps[rng.integers(0, n_steps, size=trials)]
        tree = np.concatenate([tree, new_tree])
        pos = np.concatenate([pos, new_pos])
        if labels_active:
            labels = np.concatenate([labels, new_labels])
        if track and j == m:
            # label generation-m particles: 0 for the spine, 1.. per tree
            order = np.argsort(tree, kind="stable")
            ranks = np.empty(len(tree), dtype=np.int64)
            counts_per_tree = np.bincount(tree, minlength=trials)
            offsets = np.repeat(np.cumsum(counts_per_tree) - counts_per_tree, counts_per_tree)
            ranks[order] = np.arange(len(tree)) - offsets + 1
            labels = ranks
            ancestors_at_m = counts_per_tree + 1
            labels_active = True

    all_tree = np.concatenate([tree_ids, tree])
    all_pos = np.concatenate([spine_pos, pos])
    all_labels = None
    if labels_active:
        all_labels = np.concatenate([np.zeros(trials, dtype=np.int64), labels])
    stats = _per_tree_site_stats(all_tree, all_pos, all_labels, trials, r, gap_j)

    gap = None
    if labels_active and gap_j is not None:
        blocked = stats["blocked_sum"]
        if spine_term == "independent":
            indep = unconditioned_occupancy(law, lattice, n - m, trials, rng, max(gap_j, 1))
            blocked = blocked - stats["spine_blocked"] + indep.m_counts[:, gap_j]
        gap = np.abs(stats["m_counts"][:, gap_j] - blocked)

    return OccupancyBatch(
        z_final=stats["z_final"],
        m_counts=stats["m_counts"],
        overflow_sites=stats["overflow_sites"],
        overflow_mass=stats["overflow_mass"],
        shared=stats.get("shared") if labels_active else None,
        gap=gap,
        ancestors_at_m=ancestors_at_m,
    )


def unconditioned_occupancy(
    law: OffspringLaw,
    lattice: LatticeConfig,
    n: int,
    trials: int,
    rng: np.random.Generator,
    r: int,
) -> OccupancyBatch:
    """Embedded plain trees; dead trees report zero everywhere."""
    steps = lattice.steps
    n_steps = lattice.n_steps
    tree = np.arange(trials, dtype=np.int64)
    pos = np.zeros((trials, lattice.d), dtype=np.int16)
    for _ in range(n):
        if len(tree) == 0:
            break
        counts = law.sample(rng, len(tree))
        idx = np.repeat(np.arange(len(tree)), counts)
        tree = tree[idx]
        pos = pos[idx] + steps[rng.integers(0, n_steps, size=len(idx))]
    stats = _per_tree_site_stats(tree, pos, None, trials, r, None)
    return OccupancyBatch(
        z_final=stats["z_final"],
        m_counts=stats["m_counts"],
        overflow_sites=stats["overflow_sites"],
        overflow_mass=stats["overflow_mass"],
    )


def rejection_z(
    law: OffspringLaw,
    n: int,
    want: int,
    rng: np.random.Generator,
    max_attempts: int | None = None,
) -> tuple[np.ndarray, int]:
    """Horizon sizes of ``want`` trees accepted by whole-tree rejection.

    Returns the accepted sizes and the number of attempts consumed. Batches
    of unconditioned trees are drawn until enough survive; the batch size
    equals ``want`` so the draw schedule is deterministic.
    """
    if max_attempts is None:
        max_attempts = DEFAULT_TREE_RETRY_BUDGET * want
    got: list[np.ndarray] = []
    have = 0
    attempts = 0
    while have < want:
        if attempts >= max_attempts:
            raise RetryBudgetExceeded(f"rejection used {attempts} attempts for {have} trees")
        z = unconditioned_z(law, n, want, rng)
        attempts += want
        alive = z[z > 0]
        got.append(alive)
        have += len(alive)
    return np.concatenate(got)[:want], attempts


def rejection_occupancy(
    law: OffspringLaw,
    lattice: LatticeConfig,
    n: int,
    want: int,
    rng: np.random.Generator,
    r: int,
    max_attempts: int | None = None,
) -> tuple[OccupancyBatch, int]:
    """Occupancy stats of ``want`` rejection-accepted embedded trees."""
    if max_attempts is None:
        max_attempts = DEFAULT_TREE_RETRY_BUDGET * want
    fields: dict[str, list[np.ndarray]] = {k: [] for k in
        ("z_final", "m_counts", "overflow_sites", "overflow_mass")}
    have = 0
    attempts = 0
    while have < want:
        if attempts >= max_attempts:
            raise RetryBudgetExceeded(f"rejection used {attempts} attempts for {have} trees")
        batch = unconditioned_occupancy(law, lattice, n, want, rng, r)
        attempts += want
        alive = batch.z_final > 0
        fields["z_final"].append(batch.z_final[alive])
        fields["m_counts"].append(batch.m_counts[alive])
        fields["overflow_sites"].append(batch.overflow_sites[alive])
        fields["overflow_mass"].append(batch.overflow_mass[alive])
        have += int(alive.sum())
    return (
        OccupancyBatch(
            z_final=np.concatenate(fields["z_final"])[:want],
            m_counts=np.concatenate(fields["m_counts"])[:want],
            overflow_sites=np.concatenate(fields["overflow_sites"])[:want],
            overflow_mass=np.concatenate(fields["overflow_mass"])[:want],
        ),
        attempts,
    )

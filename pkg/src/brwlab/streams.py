"""Reproducible random streams.

Every Monte Carlo unit of work (a batch of trees, a suite stage, a bootstrap
pass) draws from its own generator, derived from the master seed and a label
path. Streams are backed by the counter-based Philox bit generator, so any
(seed, path) pair maps to the same stream no matter how work is scheduled
across threads.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["substream", "path_entropy"]


def path_entropy(*path: int | str) -> list[int]:
    """Map a label path to a list of uint32 words, stably across runs."""
    words: list[int] = []
    for part in path:
        if isinstance(part, (int, np.integer)):
            if part < 0:
                raise ValueError("path integers must be non-negative")
            words.append(int(part) & 0xFFFFFFFF)
            words.append((int(part) >> 32) & 0xFFFFFFFF)
        else:
            digest = hashlib.sha256(str(part).encode("utf-8")).digest()
            words.extend(int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4))
    return words


def substream(master_seed: int, *path: int | str) -> np.random.Generator:
    """Return a Generator for the given (master seed, label path) pair.

    The same arguments always produce the same stream, and distinct paths
    produce independent streams, which makes merged results identical for
    any worker-thread count.
    """
    entropy = [int(master_seed) & 0xFFFFFFFF, (int(master_seed) >> 32) & 0xFFFFFFFF]
    entropy.extend(path_entropy(*path))
    seq = np.random.SeedSequence(entropy)
    return np.random.Generator(np.random.Philox(seq))

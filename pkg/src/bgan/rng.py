"""Deterministic named random streams.

Every source of randomness in the package is a numpy ``Generator`` derived
from a master seed plus a named path, e.g. ``stream(seed, "noise", agent_id)``.
One stream per (agent, purpose) pair keeps runs reproducible and lets any
single stream be replayed without consuming the others.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _encode(part) -> int:
    if isinstance(part, (int, np.integer)):
        return int(part) & _MASK64
    digest = hashlib.blake2s(str(part).encode("utf-8"), digest_size=8).digest()
    return int.from_bytes(digest, "little")


def stream(seed: int, *path) -> np.random.Generator:
    """Return the generator for ``path`` under ``seed``.

    The same (seed, path) always yields the same sequence; distinct paths
    give statistically independent streams.
    """
    entropy = [int(seed) & _MASK64] + [_encode(p) for p in path]
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(entropy)))


def derive_seed(seed: int, *path) -> int:
    """Collapse (seed, path) into a single integer seed for APIs that take one."""
    return int(stream(seed, *path).integers(0, 2**63 - 1))

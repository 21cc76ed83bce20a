"""Reproducible counter-based random streams.

Every stochastic component of the package draws from a Philox generator
keyed by (root seed, path). Streams for distinct paths are statistically
independent and do not depend on the order in which they are created, so
sweeps may farm cells out to any number of workers without changing a
single drawn number.
"""

from __future__ import annotations

import hashlib

import numpy as np

_MASK64 = (1 << 64) - 1


def _path_word(part) -> int:
    """Map one path element to a stable 64-bit word (never builtin hash)."""
    if isinstance(part, (int, np.integer)):
        return int(part) & _MASK64
    if isinstance(part, str):
        digest = hashlib.sha256(part.encode("utf-8")).digest()
        return int.from_bytes(digest[:8], "big")
    if isinstance(part, (tuple, list)):
        digest = hashlib.sha256(
            b"|".join(str(_path_word(p)).encode() for p in part)
        ).digest()
        return int.from_bytes(digest[:8], "big")
    raise TypeError(f"unsupported stream path element: {part!r}")


def substream(seed: int, *path) -> np.random.Generator:
    """Independent generator for (seed, *path).

    The same (seed, path) always yields a bit-identical stream regardless
    of process, thread schedule, or creation order.
    """
    words = tuple(_path_word(p) for p in path)
    ss = np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=words)
    return np.random.Generator(np.random.Philox(ss))


def derive_seed(seed: int, *path) -> int:
    """Deterministic child seed for (seed, *path), for APIs that take ints."""
    words = tuple(_path_word(p) for p in path)
    ss = np.random.SeedSequence(entropy=int(seed) & _MASK64, spawn_key=words)
    return int(ss.generate_state(1, np.uint64)[0])

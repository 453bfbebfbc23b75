"""Named random streams.

All randomness goes through :func:`stream`, which builds a Philox
(counter-based) generator keyed by an integer seed plus a stream name, so
training, tuning, query generation and Monte Carlo inference never share
draws even when they are given the same seed.
"""

from __future__ import annotations

import hashlib

import numpy as np

__all__ = ["stream", "spawn"]


def _name_key(name: str) -> list[int]:
    digest = hashlib.sha256(name.encode("utf-8")).digest()
    return [int.from_bytes(digest[i : i + 4], "little") for i in range(0, 16, 4)]


def stream(seed: int, name: str) -> np.random.Generator:
    """Generator for ``(seed, name)``; identical arguments give identical draws."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *_name_key(name)])
    return np.random.Generator(np.random.Philox(ss))


def spawn(seed: int, name: str, n: int) -> list[np.random.Generator]:
    """``n`` independent child generators of the ``(seed, name)`` stream."""
    ss = np.random.SeedSequence([int(seed) & 0xFFFFFFFF, *_name_key(name)])
    return [np.random.Generator(np.random.Philox(child)) for child in ss.spawn(n)]

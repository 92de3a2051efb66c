"""Named, independent random streams for reproducible simulations.

All randomness in this package is derived from a single integer seed plus a
key path such as ``("noise", restart, user)``. Streams are backed by the
counter-based Philox generator, so draws are reproducible regardless of the
order in which streams are created or consumed.
"""

from __future__ import annotations

import hashlib

import numpy as np


def _token(part) -> int:
    """Map one key-path element to a stable 64-bit entropy word."""
    if isinstance(part, (bool, float, int, np.integer, np.floating)):
        text = f"{type(part).__name__}:{part!r}"
    elif isinstance(part, str):
        text = f"str:{part}"
    else:
        raise TypeError(f"unsupported stream key element: {part!r}")
    digest = hashlib.sha256(text.encode("utf-8")).digest()
    return int.from_bytes(digest[:8], "little")


def substream(seed: int, *path) -> np.random.Generator:
    """Return an independent generator for ``(seed, *path)``.

    The same seed and path always yield a generator in the same state;
    distinct paths yield statistically independent streams.
    """
    if seed < 0:
        raise ValueError("seed must be nonnegative")
    entropy = [int(seed)] + [_token(part) for part in path]
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(entropy)))

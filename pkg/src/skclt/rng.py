"""Counter-based random streams.

Every stream is a :class:`numpy.random.Philox` generator whose 128-bit key is
derived from a seed path such as ``(master_seed, disorder_index,
chain_index)``. Since Philox is counter based, the values a stream produces
depend only on its key and on how many values were drawn from it, never on
scheduling or on other streams.
"""

from __future__ import annotations

import numpy as np

SCHEME_VERSION = 1


def stream_key(*path: int) -> np.ndarray:
    """128-bit Philox key for a seed path of non-negative integers."""
    if not path:
        raise ValueError("seed path must not be empty")
    for p in path:
        if int(p) < 0:
            raise ValueError(f"seed path entries must be >= 0, got {path}")
    ss = np.random.SeedSequence(entropy=int(path[0]), spawn_key=tuple(int(p) for p in path[1:]))
    return ss.generate_state(2, dtype=np.uint64)


def stream(*path: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(key=stream_key(*path)))


def derived_seed(*path: int) -> int:
    """63-bit integer seed for a seed path (used to label disorder draws)."""
    return int(stream_key(*path)[0] >> np.uint64(1))


def pair_normals(seed: int, n_pairs: int, scheme_version: int = SCHEME_VERSION) -> np.ndarray:
    """Standard normals indexed by a global pair counter.

    Value ``k`` is a Box-Muller transform of raw outputs ``2k`` and ``2k+1``
    of the keyed stream, so it depends only on ``(seed, scheme_version, k)``.
    """
    if scheme_version != 1:
        raise ValueError(f"unknown coupling scheme version {scheme_version}")
    u = stream(seed, scheme_version).random(2 * n_pairs).reshape(n_pairs, 2)
    radius = np.sqrt(-2.0 * np.log1p(-u[:, 0]))
    return radius * np.cos(2.0 * np.pi * u[:, 1])

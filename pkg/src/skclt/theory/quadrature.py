"""Gaussian expectations by Gauss-Hermite quadrature."""

from __future__ import annotations

from functools import lru_cache

import numpy as np

DEFAULT_NODES = 61


@lru_cache(maxsize=32)
def gauss_nodes(node_count: int) -> tuple[np.ndarray, np.ndarray]:
    """Nodes and weights for E[phi(z)], z ~ N(0, 1).

    Probabilists' Hermite rule (weight exp(-z^2/2)) with weights normalized
    to sum to one.
    """
    if node_count < 2:
        raise ValueError(f"node_count must be >= 2, got {node_count}")
    x, w = np.polynomial.hermite_e.hermegauss(node_count)
    w = w / np.sqrt(2.0 * np.pi)
    x.setflags(write=False)
    w.setflags(write=False)
    return x, w


def gauss_expect(integrand, node_count: int = DEFAULT_NODES) -> float:
    """Approximate ``E[integrand(z)]`` for a standard normal ``z``.

    ``integrand`` is called once on the array of nodes and must return an
    array of the same shape.

    Raises:
        ValueError: if the integrand is not finite at some node.
    """
    x, w = gauss_nodes(node_count)
    values = np.asarray(integrand(x), dtype=float)
    if values.shape != x.shape:
        values = np.broadcast_to(values, x.shape)
    bad = ~np.isfinite(values)
    if bad.any():
        i = int(np.flatnonzero(bad)[0])
        raise ValueError(f"integrand is not finite at node z={x[i]!r} (value {values[i]!r})")
    return float(np.dot(w, values))

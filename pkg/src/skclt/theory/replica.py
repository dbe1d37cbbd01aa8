"""The replica matrix indexed by lexicographically ordered pairs of replicas."""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np
import scipy.linalg

from skclt.theory.moments import nu0_moment

INVERTIBLE_COND = 1e12


def replica_pairs(n_total: int) -> list[tuple[int, int]]:
    """Pairs (r, r') with 1 <= r < r' <= n_total in lexicographic order."""
    return list(combinations(range(1, n_total + 1), 2))


def base_entry(row: tuple[int, int], col: tuple[int, int], moments) -> float:
    """nu_0((e^k e^k' - q2)(e^r e^r' - q2)).

    1 - q2^2 for identical pairs, q2 - q2^2 if they share one index and
    q4 - q2^2 if they are disjoint.
    """
    return nu0_moment(list(row) + list(col), moments) - moments[2] ** 2


@dataclass(frozen=True)
class ReplicaMatrix:
    n: int
    pairs: tuple
    entries: np.ndarray

    @property
    def dim(self) -> int:
        return len(self.pairs)

    def index(self, pair) -> int:
        return self.pairs.index(tuple(pair))

    def __getitem__(self, key):
        row, col = key
        return self.entries[self.index(row), self.index(col)]


def _entry(n, row, col, moments, complete_free_pair_row):
    k, kp = row
    r, rp = col
    q2, q4 = moments[2], moments[4]
    t = lambda a, b: base_entry(a, b, moments)
    free = (n + 1, n + 2)
    if row == free and col == free:
        return 1 - q2 ** 2 - 2 * (n + 2) * (q2 - q2 ** 2) + comb(n + 3, 2) * (q4 - q2 ** 2)
    if r <= n and rp == n + 2:
        return 0.0
    if kp == n + 2 and k <= n:
        # not reached by the recursion: these pairs have zero columns and zero
        # weight in r^e, r^m
        return 0.0
    if kp <= n:
        if rp <= n:
            return t(row, col)
        if rp == n + 1:
            return -n * t(row, col)
        return comb(n + 1, 2) * t(row, col)  # col == free
    if kp == n + 1:
        if rp <= n:
            return t(row, col)
        if rp == n + 1:
            return t((k, n + 1), (r, n + 1)) - (n + 1) * t((k, n + 1), (r, n + 2))
        return -(n + 1) * t((k, n + 1), free) + comb(n + 2, 2) * (q4 - q2 ** 2)
    # row == free, col != free
    if not complete_free_pair_row:
        return 0.0
    if rp <= n:
        return q4 - q2 ** 2
    return 2 * (q2 - q2 ** 2) - (n + 2) * (q4 - q2 ** 2)


def build_replica_matrix(n: int, moments, complete_free_pair_row: bool = True) -> ReplicaMatrix:
    """Dense (n+2 choose 2) square matrix of the replica-overlap linear system.

    Rows are pairs (k, k') and columns pairs (r, r'). Columns (r, n+2) with
    r <= n vanish, and so do rows (k, n+2) with k <= n. The row (n+1, n+2) off its
    diagonal is filled with the coefficients obtained by applying the same
    cavity expansion to n+2 replicas; ``complete_free_pair_row=False`` leaves
    those entries at zero instead.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    pairs = replica_pairs(n + 2)
    A = np.empty((len(pairs), len(pairs)))
    for i, row in enumerate(pairs):
        for j, col in enumerate(pairs):
            A[i, j] = _entry(n, row, col, moments, complete_free_pair_row)
    A.setflags(write=False)
    return ReplicaMatrix(n, tuple(pairs), A)


def system_matrix(beta: float, replica: ReplicaMatrix) -> np.ndarray:
    return np.eye(replica.dim) - beta ** 2 * replica.entries


def check_invertibility(n: int, params, moments=None, complete_free_pair_row: bool = True) -> dict:
    """LU-factor Id - beta^2 A and estimate its 1-norm condition number.

    Returns ``{"invertible": bool, "condition_estimate": float}``; an exactly
    singular factor reports an infinite condition number.
    """
    from skclt.theory.moments import solve_q2

    m = moments if moments is not None else solve_q2(params)
    M = system_matrix(params.beta, build_replica_matrix(n, m, complete_free_pair_row))
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
        lu, piv = scipy.linalg.lu_factor(M, check_finite=True)
    if np.any(np.diag(lu) == 0.0):
        cond = float("inf")
    else:
        inv = scipy.linalg.lu_solve((lu, piv), np.eye(M.shape[0]))
        cond = float(np.linalg.norm(M, 1) * np.linalg.norm(inv, 1))
    return {"invertible": bool(np.isfinite(cond) and cond < INVERTIBLE_COND), "condition_estimate": cond}

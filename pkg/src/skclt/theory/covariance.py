"""Vector families, the 2n x 2n covariance and the predicted variances."""

from __future__ import annotations

from dataclasses import dataclass
from math import comb

import numpy as np
import scipy.linalg

from skclt.errors import RegimeError
from skclt.params import ModelParams
from skclt.theory.moments import nu0_moment, solve_q2
from skclt.theory.replica import build_replica_matrix, check_invertibility, system_matrix

SYMMETRY_TOL = 1e-10
PSD_TOL = -1e-8
CLUSTER_TOL = 1e-10


@dataclass(frozen=True)
class VectorFamilies:
    n: int
    pairs: tuple
    v1: np.ndarray
    v2: np.ndarray
    v3: np.ndarray
    e: np.ndarray  # row i is e^{i+1}
    m: np.ndarray
    r_e: np.ndarray
    r_m: np.ndarray
    W: np.ndarray  # row for pair (k, k') is w_{k,k'}

    def w(self, k: int, kp: int) -> np.ndarray:
        return self.W[self.pairs.index((k, kp))]


def cyclic_shift(vec: np.ndarray, n: int, steps: int = 1) -> np.ndarray:
    """Apply the cyclic replica permutation to both n-blocks of a 2n vector."""
    return np.concatenate([np.roll(vec[:n], steps), np.roll(vec[n:], steps)])


def a_coeff(k, kp, r, moments) -> float:
    # nu0(eps^k eps^k' eps^r) - q2 nu0(eps^r)
    return nu0_moment([k, kp, r], moments) - moments[2] * moments[1]


def b_coeff(k, kp, r, beta, moments, printed=False) -> float:
    q2, q4 = moments[2], moments[4]
    if r in (k, kp):
        a = (1.0 - q2) ** 2
        return beta * a if printed else beta * q2 * a
    return beta * q2 * (2.0 * q2 + q2 ** 2 - 3.0 * q4)


def build_vector_families(n: int, params: ModelParams, moments=None, printed_v2: bool = False,
                          printed_v3: bool = False, printed_B: bool = False) -> VectorFamilies:
    """Inputs of the covariance assembly for n replicas.

    The ``printed_*`` flags switch to the alternative layouts (v2 on the
    magnetization block, v3 equal to v1, B = beta*a on own replicas) for
    comparison; the defaults are the forms that reproduce the free-energy
    covariance.
    """
    if int(n) != n or n < 1:
        raise ValueError(f"n must be a positive integer, got {n}")
    m = moments if moments is not None else solve_q2(params)
    beta = params.beta
    q1, q2, q3 = m[1], m[2], m[3]
    pairs = tuple((k, kp) for k in range(1, n + 3) for kp in range(k + 1, n + 3))

    W = np.zeros((len(pairs), 2 * n))
    for i, (k, kp) in enumerate(pairs):
        for r in range(1, n + 1):
            W[i, r - 1] = b_coeff(k, kp, r, beta, m, printed_B)
            W[i, n + r - 1] = a_coeff(k, kp, r, m)

    own, other = q1 * (1 - q2), q3 - q1 * q2
    r_e = np.zeros(len(pairs))
    r_m = np.zeros(len(pairs))
    for i, (k, kp) in enumerate(pairs):
        if k == 1 and kp <= n:
            r_e[i], r_m[i] = 1.0, own
        elif k == 1 and kp == n + 1:
            r_e[i], r_m[i] = -n, -n * own
        elif 1 < k <= n and kp <= n:
            r_m[i] = other
        elif 1 < k <= n and kp == n + 1:
            r_m[i] = -n * other
        elif (k, kp) == (n + 1, n + 2):
            r_m[i] = comb(n + 1, 2) * other

    v1 = np.zeros(2 * n)
    v1[0] = 0.5
    v1[1:n] = 0.5 * q2 ** 2
    v2 = np.zeros(2 * n)
    off = n if printed_v2 else 0
    v2[off] = -own
    v2[off + 1:off + n] = q1 + q1 * q2 - 2 * q3
    v2 *= beta * q2
    if printed_v3:
        v3 = v1.copy()
    else:
        v3 = np.zeros(2 * n)
        v3[n] = 1 - q1 ** 2
        v3[n + 1:] = q2 - q1 ** 2

    e1, m1 = v1, v2 + v3
    e = np.array([cyclic_shift(e1, n, i) for i in range(n)])
    mm = np.array([cyclic_shift(m1, n, i) for i in range(n)])
    return VectorFamilies(n, pairs, v1, v2, v3, e, mm, r_e, r_m, W)


@dataclass(frozen=True)
class CovarianceMatrix:
    n: int
    entries: np.ndarray
    asymmetry: float
    min_eigenvalue: float
    distinct_values: tuple

    @property
    def is_psd(self) -> bool:
        return self.min_eigenvalue >= PSD_TOL

    @property
    def energy_block(self) -> np.ndarray:
        return self.entries[: self.n, : self.n]

    @property
    def magnetization_block(self) -> np.ndarray:
        return self.entries[self.n:, self.n:]


def distinct_values(x: np.ndarray, tol: float = CLUSTER_TOL) -> tuple:
    vals = np.sort(np.asarray(x, dtype=float).ravel())
    out = [vals[0]]
    for v in vals[1:]:
        if v - out[-1] > tol:
            out.append(v)
    return tuple(float(v) for v in out)


def build_covariance(n: int, params: ModelParams, moments=None, **flags) -> CovarianceMatrix:
    """Assemble the limiting covariance of (E^1..E^n, M^1..M^n).

    Raises:
        RegimeError: Id - beta^2 A is not invertible at these parameters.
    """
    m = moments if moments is not None else solve_q2(params)
    complete = flags.pop("complete_free_pair_row", True)
    fam = build_vector_families(n, params, m, **flags)
    inv = check_invertibility(n, params, m, complete)
    if not inv["invertible"]:
        raise RegimeError(
            f"Id - beta^2 A is not invertible at beta={params.beta}, h={params.h} "
            f"(condition {inv['condition_estimate']:.3e}); use a smaller beta")
    replica = build_replica_matrix(n, m, complete)
    sol = scipy.linalg.lu_solve(scipy.linalg.lu_factor(system_matrix(params.beta, replica)), fam.W)
    beta, q2 = params.beta, m[2]
    e_row = fam.e[0] + beta * q2 * fam.r_e @ sol
    m_row = fam.m[0] + beta ** 2 * fam.r_m @ sol
    C = np.vstack([[cyclic_shift(e_row, n, i) for i in range(n)],
                   [cyclic_shift(m_row, n, i) for i in range(n)]])
    asym = float(np.max(np.abs(C - C.T)))
    eig = float(np.min(np.linalg.eigvalsh(0.5 * (C + C.T))))
    C.setflags(write=False)
    return CovarianceMatrix(n, C, asym, eig, distinct_values(C))


def sigma_A2(params: ModelParams, moments=None, weights=(1.0, 1.0), **flags) -> float:
    """w . c w for the n = 1 covariance; the default w gives the variance of H."""
    C = build_covariance(1, params, moments, **flags).entries
    w = np.asarray(weights, dtype=float)
    return float(w @ C @ w)


def sigma_Q2_closed(params: ModelParams, moments=None) -> tuple[float, float]:
    """Evaluate the explicit quenched-variance display under both readings.

    The display contracts w^{k,k'} in R^4 with (1,-1,0,0) and (0,0,1,-1),
    so it lives at n = 2 (six replica pairs). Variant A inverts
    Id - beta^2 A on the pair-indexed vectors and reads pair (1, 3); variant
    B inverts Id - beta^2 c (4 x 4) on W^T v and reads coordinate 3.

    Raises:
        RegimeError: the matrix of either variant is singular.
    """
    m = moments if moments is not None else solve_q2(params)
    beta = params.beta
    q1, q2, q3 = m[1], m[2], m[3]
    fam = build_vector_families(2, params, m)
    v_e = fam.W @ np.array([1.0, -1.0, 0.0, 0.0])
    v_m = fam.W @ np.array([0.0, 0.0, 1.0, -1.0])

    replica = build_replica_matrix(2, m)
    MA = system_matrix(beta, replica)
    C = build_covariance(2, params, m).entries
    MB = np.eye(4) - beta ** 2 * C
    for name, M in (("A", MA), ("B", MB)):
        if np.linalg.cond(M, 1) >= 1e12:
            raise RegimeError(f"sigma_Q^2 variant {name} matrix is singular at beta={beta}, h={params.h}")

    j = replica.index((1, 3))
    xa_e = np.linalg.solve(MA, v_e)[j]
    xa_m = np.linalg.solve(MA, v_m)[j]
    xb_e = np.linalg.solve(MB, fam.W.T @ v_e)[2]
    xb_m = np.linalg.solve(MB, fam.W.T @ v_m)[2]

    base = 1 - q2 ** 2 + 2 * beta * q2 * (q3 - q1)
    coef_m = beta ** 2 * q1 * (1 - q2) + beta ** 2 * (q3 - q1 * q2) - 2 * beta * q2
    value = lambda xe, xm: float(base - 2 * beta * q2 * xe - 2 * coef_m * xm)
    return value(xa_e, xa_m), value(xb_e, xb_m)

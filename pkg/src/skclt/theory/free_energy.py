"""Independent route to the covariance through the replica-symmetric free energy.

The quenched (Gibbs) covariance of the normalized energy and magnetization is
the Hessian of

    p(lam, mu) = log 2 + E log cosh(lam sqrt(q) z + mu) + lam^2 (1 - q)^2 / 4

in (inverse temperature, field), where q = q(lam, mu) is the fixed point.
Disorder fluctuations of the Gibbs means come from the covariance kernel of
log Z between two temperatures,

    K(theta, theta') = (lam lam' / 2) int_0^1 Q_t^2 dt,

with Q_t the replica-symmetric cross overlap of two systems whose couplings
have correlation t. The disorder covariance is the mixed second derivative
of K at theta = theta'. Used as a test oracle for the cavity assembly.
"""

from __future__ import annotations

from functools import lru_cache

import numpy as np

from skclt.params import ModelParams
from skclt.theory.moments import fixed_point_map, solve_fixed_point
from skclt.theory.quadrature import gauss_nodes

HESSIAN_STEP = 1e-4
KERNEL_STEP = 2e-3
GRID_NODES = 40
TIME_NODES = 20


@lru_cache(maxsize=4096)
def _q(lam: float, mu: float) -> float:
    return solve_fixed_point(ModelParams(lam, mu))


def free_energy(lam: float, mu: float) -> float:
    x, w = gauss_nodes(81)
    q = _q(abs(lam), mu)
    y = lam * np.sqrt(q) * x + mu
    logcosh = np.abs(y) + np.log1p(np.exp(-2 * np.abs(y))) - np.log(2.0)
    return float(np.log(2.0) + w @ logcosh + lam ** 2 * (1 - q) ** 2 / 4)


def free_energy_gradient(lam: float, mu: float) -> np.ndarray:
    """(lam (1 - q^2) / 2, q_1): limits of the Gibbs means of E_N/N and M_N."""
    x, w = gauss_nodes(81)
    q = _q(abs(lam), mu)
    q1 = float(w @ np.tanh(lam * np.sqrt(q) * x + mu))
    return np.array([lam * (1 - q ** 2) / 2, q1])


def gibbs_covariance(params: ModelParams, step: float = HESSIAN_STEP) -> np.ndarray:
    """Central-difference Hessian of the free energy: quenched covariance of (E, M)."""
    lam, mu = params.beta, params.h
    H = np.zeros((2, 2))
    for j, d in enumerate(((step, 0.0), (0.0, step))):
        H[:, j] = (free_energy_gradient(lam + d[0], mu + d[1])
                   - free_energy_gradient(lam - d[0], mu - d[1])) / (2 * step)
    return 0.5 * (H + H.T)


def cross_overlap(theta1, theta2, t: float, nodes: int = GRID_NODES,
                  tol: float = 1e-14, max_iter: int = 2000) -> float:
    """Fixed point Q = E[tanh(Y1) tanh(Y2)] with corr(Y1, Y2) = t Q / sqrt(q q')."""
    (l1, m1), (l2, m2) = theta1, theta2
    qa, qb = _q(abs(l1), m1), _q(abs(l2), m2)
    x, w = gauss_nodes(nodes)
    za, zb = np.meshgrid(x, x, indexing="ij")
    ww = np.outer(w, w)
    y1 = np.tanh(m1 + l1 * np.sqrt(qa) * za)
    scale = np.sqrt(qa * qb)
    Q = t * scale
    for _ in range(max_iter):
        rho = min(t * Q / scale, 1 - 1e-15) if scale > 0 else 0.0
        y2 = np.tanh(m2 + l2 * np.sqrt(qb) * (rho * za + np.sqrt(1 - rho ** 2) * zb))
        Q_new = float(np.sum(ww * y1 * y2))
        if abs(Q_new - Q) < tol:
            return Q_new
        Q = Q_new
    return Q


def log_partition_kernel(theta1, theta2, nodes: int = GRID_NODES, time_nodes: int = TIME_NODES) -> float:
    """Limit of Cov(log Z(theta1), log Z(theta2)) for the shared disorder."""
    tg, tw = np.polynomial.legendre.leggauss(time_nodes)
    tg, tw = (tg + 1) / 2, tw / 2
    total = sum(wt * cross_overlap(theta1, theta2, tt, nodes) ** 2 for tt, wt in zip(tg, tw))
    return float(theta1[0] * theta2[0] / 2 * total)


def disorder_covariance(params: ModelParams, step: float = KERNEL_STEP) -> np.ndarray:
    """Covariance over disorder of the Gibbs means of (E, M), normalized."""
    th = np.array([params.beta, params.h])
    E = np.eye(2) * step
    K = lambda a, b: log_partition_kernel(tuple(a), tuple(b))
    C = np.zeros((2, 2))
    for i in range(2):
        for j in range(i, 2):
            C[i, j] = (K(th + E[i], th + E[j]) - K(th + E[i], th - E[j])
                       - K(th - E[i], th + E[j]) + K(th - E[i], th - E[j])) / (4 * step ** 2)
            C[j, i] = C[i, j]
    return C


def replica_covariance(n: int, params: ModelParams) -> np.ndarray:
    """2n x 2n covariance of (E^1..E^n, M^1..M^n) under the annealed measure.

    Same-replica blocks are Gibbs plus disorder covariance; distinct replicas
    share only the disorder part.
    """
    G = gibbs_covariance(params)
    D = disorder_covariance(params)
    C = np.zeros((2 * n, 2 * n))
    for a in range(2):
        for b in range(2):
            block = np.full((n, n), D[a, b]) + np.eye(n) * G[a, b]
            C[a * n:(a + 1) * n, b * n:(b + 1) * n] = block
    return C


def quenched_variance(params: ModelParams, weights=(1.0, 1.0)) -> float:
    w = np.asarray(weights, dtype=float)
    return float(w @ gibbs_covariance(params) @ w)


def quenched_mean_variance(params: ModelParams, weights=(1.0, 1.0)) -> float:
    w = np.asarray(weights, dtype=float)
    return float(w @ disorder_covariance(params) @ w)

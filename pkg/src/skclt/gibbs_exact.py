"""Exact quenched Gibbs averages by enumerating all 2^N configurations.

The Gibbs weight is ``exp(beta * E_N + h * sum(sigma))`` with
``E_N = sum_{i<j} g_ij sigma_i sigma_j / sqrt(N)``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np

from skclt.errors import EnumerationCapError
from skclt.observables import Normalizer
from skclt.params import ModelParams
from skclt.resample import jackknife
from skclt.rng import SCHEME_VERSION, derived_seed, pair_normals

MAX_ENUMERATION_N = 20
CHUNK_BITS = 15


def pair_counter(i, j):
    """Global index of pair (i, j), 0 <= i < j: j(j-1)/2 + i.

    Pairs of the first N spins use counters below N(N-1)/2, so a larger
    system extends the couplings of a smaller one with the same seed.
    """
    return j * (j - 1) // 2 + i


@dataclass(frozen=True)
class Disorder:
    """Couplings g_ij, 1 <= i < j <= N, stored in lexicographic pair order."""

    n_spins: int
    couplings: np.ndarray
    seed: int
    scheme_version: int = SCHEME_VERSION

    def __post_init__(self):
        expected = self.n_spins * (self.n_spins - 1) // 2
        if self.couplings.shape != (expected,):
            raise ValueError(f"expected {expected} couplings for N={self.n_spins}, got {self.couplings.shape}")

    def matrix(self) -> np.ndarray:
        """Symmetric N x N coupling matrix with zero diagonal."""
        J = np.zeros((self.n_spins, self.n_spins))
        iu = np.triu_indices(self.n_spins, 1)
        J[iu] = self.couplings
        return J + J.T

    def permuted(self, perm) -> Disorder:
        """Same system with spin ``i`` relabelled ``perm[i]``."""
        perm = np.asarray(perm)
        J = self.matrix()
        Jp = np.empty_like(J)
        Jp[np.ix_(perm, perm)] = J
        return Disorder(self.n_spins, Jp[np.triu_indices(self.n_spins, 1)].copy(), self.seed, self.scheme_version)


def sample_disorder(n_spins: int, seed: int, scheme_version: int = SCHEME_VERSION) -> Disorder:
    """Standard normal couplings indexed by :func:`pair_counter`."""
    n_spins = int(n_spins)
    if n_spins < 1:
        raise ValueError(f"n_spins must be >= 1, got {n_spins}")
    n_pairs = n_spins * (n_spins - 1) // 2
    normals = pair_normals(seed, n_pairs, scheme_version)
    i, j = np.triu_indices(n_spins, 1)
    g = normals[pair_counter(i, j)] if n_pairs else np.zeros(0)
    return Disorder(n_spins, np.ascontiguousarray(g), int(seed), scheme_version)


@dataclass
class QuenchedMoments:
    log_Z: float
    mean_spin: np.ndarray
    pair_corr: np.ndarray
    mean_E_script: float
    mean_M_script: float
    mean_H_script: float
    second_H_script: float
    var_H_script: float
    overlap_mean: float
    overlap_second: float
    mgf: dict | None = None

    def overlap_deviation2(self, q2: float) -> float:
        """<(R_12 - q2)^2> for two replicas sharing this disorder."""
        return self.overlap_second - 2 * q2 * self.overlap_mean + q2 ** 2

    def csv_row(self, seed: int, params: ModelParams, q2: float) -> dict:
        return {
            "seed": seed, "N": len(self.mean_spin), "beta": params.beta, "h": params.h,
            "logZ": self.log_Z, "mean_E": self.mean_E_script, "mean_M": self.mean_M_script,
            "mean_H": self.mean_H_script, "second_H": self.second_H_script, "var_H": self.var_H_script,
            "overlap_mean": self.overlap_mean, "overlap2": self.overlap_second,
            "overlap_dev2": self.overlap_deviation2(q2),
        }


CSV_COLUMNS = ["seed", "N", "beta", "h", "logZ", "mean_E", "mean_M", "mean_H", "second_H",
               "var_H", "overlap_mean", "overlap2", "overlap_dev2"]


def _spin_chunks(n):
    total = 1 << n
    size = min(total, 1 << CHUNK_BITS)
    bits = np.arange(n, dtype=np.int64)
    for start in range(0, total, size):
        idx = np.arange(start, start + size, dtype=np.int64)
        yield 1.0 - 2.0 * ((idx[:, None] >> bits) & 1)


def _log_weights(S, J, params, root):
    E = 0.5 * np.einsum("ki,ki->k", S @ J, S) / root
    return E, params.beta * E + params.h * S.sum(axis=1)


def _check_cap(n):
    if n > MAX_ENUMERATION_N:
        raise EnumerationCapError(f"exact enumeration is capped at N={MAX_ENUMERATION_N}, got N={n}")


def enumerate_gibbs(disorder: Disorder, params: ModelParams, moments=None,
                    mgf_mu=None) -> QuenchedMoments:
    """Exact Gibbs expectations at fixed disorder.

    ``moments`` supplies q1 and q2 for the normalization of the observables
    (defaults to the theory values at ``params``). ``mgf_mu`` is an optional
    sequence of mu at which <exp(mu H)> is evaluated.

    Raises:
        EnumerationCapError: N above the enumeration cap.
    """
    n = disorder.n_spins
    _check_cap(n)
    if moments is None:
        from skclt.theory import solve_q2
        moments = solve_q2(params)
    norm = Normalizer(n, params.beta, moments[1], moments[2])
    J = disorder.matrix()
    root = math.sqrt(n)
    mus = np.asarray(list(mgf_mu) if mgf_mu is not None else [], dtype=float)

    # pass 1: maxima for log-sum-exp
    lw_max = -np.inf
    mgf_max = np.full(len(mus), -np.inf)
    for S in _spin_chunks(n):
        E, lw = _log_weights(S, J, params, root)
        lw_max = max(lw_max, lw.max())
        if len(mus):
            H = norm.total(E, S.sum(axis=1))
            mgf_max = np.maximum(mgf_max, (lw[:, None] + mus * H[:, None]).max(axis=0))

    Z = 0.0
    s1 = np.zeros(n)
    s2 = np.zeros((n, n))
    sE = sM = sH = sH2 = 0.0
    smgf = np.zeros(len(mus))
    for S in _spin_chunks(n):
        E, lw = _log_weights(S, J, params, root)
        w = np.exp(lw - lw_max)
        Z += w.sum()
        s1 += w @ S
        s2 += (S * w[:, None]).T @ S
        e, m = norm.energy(E), norm.magnetization(S.sum(axis=1))
        H = e + m
        sE += w @ e
        sM += w @ m
        sH += w @ H
        sH2 += w @ (H * H)
        if len(mus):
            smgf += np.exp(lw[:, None] + mus * H[:, None] - mgf_max).sum(axis=0)

    mean_spin = s1 / Z
    pair_corr = s2 / Z
    mean_H, second_H = sH / Z, sH2 / Z
    log_Z = float(lw_max + math.log(Z))
    mgf = None
    if len(mus):
        mgf = {float(mu): float(math.exp(mx + math.log(s) - log_Z)) for mu, mx, s in zip(mus, mgf_max, smgf)}
    return QuenchedMoments(
        log_Z=log_Z, mean_spin=mean_spin, pair_corr=pair_corr,
        mean_E_script=float(sE / Z), mean_M_script=float(sM / Z),
        mean_H_script=float(mean_H), second_H_script=float(second_H),
        var_H_script=float(max(second_H - mean_H ** 2, 0.0)),
        overlap_mean=float(mean_spin @ mean_spin / n),
        overlap_second=float(np.sum(pair_corr ** 2) / n ** 2),
        mgf=mgf,
    )


def enumerate_naive(disorder: Disorder, params: ModelParams, moments) -> QuenchedMoments:
    """Reference enumerator: plain loops, no chunking or vectorization."""
    n = disorder.n_spins
    _check_cap(n)
    J = disorder.matrix()
    norm = Normalizer(n, params.beta, moments[1], moments[2])
    configs, logw, obs = [], [], []
    for sigma in itertools.product((-1.0, 1.0), repeat=n):
        E = sum(J[i, j] * sigma[i] * sigma[j] for i in range(n) for j in range(i + 1, n)) / math.sqrt(n)
        S = sum(sigma)
        configs.append(sigma)
        logw.append(params.beta * E + params.h * S)
        obs.append((float(norm.energy(E)), float(norm.magnetization(S))))
    top = max(logw)
    w = [math.exp(x - top) for x in logw]
    Z = sum(w)
    p = [x / Z for x in w]
    mean_spin = np.array([sum(pk * c[i] for pk, c in zip(p, configs)) for i in range(n)])
    pair_corr = np.array([[sum(pk * c[i] * c[j] for pk, c in zip(p, configs)) for j in range(n)] for i in range(n)])
    mE = sum(pk * o[0] for pk, o in zip(p, obs))
    mM = sum(pk * o[1] for pk, o in zip(p, obs))
    mH = sum(pk * (o[0] + o[1]) for pk, o in zip(p, obs))
    mH2 = sum(pk * (o[0] + o[1]) ** 2 for pk, o in zip(p, obs))
    return QuenchedMoments(
        log_Z=top + math.log(Z), mean_spin=mean_spin, pair_corr=pair_corr,
        mean_E_script=mE, mean_M_script=mM, mean_H_script=mH, second_H_script=mH2,
        var_H_script=mH2 - mH ** 2,
        overlap_mean=float(mean_spin @ mean_spin / n),
        overlap_second=float(np.sum(pair_corr ** 2) / n ** 2),
    )


@dataclass
class ExactAverage:
    """Disorder averages of exact Gibbs quantities, each as (estimate, jackknife SE)."""

    params: ModelParams
    n_disorders: int
    seeds: list
    per_disorder: list
    overlap_dev2: tuple
    mean_H: tuple
    second_H: tuple
    quenched_var_H: tuple
    annealed_var_H: tuple
    var_mean_H: tuple

    def rows(self, q2: float) -> list[dict]:
        return [m.csv_row(s, self.params, q2) for s, m in zip(self.seeds, self.per_disorder)]


def disorder_seed(master_seed: int, disorder_index: int) -> int:
    return derived_seed(master_seed, disorder_index)


def _var_of_means(mH):
    if len(mH) < 2:
        return 0.0, float("nan")
    if len(mH) == 2:
        return float(np.var(mH, ddof=1)), float("nan")
    return jackknife(mH, lambda x: x.var(ddof=1))


def disorder_average_exact(params: ModelParams, n_disorders: int, master_seed: int,
                           moments=None, workers: int = 1) -> ExactAverage:
    """Average exact Gibbs quantities over independent disorder draws.

    Disorder ``d`` uses seed ``disorder_seed(master_seed, d)``; results are
    merged in index order, so they do not depend on ``workers``.
    """
    if n_disorders < 1:
        raise ValueError("n_disorders must be >= 1")
    _check_cap(params.n_spins)
    if moments is None:
        from skclt.theory import solve_q2
        moments = solve_q2(params)
    seeds = [disorder_seed(master_seed, d) for d in range(n_disorders)]

    def one(seed):
        return enumerate_gibbs(sample_disorder(params.n_spins, seed), params, moments)

    if workers > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(workers) as ex:
            per = list(ex.map(one, seeds))
    else:
        per = [one(s) for s in seeds]

    q2 = moments[2]
    mH = np.array([m.mean_H_script for m in per])
    sH = np.array([m.second_H_script for m in per])
    dev = np.array([m.overlap_deviation2(q2) for m in per])
    qv = np.array([m.var_H_script for m in per])
    both = np.column_stack([mH, sH])
    return ExactAverage(
        params=params, n_disorders=n_disorders, seeds=seeds, per_disorder=per,
        overlap_dev2=jackknife(dev), mean_H=jackknife(mH), second_H=jackknife(sH),
        quenched_var_H=jackknife(qv),
        annealed_var_H=jackknife(both, lambda x: x[:, 1].mean() - x[:, 0].mean() ** 2),
        var_mean_H=_var_of_means(mH),
    )

"""Metropolis sampling of the quenched Gibbs measure over disorder ensembles.

Chains target ``exp(beta * E_N + h * sum(sigma))``. Each chain draws from its
own Philox stream keyed by ``(master_seed, disorder_index, chain_index)``;
the first N uniforms of a stream set the initial spins and every later
uniform is the acceptance variate of one proposed flip, in sweep order.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from itertools import combinations

import numba as nb
import numpy as np

from skclt.gibbs_exact import Disorder, disorder_seed, sample_disorder
from skclt.observables import Normalizer
from skclt.params import ModelParams
from skclt.resample import batch_means_se, effective_sample_size
from skclt.rng import stream

ESS_FLOOR = 50.0
BLOCK_ELEMENTS = 1 << 16
N_BATCHES = 40


@nb.njit(cache=True)
def _sweep_block(J, beta, h, spins, fields, energy, u, sweep0, burn_in, thin,
                 out_E, out_S, out_R, rec):
    """Run u.shape[1] systematic sweeps of every chain; returns the record count."""
    n_chains, n = spins.shape
    n_sweeps = u.shape[1]
    for s in range(n_sweeps):
        for c in range(n_chains):
            sp = spins[c]
            fl = fields[c]
            for i in range(n):
                si = sp[i]
                d = -2.0 * si * (beta * fl[i] + h)
                if d >= 0.0 or u[c, s, i] < math.exp(d):
                    energy[c] -= 2.0 * si * fl[i]
                    sp[i] = -si
                    f = 2.0 * si
                    Ji = J[i]
                    for j in range(n):
                        fl[j] -= f * Ji[j]
        done = sweep0 + s + 1
        if done > burn_in and (done - burn_in) % thin == 0 and rec < out_E.shape[1]:
            p = 0
            for c in range(n_chains):
                out_E[c, rec] = energy[c]
                tot = 0.0
                for i in range(n):
                    tot += spins[c, i]
                out_S[c, rec] = tot
                for c2 in range(c + 1, n_chains):
                    ov = 0.0
                    for i in range(n):
                        ov += spins[c, i] * spins[c2, i]
                    out_R[p, rec] = ov / n
                    p += 1
            rec += 1
    return rec


@dataclass
class SpinState:
    """Spins with cached local fields ``sum_j g_ij sigma_j / sqrt(N)`` and E_N."""

    spins: np.ndarray
    cached_fields: np.ndarray
    energy_accum: float

    @classmethod
    def from_spins(cls, spins, J_scaled) -> SpinState:
        s = np.asarray(spins, dtype=float).copy()
        f = J_scaled @ s
        return cls(s, f, float(0.5 * s @ f))

    def refresh(self, J_scaled) -> None:
        self.cached_fields = J_scaled @ self.spins
        self.energy_accum = float(0.5 * self.spins @ self.cached_fields)

    def field_drift(self, J_scaled) -> float:
        return float(np.max(np.abs(J_scaled @ self.spins - self.cached_fields)))


def scaled_couplings(disorder: Disorder) -> np.ndarray:
    return np.ascontiguousarray(disorder.matrix() / math.sqrt(disorder.n_spins))


def flip_log_ratio(state: SpinState, i: int, beta: float, h: float) -> float:
    """log of the Gibbs weight ratio for flipping spin i."""
    si = state.spins[i]
    return float(-2.0 * si * (beta * state.cached_fields[i] + h))


def acceptance_probability(state: SpinState, i: int, beta: float, h: float) -> float:
    return min(1.0, math.exp(flip_log_ratio(state, i, beta, h)))


def metropolis_sweep(state: SpinState, disorder, params: ModelParams, rng: np.random.Generator,
                     J_scaled=None) -> SpinState:
    """One systematic pass over the sites, updating ``state`` in place."""
    J = scaled_couplings(disorder) if J_scaled is None else J_scaled
    n = len(state.spins)
    u = rng.random((1, 1, n))
    spins = state.spins.reshape(1, n)
    fields = state.cached_fields.reshape(1, n)
    energy = np.array([state.energy_accum])
    dummy = np.zeros((1, 0))
    _sweep_block(J, params.beta, params.h, spins, fields, energy, u, 0, 0, 1,
                 dummy, dummy, np.zeros((0, 0)), 0)
    state.energy_accum = float(energy[0])
    return state


@dataclass(frozen=True)
class ChainConfig:
    """Sweeps are counted from the start; the first ``burn_in`` are discarded
    and every ``thin``-th of the rest is recorded."""

    sweeps: int = 20_000
    burn_in: int = 2_000
    thin: int = 5
    n_chains: int = 4
    seed_path: tuple = (0, 0)

    def __post_init__(self):
        if not (self.sweeps > self.burn_in >= 0):
            raise ValueError(f"need sweeps > burn_in >= 0, got {self.sweeps}, {self.burn_in}")
        if self.thin < 1:
            raise ValueError(f"thin must be >= 1, got {self.thin}")
        if self.n_chains < 2:
            raise ValueError(f"n_chains must be >= 2, got {self.n_chains}")
        if (self.sweeps - self.burn_in) // self.thin < 2:
            raise ValueError("fewer than two recorded sweeps per chain")

    @property
    def n_records(self) -> int:
        return (self.sweeps - self.burn_in) // self.thin

    def to_dict(self) -> dict:
        return {"sweeps": self.sweeps, "burn_in": self.burn_in, "thin": self.thin,
                "n_chains": self.n_chains, "seed_path": list(self.seed_path)}


@dataclass
class PerDisorderEstimate:
    """Thinned chain output for one disorder draw plus derived summaries.

    ``E`` and ``M`` have shape (n_chains, n_records) and hold the normalized
    energy and magnetization; ``overlaps`` has one row per chain pair.
    """

    disorder_index: int
    disorder_seed: int
    n_spins: int
    E: np.ndarray
    M: np.ndarray
    overlaps: np.ndarray
    ess: float
    low_ess: bool
    summary: dict = field(default_factory=dict)

    @property
    def H(self) -> np.ndarray:
        return self.E + self.M

    @property
    def n_chains(self) -> int:
        return self.E.shape[0]

    def halves(self):
        """Chain index sets of the two disjoint halves."""
        k = self.n_chains // 2
        return np.arange(k), np.arange(k, self.n_chains)

    def mean_H(self) -> float:
        return float(self.H.mean())

    def split_means(self, f=None) -> tuple[float, float]:
        """Means of f(H) over each chain half (independent given the disorder)."""
        x = self.H if f is None else f(self.H)
        a, b = self.halves()
        return float(x[a].mean()), float(x[b].mean())


def _summaries(E, M, R, q2):
    H = E + M
    series = {
        "E": E.mean(axis=0), "M": M.mean(axis=0), "H": H.mean(axis=0),
        "H2": (H * H).mean(axis=0), "R": R.mean(axis=0), "R2": (R * R).mean(axis=0),
        "Rdev2": ((R - q2) ** 2).mean(axis=0),
    }
    out = {}
    for k, s in series.items():
        out[f"mean_{k}"] = float(s.mean())
        out[f"se_{k}"] = batch_means_se(s, N_BATCHES)
    out["chain_mean_H"] = H.mean(axis=1).tolist()
    out["chain_var_H"] = H.var(axis=1, ddof=1).tolist()
    out["var_H_plugin"] = float(H.var())
    return out


def run_chains(disorder: Disorder, params: ModelParams, config: ChainConfig, moments=None,
               disorder_index: int | None = None) -> PerDisorderEstimate:
    """Run ``config.n_chains`` independent chains on one disorder.

    Chain c uses stream ``config.seed_path + (c,)``.
    """
    n = disorder.n_spins
    if moments is None:
        from skclt.theory import solve_q2
        moments = solve_q2(params)
    norm = Normalizer(n, params.beta, moments[1], moments[2])
    J = scaled_couplings(disorder)
    C = config.n_chains
    gens = [stream(*config.seed_path, c) for c in range(C)]
    spins = np.array([np.where(g.random(n) < 0.5, 1.0, -1.0) for g in gens])
    fields = spins @ J
    energy = 0.5 * np.einsum("ci,ci->c", spins, fields)
    T = config.n_records
    out_E = np.zeros((C, T))
    out_S = np.zeros((C, T))
    out_R = np.zeros((C * (C - 1) // 2, T))
    block = max(1, BLOCK_ELEMENTS // n)
    done = rec = 0
    while done < config.sweeps:
        b = min(block, config.sweeps - done)
        u = np.stack([g.random((b, n)) for g in gens])
        rec = _sweep_block(J, params.beta, params.h, spins, fields, energy, u, done,
                           config.burn_in, config.thin, out_E, out_S, out_R, rec)
        done += b
        # drop accumulated rounding in the incremental fields
        fields = spins @ J
        energy = 0.5 * np.einsum("ci,ci->c", spins, fields)
    assert rec == T
    E = norm.energy(out_E)
    M = norm.magnetization(out_S)
    H = E + M
    ess = min(effective_sample_size(H[c]) for c in range(C))
    idx = config.seed_path[1] if disorder_index is None else disorder_index
    est = PerDisorderEstimate(idx, disorder.seed, n, E, M, out_R, ess, ess < ESS_FLOOR)
    est.summary = _summaries(E, M, out_R, moments[2])
    return est


@dataclass
class Ensemble:
    params: ModelParams
    config: ChainConfig
    master_seed: int
    estimates: list

    @property
    def n_disorders(self) -> int:
        return len(self.estimates)

    def annealed_sample(self) -> np.ndarray:
        """H from chain 0 of every disorder, concatenated in disorder order."""
        return np.concatenate([e.H[0] for e in self.estimates])

    def quenched_means(self) -> np.ndarray:
        """<H> per disorder, each from all of its chains."""
        return np.array([e.mean_H() for e in self.estimates])

    def subset(self, n_disorders: int) -> Ensemble:
        return Ensemble(self.params, self.config, self.master_seed, self.estimates[:n_disorders])

    def summary_rows(self) -> list[dict]:
        rows = []
        c = self.config
        for e in self.estimates:
            row = {"disorder_idx": e.disorder_index, "seed": e.disorder_seed, "master_seed": self.master_seed,
                   "N": e.n_spins, "beta": self.params.beta, "h": self.params.h, "sweeps": c.sweeps,
                   "burn_in": c.burn_in, "thin": c.thin, "n_chains": c.n_chains, "ess": e.ess, "low_ess": e.low_ess}
            row.update({k: v for k, v in e.summary.items() if not isinstance(v, list)})
            rows.append(row)
        return rows

    def sample_rows(self):
        """Thinned samples, one dict per (disorder, chain, record)."""
        c = self.config
        for e in self.estimates:
            for ch in range(e.n_chains):
                for t in range(e.E.shape[1]):
                    yield {"disorder_idx": e.disorder_index, "chain_idx": ch,
                           "sweep": c.burn_in + (t + 1) * c.thin,
                           "E_script": float(e.E[ch, t]), "M_script": float(e.M[ch, t]),
                           "H_script": float(e.E[ch, t] + e.M[ch, t])}


SUMMARY_COLUMNS = ["disorder_idx", "seed", "master_seed", "N", "beta", "h", "sweeps", "burn_in", "thin",
                   "n_chains", "ess", "low_ess", "mean_E", "se_E",
                   "mean_M", "se_M", "mean_H", "se_H", "mean_H2", "se_H2", "mean_R", "se_R",
                   "mean_R2", "se_R2", "mean_Rdev2", "se_Rdev2", "var_H_plugin"]
SAMPLE_COLUMNS = ["disorder_idx", "chain_idx", "sweep", "E_script", "M_script", "H_script"]


def _one_disorder(args):
    params, config, master_seed, d, moments = args
    seed = disorder_seed(master_seed, d)
    disorder = sample_disorder(params.n_spins, seed)
    cfg = replace(config, seed_path=(master_seed, d))
    return run_chains(disorder, params, cfg, moments, d)


def disorder_ensemble(params: ModelParams, n_disorders: int, config: ChainConfig, master_seed: int,
                      moments=None, workers: int = 1) -> Ensemble:
    """Independent disorders ``0..n_disorders-1``, merged in index order.

    Disorder d has couplings from ``disorder_seed(master_seed, d)`` and chain
    streams ``(master_seed, d, c)``, so the output does not depend on
    ``workers``.
    """
    if n_disorders < 1:
        raise ValueError("n_disorders must be >= 1")
    if moments is None:
        from skclt.theory import solve_q2
        moments = solve_q2(params)
    q = {p: moments[p] for p in range(0, 5)}
    jobs = [(params, config, master_seed, d, q) for d in range(n_disorders)]
    if workers > 1:
        with ProcessPoolExecutor(workers) as ex:
            estimates = list(ex.map(_one_disorder, jobs, chunksize=max(1, n_disorders // (4 * workers))))
    else:
        estimates = [_one_disorder(j) for j in jobs]
    return Ensemble(params, config, master_seed, estimates)


def pair_index(n_chains: int) -> list[tuple[int, int]]:
    return list(combinations(range(n_chains), 2))

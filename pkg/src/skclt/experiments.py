"""The canonical experiments and their persisted outputs."""

from __future__ import annotations

import datetime as _dt
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from skclt import __version__
from skclt.gibbs_exact import disorder_average_exact, enumerate_gibbs, sample_disorder
from skclt.io import sha256_file, write_json
from skclt.mc import ChainConfig, Ensemble, disorder_ensemble
from skclt.params import ModelParams
from skclt.resample import jackknife
from skclt import stats
from skclt.theory import solve_q2, theory_report

DEFAULT_POINT = (0.25, 0.3)
DEFAULT_SIZES = (32, 64, 128, 256)
DEFAULT_DISORDERS = 200
VALIDATION_SIZES = (8, 10, 12)
VALIDATION_SE = 4.0
CF_POINTS = (0.0, 0.5, 1.0, 2.0, 3.0, 4.0, 6.0)
QUENCHED_STEIN_FUNCTION = "tanh"


def _now() -> str:
    return _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds")


@dataclass
class RunManifest:
    experiment: str
    master_seed: int
    params: list
    chain_config: dict | None
    options: dict = field(default_factory=dict)
    tool_version: str = __version__
    started: str = field(default_factory=_now)
    finished: str | None = None
    status: str = "running"
    outputs: dict = field(default_factory=dict)

    def write(self, path) -> Path:
        return write_json(path, asdict(self))

    def finalize(self, path, outputs, status="ok") -> Path:
        self.finished = _now()
        self.status = status
        self.outputs = {str(Path(p).name): sha256_file(p) for p in outputs if Path(p).exists()}
        return self.write(path)


# theory

def run_theory(params: ModelParams, n: int = 1):
    return theory_report(params, n)


# exact validation

VALIDATED = (("mean_E", "mean_E_script"), ("mean_M", "mean_M_script"), ("mean_H", "mean_H_script"),
             ("mean_H2", "second_H_script"), ("mean_R", "overlap_mean"), ("mean_R2", "overlap_second"))


def run_validate(beta: float, h: float, sizes=VALIDATION_SIZES, n_disorders: int = 20,
                 config: ChainConfig | None = None, master_seed: int = 0) -> tuple[list, bool]:
    """Compare Monte Carlo against exact enumeration, one row per observable.

    Returns the rows and whether every observable is within 4 SE.
    """
    config = config or ChainConfig()
    rows, ok = [], True
    for n in sizes:
        params = ModelParams(beta, h, n)
        moments = solve_q2(params)
        ens = disorder_ensemble(params, n_disorders, config, master_seed, moments)
        for est in ens.estimates:
            exact = enumerate_gibbs(sample_disorder(n, est.disorder_seed), params, moments)
            for mc_key, ex_key in VALIDATED:
                mc, se = est.summary[mc_key], est.summary["se_" + mc_key[5:]]
                ex = getattr(exact, ex_key)
                z = (mc - ex) / se if se > 0 else (0.0 if mc == ex else math.inf)
                within = abs(z) <= VALIDATION_SE
                ok &= within
                rows.append({"N": n, "beta": beta, "h": h, "disorder_idx": est.disorder_index,
                             "seed": est.disorder_seed, "master_seed": master_seed, "observable": mc_key,
                             "exact": float(ex), "mc": mc, "se": se, "z": float(z), "within_4se": within,
                             "sweeps": config.sweeps, "burn_in": config.burn_in, "thin": config.thin,
                             "n_chains": config.n_chains})
    return rows, ok


def run_exact_average(params: ModelParams, n_disorders: int, master_seed: int):
    moments = solve_q2(params)
    avg = disorder_average_exact(params, n_disorders, master_seed, moments)
    return avg, avg.rows(moments[2])


# Monte Carlo scans

def simulate_sizes(beta: float, h: float, sizes, n_disorders: int, config: ChainConfig,
                   master_seed: int, workers: int = 1) -> dict:
    """One disorder ensemble per size, keyed by N."""
    moments = solve_q2(ModelParams(beta, h))
    return {n: disorder_ensemble(ModelParams(beta, h, n), n_disorders, config, master_seed, moments, workers)
            for n in sizes}


@dataclass
class ScanRow:
    N: int
    beta: float
    h: float
    n_disorders: int
    master_seed: int
    sweeps: int
    burn_in: int
    thin: int
    n_chains: int
    w1_H_annealed: float
    levy_quenched_median: float
    levy_quenched_iqr: float
    levy_quenched_null_median: float
    mean_annealed_H: float
    var_annealed_H: float
    var_annealed_H_se: float
    var_quenched_H: float
    var_quenched_H_se: float
    var_quenched_mean_H: float
    var_quenched_mean_H_se: float
    var_quenched_mean_H_naive: float
    overlap_dev2: float
    overlap_dev2_se: float
    sigma_A2_theory: float
    sigma_Q2_sim: float
    sigma_Q2_sim_se: float
    sigma_Q2_rs_hessian: float
    sigma_Q2_variant_A: float
    sigma_Q2_variant_B: float
    quenched_stein: float
    quenched_stein_se: float
    quenched_stein_naive: float
    variance_concentration: float
    variance_concentration_se: float
    variance_concentration_naive: float
    stein_annealed: dict = field(default_factory=dict)

    def flat(self) -> dict:
        d = asdict(self)
        res = d.pop("stein_annealed")
        for name, r in res.items():
            d[f"stein_annealed_{name}"] = r["residual"]
            d[f"stein_annealed_{name}_se"] = r["se"]
        return d


def overlap_deviation2(ens: Ensemble, q2: float) -> tuple[float, float]:
    """nu((R_12 - q2)^2) averaged over chain pairs and disorders, SE over disorders."""
    vals = np.array([np.mean((e.overlaps - q2) ** 2) for e in ens.estimates])
    return jackknife(vals)


def annealed_variance(ens: Ensemble) -> tuple[float, float]:
    """Variance of H under the annealed measure, SE by jackknife over disorders."""
    x = np.array([(e.H[0].mean(), (e.H[0] ** 2).mean()) for e in ens.estimates])
    return jackknife(x, lambda a: a[:, 1].mean() - a[:, 0].mean() ** 2)


def quenched_variance_limit(ensembles: dict) -> dict:
    """sigma_Q^2 from the quenched variances at each size, extrapolated in 1/N."""
    sizes = sorted(ensembles)
    per = {n: stats.quenched_variance(ensembles[n].estimates) for n in sizes}
    if len(sizes) < 2:
        v, se = per[sizes[0]]
        return {"limit": v, "se": se, "slope": float("nan"), "per_size": per}
    fit = stats.extrapolate_inverse_n(sizes, [per[n][0] for n in sizes], [per[n][1] for n in sizes])
    fit["per_size"] = {n: per[n] for n in sizes}
    return fit


def centered_levy(est, sigma: float) -> float:
    x = est.H.ravel()
    return stats.levy_to_gaussian(x - x.mean(), 0.0, sigma)


def _null_levy(est, sigma, seed):
    # same shape, exactly Gaussian: finite-sample floor of the Levy statistic
    rng = np.random.default_rng(seed)
    x = rng.normal(0.0, sigma, est.H.size)
    return stats.levy_to_gaussian(x - x.mean(), 0.0, sigma)


def scan_rows(ensembles: dict, theory=None, sigma_q2: dict | None = None) -> tuple[list, dict]:
    """Every per-size diagnostic.

    Returns the rows (ascending N), a summary with the sigma_Q^2 fit and the
    W1 scaling fit, and the per-disorder Levy distances keyed by N.
    """
    sizes = sorted(ensembles)
    first = ensembles[sizes[0]]
    p = ModelParams(first.params.beta, first.params.h)
    theory = theory or theory_report(p, 1)
    sq = sigma_q2 or quenched_variance_limit(ensembles)
    s_q2 = sq["limit"]
    s_q = math.sqrt(s_q2)
    s_a = math.sqrt(theory.sigma_A2_H)
    q2 = theory.q[1]  # q holds q_1..q_6
    annealed_fns = [stats.stein_solve(tf, None, s_a) for tf in stats.battery()]
    quenched_fn = stats.stein_solve(stats.battery([QUENCHED_STEIN_FUNCTION])[0], None, s_q)
    rows = []
    per_disorder_levy = {}
    for n in sizes:
        ens = ensembles[n]
        cfg = ens.config
        est = ens.estimates
        annealed = ens.annealed_sample()
        levy = np.array([centered_levy(e, s_q) for e in est])
        per_disorder_levy[n] = levy
        null = np.median([_null_levy(e, s_q, 1000 * n + i) for i, e in enumerate(est[:50])])
        va, va_se = annealed_variance(ens)
        vq, vq_se = sq["per_size"][n]
        vm = stats.across_disorder_variance(est)
        od, od_se = overlap_deviation2(ens, q2)
        qs = stats.quenched_stein_residual(est, s_q2, quenched_fn)
        vc = stats.variance_concentration(est, s_q2)
        groups = np.repeat(np.arange(len(est)), est[0].H.shape[1])
        rows.append(ScanRow(
            N=n, beta=p.beta, h=p.h, n_disorders=len(est), master_seed=ens.master_seed,
            sweeps=cfg.sweeps, burn_in=cfg.burn_in, thin=cfg.thin, n_chains=cfg.n_chains,
            w1_H_annealed=stats.wasserstein1_to_gaussian(annealed, 0.0, s_a),
            levy_quenched_median=float(np.median(levy)),
            levy_quenched_iqr=float(np.subtract(*np.percentile(levy, [75, 25]))),
            levy_quenched_null_median=float(null),
            mean_annealed_H=float(annealed.mean()),
            var_annealed_H=va, var_annealed_H_se=va_se,
            var_quenched_H=vq, var_quenched_H_se=vq_se,
            var_quenched_mean_H=vm["estimate"], var_quenched_mean_H_se=vm["se"],
            var_quenched_mean_H_naive=vm["naive"],
            overlap_dev2=od, overlap_dev2_se=od_se,
            sigma_A2_theory=theory.sigma_A2_H, sigma_Q2_sim=s_q2, sigma_Q2_sim_se=sq["se"],
            sigma_Q2_rs_hessian=theory.sigma_Q2_rs_hessian,
            sigma_Q2_variant_A=theory.sigma_Q2_variant_A, sigma_Q2_variant_B=theory.sigma_Q2_variant_B,
            quenched_stein=qs["estimate"], quenched_stein_se=qs["se"], quenched_stein_naive=qs["naive"],
            variance_concentration=vc["estimate"], variance_concentration_se=vc["se"],
            variance_concentration_naive=vc["naive"],
            stein_annealed=stats.annealed_stein_residual(annealed, theory.sigma_A2_H, annealed_fns, groups),
        ))
    w1 = [r.w1_H_annealed for r in rows]
    summary = {
        "beta": p.beta, "h": p.h, "sizes": sizes,
        "sigma_A2_theory": theory.sigma_A2_H,
        "sigma_Q2_sim": s_q2, "sigma_Q2_sim_se": sq["se"], "sigma_Q2_inverse_n_slope": sq["slope"],
        "sigma_Q2_rs_hessian": theory.sigma_Q2_rs_hessian,
        "sigma_Q2_variant_A": theory.sigma_Q2_variant_A, "sigma_Q2_variant_B": theory.sigma_Q2_variant_B,
        "w1_fit": stats.scaling_fit(sizes, w1, _bootstrap_w1(ensembles, s_a)).to_dict() if len(sizes) >= 3 else None,
    }
    return rows, summary, per_disorder_levy


def _bootstrap_w1(ensembles, sigma, n_boot=100, seed=0):
    sizes = sorted(ensembles)
    out = np.empty((n_boot, len(sizes)))
    rng = np.random.default_rng(seed)
    for j, n in enumerate(sizes):
        chunks = [e.H[0] for e in ensembles[n].estimates]
        d = len(chunks)
        for b in range(n_boot):
            idx = rng.integers(0, d, d)
            out[b, j] = stats.wasserstein1_to_gaussian(np.concatenate([chunks[i] for i in idx]), 0.0, sigma)
    return out


def quenched_mean_table(ens: Ensemble, sigma_A2: float, sigma_Q2: float, t_values=CF_POINTS) -> dict:
    """Across-disorder law of <H>: Levy distance to N(0, sigma_A2 - sigma_Q2) and CF table."""
    means = ens.quenched_means()
    gap = sigma_A2 - sigma_Q2
    var = stats.across_disorder_variance(ens.estimates)
    cf = stats.empirical_cf(means, t_values)
    rows = [{"t": t, "cf_real": c.value.real, "cf_imag": c.value.imag, "modulus": c.modulus,
             "phase": c.phase, "se": c.se, "gaussian": math.exp(-max(gap, 0.0) * t * t / 2)}
            for t, c in cf.items()]
    return {
        "N": ens.params.n_spins, "n_disorders": ens.n_disorders,
        "variance_gap_theory": gap, "across_disorder_variance": var["estimate"],
        "across_disorder_variance_se": var["se"], "across_disorder_variance_naive": var["naive"],
        "levy": stats.levy_to_gaussian(means, 0.0, math.sqrt(max(gap, 0.0))),
        "cf": rows, "means": means.tolist(),
    }

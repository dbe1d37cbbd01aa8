"""Acceptance gate: the ten primary criteria at their stated tolerances.

The Monte Carlo criteria share two session-scoped ensembles. Their
configuration and seed are fixed here, before any result is looked at.
"""

import math
import os

import numpy as np
import pytest

from skclt import stats
from skclt.experiments import (
    annealed_variance,
    overlap_deviation2,
    quenched_variance_limit,
    run_validate,
    scan_rows,
    simulate_sizes,
)
from skclt.mc import ChainConfig
from skclt.params import ModelParams
from skclt.theory import (
    build_covariance,
    build_replica_matrix,
    nu0_moment,
    sigma_a2_energy,
    solve_q2,
    theory_report,
)
from skclt.theory.moments import fixed_point_map

from test_theory import BETAS, FIELDS, case_table_oracle, conditional_quadrature_nu0

pytestmark = pytest.mark.acceptance

BETA, H = 0.25, 0.3
SIZES = (32, 64, 128, 256)
N_DISORDERS = 400
OVERLAP_DISORDERS = 200
ZERO_FIELD_DISORDERS = 200
SEED = 20081
CONFIG = ChainConfig(sweeps=5000, burn_in=1000, thin=5, n_chains=8)
WORKERS = os.cpu_count() or 1


def _record(record_property, num, label, detail=""):
    record_property("criterion", num)
    record_property("label", label)
    record_property("detail", detail)


@pytest.fixture(scope="session")
def ensembles():
    return simulate_sizes(BETA, H, SIZES, N_DISORDERS, CONFIG, SEED, WORKERS)


@pytest.fixture(scope="session")
def zero_field():
    return simulate_sizes(BETA, 0.0, SIZES, ZERO_FIELD_DISORDERS, CONFIG, SEED + 1, WORKERS)


@pytest.fixture(scope="session")
def theory():
    return theory_report(ModelParams(BETA, H), 1)


@pytest.fixture(scope="session")
def scan(ensembles, theory):
    rows, summary, levy = scan_rows(ensembles, theory)
    return {r.N: r for r in rows}, summary, levy


def _decreasing(xs):
    return all(b < a for a, b in zip(xs, xs[1:]))


def _fmt(xs):
    return "[" + ", ".join(f"{x:.4g}" for x in xs) + "]"


def test_criterion_01_theory_consistency(record_property):
    _record(record_property, 1, "theory internal consistency")
    worst = 0.0
    for beta in BETAS:
        for h in FIELDS:
            m = solve_q2(ModelParams(beta, h))
            worst = max(worst, abs(fixed_point_map(m.q2, beta, h, m.node_count) - m.q2))
    rng = np.random.default_rng(1)
    m = solve_q2(ModelParams(BETA, H))
    nu_err = 0.0
    for _ in range(50):
        idx = rng.integers(1, 7, size=rng.integers(1, 10)).tolist()
        nu_err = max(nu_err, abs(nu0_moment(idx, m) - conditional_quadrature_nu0(idx, BETA, H, m.q2)))
    a_err = 0.0
    for beta, h in ((0.25, 0.3), (0.1, 0.8), (0.45, 0.05)):
        mm = solve_q2(ModelParams(beta, h))
        for n in range(1, 7):
            a_err = max(a_err, float(np.max(np.abs(
                build_replica_matrix(n, mm).entries - case_table_oracle(n, mm[2], mm[4])))))
    record_property("detail", f"q2 residual {worst:.1e}, nu0 err {nu_err:.1e}, replica matrix err {a_err:.1e}")
    assert worst < 1e-12
    assert nu_err < 1e-10
    assert a_err <= 1e-14


def test_criterion_02_zero_field(record_property):
    _record(record_property, 2, "zero-field closed forms")
    worst = 0.0
    for beta in BETAS:
        p = ModelParams(beta, 0.0)
        assert sigma_a2_energy(p) == 0.5
        c = build_covariance(1, p).entries
        worst = max(worst, float(np.max(np.abs(c - np.diag([0.5, 1.0])))))
    record_property("detail", f"max |cov - diag(1/2, 1)| = {worst:.1e}")
    assert worst < 1e-12


def test_criterion_03_mc_vs_enumeration(record_property):
    _record(record_property, 3, "MC vs enumeration")
    rows, ok = run_validate(BETA, H, (8, 10, 12), 20, ChainConfig(), SEED)
    zmax = max(abs(r["z"]) for r in rows)
    bad = [r for r in rows if not r["within_4se"]]
    record_property("detail", f"{len(rows)} rows, max |z| = {zmax:.2f}, beyond 4 SE: {len(bad)}")
    assert ok and not bad


def test_criterion_04_overlap_concentration(record_property, ensembles, theory):
    _record(record_property, 4, "overlap concentration slope")
    q2 = theory.q[1]
    vals = [overlap_deviation2(ensembles[n].subset(OVERLAP_DISORDERS), q2)[0] for n in SIZES]
    fit = stats.scaling_fit(SIZES, vals)
    record_property("detail", f"slope {fit.slope:.3f}, values {_fmt(vals)}")
    assert -1.3 <= fit.slope <= -0.7


def test_criterion_05_annealed_clt(record_property, scan):
    _record(record_property, 5, "annealed CLT (W1)")
    rows, summary, _ = scan
    w1 = [rows[n].w1_H_annealed for n in SIZES]
    fit = summary["w1_fit"]
    record_property("detail", f"W1 {_fmt(w1)}, slope {fit['slope']:.3f} "
                              f"CI [{fit['slope_ci_low']:.2f}, {fit['slope_ci_high']:.2f}]")
    assert _decreasing(w1)
    assert fit["slope"] < -0.2
    assert w1[-1] < 0.1


def test_criterion_06_quenched_clt(record_property, scan):
    _record(record_property, 6, "quenched CLT (median Levy)")
    rows, summary, _ = scan
    med = [rows[n].levy_quenched_median for n in SIZES]
    null = rows[SIZES[-1]].levy_quenched_null_median
    record_property("detail", f"median Levy {_fmt(med)}, Gaussian floor at N={SIZES[-1]}: {null:.4f}, "
                              f"sigma_Q2_sim {summary['sigma_Q2_sim']:.4f}")
    assert _decreasing(med)
    assert med[-1] < 0.08


def _synthetic_conditional_gaussian(sigma2, n_disorders=300, n_chains=8, n_records=400, seed=3):
    rng = np.random.default_rng(seed)
    mu = rng.normal(0.0, 0.3, n_disorders)
    return [m + math.sqrt(sigma2) * rng.standard_normal((n_chains, n_records)) for m in mu]


def test_criterion_07_quenched_residuals(record_property, scan):
    _record(record_property, 7, "quenched Stein and variance residuals")
    rows, summary, _ = scan
    qs = [rows[n].quenched_stein for n in SIZES]
    vc = [rows[n].variance_concentration for n in SIZES]
    s2 = summary["sigma_Q2_sim"]
    data = _synthetic_conditional_gaussian(s2)
    f = stats.stein_solve(stats.battery(["tanh"])[0], None, math.sqrt(s2))
    null_s = stats.quenched_stein_residual(data, s2, f)
    null_v = stats.variance_concentration(data, s2)
    zs = null_s["estimate"] / null_s["se"]
    zv = null_v["estimate"] / null_v["se"]
    record_property("detail", f"stein {_fmt(qs)}, variance {_fmt(vc)}, null z {zs:.2f} / {zv:.2f}")
    assert abs(zs) < 3 and abs(zv) < 3
    assert _decreasing(qs)
    assert _decreasing(vc)


def test_criterion_08_quenched_mean(record_property, scan, zero_field):
    _record(record_property, 8, "quenched-mean variance and zero-field degeneracy")
    rows, summary, _ = scan
    big = rows[SIZES[-1]]
    gap = summary["sigma_A2_theory"] - summary["sigma_Q2_sim"]
    rel = abs(big.var_quenched_mean_H - gap) / abs(gap)
    z0 = [stats.across_disorder_variance(zero_field[n].estimates)["estimate"] for n in SIZES]
    record_property("detail", f"Var<H> at N={SIZES[-1]} = {big.var_quenched_mean_H:.4f} "
                              f"+- {big.var_quenched_mean_H_se:.4f}, gap {gap:.4f} +- {summary['sigma_Q2_sim_se']:.4f}"
                              f" (rel err {rel:.1%}); h=0: {_fmt(z0)}")
    assert rel <= 0.15
    assert z0[-1] < 0.05
    assert _decreasing(z0)


def test_criterion_09_stein_machinery(record_property):
    _record(record_property, 9, "Stein solver bounds and Gaussian residual")
    out = []
    for sigma in (0.5, 1.0, math.sqrt(1.4), 2.0):
        for tf in stats.battery(["tanh", "arctan"]):
            st = stats.stein_solve(tf, None, sigma)
            for k, bound in st.bounds.items():
                assert st.observed[k] <= bound + 1e-6, (tf.name, sigma, k)
            assert st.ode_residual() < 1e-8
    x = np.random.default_rng(9).normal(0.0, math.sqrt(1.4), 200_000)
    res = stats.annealed_stein_residual(x, 1.4)
    for name, r in res.items():
        out.append(f"{name} z={r['signed'] / r['se']:.2f}")
        assert abs(r["signed"]) < 3 * r["se"]
    record_property("detail", ", ".join(out))


def test_criterion_10_sigma_q2_report(record_property, scan, theory):
    _record(record_property, 10, "sigma_Q^2 closed-form report")
    _, summary, _ = scan
    d = theory.to_dict()
    s = summary["sigma_Q2_sim"]
    record_property("detail", f"variant A {d['sigma_Q2_variant_A']:.5f}, variant B {d['sigma_Q2_variant_B']:.5f}, "
                              f"RS Hessian {d['sigma_Q2_rs_hessian']:.5f}, simulation {s:.5f}")
    assert "sigma_Q2_variant_A" in d and "sigma_Q2_variant_B" in d
    assert math.isfinite(d["sigma_Q2_variant_A"]) and math.isfinite(d["sigma_Q2_variant_B"])
    assert math.isfinite(s) and s > 0

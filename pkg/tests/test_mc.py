import math

import numpy as np
import pytest

from skclt.gibbs_exact import enumerate_gibbs, sample_disorder
from skclt.mc import (
    ChainConfig,
    SpinState,
    acceptance_probability,
    disorder_ensemble,
    flip_log_ratio,
    metropolis_sweep,
    run_chains,
    scaled_couplings,
)
from skclt.params import ModelParams
from skclt.rng import stream
from skclt.theory import solve_q2

P = ModelParams(0.25, 0.3)
MOM = solve_q2(P)


def random_state(disorder, seed):
    rng = np.random.default_rng(seed)
    return SpinState.from_spins(rng.choice([-1.0, 1.0], disorder.n_spins), scaled_couplings(disorder))


def test_config_validation():
    with pytest.raises(ValueError):
        ChainConfig(sweeps=10, burn_in=10)
    with pytest.raises(ValueError):
        ChainConfig(thin=0)
    with pytest.raises(ValueError):
        ChainConfig(n_chains=1)
    c = ChainConfig()
    assert (c.sweeps, c.burn_in, c.thin, c.n_chains) == (20000, 2000, 5, 4)
    assert c.n_records == 3600


def test_zero_delta_always_accepted():
    d = sample_disorder(1, 1)
    state = SpinState.from_spins([1.0], scaled_couplings(d))
    assert flip_log_ratio(state, 0, 0.7, 0.0) == 0.0
    assert acceptance_probability(state, 0, 0.7, 0.0) == 1.0


def test_zero_beta_zero_field_flips_everything():
    d = sample_disorder(16, 2)
    state = random_state(d, 0)
    before = state.spins.copy()
    metropolis_sweep(state, d, ModelParams(0.0, 0.0, 16), stream(1))
    np.testing.assert_array_equal(state.spins, -before)


def test_detailed_balance_ratio():
    d = sample_disorder(10, 3)
    J = scaled_couplings(d)
    rng = np.random.default_rng(4)
    for _ in range(50):
        beta, h = rng.uniform(0, 1.5), rng.uniform(-1, 1)
        state = random_state(d, int(rng.integers(1 << 30)))
        i = int(rng.integers(10))
        delta = flip_log_ratio(state, i, beta, h)
        fwd = acceptance_probability(state, i, beta, h)
        flipped = state.spins.copy()
        flipped[i] *= -1
        back = acceptance_probability(SpinState.from_spins(flipped, J), i, beta, h)
        assert fwd / back == pytest.approx(math.exp(delta), rel=1e-12)
        # delta equals the exact change of the log weight
        lw = lambda s: beta * 0.5 * s @ J @ s + h * s.sum()
        assert delta == pytest.approx(lw(flipped) - lw(state.spins), abs=1e-12)


def test_cached_field_drift():
    d = sample_disorder(32, 5)
    J = scaled_couplings(d)
    state = random_state(d, 1)
    rng = stream(2)
    p = ModelParams(0.25, 0.3, 32)
    for _ in range(10_000):
        metropolis_sweep(state, d, p, rng, J)
    assert state.field_drift(J) < 1e-7
    assert abs(state.energy_accum - 0.5 * state.spins @ J @ state.spins) < 1e-7
    assert set(np.unique(state.spins)) <= {-1.0, 1.0}


def test_single_spin_magnetization_matches_enumeration():
    n = 8
    p = P.with_size(n)
    d = sample_disorder(n, 11)
    exact = enumerate_gibbs(d, p, MOM).mean_spin[0]
    J = scaled_couplings(d)
    state = random_state(d, 3)
    rng = stream(12)
    x = []
    for s in range(30_000):
        metropolis_sweep(state, d, p, rng, J)
        if s >= 1000:
            x.append(state.spins[0])
    x = np.array(x)
    from skclt.resample import batch_means_se
    assert abs(x.mean() - exact) < 4 * batch_means_se(x, 40)


def test_run_chains_determinism():
    d = sample_disorder(16, 7)
    cfg = ChainConfig(sweeps=300, burn_in=50, thin=2, seed_path=(3, 0))
    a = run_chains(d, P.with_size(16), cfg, MOM)
    b = run_chains(d, P.with_size(16), cfg, MOM)
    np.testing.assert_array_equal(a.E, b.E)
    np.testing.assert_array_equal(a.overlaps, b.overlaps)
    assert a.E.shape == (4, 125) and a.overlaps.shape == (6, 125)
    assert np.all(np.abs(a.overlaps) <= 1) and a.ess > 0
    # distinct chains see distinct streams
    assert not np.array_equal(a.E[0], a.E[1])


def test_zero_beta_overlap_statistics():
    n = 64
    d = sample_disorder(n, 1)
    p = ModelParams(0.0, 0.0, n)
    est = run_chains(d, p, ChainConfig(sweeps=2100, burn_in=100, thin=1, seed_path=(5, 0)), solve_q2(p))
    R = est.overlaps.ravel()
    # at beta = 0, h = 0 every spin flips every sweep, so overlaps are constant in time;
    # the pairwise overlaps of the random initial states are mean 0, variance 1/n
    assert np.all(np.abs(R) <= 1)
    est = run_chains(d, ModelParams(0.0, 0.4, n), ChainConfig(sweeps=4100, burn_in=100, thin=1,
                                                               seed_path=(5, 1)), solve_q2(ModelParams(0.0, 0.4)))
    R = est.overlaps
    t2 = math.tanh(0.4) ** 2
    var = (1 - t2 ** 2) / n
    s = R.mean(axis=0)
    from skclt.resample import batch_means_se
    assert abs(s.mean() - t2) < 4 * batch_means_se(s, 40)
    assert abs(R[0].var() - var) < 0.15 * var


def test_zero_beta_overlap_ensemble():
    # each disorder contributes one independent overlap at beta = 0, h = 0
    n = 32
    p = ModelParams(0.0, 0.0, n)
    ens = disorder_ensemble(p, 300, ChainConfig(sweeps=3, burn_in=0, thin=1, n_chains=2), 17)
    r = np.array([e.overlaps[0, 0] for e in ens.estimates])
    assert abs(r.mean()) < 4 * math.sqrt(1 / n / len(r))
    assert abs(r.var() - 1 / n) < 4 * (1 / n) * math.sqrt(2 / len(r))


@pytest.mark.parametrize("seed", [0, 1])
def test_quenched_moments_match_enumeration(seed):
    n = 12
    p = P.with_size(n)
    d = sample_disorder(n, 1000 + seed)
    ex = enumerate_gibbs(d, p, MOM)
    est = run_chains(d, p, ChainConfig(sweeps=22_000, burn_in=2000, thin=5, seed_path=(9, seed)), MOM)
    s = est.summary
    assert abs(s["mean_H"] - ex.mean_H_script) < 4 * s["se_H"]
    assert abs(s["mean_H2"] - ex.second_H_script) < 4 * s["se_H2"]
    assert abs(s["mean_R"] - ex.overlap_mean) < 4 * s["se_R"]


def test_spin_flip_symmetry():
    n = 32
    d = sample_disorder(n, 50)
    cfg = ChainConfig(sweeps=12_000, burn_in=1000, thin=5, seed_path=(1, 0))
    a = run_chains(d, ModelParams(0.25, 0.3, n), cfg, MOM)
    moms = solve_q2(ModelParams(0.25, -0.3))
    b = run_chains(d, ModelParams(0.25, -0.3, n), replace_seed(cfg, (2, 0)), moms)
    ma, mb = a.summary["mean_M"], b.summary["mean_M"]
    se = math.hypot(a.summary["se_M"], b.summary["se_M"])
    assert abs(ma + mb) < 4 * se


def replace_seed(cfg, path):
    from dataclasses import replace
    return replace(cfg, seed_path=path)


def test_ensemble_worker_invariance():
    p = P.with_size(24)
    cfg = ChainConfig(sweeps=200, burn_in=20, thin=3)
    a = disorder_ensemble(p, 6, cfg, 4, MOM, workers=1)
    b = disorder_ensemble(p, 6, cfg, 4, MOM, workers=2)
    for x, y in zip(a.estimates, b.estimates):
        np.testing.assert_array_equal(x.E, y.E)
        np.testing.assert_array_equal(x.M, y.M)
    assert len(a.annealed_sample()) == 6 * cfg.n_records
    assert a.quenched_means().shape == (6,)
    rows = a.summary_rows()
    assert rows[0]["disorder_idx"] == 0 and rows[-1]["disorder_idx"] == 5
    samples = list(a.subset(1).sample_rows())
    assert len(samples) == 4 * cfg.n_records

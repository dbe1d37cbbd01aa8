import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from skclt.errors import EnumerationCapError
from skclt.gibbs_exact import (
    CSV_COLUMNS,
    disorder_average_exact,
    enumerate_gibbs,
    enumerate_naive,
    pair_counter,
    sample_disorder,
)
from skclt.params import ModelParams
from skclt.theory import solve_q2

P = ModelParams(0.25, 0.3)
MOM = solve_q2(P)


def test_disorder_determinism():
    a, b = sample_disorder(4, 42), sample_disorder(4, 42)
    np.testing.assert_array_equal(a.couplings, b.couplings)
    assert not np.array_equal(a.couplings, sample_disorder(4, 43).couplings)
    assert len(a.couplings) == 6


def test_disorder_prefix_stable_across_sizes():
    small, big = sample_disorder(6, 7), sample_disorder(10, 7)
    np.testing.assert_array_equal(big.matrix()[:6, :6], small.matrix())
    assert pair_counter(0, 1) == 0 and pair_counter(1, 2) == 2


def test_disorder_normality():
    g = sample_disorder(448, 3).couplings
    assert len(g) > 1e5
    n = len(g)
    assert abs(g.mean()) < 4 / math.sqrt(n)
    assert abs(g.var() - 1) < 4 * math.sqrt(2 / n)


def test_single_spin():
    d = sample_disorder(1, 1)
    for beta, h in ((0.3, 0.7), (1.0, -0.4)):
        m = enumerate_gibbs(d, ModelParams(beta, h, 1), MOM)
        assert m.log_Z == pytest.approx(math.log(2 * math.cosh(h)), abs=1e-14)
        assert m.mean_spin[0] == pytest.approx(math.tanh(h), abs=1e-14)


def test_two_spins_hand_algebra():
    d = sample_disorder(2, 5)
    g = d.couplings[0]
    beta, h = 0.7, 0.4
    m = enumerate_gibbs(d, ModelParams(beta, h, 2), MOM)
    a = beta * g / math.sqrt(2)
    Z = 2 * math.exp(a) * math.cosh(2 * h) + 2 * math.exp(-a)
    assert m.log_Z == pytest.approx(math.log(Z), abs=1e-13)
    corr = (math.exp(a) * math.cosh(2 * h) - math.exp(-a)) / (math.exp(a) * math.cosh(2 * h) + math.exp(-a))
    assert m.pair_corr[0, 1] == pytest.approx(corr, abs=1e-13)


def test_zero_beta_independent_spins():
    d = sample_disorder(6, 9)
    m = enumerate_gibbs(d, ModelParams(0.0, 0.5, 6), MOM)
    np.testing.assert_allclose(m.mean_spin, math.tanh(0.5), atol=1e-14)
    off = m.pair_corr[~np.eye(6, dtype=bool)]
    np.testing.assert_allclose(off, math.tanh(0.5) ** 2, atol=1e-14)
    m = enumerate_gibbs(d, ModelParams(0.0, 0.0, 6), MOM)
    np.testing.assert_allclose(m.mean_spin, 0, atol=1e-15)
    np.testing.assert_allclose(m.pair_corr[~np.eye(6, dtype=bool)], 0, atol=1e-15)


@pytest.mark.parametrize("n", [2, 3, 5, 8])
def test_matches_naive_enumerator(n):
    for seed in range(3):
        d = sample_disorder(n, 100 + seed)
        p = ModelParams(0.6, 0.2, n)
        a, b = enumerate_gibbs(d, p, MOM), enumerate_naive(d, p, MOM)
        assert a.log_Z == pytest.approx(b.log_Z, abs=1e-12)
        np.testing.assert_allclose(a.mean_spin, b.mean_spin, atol=1e-12)
        np.testing.assert_allclose(a.pair_corr, b.pair_corr, atol=1e-12)
        for f in ("mean_E_script", "mean_M_script", "mean_H_script", "second_H_script", "overlap_second"):
            assert getattr(a, f) == pytest.approx(getattr(b, f), abs=1e-12)


def test_log_z_permutation_invariance():
    d = sample_disorder(6, 21)
    p = ModelParams(0.5, 0.3, 6)
    base = enumerate_gibbs(d, p, MOM)
    perm = np.random.default_rng(1).permutation(6)
    other = enumerate_gibbs(d.permuted(perm), p, MOM)
    assert other.log_Z == pytest.approx(base.log_Z, abs=1e-12)
    np.testing.assert_allclose(other.mean_spin[perm], base.mean_spin, atol=1e-12)


def test_zero_field_symmetry():
    d = sample_disorder(10, 4)
    m = enumerate_gibbs(d, ModelParams(0.8, 0.0, 10), solve_q2(ModelParams(0.8, 0.0)))
    assert np.max(np.abs(m.mean_spin)) < 1e-12


def test_invariants_and_overlap_identities():
    d = sample_disorder(9, 2)
    m = enumerate_gibbs(d, P.with_size(9), MOM)
    assert np.all(np.abs(m.mean_spin) <= 1) and np.all(np.abs(m.pair_corr) <= 1 + 1e-15)
    assert m.var_H_script >= 0
    assert m.overlap_second >= m.overlap_mean ** 2
    assert m.overlap_mean == pytest.approx(np.mean(m.mean_spin ** 2), abs=1e-15)


def test_mgf_values():
    d = sample_disorder(7, 8)
    p = P.with_size(7)
    m = enumerate_gibbs(d, p, MOM, mgf_mu=[0.0, 0.3, -0.3])
    assert m.mgf[0.0] == pytest.approx(1.0, abs=1e-14)
    # Jensen
    assert m.mgf[0.3] >= math.exp(0.3 * m.mean_H_script)


def test_cap():
    with pytest.raises(EnumerationCapError):
        enumerate_gibbs(sample_disorder(21, 1), ModelParams(0.2, 0.1, 21), MOM)


def test_average_single_disorder_equals_enumeration():
    p = P.with_size(8)
    avg = disorder_average_exact(p, 1, master_seed=5, moments=MOM)
    single = avg.per_disorder[0]
    assert avg.mean_H[0] == single.mean_H_script
    assert avg.second_H[0] == single.second_H_script
    assert math.isnan(avg.mean_H[1])


def test_average_of_constant():
    p = P.with_size(6)
    avg = disorder_average_exact(p, 30, master_seed=5, moments=MOM)
    # the mean of <1> over disorders: log Z shift aside, <sigma_i^2> = 1
    diag = np.array([np.diag(m.pair_corr) for m in avg.per_disorder])
    np.testing.assert_allclose(diag, 1.0, atol=1e-14)


def test_average_worker_invariance():
    p = P.with_size(8)
    a = disorder_average_exact(p, 12, master_seed=9, moments=MOM)
    b = disorder_average_exact(p, 12, master_seed=9, moments=MOM, workers=3)
    assert a.rows(MOM.q2) == b.rows(MOM.q2)
    assert list(a.rows(MOM.q2)[0].keys()) == CSV_COLUMNS


def test_overlap_concentration_decreases():
    vals = []
    for n in (8, 12, 16):
        avg = disorder_average_exact(P.with_size(n), 100, master_seed=31, moments=MOM)
        vals.append(avg.overlap_dev2[0])
    assert vals[0] > vals[1] > vals[2]


@settings(max_examples=20, deadline=None)
@given(n=st.integers(1, 7), seed=st.integers(0, 2 ** 40), beta=st.floats(0, 1.5), h=st.floats(-1, 1))
def test_property_matches_naive(n, seed, beta, h):
    d = sample_disorder(n, seed)
    p = ModelParams(beta, h, n)
    a, b = enumerate_gibbs(d, p, MOM), enumerate_naive(d, p, MOM)
    assert a.log_Z == pytest.approx(b.log_Z, abs=1e-11)
    assert a.mean_H_script == pytest.approx(b.mean_H_script, abs=1e-11)

import math
import warnings

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import chisquare

from conftest import FOUR_CLUSTER_ALPHA, FOUR_CLUSTER_P, four_cluster_sizes, random_ergodic
from freeconc.bmc import (BmcSpec, bound_report, centered_scaled, chat_profile, dilation_covariance,
                          exact_covariance, expected_frequency, frak_params, frakd_bruteforce, frequency_matrix,
                          limiting_m, mhat, psi_transition_chain, simulate_path, state_equilibrium,
                          state_transition_matrix)
from freeconc.dependence import FiniteChain, capital_psi, stationary_distribution
from freeconc.errors import ConfigError, DomainError, ErgodicityError, ShapeError
from freeconc.matrix_core import v_param
from freeconc.montecarlo import GaussianModel

TWO = np.array([[0.5, 0.5], [0.2, 0.8]])


def spec_doc(**kw):
    doc = {"spec_version": 1, "K": 2, "p": TWO.tolist(), "cluster_sizes": [3, 4], "n": 100}
    doc.update(kw)
    return doc


def test_spec_roundtrip_and_properties():
    s = BmcSpec.from_dict(spec_doc())
    assert s.K == 2 and s.d == 7 and s.n == 100
    assert np.allclose(s.alpha_hat, [3 / 7, 4 / 7])
    assert list(s.labels) == [0, 0, 0, 1, 1, 1, 1]
    assert BmcSpec.from_dict(s.to_dict()).to_dict() == s.to_dict()
    doc = spec_doc()
    del doc["spec_version"]
    assert BmcSpec.from_dict(doc).d == 7


@pytest.mark.parametrize("doc", [
    spec_doc(extra=1), spec_doc(spec_version=2), spec_doc(K=3), spec_doc(n=2.5),
    spec_doc(cluster_sizes=[3]), spec_doc(p=[[0.5, 0.6], [0.2, 0.8]]), spec_doc(p=[[1, 0], [0, 1]]),
    spec_doc(cluster_sizes=[0, 4]), {"K": 1},
])
def test_spec_rejects_bad_documents(doc):
    with pytest.raises(ConfigError):
        BmcSpec.from_dict(doc)


def test_stationary_cases():
    assert np.allclose(BmcSpec(np.full((3, 3), 1 / 3), (1, 1, 1), 10).pi, 1 / 3)
    with pytest.raises(ErgodicityError):
        BmcSpec(np.array([[0.0, 1.0], [1.0, 0.0]]), (2, 2), 10)
    with pytest.raises(ErgodicityError):
        BmcSpec(np.array([[1.0, 0.0], [0.3, 0.7]]), (2, 2), 10)


def test_state_chain_is_consistent():
    s = BmcSpec(FOUR_CLUSTER_P, (2, 1, 3, 2), 50)
    P = state_transition_matrix(s)
    mu = state_equilibrium(s)
    assert np.allclose(P.sum(axis=1), 1)
    assert np.allclose(mu @ P, mu)


def test_simulate_k1_uniform():
    s = BmcSpec(np.array([[1.0]]), (7,), 100_000)
    z = simulate_path(s, 3)
    counts = np.bincount(z, minlength=7)
    assert chisquare(counts).pvalue > 1e-3


def test_simulate_transition_frequencies():
    s = BmcSpec(TWO, (2, 3), 200_000)
    z = simulate_path(s, 5)
    cl = s.labels[z]
    N = np.zeros((2, 2))
    np.add.at(N, (cl[:-1], cl[1:]), 1)
    emp = N / N.sum(axis=1, keepdims=True)
    assert np.allclose(emp, TWO, atol=0.01)


def test_simulate_determinism():
    s = BmcSpec(FOUR_CLUSTER_P, four_cluster_sizes(40), 1000)
    assert np.array_equal(simulate_path(s, 1), simulate_path(s, 1))
    assert not np.array_equal(simulate_path(s, 1), simulate_path(s, 2))


def test_frequency_matrix_examples():
    assert np.array_equal(frequency_matrix([0, 0, 0], 1), [[2]])
    N = frequency_matrix([0, 1, 2, 0], 3)
    assert np.array_equal(N, [[0, 1, 0], [0, 0, 1], [1, 0, 0]])
    with pytest.raises(DomainError):
        frequency_matrix([0])


@given(st.lists(st.integers(0, 4), min_size=2, max_size=60))
def test_frequency_matrix_total(path):
    assert frequency_matrix(path, 5).sum() == len(path) - 1


def test_expected_frequency_examples():
    s = BmcSpec(np.array([[1.0]]), (5,), 101)
    assert np.allclose(expected_frequency(s), 100 / 25)
    s = BmcSpec(FOUR_CLUSTER_P, (2, 1, 3, 2), 77)
    assert expected_frequency(s).sum() == pytest.approx(76)


def test_expected_frequency_monte_carlo():
    s = BmcSpec(TWO, (10, 10), 2000)
    T = 10_000
    acc = np.zeros((20, 20))
    acc2 = np.zeros((20, 20))
    for t in range(T):
        N = frequency_matrix(simulate_path(s, t), 20)
        acc += N
        acc2 += N * N
    mean = acc / T
    se = np.sqrt((acc2 / T - mean**2) / T)
    assert np.all(np.abs(mean - expected_frequency(s)) <= 4 * se)


def test_centered_scaled_examples():
    s = BmcSpec(TWO, (2, 3), 100)
    EN = expected_frequency(s)
    assert np.allclose(centered_scaled(s, EN), 0)
    N = EN + 1.0
    s2 = BmcSpec(TWO, (2, 3), 200)
    M1 = centered_scaled(s, N) / math.sqrt(5 / 100)
    assert np.allclose(centered_scaled(s2, N) * math.sqrt(200 / 5), N - expected_frequency(s2))
    assert np.allclose(M1, 1.0)
    with pytest.raises(ShapeError):
        centered_scaled(s, np.zeros((2, 2)))


def test_frak_params_k1():
    fp = frak_params(BmcSpec(np.array([[1.0]]), (9,), 500))
    assert (fp.c1, fp.c2, fp.c3) == pytest.approx((1.0, 1.0, 1.0))
    assert fp.frak_d == pytest.approx(0.0, abs=1e-12)
    assert fp.PsiC == 1


def test_frak_params_four_cluster_values():
    fp = frak_params(BmcSpec(FOUR_CLUSTER_P, four_cluster_sizes(400), 40_000))
    assert fp.c1 == pytest.approx(2.68, abs=0.01)
    assert fp.c2 == pytest.approx(7.15, abs=0.01)
    assert fp.c3 == pytest.approx(14.25, abs=0.01)
    assert fp.PsiC == 5


def random_spec(rng, K_max=4, n_max=200):
    K = int(rng.integers(1, K_max + 1))
    p = random_ergodic(rng, K, zero_frac=0.3)
    sizes = tuple(int(x) for x in rng.integers(1, 8, size=K))
    return BmcSpec(p, sizes, int(rng.integers(4, n_max + 1)))


@given(st.integers(0, 2**31))
def test_frak_param_estimates(seed):
    s = random_spec(np.random.default_rng(seed))
    fp = frak_params(s)
    amin = s.alpha_hat.min()
    for i, ci in enumerate((fp.c1, fp.c2, fp.c3), start=1):
        assert ci <= amin**-i * (1 + 1e-12)
    assert fp.frak_d <= (4 / 3) * fp.PsiC * amin**-2 * (1 + 1e-9)


def test_frakd_exact_vs_bruteforce():
    rng = np.random.default_rng(2024)
    for _ in range(50):
        s = random_spec(rng)
        ref = frakd_bruteforce(s)
        got = frak_params(s).frak_d
        assert abs(got - ref) <= 1e-10 * max(abs(ref), 1e-300) or (ref == 0 and abs(got) < 1e-12)


def test_frakd_bruteforce_examples():
    assert frakd_bruteforce(BmcSpec(TWO, (2, 2), 3)) == 0.0
    assert frakd_bruteforce(BmcSpec(np.array([[1.0]]), (4,), 50)) == pytest.approx(0.0, abs=1e-14)
    s = BmcSpec(random_ergodic(np.random.default_rng(1), 3), (2, 3, 4), 100)
    assert frak_params(s).frak_d == pytest.approx(frakd_bruteforce(s), rel=1e-10)


def test_frakd_fallback_warns(monkeypatch):
    import freeconc.bmc as bmc_mod
    s = BmcSpec(random_ergodic(np.random.default_rng(5), 3), (2, 2, 3), 60)
    monkeypatch.setattr(bmc_mod, "COND_LIMIT", 0.0)
    with pytest.warns(RuntimeWarning):
        val = frak_params(s).frak_d
    assert val == pytest.approx(frakd_bruteforce(s), rel=1e-12)


def test_limiting_m_examples():
    assert limiting_m([1.0], [1.0], [[1.0]]) == pytest.approx(2.0, abs=1e-8)
    pi = stationary_distribution(FOUR_CLUSTER_P)
    val = limiting_m(FOUR_CLUSTER_ALPHA, pi, FOUR_CLUSTER_P)
    assert val == pytest.approx(2.5540377, abs=1e-6)
    perm = np.array([2, 0, 3, 1])
    assert limiting_m(FOUR_CLUSTER_ALPHA[perm], pi[perm], FOUR_CLUSTER_P[np.ix_(perm, perm)]) == pytest.approx(val, rel=1e-9)


def test_mhat_examples():
    assert mhat(BmcSpec(np.array([[1.0]]), (13,), 100)).value == pytest.approx(2.0, abs=1e-8)
    s400 = BmcSpec(FOUR_CLUSTER_P, four_cluster_sizes(400), 40_000)
    m = limiting_m(FOUR_CLUSTER_ALPHA, s400.pi, FOUR_CLUSTER_P)
    assert mhat(s400).value == pytest.approx(m, abs=1e-9)
    s = BmcSpec(FOUR_CLUSTER_P, (81, 40, 159, 120), 40_000)
    gap = np.abs(s.alpha_hat - FOUR_CLUSTER_ALPHA).max()
    assert 0 < abs(mhat(s).value - m) < 10 * gap


def test_bound_report_structure():
    rep = bound_report(BmcSpec(FOUR_CLUSTER_P, four_cluster_sizes(400), 40_000), p_max=3)
    assert rep.p_orders == (1, 2, 3)
    assert np.all(np.diff(rep.thresholds) > 0)
    assert rep.thresholds == pytest.approx((248.7, 417.6, 571.0), abs=0.1)
    assert rep.prob_bound(1.2, 3) == min(1.0, 400 * 1.2**-6)
    assert rep.R_bound == pytest.approx(0.2)
    assert rep.PsiE_bound == rep.PsiC + 1
    d = rep.as_dict()
    assert d["curve"][2]["p"] == 3 and d["params"]["PsiC"] == 5
    with pytest.raises(DomainError):
        bound_report(BmcSpec(TWO, (2, 2), 10), p_max=0)


def test_bound_report_limits():
    # the vanishing terms decay like (d/n)^{1/6}, so n has to be huge
    s = BmcSpec(np.array([[1.0]]), (100,), 10**24)
    rep = bound_report(s, p_max=1)
    fp = rep.params
    limit = rep.mhat + fp.frak_E / 100 + 2 * (fp.frak_v * fp.frak_g / 100) ** 0.25
    assert rep.thresholds[0] == pytest.approx(limit, rel=0.01)
    assert rep.thresholds[0] > limit
    assert rep.mhat == pytest.approx(2.0)


def test_threshold_monotone_in_ratio():
    a = bound_report(BmcSpec(FOUR_CLUSTER_P, four_cluster_sizes(40), 4000), p_max=2).thresholds
    b = bound_report(BmcSpec(FOUR_CLUSTER_P, four_cluster_sizes(40), 2000), p_max=2).thresholds
    assert all(y > x for x, y in zip(a, b))


def test_psi_of_state_and_transition_chains():
    rng = np.random.default_rng(3)
    for _ in range(5):
        K = int(rng.integers(2, 4))
        s = BmcSpec(random_ergodic(rng, K, zero_frac=0.3), tuple(int(x) for x in rng.integers(1, 3, size=K)), 1000)
        fp = frak_params(s)
        P = state_transition_matrix(s)
        assert capital_psi(FiniteChain(P, state_equilibrium(s), s.n)) == fp.PsiC
        assert psi_transition_chain(s) <= fp.PsiC + 1


def test_exact_covariance_monte_carlo():
    s = BmcSpec(TWO, (3, 3), 300)
    C = exact_covariance(s)
    T = 100_000
    Ms = np.empty((T, 36))
    for t in range(T):
        Ms[t] = centered_scaled(s, frequency_matrix(simulate_path(s, t), 6)).ravel()
    emp = np.cov(Ms, rowvar=False, bias=True)
    assert np.abs(emp - C).max() < 0.02 * np.abs(C).max()
    assert v_param(emp) == pytest.approx(v_param(C), rel=0.05)
    assert np.abs(Ms.mean(axis=0)).max() <= 4 * np.sqrt(C.diagonal().max() / T)


def test_dilation_covariance_matches_gaussian_model():
    s = BmcSpec(TWO, (2, 2), 100)
    C = exact_covariance(s)
    D = dilation_covariance(C, 4)
    g = GaussianModel(np.zeros((8, 8)), D).sample(np.random.default_rng(0))
    assert np.allclose(g, g.T)
    assert np.allclose(g[:4, :4], 0) and np.allclose(g[4:, 4:], 0)
    with pytest.raises(DomainError):
        exact_covariance(BmcSpec(TWO, (40, 40), 100))

import itertools
import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from freeconc.cumulants import (D_param, K_param, MomentOracle, boolean_cumulant, boolean_markov_telescoping,
                                classical_cumulant, classical_from_boolean, cumulant_table, markov_oracle,
                                random_oracle, runs_partition, set_partitions, verify_identities)
from freeconc.errors import DomainError


def bernoulli_centered(p):
    return MomentOracle([[1 - p], [-p]], [p, 1 - p])


@pytest.mark.parametrize("k, bell", [(1, 1), (3, 5), (5, 52), (7, 877)])
def test_set_partition_counts(k, bell):
    parts = set_partitions(k)
    assert len(parts) == bell
    assert len(set(parts)) == bell
    for part in parts:
        assert sorted(x for b in part for x in b) == list(range(k))
        assert [b[0] for b in part] == sorted(b[0] for b in part)


def test_set_partitions_range():
    with pytest.raises(DomainError):
        set_partitions(11)
    with pytest.raises(DomainError):
        set_partitions(0)


def test_low_order_cumulants():
    rng = np.random.default_rng(0)
    o = random_oracle(rng, 2, 5)
    assert classical_cumulant(o, [0]) == pytest.approx(o.moment([0]))
    cov = o.moment([0, 1]) - o.moment([0]) * o.moment([1])
    assert classical_cumulant(o, [0, 1]) == pytest.approx(cov)
    assert boolean_cumulant(o, [1]) == pytest.approx(o.moment([1]))
    assert boolean_cumulant(o, [0, 1]) == pytest.approx(cov)


def test_bernoulli_third_cumulant():
    o = bernoulli_centered(0.3)
    assert classical_cumulant(o, [0, 0, 0]) == pytest.approx(0.3 * 0.7 * 0.4, abs=1e-14)


def test_boolean_cumulant_is_order_dependent():
    rng = np.random.default_rng(11)
    o = random_oracle(rng, 3, 4)
    assert abs(boolean_cumulant(o, [0, 1, 2]) - boolean_cumulant(o, [1, 0, 2])) > 1e-3
    assert classical_cumulant(o, [0, 1, 2]) == pytest.approx(classical_cumulant(o, [1, 0, 2]), abs=1e-12)


def test_boolean_cumulant_interval_formula():
    # b(Y1,Y2,Y3) = E123 - E1 E23 - E12 E3 + E1 E2 E3 for ordered interval splittings
    rng = np.random.default_rng(12)
    o = random_oracle(rng, 3, 5)
    m = o.moment
    ref = m([0, 1, 2]) - m([0]) * m([1, 2]) - m([0, 1]) * m([2]) + m([0]) * m([1]) * m([2])
    assert boolean_cumulant(o, [0, 1, 2]) == pytest.approx(ref, abs=1e-14)


def test_runs_partition_examples():
    assert runs_partition([1, 2, 3, 4]) == ((1, 2, 3, 4),)
    assert runs_partition([4, 3, 2, 1]) == ((4,), (3,), (2,), (1,))
    rho = (1, 14, 11, 2, 5, 6, 12, 4, 9, 10, 8, 13, 15, 3, 7)
    expected = {frozenset(b) for b in [{1, 14}, {11}, {2, 5, 6, 12}, {4, 9, 10}, {8, 13, 15}, {3, 7}]}
    assert {frozenset(b) for b in runs_partition(rho)} == expected


def test_runs_partition_rejects_repeats():
    with pytest.raises(DomainError):
        runs_partition([1, 1, 2])


@given(st.permutations(list(range(8))))
def test_runs_blocks_concatenate_to_rho(rho):
    blocks = runs_partition(rho)
    assert [x for b in blocks for x in b] == list(rho)
    for b in blocks:
        assert all(x < y for x, y in zip(b, b[1:]))


@pytest.mark.parametrize("k", [2, 3, 4, 5, 6])
def test_classical_from_boolean_identity(k):
    rng = np.random.default_rng(100 + k)
    for _ in range(50):
        o = random_oracle(rng, k, int(rng.integers(2, 6)))
        idx = tuple(rng.integers(0, k, size=k))
        assert classical_from_boolean(o, idx) == pytest.approx(classical_cumulant(o, sorted(idx)), abs=1e-10)


def test_independent_split_vanishes():
    # Y0 independent of (Y1, Y2): product of a 2-atom and a 3-atom law
    rng = np.random.default_rng(3)
    a, pa = rng.normal(size=2), np.array([0.4, 0.6])
    b, pb = rng.normal(size=(3, 2)), np.array([0.2, 0.5, 0.3])
    atoms = [[a[i], *b[j]] for i in range(2) for j in range(3)]
    probs = [pa[i] * pb[j] for i in range(2) for j in range(3)]
    o = MomentOracle(atoms, probs)
    assert abs(classical_cumulant(o, [0, 1, 2])) < 1e-12
    assert abs(classical_from_boolean(o, [0, 1, 2])) < 1e-12
    assert abs(classical_cumulant(o, [0, 0, 1, 2])) < 1e-12


def test_caps():
    o = random_oracle(np.random.default_rng(0), 1, 2)
    with pytest.raises(DomainError):
        classical_from_boolean(o, [0] * 9)
    with pytest.raises(DomainError):
        classical_cumulant(o, [0] * 11)


def test_markov_telescoping_examples():
    rng = np.random.default_rng(5)
    mu = np.array([0.2, 0.5, 0.3])
    iid = np.tile(mu, (3, 1))
    gs = [rng.normal(size=3) for _ in range(4)]
    assert abs(boolean_markov_telescoping(mu, [iid] * 3, gs)) < 1e-15
    assert boolean_markov_telescoping(mu, [], gs[:1]) == pytest.approx(mu @ gs[0])
    P = rng.dirichlet(np.ones(3), size=3)
    lhs = boolean_markov_telescoping(mu, [P, P], gs[:3])
    rhs = boolean_cumulant(markov_oracle(mu, [P, P], gs[:3]), [0, 1, 2])
    assert lhs == pytest.approx(rhs, abs=1e-12)


@given(st.integers(2, 4), st.integers(2, 5), st.integers(0, 2**31))
def test_markov_telescoping_property(S, k, seed):
    rng = np.random.default_rng(seed)
    mu = rng.dirichlet(np.ones(S))
    Ts = [rng.dirichlet(np.ones(S), size=S) for _ in range(k - 1)]
    gs = [rng.normal(size=S) for _ in range(k)]
    lhs = boolean_markov_telescoping(mu, Ts, gs)
    rhs = boolean_cumulant(markov_oracle(mu, Ts, gs), list(range(k)))
    assert lhs == pytest.approx(rhs, abs=1e-12)


@given(st.integers(2, 5), st.integers(0, 2**31), st.floats(-3, 3), st.floats(-3, 3))
def test_multilinearity(k, seed, a, b):
    rng = np.random.default_rng(seed)
    o = random_oracle(rng, k, 4)
    z = rng.normal(size=4)
    ext = o.with_variables(a * o.atoms[:, 0] + b * z).with_variables(z)
    rest = list(range(1, k))
    lhs = classical_cumulant(ext, [k] + rest)
    rhs = a * classical_cumulant(ext, [0] + rest) + b * classical_cumulant(ext, [k + 1] + rest)
    assert lhs == pytest.approx(rhs, abs=1e-10 * max(1.0, abs(lhs)))


@given(st.integers(2, 6), st.integers(0, 2**31))
def test_classical_permutation_invariance(k, seed):
    rng = np.random.default_rng(seed)
    o = random_oracle(rng, k, 4)
    idx = list(range(k))
    perm = list(rng.permutation(k))
    assert classical_cumulant(o, perm) == pytest.approx(classical_cumulant(o, idx), abs=1e-12)


def test_K_param_iid():
    # three i.i.d. centered Bernoulli(0.3): only diagonal tuples survive
    p = 0.3
    vals = [1 - p, -p]
    atoms = list(itertools.product(vals, repeat=3))
    probs = [np.prod([p if v > 0 else 1 - p for v in a]) for a in atoms]
    o = MomentOracle(atoms, probs)
    table = cumulant_table(o, 3)
    assert K_param(table, 3) == pytest.approx(abs(p * (1 - p) * (1 - 2 * p)), abs=1e-12)
    assert K_param(np.zeros((3, 3, 3)), 3) == 0.0


def test_K_param_bruteforce_and_callable():
    rng = np.random.default_rng(8)
    o = random_oracle(rng, 3, 6)
    table = cumulant_table(o, 3)
    brute = max(sum(abs(classical_cumulant(o, [i, j, l])) for j in range(3) for l in range(3)) for i in range(3))
    assert K_param(table, 3) == pytest.approx(brute, rel=1e-12)
    rows = np.abs(table).reshape(3, -1).sum(axis=1)
    assert K_param(lambda i: rows[i], n=3) == pytest.approx(brute, rel=1e-12)


def test_D_param_examples():
    eta, gamma = 0.7, 0.5
    K = {m: eta * math.factorial(m) ** (1 + gamma) for m in range(3, 9)}
    assert D_param(K, eta, gamma, 8) == pytest.approx(1.0)
    assert D_param({m: 0.0 for m in range(3, 9)}, eta, gamma, 8) == 0.0
    with pytest.raises(DomainError):
        D_param(K, 0.0, gamma, 8)


def test_D_param_subweibull_shape():
    theta, delta = 2.0, 2.0
    K = {m: delta ** (m - 2) * math.factorial(m) ** theta for m in range(3, 11)}
    val = D_param(K, 1.0, theta - 1, 10)
    assert val <= max(delta, delta ** (1 / 3)) + 1e-12
    assert val == pytest.approx(delta ** (8 / 10))


def test_verify_identities_suite():
    res = verify_identities(6, 50, 7)
    assert res["passed"]
    assert res["classical_from_boolean_max_error"] < 1e-10
    assert res["markov_telescoping_max_error"] < 1e-12

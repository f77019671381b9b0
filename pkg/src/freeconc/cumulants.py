"""Classical and Boolean joint cumulants of finite-support random vectors.

Every computation here is exact (up to floating point): joint laws are
finite tables, so moment identities can be checked without sampling
noise.  Variable indices are 0-based.  Set partitions are tuples of
blocks, each block a sorted tuple, with blocks ordered by least element.
"""
from __future__ import annotations

import itertools
import math
from functools import lru_cache
from typing import Callable, Mapping, Sequence

import numpy as np

from .errors import DomainError, ShapeError

MAX_CLASSICAL_K = 10
MAX_BOOLEAN_K = 16
MAX_FROM_BOOLEAN_K = 8


class MomentOracle:
    """Exact joint moments of ``N`` real variables with finite joint support.

    Parameters
    ----------
    atoms : array_like, shape (T, N)
        Support points; row ``t`` is the value of ``(Y_0, ..., Y_{N-1})``.
    probs : array_like, shape (T,)
        Probabilities of the atoms (nonnegative, summing to one).
    """

    def __init__(self, atoms, probs):
        atoms = np.asarray(atoms, dtype=float)
        probs = np.asarray(probs, dtype=float)
        if atoms.ndim != 2 or probs.shape != (atoms.shape[0],):
            raise ShapeError("atoms must be (T, N) and probs (T,)")
        if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-12:
            raise DomainError("probabilities must be nonnegative and sum to 1")
        self.atoms = atoms
        self.probs = probs
        self._cache: dict[tuple[int, ...], float] = {}

    @property
    def n_vars(self) -> int:
        return self.atoms.shape[1]

    def moment(self, idx: Sequence[int]) -> float:
        """``E[prod_j Y_{idx_j}]``; the empty product has moment 1."""
        key = tuple(sorted(int(i) for i in idx))
        val = self._cache.get(key)
        if val is None:
            if key:
                val = float(self.probs @ np.prod(self.atoms[:, list(key)], axis=1))
            else:
                val = 1.0
            self._cache[key] = val
        return val

    def with_variables(self, columns) -> "MomentOracle":
        """New oracle with extra variables appended (columns given per atom)."""
        cols = np.asarray(columns, dtype=float).reshape(self.atoms.shape[0], -1)
        return MomentOracle(np.hstack([self.atoms, cols]), self.probs)


def random_oracle(rng: np.random.Generator, n_vars: int, n_atoms: int) -> MomentOracle:
    """Random oracle with Gaussian atom values and Dirichlet weights."""
    atoms = rng.normal(size=(n_atoms, n_vars))
    probs = rng.dirichlet(np.ones(n_atoms))
    return MomentOracle(atoms, probs)


@lru_cache(maxsize=None)
def _partitions(k: int):
    out = []
    # restricted growth strings enumerate each partition exactly once
    def rec(pos, labels, nblocks):
        if pos == k:
            blocks = [[] for _ in range(nblocks)]
            for i, lab in enumerate(labels):
                blocks[lab].append(i)
            out.append(tuple(tuple(b) for b in blocks))
            return
        for lab in range(nblocks + 1):
            labels.append(lab)
            rec(pos + 1, labels, max(nblocks, lab + 1))
            labels.pop()
    rec(0, [], 0)
    return tuple(out)


def set_partitions(k: int) -> list[tuple[tuple[int, ...], ...]]:
    """All set partitions of ``{0, ..., k-1}`` (``1 <= k <= 10``)."""
    if int(k) != k or not 1 <= k <= MAX_CLASSICAL_K:
        raise DomainError(f"k must be in 1..{MAX_CLASSICAL_K}")
    return list(_partitions(int(k)))


def classical_cumulant(o: MomentOracle, idx: Sequence[int]) -> float:
    """Classical joint cumulant ``kappa(Y_{idx_0}, ..., Y_{idx_{k-1}})``.

    Möbius expansion over set partitions:
    ``sum_pi (-1)^{|pi|-1} (|pi|-1)! prod_{B in pi} E[prod_{j in B} Y_{idx_j}]``.
    """
    idx = tuple(idx)
    k = len(idx)
    total = 0.0
    for part in set_partitions(k):
        nb = len(part)
        term = math.factorial(nb - 1) * (-1) ** (nb - 1)
        for block in part:
            term *= o.moment([idx[j] for j in block])
            if term == 0.0:
                break
        total += term
    return total


def boolean_cumulant(o: MomentOracle, idx: Sequence[int]) -> float:
    """Boolean joint cumulant, an alternating sum over interval splittings.

    The value depends on the order of ``idx``.
    """
    idx = tuple(idx)
    k = len(idx)
    if not 1 <= k <= MAX_BOOLEAN_K:
        raise DomainError(f"k must be in 1..{MAX_BOOLEAN_K}")
    interval = {}
    for a in range(k):
        for b in range(a + 1, k + 1):
            interval[a, b] = o.moment(idx[a:b])
    total = 0.0
    for m in range(k):
        for cuts in itertools.combinations(range(1, k), m):
            bounds = (0,) + cuts + (k,)
            term = (-1.0) ** m
            for a, b in zip(bounds[:-1], bounds[1:]):
                term *= interval[a, b]
            total += term
    return total


def runs_partition(rho: Sequence[int]) -> tuple[tuple[int, ...], ...]:
    """Partition of the values of ``rho`` into maximal increasing runs.

    Blocks are listed in the order they occur in ``rho``; works for any
    labelling (0- or 1-based).
    """
    rho = list(rho)
    if len(set(rho)) != len(rho):
        raise DomainError("rho must have distinct entries")
    blocks, cur = [], []
    for r in rho:
        if cur and r < cur[-1]:
            blocks.append(tuple(cur))
            cur = []
        cur.append(r)
    if cur:
        blocks.append(tuple(cur))
    return tuple(blocks)


def classical_from_boolean(o: MomentOracle, idx: Sequence[int]) -> float:
    """Classical cumulant rebuilt from Boolean cumulants over runs partitions.

    ``idx`` is stably sorted first; the sum runs over permutations ``rho``
    of ``{0..k-1}`` with ``rho(0) = 0`` and each runs block enters as the
    Boolean cumulant of its variables in increasing position order.
    """
    sidx = tuple(sorted(idx))
    k = len(sidx)
    if not 1 <= k <= MAX_FROM_BOOLEAN_K:
        raise DomainError(f"k must be in 1..{MAX_FROM_BOOLEAN_K}")
    bcache: dict[tuple[int, ...], float] = {}
    total = 0.0
    for tail in itertools.permutations(range(1, k)):
        part = runs_partition((0,) + tail)
        term = (-1.0) ** (len(part) - 1)
        for block in part:
            J = tuple(sorted(block))
            if J not in bcache:
                bcache[J] = boolean_cumulant(o, [sidx[j] for j in J])
            term *= bcache[J]
        total += term
    return total


def _check_chain(initial, transitions, gs):
    mu = np.asarray(initial, dtype=float)
    Ts = [np.asarray(T, dtype=float) for T in transitions]
    gs = [np.asarray(g, dtype=float) for g in gs]
    if len(gs) != len(Ts) + 1:
        raise ShapeError("need one function per time step")
    prev = mu.size
    for T, g in zip(Ts, gs[1:]):
        if T.shape[0] != prev or T.shape[1] != g.size:
            raise ShapeError("transition shapes do not chain")
        prev = T.shape[1]
    if gs[0].size != mu.size:
        raise ShapeError("g_1 must match the initial state space")
    return mu, Ts, gs


def boolean_markov_telescoping(initial, transitions, gs) -> float:
    """Boolean cumulant of ``Y_i = g_i(W_i)`` for a finite Markov sequence ``W``.

    Evaluates the nested sum with difference factors
    ``P(w_i | w_{i-1}) - P(w_i)``, contracting one time step at a time.

    Parameters
    ----------
    initial : array_like
        Law of ``W_1``.
    transitions : list of array_like
        ``transitions[i-2][a, b] = P(W_i = b | W_{i-1} = a)`` for ``i = 2..k``.
    gs : list of array_like
        ``gs[i-1][w] = g_i(w)``.
    """
    mu, Ts, gs = _check_chain(initial, transitions, gs)
    vec = mu * gs[0]
    marg = mu
    for T, g in zip(Ts, gs[1:]):
        marg = marg @ T
        vec = (vec @ T - vec.sum() * marg) * g
    return float(vec.sum())


def markov_oracle(initial, transitions, gs) -> MomentOracle:
    """Joint law of ``(g_1(W_1), ..., g_k(W_k))`` by enumerating all paths."""
    mu, Ts, gs = _check_chain(initial, transitions, gs)
    sizes = [mu.size] + [T.shape[1] for T in Ts]
    atoms, probs = [], []
    for path in itertools.product(*(range(s) for s in sizes)):
        pr = mu[path[0]]
        for T, (a, b) in zip(Ts, zip(path[:-1], path[1:])):
            pr *= T[a, b]
        atoms.append([g[w] for g, w in zip(gs, path)])
        probs.append(pr)
    probs = np.asarray(probs)
    return MomentOracle(np.asarray(atoms), probs / probs.sum())


def cumulant_table(o: MomentOracle, k: int, variables: Sequence[int] | None = None) -> np.ndarray:
    """Array ``T[i_1, ..., i_k] = kappa(Y_{i_1}, ..., Y_{i_k})`` over ``variables``."""
    vars_ = list(range(o.n_vars)) if variables is None else list(variables)
    n = len(vars_)
    table = np.empty((n,) * k)
    done: dict[tuple[int, ...], float] = {}
    for tup in itertools.product(range(n), repeat=k):
        key = tuple(sorted(tup))
        if key not in done:
            done[key] = classical_cumulant(o, [vars_[i] for i in key])
        table[tup] = done[key]
    return table


def K_param(table, k: int | None = None, n: int | None = None) -> float:
    """``K_k = max_{i_1} sum_{i_2..i_k} |kappa(Y_{i_1}, ..., Y_{i_k})|``.

    ``table`` is either a full ``n^k`` array of cumulants (absolute values
    are taken) or a callable returning the row sum for a given ``i_1``, in
    which case ``n`` is required.
    """
    if callable(table):
        if n is None:
            raise DomainError("n is required with a row-sum callable")
        return float(max(table(i) for i in range(n)))
    T = np.abs(np.asarray(table, dtype=float))
    if k is not None and T.ndim != k:
        raise ShapeError(f"table has order {T.ndim}, expected {k}")
    if T.ndim == 1:
        return float(T.max())
    return float(T.reshape(T.shape[0], -1).sum(axis=1).max())


def D_param(K_values: Mapping[int, float], eta: float, gamma: float, k_max: int) -> float:
    """``max_{3<=m<=k_max} (K_m / (eta (m!)^{1+gamma}))^{1/m}``."""
    if eta <= 0:
        raise DomainError("eta must be positive")
    if gamma < 0:
        raise DomainError("gamma must be nonnegative")
    best = 0.0
    for m in range(3, int(k_max) + 1):
        Km = float(K_values[m])
        if Km < 0:
            raise DomainError("K_m must be nonnegative")
        val = (Km / (eta * math.factorial(m) ** (1.0 + gamma))) ** (1.0 / m)
        best = max(best, val)
    return best


def verify_identities(k_max: int, n_oracles: int, seed: int, n_chains: int = 20,
                      tol_classical: float = 1e-10, tol_markov: float = 1e-12) -> dict:
    """Run the randomized identity suite used by the CLI.

    Checks the classical-from-Boolean formula on random oracles for
    ``k = 3..k_max`` and the Markov telescoping formula on random chains with
    at most four states and ``k <= min(k_max, 5)``.
    """
    rng = np.random.default_rng(seed)
    worst_cb, worst_mk = 0.0, 0.0
    for k in range(3, int(k_max) + 1):
        for _ in range(n_oracles):
            o = random_oracle(rng, n_vars=k, n_atoms=int(rng.integers(2, 7)))
            idx = tuple(rng.integers(0, k, size=k))
            worst_cb = max(worst_cb, abs(classical_from_boolean(o, idx) - classical_cumulant(o, sorted(idx))))
    for _ in range(n_chains):
        S = int(rng.integers(2, 5))
        k = int(rng.integers(2, min(k_max, 5) + 1))
        P = rng.dirichlet(np.ones(S), size=S)
        mu = rng.dirichlet(np.ones(S))
        gs = [rng.normal(size=S) for _ in range(k)]
        lhs = boolean_markov_telescoping(mu, [P] * (k - 1), gs)
        rhs = boolean_cumulant(markov_oracle(mu, [P] * (k - 1), gs), range(k))
        worst_mk = max(worst_mk, abs(lhs - rhs))
    return {
        "classical_from_boolean_max_error": worst_cb,
        "markov_telescoping_max_error": worst_mk,
        "passed": bool(worst_cb <= tol_classical and worst_mk <= tol_markov),
    }

"""psi-dependence coefficients and mixing times for finite Markov chains.

All quantities are computed from exact finite-dimensional laws: the
lag-``t`` joint law of a stationary chain is ``pi_i (P^t)_ij``.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import ConvergenceError, DomainError, ErgodicityError, ShapeError

PSI_LEVEL = 0.25
STATIONARY_TOL = 1e-10
MAX_STEPS = 10**6


def _stochastic(P, name="P") -> np.ndarray:
    P = np.asarray(P, dtype=float)
    if P.ndim != 2 or P.shape[0] != P.shape[1]:
        raise ShapeError(f"{name} must be square")
    if np.any(P < 0) or np.abs(P.sum(axis=1) - 1).max() > 1e-12:
        raise DomainError(f"{name} must be row-stochastic")
    return P


def _probability(mu, name="mu") -> np.ndarray:
    mu = np.asarray(mu, dtype=float)
    if mu.ndim != 1 or np.any(mu < 0) or abs(mu.sum() - 1) > 1e-12:
        raise DomainError(f"{name} must be a probability vector")
    return mu


def is_irreducible(P) -> bool:
    n_comp, _ = connected_components(np.asarray(P) > 0, directed=True, connection="strong")
    return n_comp == 1


def stationary_distribution(P, tol=1e-14, max_steps=MAX_STEPS) -> np.ndarray:
    """Equilibrium law of an ergodic chain by power iteration.

    Starts from a point mass, so periodic chains never settle and raise
    :class:`ErgodicityError`, as do reducible ones.
    """
    P = _stochastic(P)
    if not is_irreducible(P):
        raise ErgodicityError("transition matrix is reducible")
    mu = np.zeros(P.shape[0])
    mu[0] = 1.0
    for _ in range(max_steps):
        nxt = mu @ P
        nxt /= nxt.sum()
        if np.abs(nxt - mu).sum() < tol:
            mu = nxt
            break
        mu = nxt
    else:
        raise ErgodicityError("power iteration did not converge (periodic chain?)")
    # one more step keeps the residual at rounding level
    mu = mu @ P
    mu /= mu.sum()
    return mu


def renormalized_powers(P, t_max):
    """Yield ``P^1, ..., P^{t_max}``, rescaling rows to sum to one each step."""
    P = np.asarray(P, dtype=float)
    Q = P.copy()
    for _ in range(int(t_max)):
        yield Q
        Q = Q @ P
        Q /= Q.sum(axis=1, keepdims=True)


@dataclass(frozen=True)
class FiniteChain:
    """Finite Markov chain ``(P, mu0)`` run for ``n`` steps."""

    P: np.ndarray
    mu0: np.ndarray
    n: int

    def __post_init__(self):
        P = _stochastic(self.P)
        mu = _probability(self.mu0, "mu0")
        if mu.size != P.shape[0]:
            raise ShapeError("mu0 does not match P")
        if int(self.n) < 1:
            raise DomainError("n must be positive")
        object.__setattr__(self, "P", P)
        object.__setattr__(self, "mu0", mu)
        object.__setattr__(self, "n", int(self.n))

    @classmethod
    def stationary(cls, P, n=MAX_STEPS) -> "FiniteChain":
        return cls(np.asarray(P, dtype=float), stationary_distribution(P), n)

    @property
    def is_stationary(self) -> bool:
        return float(np.abs(self.mu0 @ self.P - self.mu0).sum()) <= STATIONARY_TOL


def psi_coefficient(J) -> float:
    """psi-dependence of a finite joint pmf.

    ``max |P(x,y) - P(x)P(y)| / (P(x)P(y))`` over cells with positive
    marginals; ``inf`` when a cell with a null marginal carries mass.
    """
    J = np.asarray(J, dtype=float)
    if J.ndim != 2 or np.any(J < 0) or abs(J.sum() - 1) > 1e-12:
        raise DomainError("joint pmf must be a nonnegative matrix summing to 1")
    px, py = J.sum(axis=1), J.sum(axis=0)
    prod = np.outer(px, py)
    pos = prod > 0
    if np.any(J[~pos] > 0):
        return math.inf
    if not pos.any():
        return 0.0
    return float((np.abs(J[pos] - prod[pos]) / prod[pos]).max())


def lag_psi(P, pi, t: int) -> float:
    """psi between ``Z_i`` and ``Z_{i+t}`` for a stationary chain."""
    P = _stochastic(P)
    Q = np.linalg.matrix_power(P, int(t))
    J = np.asarray(pi)[:, None] * Q
    return psi_coefficient(J / J.sum())


def _support_ratio(Q, pi):
    rows = pi > 0
    cols = pi > 0
    sub = Q[np.ix_(rows, cols)]
    return float((np.abs(sub - pi[cols][None, :]) / pi[cols][None, :]).max())


def capital_psi(c: FiniteChain) -> int:
    """``min{n, min{t >= 1 : max_ij |(P^t)_ij - pi_j| / pi_j <= 1/4}}``.

    Requires a stationary start; states of zero equilibrium mass are
    ignored.  Returns ``n`` when no lag up to ``n`` qualifies.
    """
    if not c.is_stationary:
        raise DomainError("chain must start from equilibrium")
    pi = c.mu0
    for t, Q in enumerate(renormalized_powers(c.P, c.n), start=1):
        if _support_ratio(Q, pi) <= PSI_LEVEL:
            return t
    return c.n


def tv_distance(mu, nu) -> float:
    """Total variation distance ``(1/2) sum |mu_i - nu_i|``."""
    mu, nu = np.asarray(mu, dtype=float), np.asarray(nu, dtype=float)
    if mu.shape != nu.shape:
        raise ShapeError("vectors must have the same length")
    return float(0.5 * np.abs(mu - nu).sum())


def mixing_time(c: FiniteChain, eps: float = 0.25, max_steps: int = MAX_STEPS) -> int:
    """First ``t >= 1`` with ``max_i TV(P^t(i, .), pi) <= eps``."""
    if not 0 < eps < 1:
        raise DomainError("eps must lie in (0, 1)")
    pi = stationary_distribution(c.P)
    for t, Q in enumerate(renormalized_powers(c.P, max_steps), start=1):
        if 0.5 * np.abs(Q - pi[None, :]).sum(axis=1).max() <= eps:
            return t
    raise ConvergenceError(f"mixing time exceeds {max_steps} steps")


def psipi_bound(c: FiniteChain) -> int:
    """Integer upper bound ``ceil((log2(1/pi_min) + 3) t_mix)`` on ``Psi``."""
    pi = stationary_distribution(c.P)
    tmix = mixing_time(c)
    bound = int(math.ceil((math.log2(1.0 / pi.min()) + 3.0) * tmix - 1e-12))
    psi = capital_psi(FiniteChain(c.P, pi, c.n))
    if psi > bound:
        raise AssertionError(f"Psi = {psi} exceeds mixing-time bound {bound}")
    return bound


def edge_chain(P, mu):
    """Transition chain ``E_t = (Z_t, Z_{t+1})`` restricted to its support.

    Returns the transition matrix, its equilibrium law and the list of
    retained ``(i, j)`` pairs.
    """
    P = _stochastic(P)
    mu = _probability(mu)
    pairs = [(i, j) for i in range(P.shape[0]) for j in range(P.shape[0]) if mu[i] * P[i, j] > 0]
    pos = {e: a for a, e in enumerate(pairs)}
    PE = np.zeros((len(pairs), len(pairs)))
    for (i, j), a in pos.items():
        for k in range(P.shape[0]):
            b = pos.get((j, k))
            if b is not None:
                PE[a, b] = P[j, k]
    piE = np.array([mu[i] * P[i, j] for i, j in pairs])
    return PE, piE / piE.sum(), pairs

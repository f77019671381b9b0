"""Fixed-edge-count random graphs and sub-Weibull Wigner matrices."""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from typing import Mapping

import numpy as np

from .errors import DomainError
from .seeding import generator


@dataclass(frozen=True)
class GnmSpec:
    """Uniform simple graph on ``d`` nodes with exactly ``m`` edges."""

    d: int
    m: int
    seed: int = 0

    def __post_init__(self):
        if self.d < 2:
            raise DomainError("d must be at least 2")
        if not 0 <= self.m <= self.n_pairs:
            raise DomainError("m must lie in [0, d(d-1)/2]")

    @property
    def n_pairs(self) -> int:
        return self.d * (self.d - 1) // 2

    @property
    def p(self) -> float:
        return self.m / self.n_pairs


@dataclass(frozen=True)
class SubWeibullSpec:
    """Wigner matrix with i.i.d. ``sign * L * E^theta`` entries, standardized."""

    d: int
    theta: float = 1.0
    L: float = 1.0
    seed: int = 0

    def __post_init__(self):
        if self.d < 1:
            raise DomainError("d must be positive")
        if self.theta < 1:
            raise DomainError("theta must be at least 1")
        if self.L <= 0:
            raise DomainError("L must be positive")


def _partial_fisher_yates(rng, N: int, k: int) -> np.ndarray:
    """``k`` distinct uniform draws from ``range(N)`` by a sparse partial shuffle."""
    swaps: dict[int, int] = {}
    out = np.empty(k, dtype=np.int64)
    js = (np.arange(k) + np.floor(rng.random(k) * (N - np.arange(k)))).astype(np.int64).tolist()
    for i, j in enumerate(js):
        vi = swaps.get(i, i)
        vj = swaps.get(j, j)
        out[i] = vj
        swaps[j] = vi
    return out


def sample_gnm(spec: GnmSpec, rng: np.random.Generator | None = None) -> np.ndarray:
    """Adjacency matrix of a uniform ``G(d, m)`` graph.

    Edges are drawn by a partial Fisher-Yates shuffle of the pair indices;
    for ``m`` above half the pairs the complement graph is drawn instead.
    """
    if rng is None:
        rng = generator(spec.seed)
    N, d = spec.n_pairs, spec.d
    take_complement = spec.m > N // 2
    k = N - spec.m if take_complement else spec.m
    chosen = _partial_fisher_yates(rng, N, k)
    iu, ju = np.triu_indices(d, 1)
    flags = np.zeros(N, dtype=bool)
    flags[chosen] = True
    if take_complement:
        flags = ~flags
    A = np.zeros((d, d))
    A[iu[flags], ju[flags]] = 1.0
    return A + A.T


def gnm_centered(A, spec: GnmSpec) -> np.ndarray:
    """``S = (A - E A) / sqrt(p (1-p) d)`` with ``E A = p`` off the diagonal."""
    if spec.m in (0, spec.n_pairs):
        raise DomainError("centering is degenerate for empty or complete graphs")
    if spec.m < 10 * spec.d:
        warnings.warn("m < 10 d: far from the semicircle regime", RuntimeWarning)
    p, d = spec.p, spec.d
    EA = p * (np.ones((d, d)) - np.eye(d))
    return (np.asarray(A, dtype=float) - EA) / math.sqrt(p * (1 - p) * d)


def subweibull_scale(theta: float) -> float:
    """Standard deviation of ``sign * E^theta``: ``sqrt(Gamma(2 theta + 1))``."""
    return math.sqrt(math.gamma(2.0 * theta + 1.0))


def subweibull_variables(rng, size, theta: float, L: float = 1.0) -> np.ndarray:
    """Mean-zero, unit-variance draws of ``sign * L * E^theta`` (``L`` cancels)."""
    E = rng.standard_exponential(size)
    sign = np.where(rng.random(size) < 0.5, -1.0, 1.0)
    return sign * (L * E**theta) / (L * subweibull_scale(theta))


def subweibull_tail_scale(theta: float) -> float:
    """``L'`` with ``P(|X| > x) <= 2 exp(-(x/L')^{1/theta})`` for the standardized law."""
    return 1.0 / subweibull_scale(theta)


def sample_subweibull_wigner(spec: SubWeibullSpec, rng: np.random.Generator | None = None) -> np.ndarray:
    """Symmetric matrix with i.i.d. standardized sub-Weibull upper triangle (diagonal included)."""
    if rng is None:
        rng = generator(spec.seed)
    d = spec.d
    iu, ju = np.triu_indices(d)
    vals = subweibull_variables(rng, iu.size, spec.theta, spec.L)
    W = np.zeros((d, d))
    W[iu, ju] = vals
    W[ju, iu] = vals
    return W


def baiyin_epsilon(d: int, theta: float, delta: float, x: float, cprime: float) -> float:
    """``2 delta + c' (d^{-1/4} x^{3/4} + d^{-1/6} x^{theta-1/3} + d^{-1/2} x^theta)``."""
    if not 0 < delta <= 1:
        raise DomainError("delta must lie in (0, 1]")
    if x <= 1:
        raise DomainError("x must exceed 1")
    if cprime <= 0:
        raise DomainError("c' must be positive")
    return 2 * delta + cprime * (d ** -0.25 * x**0.75 + d ** (-1 / 6) * x ** (theta - 1 / 3) + d**-0.5 * x**theta)


def baiyin_tail(d: int, delta: float, x: float) -> float:
    """``min(1, (d+1)(1+delta)^{-x})``."""
    return float(min(1.0, (d + 1) * (1 + delta) ** (-x)))


@dataclass(frozen=True)
class GraphParams:
    p: float
    R: float
    R_bound: float
    varsigma2: float
    varsigma2_bound: float
    eta: float
    gamma: float
    D_bound: float | None


def feray_graph_params(d: int, m: int, k_max: int = 3, C: Mapping[int, float] | None = None) -> GraphParams:
    """Series-model parameters of the centered ``G(d, m)`` adjacency matrix.

    With ``B_t`` the coefficient matrix of edge ``t`` (entries
    ``1 / sqrt(p(1-p) d)``), ``R(B) = 1/sqrt(p(1-p)d) <= sqrt(2/(dp))`` and
    ``varsigma(B)^2 = (d-1)/(p(1-p)d) <= 2/p`` when ``m <= C(d,2)/2``.  The
    dependence parameter is taken with ``eta = p, gamma = 0``; when the
    cumulant constants ``C[r]`` (``3 <= r <= k_max``) are supplied the bound
    ``D <= max_r (k^k C_r / r!)^{1/r}`` is evaluated, otherwise it is ``None``.
    """
    if m < 1:
        raise DomainError("m must be positive")
    n_pairs = d * (d - 1) // 2
    if m > n_pairs:
        raise DomainError("m exceeds the number of pairs")
    p = m / n_pairs
    q = p * (1 - p)
    R = 1.0 / math.sqrt(q * d) if q > 0 else math.inf
    vs2 = (d - 1) / (q * d) if q > 0 else math.inf
    D = None
    if C is not None:
        k = int(k_max)
        D = max((k**k * float(C[r]) / math.factorial(r)) ** (1.0 / r) for r in range(3, k + 1))
    return GraphParams(p, R, math.sqrt(2.0 / (d * p)), vs2, 2.0 / p, p, 0.0, D)

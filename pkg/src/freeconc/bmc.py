"""Block Markov chains: simulation, frequency matrices and explicit bounds.

States ``0..d-1`` are split into consecutive clusters of the given sizes
(cluster 0 holds states ``0..sizes[0]-1`` and so on).  From a state in
cluster ``a`` the chain jumps to a uniformly chosen state of cluster ``b``
with probability ``p[a, b]``; the path starts from equilibrium.
"""
from __future__ import annotations

import bisect
import math
import warnings
from dataclasses import dataclass, field

import numpy as np

from .dependence import FiniteChain, capital_psi, edge_chain, stationary_distribution
from .errors import ConfigError, DomainError, ShapeError
from .free_bounds import BlockProfile, bmc_profile, minmax_m
from .seeding import generator

__all__ = [
    "BmcSpec", "FrakParams", "BoundReport", "stationary_distribution", "simulate_path",
    "frequency_matrix", "expected_frequency", "centered_scaled", "frak_params",
    "frakd_bruteforce", "bound_report", "limiting_m", "mhat", "exact_covariance",
    "dilation_covariance", "state_transition_matrix",
]

SPEC_VERSION = 1
COND_LIMIT = 1e12


@dataclass(frozen=True)
class BmcSpec:
    """Cluster transition matrix ``p``, integer cluster sizes and path length ``n``."""

    p: np.ndarray
    cluster_sizes: tuple
    n: int
    pi: np.ndarray = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        p = np.asarray(self.p, dtype=float)
        sizes = tuple(int(s) for s in self.cluster_sizes)
        if p.ndim != 2 or p.shape[0] != p.shape[1] or p.shape[0] != len(sizes):
            raise ShapeError("p must be K x K with K cluster sizes")
        if np.any(p < 0) or np.abs(p.sum(axis=1) - 1).max() > 1e-12:
            raise DomainError("p must be row-stochastic")
        if min(sizes) < 1:
            raise DomainError("cluster sizes must be positive")
        if int(self.n) < 2:
            raise DomainError("path length n must be at least 2")
        object.__setattr__(self, "p", p)
        object.__setattr__(self, "cluster_sizes", sizes)
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "pi", stationary_distribution(p))

    @property
    def K(self) -> int:
        return len(self.cluster_sizes)

    @property
    def d(self) -> int:
        return int(sum(self.cluster_sizes))

    @property
    def sizes(self) -> np.ndarray:
        return np.asarray(self.cluster_sizes, dtype=float)

    @property
    def alpha_hat(self) -> np.ndarray:
        return self.sizes / self.d

    @property
    def labels(self) -> np.ndarray:
        """Cluster of each state."""
        return np.repeat(np.arange(self.K), self.cluster_sizes)

    @property
    def offsets(self) -> np.ndarray:
        return np.concatenate([[0], np.cumsum(self.cluster_sizes)[:-1]]).astype(np.int64)

    def to_dict(self) -> dict:
        return {"spec_version": SPEC_VERSION, "K": self.K, "p": self.p.tolist(),
                "cluster_sizes": list(self.cluster_sizes), "n": self.n}

    @classmethod
    def from_dict(cls, doc) -> "BmcSpec":
        """Parse the JSON document form; unknown keys are rejected."""
        if not isinstance(doc, dict):
            raise ConfigError("spec must be a JSON object")
        allowed = {"spec_version", "K", "p", "cluster_sizes", "n"}
        extra = set(doc) - allowed
        if extra:
            raise ConfigError(f"unknown keys: {sorted(extra)}")
        missing = {"K", "p", "cluster_sizes", "n"} - set(doc)
        if missing:
            raise ConfigError(f"missing keys: {sorted(missing)}")
        if doc.get("spec_version", SPEC_VERSION) != SPEC_VERSION:
            raise ConfigError(f"unsupported spec_version {doc['spec_version']!r}")
        K, n = doc["K"], doc["n"]
        if not isinstance(K, int) or isinstance(K, bool) or not isinstance(n, int) or isinstance(n, bool):
            raise ConfigError("K and n must be integers")
        sizes = doc["cluster_sizes"]
        if not isinstance(sizes, list) or not all(isinstance(s, int) and not isinstance(s, bool) for s in sizes):
            raise ConfigError("cluster_sizes must be a list of integers")
        p = doc["p"]
        if (not isinstance(p, list) or len(p) != K
                or not all(isinstance(r, list) and len(r) == K for r in p)
                or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for r in p for v in r)):
            raise ConfigError("p must be a K x K list of numbers")
        if len(sizes) != K:
            raise ConfigError("cluster_sizes must have K entries")
        try:
            return cls(np.array(p, dtype=float), tuple(sizes), n)
        except (DomainError, ShapeError) as exc:
            raise ConfigError(str(exc)) from exc


def state_transition_matrix(spec: BmcSpec) -> np.ndarray:
    """``d x d`` transition matrix ``P_ij = p_ab / #V_b`` of the state chain."""
    lab = spec.labels
    return spec.p[np.ix_(lab, lab)] / spec.sizes[lab][None, :]


def state_equilibrium(spec: BmcSpec) -> np.ndarray:
    lab = spec.labels
    return spec.pi[lab] / spec.sizes[lab]


def simulate_path(spec: BmcSpec, seed: int) -> np.ndarray:
    """Sample ``Z_1..Z_n`` (0-based states) from equilibrium; deterministic in ``seed``."""
    rng = generator(seed)
    n = spec.n
    u = rng.random(n).tolist()
    cum = [np.cumsum(row).tolist() for row in spec.p]
    for row in cum:
        row[-1] = 1.0
    start = np.cumsum(spec.pi).tolist()
    start[-1] = 1.0
    clusters = [0] * n
    c = bisect.bisect_right(start, u[0])
    clusters[0] = c
    for t in range(1, n):
        c = bisect.bisect_right(cum[c], u[t])
        clusters[t] = c
    cl = np.asarray(clusters, dtype=np.int64)
    sizes = np.asarray(spec.cluster_sizes, dtype=np.int64)
    within = np.floor(rng.random(n) * sizes[cl]).astype(np.int64)
    return spec.offsets[cl] + np.minimum(within, sizes[cl] - 1)


def frequency_matrix(path, d: int | None = None) -> np.ndarray:
    """Transition counts ``N_ij = #{t < n : (Z_t, Z_{t+1}) = (i, j)}``."""
    z = np.asarray(path, dtype=np.int64)
    if z.size < 2:
        raise DomainError("path needs at least two states")
    if d is None:
        d = int(z.max()) + 1
    return np.bincount(z[:-1] * d + z[1:], minlength=d * d).reshape(d, d).astype(float)


def expected_frequency(spec: BmcSpec) -> np.ndarray:
    """``E N_ij = (n-1) pi_a p_ab / (#V_a #V_b)``."""
    lab = spec.labels
    block = spec.pi[:, None] * spec.p / np.outer(spec.sizes, spec.sizes)
    return (spec.n - 1) * block[np.ix_(lab, lab)]


def centered_scaled(spec: BmcSpec, N) -> np.ndarray:
    """``M = sqrt(d/n) (N - E N)``."""
    N = np.asarray(N, dtype=float)
    if N.shape != (spec.d, spec.d):
        raise ShapeError("frequency matrix has the wrong shape")
    return math.sqrt(spec.d / spec.n) * (N - expected_frequency(spec))


def _q_bruteforce(spec: BmcSpec) -> np.ndarray:
    """``(1/n) sum_{t=1}^{n-3} (n-2-t) (p^t - Pi)`` by direct summation."""
    n, K = spec.n, spec.K
    Pi = np.tile(spec.pi, (K, 1))
    acc = np.zeros((K, K))
    Q = np.eye(K)
    for t in range(1, n - 2):
        Q = Q @ spec.p
        acc += (n - 2 - t) * (Q - Pi)
    return acc / n


def _q_closed_form(spec: BmcSpec) -> np.ndarray | None:
    n, K = spec.n, spec.K
    Pi = np.tile(spec.pi, (K, 1))
    A = spec.p - Pi
    B = A - np.eye(K)
    if np.linalg.cond(B) ** 2 > COND_LIMIT:
        return None
    poly = np.linalg.matrix_power(A, n - 1) - (n - 2) * (A @ A) + (n - 3) * A
    B2 = B @ B
    return np.linalg.solve(B2, poly) / n


def _frakd_from_q(spec: BmcSpec, q) -> float:
    s = spec.sizes
    # |q_uv| / #V_v * p_vw / #V_w, maximized over u, v, w
    vals = (np.abs(q) / s[None, :])[:, :, None] * (spec.p / s[None, :])[None, :, :]
    return float(spec.d**2 * vals.max())


def frakd_bruteforce(spec: BmcSpec) -> float:
    """``frak d`` from its defining weighted power sum (``0`` when ``n < 4``)."""
    if spec.n - 3 < 1:
        return 0.0
    if spec.n > 10**4:
        raise DomainError("brute-force evaluation is limited to n <= 10^4")
    return _frakd_from_q(spec, _q_bruteforce(spec))


def _frakd(spec: BmcSpec) -> float:
    if spec.n - 3 < 1:
        return 0.0
    q = _q_closed_form(spec)
    if q is None:
        warnings.warn("p - Pi - 1 is ill-conditioned; summing the series directly", RuntimeWarning)
        return _frakd_from_q(spec, _q_bruteforce(spec))
    return _frakd_from_q(spec, q)


@dataclass(frozen=True)
class FrakParams:
    c1: float
    c2: float
    c3: float
    frak_d: float
    frak_g: float
    frak_v: float
    frak_u: float
    frak_E: float
    PsiC: int
    frak_u_columns: float


def chat_profile(spec: BmcSpec) -> BlockProfile:
    """Finite-``d`` profile with ``alpha_hat_i = #V_i / d``."""
    return bmc_profile(spec.alpha_hat, spec.pi, spec.p)


def _frak_u(c1, chat, axis):
    with np.errstate(divide="ignore"):
        ratio = np.where(chat > 0, 2.0 * math.sqrt(c1) / chat, np.inf)
    return float(ratio.min(axis=axis).max())


def frak_params(spec: BmcSpec) -> FrakParams:
    """All finite-``d`` parameters entering the explicit concentration bound.

    ``frak_u`` follows the row-wise definition (max over rows of the
    row minimum); ``frak_u_columns`` is the column-wise variant that the
    minimizer-box argument bounds each coordinate with.
    """
    d, s, pi, p = spec.d, spec.sizes, spec.pi, spec.p
    r = pi / s
    c1 = float(d * r.max())
    c2 = float(d**2 * (r[:, None] * p / s[None, :]).max())
    step = p / s[None, :]
    c3 = float(d**3 * (r[:, None, None] * step[:, :, None] * step[None, :, :]).max())
    fd = _frakd(spec)
    g = c1 + (11 * c2**2 + 6 * c3 + 8 * c2 * fd) / d
    v = 2.0 * ((c2 + 3 * c2**2 + 4 * c3 + 2 * c2 * fd) + (2 * c3 + 8 * c2**2 + 6 * c2 * fd) / d)
    chat = chat_profile(spec).c
    u_rows = _frak_u(c1, chat, axis=1)
    u_cols = _frak_u(c1, chat, axis=0)
    E = u_rows * ((d / spec.n) * c2 + 3 * c2**2 + 5 * c3 + 2 * c2 * fd) + (u_rows / d) * (8 * c2**2 + 6 * c2 * fd)
    psi = capital_psi(FiniteChain(p, pi, spec.n))
    return FrakParams(c1, c2, c3, fd, g, v, u_rows, E, psi, u_cols)


def mhat(spec: BmcSpec):
    """Min-max value of the finite-``d`` profile (with its minimizer)."""
    return minmax_m(chat_profile(spec))


def limiting_m(alpha, pi, p) -> float:
    """Limit of ``||M||``: the min-max value of the asymptotic profile."""
    return minmax_m(bmc_profile(alpha, pi, p)).value


@dataclass(frozen=True)
class BoundReport:
    d: int
    n: int
    mhat: float
    free_norm_bound: float
    sigma_bound: float
    v_bound: float
    varsigma_bound: float
    R_bound: float
    PsiC: int
    PsiE_bound: int
    params: FrakParams
    p_orders: tuple
    thresholds: tuple

    def threshold(self, p_order: int) -> float:
        return self.thresholds[self.p_orders.index(p_order)]

    def prob_bound(self, x: float, p_order: int) -> float:
        """``min(1, d x^{-2p})``."""
        return float(min(1.0, self.d * x ** (-2.0 * p_order)))

    def as_dict(self) -> dict:
        out = {k: getattr(self, k) for k in ("d", "n", "mhat", "free_norm_bound", "sigma_bound", "v_bound",
                                             "varsigma_bound", "R_bound", "PsiC", "PsiE_bound")}
        out["params"] = dict(vars(self.params))
        out["curve"] = [{"p": p, "threshold": t} for p, t in zip(self.p_orders, self.thresholds)]
        return out


def bmc_threshold(mh, fp: FrakParams, d, n, psiE, p_order) -> float:
    r = d / n
    return (mh + fp.frak_E / d + 2.0 * (fp.frak_v * fp.frak_g / d) ** 0.25 * p_order**0.75
            + 60.0 * (4.0 * r * psiE**4 * fp.c1**2) ** (1 / 6) * p_order ** (2 / 3)
            + 120.0 * math.sqrt(r) * psiE * p_order)


def bound_report(spec: BmcSpec, p_max: int = 10) -> BoundReport:
    """Parameters and the tail-threshold curve ``P(||M|| >= threshold(p) x) <= d x^{-2p}``."""
    if p_max < 1:
        raise DomainError("p_max must be positive")
    fp = frak_params(spec)
    mh = mhat(spec).value
    d, n = spec.d, spec.n
    psiE = fp.PsiC + 1
    orders = tuple(range(1, int(p_max) + 1))
    thr = tuple(bmc_threshold(mh, fp, d, n, psiE, k) for k in orders)
    return BoundReport(d, n, mh, mh + fp.frak_E / d, math.sqrt(fp.frak_g), math.sqrt(fp.frak_v / d),
                       math.sqrt(fp.c1), 2.0 * math.sqrt(d / n), fp.PsiC, psiE, fp, orders, thr)


def exact_covariance(spec: BmcSpec) -> np.ndarray:
    """Exact ``d^2 x d^2`` covariance of the entries of ``M`` (small ``d`` only).

    Uses ``Cov(N_e, N_f) = (n-1)(delta_ef P_e - P_e P_f) + P_e G_jk P_kl + P_f G_li P_ij``
    for ``e = (i, j)``, ``f = (k, l)``, where ``G`` sums the lagged
    deviations ``(P^{r-1})_jk - mu_k`` with weights ``n-1-r``.
    """
    d, n = spec.d, spec.n
    if d > 64:
        raise DomainError("dense covariance is limited to d <= 64")
    P = state_transition_matrix(spec)
    mu = state_equilibrium(spec)
    lab = spec.labels
    q = _q_bruteforce(spec) if n - 3 >= 1 else np.zeros((spec.K, spec.K))
    G = (n - 2) * (np.eye(d) - mu[None, :]) + n * q[np.ix_(lab, lab)] / spec.sizes[lab][None, :]
    Pe = (mu[:, None] * P).reshape(-1)
    idx_i = np.repeat(np.arange(d), d)
    idx_j = np.tile(np.arange(d), d)
    C = (n - 1) * (np.diag(Pe) - np.outer(Pe, Pe))
    # P_e G_{j k} P_{k l}: rows e = (i, j), columns f = (k, l)
    cross = Pe[:, None] * G[np.ix_(idx_j, idx_i)] * P[idx_i, idx_j][None, :]
    C += cross + cross.T
    return (d / n) * C


def dilation_covariance(cov_M, d: int) -> np.ndarray:
    """Covariance of the ``(2d)^2`` entries of ``[[0, M], [M^T, 0]]``."""
    D = 2 * d
    src = -np.ones((D, D), dtype=np.int64)
    i, j = np.meshgrid(np.arange(d), np.arange(d), indexing="ij")
    src[i, d + j] = i * d + j
    src[d + j, i] = i * d + j
    src = src.reshape(-1)
    ok = src >= 0
    out = np.zeros((D * D, D * D))
    out[np.ix_(ok, ok)] = np.asarray(cov_M)[np.ix_(src[ok], src[ok])]
    return out


def psi_transition_chain(spec: BmcSpec) -> int:
    """``Psi(E)`` computed on the ``d^2``-state transition chain (small ``d``)."""
    P = state_transition_matrix(spec)
    PE, piE, _ = edge_chain(P, state_equilibrium(spec))
    return capital_psi(FiniteChain(PE, piE, spec.n))

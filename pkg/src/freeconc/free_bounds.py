"""Free-probability leading terms and explicit error terms.

``||S_free||`` enters every bound.  For block variance profiles it reduces
to the scalar min-max problem

    m(c) = inf_{x > 0} max_i ( 1/x_i + sum_j c_ij x_j ),

solved here in its convex epigraph form together with a concave dual,
``m(c) = max_{lambda in simplex} 2 sum_k sqrt(lambda_k (c^T lambda)_k)``,
whose value certifies the accuracy of the primal solution.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, NamedTuple

import numpy as np
from scipy.optimize import minimize

from .errors import ConvergenceError, DomainError, ShapeError
from .matrix_core import as_symmetric

#: absolute constants of the concentration results; all are upper bounds
CONSTANTS = {
    "markov_tail": 120.0,
    "markov_expectation": 240.0,
    "moments": 60.0,
    "series_tail": 8.0,
    "series_expectation": 16.0,
    "universality": 60.0,
}

MINMAX_TOL = 1e-8


@dataclass(frozen=True)
class BlockProfile:
    """Block weights ``alpha`` and nonnegative coefficient matrix ``c``."""

    alpha: np.ndarray
    c: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        c = np.asarray(self.c, dtype=float)
        if c.ndim != 2 or c.shape[0] != c.shape[1] or a.shape != (c.shape[0],):
            raise ShapeError("alpha must have length L and c be L x L")
        if np.any(a <= 0) or abs(a.sum() - 1) > 1e-12:
            raise DomainError("alpha must be positive and sum to 1")
        if np.any(c < 0) or not np.all(np.isfinite(c)):
            raise DomainError("c must be finite and nonnegative")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "c", c)

    @property
    def sigma(self) -> float:
        """``sigma`` of the profile: square root of the largest row sum."""
        return float(np.sqrt(self.c.sum(axis=1).max()))


def bmc_profile(alpha, pi, p) -> BlockProfile:
    """``2K x 2K`` profile of the dilated block Markov chain noise.

    ``c[i, K+j] = pi_i p_ij / alpha_i`` and ``c[K+i, j] = pi_j p_ji / alpha_i``;
    the weights of the dilation blocks are ``alpha / 2``.
    """
    alpha = np.asarray(alpha, dtype=float)
    pi = np.asarray(pi, dtype=float)
    p = np.asarray(p, dtype=float)
    K = alpha.size
    c = np.zeros((2 * K, 2 * K))
    c[:K, K:] = (pi[:, None] * p) / alpha[:, None]
    c[K:, :K] = (pi[None, :] * p.T) / alpha[:, None]
    return BlockProfile(np.concatenate([alpha, alpha]) / 2.0, c)


class MinMaxResult(NamedTuple):
    value: float
    x: np.ndarray
    dual_value: float


def _posynomials(c, u):
    x = np.exp(u)
    return 1.0 / x + c @ x


def _dual_value(c, lam):
    return 2.0 * float(np.sum(np.sqrt(np.maximum(lam * (c.T @ lam), 0.0))))


def _primal(c, u0):
    L = c.shape[0]

    def con(z):
        return z[-1] - np.log(_posynomials(c, z[:-1]))

    def con_jac(z):
        u = z[:-1]
        x = np.exp(u)
        g = 1.0 / x + c @ x
        dg = c * x[None, :] - np.diag(1.0 / x)
        return np.hstack([-dg / g[:, None], np.ones((L, 1))])

    z0 = np.append(u0, np.log(_posynomials(c, u0).max()) + 1e-3)
    res = minimize(lambda z: z[-1], z0, jac=lambda z: np.eye(L + 1)[-1],
                   constraints=[{"type": "ineq", "fun": con, "jac": con_jac}],
                   method="SLSQP", options={"ftol": 1e-15, "maxiter": 2000})
    u = res.x[:-1]
    return float(_posynomials(c, u).max()), u


def _dual(c):
    L = c.shape[0]

    def neg(lam):
        return -_dual_value(c, lam)

    res = minimize(neg, np.full(L, 1.0 / L), method="SLSQP", bounds=[(0.0, 1.0)] * L,
                   constraints=[{"type": "eq", "fun": lambda lam: lam.sum() - 1.0}],
                   options={"ftol": 1e-15, "maxiter": 2000})
    lam = np.clip(res.x, 0.0, None)
    lam /= lam.sum()
    return _dual_value(c, lam), lam


def _log_posynomials(c, u):
    """``h_i = log g_i(u)`` with gradients and Hessians (log-sum-exp form)."""
    L = c.shape[0]
    x = np.exp(u)
    terms = c * x[None, :]
    own = 1.0 / x
    g = own + terms.sum(axis=1)
    W = terms / g[:, None]
    ws = own / g
    grads = W.copy()
    grads[np.arange(L), np.arange(L)] -= ws
    hess = np.einsum("ij,jk->ijk", W, np.eye(L))
    hess[np.arange(L), np.arange(L), np.arange(L)] += ws
    hess -= np.einsum("ij,ik->ijk", grads, grads)
    return np.log(g), grads, hess


def _barrier_polish(c, u, gap=1e-15, max_newton=100):
    """Log-barrier Newton method on ``min tau s.t. log g_i(u) <= tau``."""
    L = c.shape[0]
    h = _log_posynomials(c, u)[0]
    tau = h.max() + 1e-6
    t = L / 1e-6
    while True:
        for _ in range(max_newton):
            h, G, H = _log_posynomials(c, u)
            s = tau - h
            grad = np.append((G / s[:, None]).sum(axis=0), t - (1.0 / s).sum())
            Df = np.hstack([G, -np.ones((L, 1))])
            hess = (Df.T / s**2) @ Df
            hess[:L, :L] += np.tensordot(1.0 / s, H, axes=1)
            try:
                step = np.linalg.solve(hess, -grad)
            except np.linalg.LinAlgError:
                break
            slope = grad @ step
            if -slope / 2 < 1e-14:
                break
            F0 = t * tau - np.log(s).sum()
            a = 1.0
            while a > 1e-20:
                un, tn = u + a * step[:L], tau + a * step[L]
                sn = tn - _log_posynomials(c, un)[0]
                if np.all(sn > 0) and t * tn - np.log(sn).sum() <= F0 + 0.25 * a * slope:
                    break
                a *= 0.5
            else:
                break
            u, tau = un, tn
        if L / t < gap:
            return u
        t *= 10.0


def _perron_dual(c, x):
    """Dual weights from KKT: ``lambda_k = x_k^2 (c^T lambda)_k`` (Perron vector)."""
    A = (x**2)[:, None] * c.T
    w, V = np.linalg.eig(A)
    lam = np.abs(V[:, np.argmax(w.real)].real)
    lam /= lam.sum()
    return _dual_value(c, lam), lam


def minmax_m(profile: BlockProfile | np.ndarray, tol: float = MINMAX_TOL) -> MinMaxResult:
    """Solve ``inf_{x>0} max_i (1/x_i + (c x)_i)``.

    Returns the value, a minimizer and a dual lower bound; the certified
    primal-dual gap is at most ``tol * max(1, value)`` or
    :class:`ConvergenceError` is raised.
    """
    c = profile.c if isinstance(profile, BlockProfile) else np.asarray(profile, dtype=float)
    if c.ndim != 2 or c.shape[0] != c.shape[1]:
        raise ShapeError("c must be square")
    if np.any(c < 0):
        raise DomainError("c must be nonnegative")
    if np.any(c.sum(axis=0) == 0):
        raise DomainError("a column of c vanishes: the min-max problem is unbounded")
    scale = float(np.sqrt(c.sum(axis=1).max()))

    def gap_ok(val, dual):
        return val - dual <= tol * max(1.0, dual)

    val, u = _primal(c, np.full(c.shape[0], -np.log(scale)))
    dual, _ = _perron_dual(c, np.exp(u))
    if not gap_ok(val, dual):
        u2 = _barrier_polish(c, u)
        val2 = float(_posynomials(c, u2).max())
        if val2 <= val:
            val, u = val2, u2
        dual = max(dual, _perron_dual(c, np.exp(u))[0])
    if not gap_ok(val, dual):
        dual2, lam = _dual(c)
        dual = max(dual, dual2)
        cl = c.T @ lam
        if np.all(lam > 1e-12) and np.all(cl > 0):
            val2, u2 = _primal(c, 0.5 * np.log(lam / cl))
            if val2 < val:
                val, u = val2, u2
                dual = max(dual, _perron_dual(c, np.exp(u))[0])
    if not gap_ok(val, dual):
        raise ConvergenceError(f"min-max duality gap {val - dual:.3e} above tolerance", val - dual)
    return MinMaxResult(val, np.exp(u), dual)


def minimizer_box(c1: float, u_bound: float) -> tuple[float, float]:
    """Union of the two candidate boxes for the min-max minimizer."""
    return 1.0 / (2.0 * max(c1, math.sqrt(c1))), u_bound


def pisier_bracket(ES_norm: float, sigma: float) -> tuple[float, float]:
    """``(max(||ES||, sigma), ||ES|| + 2 sigma)``."""
    if ES_norm < 0 or sigma < 0:
        raise DomainError("inputs must be nonnegative")
    return max(ES_norm, sigma), ES_norm + 2.0 * sigma


def profile_second_moment_map(c, sizes) -> Callable[[np.ndarray], np.ndarray]:
    """``W -> E[(S-ES) W (S-ES)]`` for uncorrelated entries with block variances.

    Entry ``(i, j)`` with ``i`` in block ``a`` and ``j`` in block ``b`` has
    variance ``c[a, b] / sizes[b]``.  Requires ``c[a,b]/sizes[b] == c[b,a]/sizes[a]``.
    """
    c = np.asarray(c, dtype=float)
    sizes = np.asarray(sizes, dtype=int)
    lab = np.repeat(np.arange(sizes.size), sizes)
    var = c[np.ix_(lab, lab)] / sizes[lab][None, :]
    if np.abs(var - var.T).max() > 1e-12 * max(var.max(), 1.0):
        raise DomainError("block variances are not symmetric")

    def phi(w):
        return np.diag(var @ np.asarray(w, dtype=float))

    return phi


def _lehner_one_sign(E, basis, u0):
    d = E.shape[0]

    def parts(u):
        w = np.exp(u)
        A = np.diag(1.0 / w) + E + np.tensordot(w, basis, axes=1)
        lam, V = np.linalg.eigh(A)
        return w, lam, V

    def smooth(u, beta):
        w, lam, V = parts(u)
        z = beta * (lam - lam[-1])
        e = np.exp(z)
        f = lam[-1] + np.log(e.sum()) / beta
        pw = e / e.sum()
        Mw = (V * pw) @ V.T
        grad = -np.diag(Mw) / w + w * np.einsum("kab,ab->k", basis, Mw)
        return f, grad

    u = u0
    scale = max(1.0, float(np.abs(np.linalg.eigvalsh(np.diag(np.exp(-u)) + np.tensordot(np.exp(u), basis, axes=1))).max()))
    best = parts(u)[1][-1]
    for beta in (1.0, 10.0, 1e2, 1e3, 1e4, 1e5, 1e6):
        res = minimize(smooth, u, args=(beta / scale,), jac=True, method="L-BFGS-B",
                       bounds=[(-40.0, 40.0)] * d, options={"maxiter": 2000, "ftol": 1e-15, "gtol": 1e-12})
        cand = parts(res.x)[1][-1]
        if cand <= best:
            best, u = cand, res.x
    return float(best)


def lehner_diagonal_upper(mean, second_moment_map: Callable[[np.ndarray], np.ndarray]) -> float:
    """Upper bound on ``||S_free||`` from Lehner's formula over diagonal ``W``.

    Computes ``max_{eta = +-1} inf_{W diagonal > 0} lambda_max(W^{-1} + eta E[S] + map(W))``.
    Restricting ``W`` to diagonal matrices can only increase the infimum,
    so the value bounds ``||S_free||`` from above; it is exact for
    block-constant variance profiles.

    Parameters
    ----------
    mean : array_like
        ``E[S]``, symmetric ``d x d`` with ``d <= 64``.
    second_moment_map : callable
        Receives the diagonal of ``W`` as a vector and returns the
        ``d x d`` matrix ``E[(S - ES) W (S - ES)]``.
    """
    E = as_symmetric(mean, "mean")
    d = E.shape[0]
    if d > 64:
        raise DomainError("lehner_diagonal_upper supports d <= 64")
    basis = np.stack([np.asarray(second_moment_map(np.eye(d)[k]), dtype=float) for k in range(d)])
    basis = 0.5 * (basis + basis.transpose(0, 2, 1))
    s2 = float(np.linalg.eigvalsh(basis.sum(axis=0))[-1])
    u0 = np.full(d, -0.5 * np.log(s2) if s2 > 0 else 0.0)
    return max(_lehner_one_sign(sign * E, basis, u0) for sign in (1.0, -1.0))


@dataclass(frozen=True)
class MarkovBoundParams:
    """Parameters ``sigma, v, varsigma, R, Psi`` and dimension ``d``."""

    sigma: float
    v: float
    varsigma: float
    R: float
    Psi: int
    d: int

    def __post_init__(self):
        for name in ("sigma", "v", "varsigma", "R"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be nonnegative")
        if self.Psi < 1 or self.d < 1:
            raise DomainError("Psi and d must be positive")


@dataclass(frozen=True)
class SeriesBoundParams:
    """Parameters of the matrix series model."""

    sigma: float
    v: float
    varsigmaA: float
    RA: float
    Dgam: float
    eta: float
    gamma: float
    d: int

    def __post_init__(self):
        for name in ("sigma", "v", "varsigmaA", "RA", "Dgam", "gamma"):
            if getattr(self, name) < 0:
                raise DomainError(f"{name} must be nonnegative")
        if self.eta <= 0:
            raise DomainError("eta must be positive")


class TailBound(NamedTuple):
    threshold: float
    prob_bound: float
    expectation_bound: float


def _clamp(p):
    return float(min(1.0, max(0.0, p)))


def markov_epsilon(p: MarkovBoundParams, x: float) -> float:
    """``v^1/2 sigma^1/2 x^3/4 + R^1/3 Psi^2/3 varsigma^2/3 x^2/3 + R Psi x``."""
    if x < 0:
        raise DomainError("x must be nonnegative")
    return (math.sqrt(p.v * p.sigma) * x**0.75
            + (p.R * p.Psi**2 * p.varsigma**2) ** (1 / 3) * x ** (2 / 3)
            + p.R * p.Psi * x)


def markov_tail(p: MarkovBoundParams, delta: float, x: float, free_norm: float) -> TailBound:
    """Tail threshold, clamped probability bound and expectation bound."""
    if not 0 < delta <= 1:
        raise DomainError("delta must lie in (0, 1]")
    thr = (1 + delta) * free_norm + CONSTANTS["markov_tail"] * markov_epsilon(p, x)
    prob = (p.d + 1) * (1 + delta) ** (-x)
    xe = math.log(p.d + 1) / math.log1p(delta)
    expect = (1 + delta) * free_norm + CONSTANTS["markov_expectation"] * markov_epsilon(p, xe)
    return TailBound(thr, _clamp(prob), expect)


def moments_epsilon(p: MarkovBoundParams, p_order: int) -> float:
    """``2 v^1/2 sigma^1/2 p^3/4 + 60 R^1/3 Psi^2/3 varsigma^2/3 p^2/3 + 60 R Psi p``."""
    if p_order < 1:
        raise DomainError("p_order must be a positive integer")
    c = CONSTANTS["moments"]
    return (2.0 * math.sqrt(p.v * p.sigma) * p_order**0.75
            + c * (p.R * p.Psi**2 * p.varsigma**2) ** (1 / 3) * p_order ** (2 / 3)
            + c * p.R * p.Psi * p_order)


def moments_tail(p: MarkovBoundParams, p_order: int, x: float, free_norm: float) -> TailBound:
    """``P(||S|| >= (free + eps'(p)) x) <= d x^{-2p}`` and ``E||S|| <= d^{1/2p}(free + eps')``."""
    level = free_norm + moments_epsilon(p, p_order)
    prob = p.d * x ** (-2.0 * p_order) if x > 0 else 1.0
    return TailBound(level * x, _clamp(prob), p.d ** (1.0 / (2 * p_order)) * level)


def series_epsilon(p: SeriesBoundParams, x: float) -> float:
    """Error term of the matrix series model with exponents ``3/4, (2+3g)/3, 1+g``."""
    if x < 0:
        raise DomainError("x must be nonnegative")
    g = p.gamma
    return (math.sqrt(p.v * p.sigma) * x**0.75
            + p.eta ** (1 / 3) * p.RA ** (1 / 3) * p.Dgam * p.varsigmaA ** (2 / 3) * x ** ((2 + 3 * g) / 3)
            + p.RA * p.Dgam * x ** (1 + g))


def series_tail(p: SeriesBoundParams, delta: float, x: float, free_norm: float) -> TailBound:
    if not 0 < delta <= 1:
        raise DomainError("delta must lie in (0, 1]")
    g = p.gamma
    thr = (1 + delta) * free_norm + CONSTANTS["series_tail"] ** (1 + g) * series_epsilon(p, x)
    prob = (p.d + 1) * (1 + delta) ** (-x)
    xe = math.log(p.d + 1) / math.log1p(delta)
    expect = (1 + delta) * free_norm + CONSTANTS["series_expectation"] ** (1 + g) * series_epsilon(p, xe)
    return TailBound(thr, _clamp(prob), expect)


def universality_H(p: MarkovBoundParams, x0_moment: float, p_order: int) -> tuple[float, float]:
    """``H_p`` and the moment-gap bound ``c^p p^3 R Psi^2 varsigma^2 H_p^{p-3}``.

    ``x0_moment`` is ``(tr X_0^{2p})^{1/2p}``.
    """
    if p_order < 3:
        raise DomainError("p_order must be at least 3")
    H = (x0_moment + p.sigma + math.sqrt(p.v * p.sigma) * p_order**0.75
         + (p.R * p.Psi**2 * p.varsigma**2) ** (1 / 3) * p_order ** (2 / 3)
         + p.R * p.Psi * p_order)
    c = CONSTANTS["universality"]
    gap = c**p_order * p_order**3 * p.R * p.Psi**2 * p.varsigma**2 * H ** (p_order - 3)
    return H, gap

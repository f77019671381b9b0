"""Coupled Stieltjes-transform fixed point for block Markov chain spectra.

For cluster weights ``alpha``, equilibrium law ``pi`` and cluster
transition matrix ``p``, the functions ``a_1..a_2K`` satisfy

    a = 1 / (z - c a),

with ``c`` the ``2K x 2K`` profile from
:func:`freeconc.free_bounds.bmc_profile`.  The Stieltjes transform of the
symmetrized limiting singular-value law is
``s(z) = sum_i alpha_i (a_i + a_{K+i}) / 2``.

Solver: damped iteration ``a <- (1-theta) a + theta G(a)`` from ``a = 1/z``,
finished by Newton steps, along a continuation path in ``Im z`` so that
points close to the real axis inherit the correct (Herglotz) branch.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dependence import stationary_distribution
from .errors import ConvergenceError, DomainError, NumericError, ShapeError
from .free_bounds import bmc_profile

RESIDUAL_TOL = 1e-12
DAMPING = 0.5
MAX_DAMPED = 10**5


@dataclass(frozen=True)
class DysonSystem:
    alpha: np.ndarray
    pi: np.ndarray
    p: np.ndarray

    def __post_init__(self):
        a = np.asarray(self.alpha, dtype=float)
        pi = np.asarray(self.pi, dtype=float)
        p = np.asarray(self.p, dtype=float)
        K = a.size
        if pi.shape != (K,) or p.shape != (K, K):
            raise ShapeError("alpha, pi and p must describe the same K")
        if np.any(a <= 0) or abs(a.sum() - 1) > 1e-12:
            raise DomainError("alpha must be positive and sum to 1")
        if np.abs(pi @ p - pi).sum() > 1e-10:
            raise DomainError("pi is not stationary for p")
        object.__setattr__(self, "alpha", a)
        object.__setattr__(self, "pi", pi)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_chain(cls, alpha, p) -> "DysonSystem":
        return cls(np.asarray(alpha, dtype=float), stationary_distribution(p), np.asarray(p, dtype=float))

    @property
    def K(self) -> int:
        return self.alpha.size

    @property
    def coefficients(self) -> np.ndarray:
        return bmc_profile(self.alpha, self.pi, self.p).c

    @property
    def weights(self) -> np.ndarray:
        return np.concatenate([self.alpha, self.alpha]) / 2.0


@dataclass(frozen=True)
class StieltjesSolution:
    z: complex
    a: np.ndarray
    s: complex
    residual: float


def _residual(c, z, a):
    """Fixed-point residual, relative to ``max(1, |a_i|)`` per component."""
    return (np.abs(a - 1.0 / (z - a @ c.T)) / np.maximum(1.0, np.abs(a))).max(axis=-1)


def damped_iteration(c, z, a0=None, theta=DAMPING, tol=RESIDUAL_TOL, max_iter=MAX_DAMPED):
    """Damped fixed-point iteration for a vector of ``z`` values.

    Returns the iterate and the residual history (max over points).
    """
    z = np.atleast_1d(np.asarray(z, dtype=complex))[:, None]
    a = np.repeat(1.0 / z, c.shape[0], axis=1) if a0 is None else np.array(a0, dtype=complex)
    history = []
    for _ in range(max_iter):
        G = 1.0 / (z - a @ c.T)
        res = float((np.abs(a - G) / np.maximum(1.0, np.abs(a))).max())
        history.append(res)
        if res < tol:
            break
        a = (1.0 - theta) * a + theta * G
    return a, history


def _newton(c, z, a, tol, max_iter=100):
    """Newton steps with per-point backtracking on the residual."""
    eye = np.eye(c.shape[0])

    def resid(a):
        F = a - 1.0 / (z - a @ c.T)
        r = (np.abs(F) / np.maximum(1.0, np.abs(a))).max(axis=1)
        return F, np.where(np.isfinite(r), r, np.inf)

    F, r = resid(a)
    for _ in range(max_iter):
        if r.max() < tol:
            break
        G = 1.0 / (z - a @ c.T)
        J = eye[None] - (G**2)[:, :, None] * c[None]
        step = np.linalg.solve(J, F[..., None])[..., 0]
        t = np.ones(a.shape[0])
        for _ in range(30):
            trial = a - t[:, None] * step
            Ft, rt = resid(trial)
            ok = (rt < r) & np.all(trial.imag <= 0, axis=1)
            if ok.all():
                break
            t = np.where(ok, t, 0.5 * t)
        accept = ok | (r >= tol) & (rt < r)
        a = np.where(accept[:, None], trial, a)
        F, r = resid(a)
    return a


def _solve_many(sys_or_c, zs, tol=RESIDUAL_TOL, burn_in=50):
    c = sys_or_c.coefficients if isinstance(sys_or_c, DysonSystem) else np.asarray(sys_or_c)
    zs = np.atleast_1d(np.asarray(zs, dtype=complex))
    if np.any(zs.imag <= 0):
        raise DomainError("Im z must be positive")
    x, eta = zs.real, zs.imag
    top = max(1.0, float(eta.max()))
    levels = [top]
    while levels[-1] > eta.min():
        levels.append(levels[-1] / 3.0)
    a = None
    for lev in levels:
        zz = x + 1j * np.maximum(eta, lev)
        a, _ = damped_iteration(c, zz, a0=a, tol=tol, max_iter=burn_in)
        a = _newton(c, zz[:, None], a, tol)
    res = _residual(c, zs[:, None], a)
    if not np.all(np.isfinite(a)) or res.max() >= tol:
        raise ConvergenceError(f"Dyson solver residual {np.nanmax(res):.3e}", float(np.nanmax(res)))
    if np.any(a.imag > 1e-14):
        raise NumericError("solution left the lower half-plane")
    return a


def solve_dyson(sys: DysonSystem, z: complex) -> StieltjesSolution:
    """Solve the fixed point at one point ``z`` with ``Im z >= 1e-6``."""
    z = complex(z)
    if z.imag < 1e-6:
        raise DomainError("Im z must be at least 1e-6")
    a = _solve_many(sys, [z])[0]
    s = complex(np.dot(sys.weights, a))
    return StieltjesSolution(z, a, s, float(_residual(sys.coefficients, z, a[None])[0]))


def _density(sys, xs, eps):
    xs = np.asarray(xs, dtype=float)
    a = _solve_many(sys, xs + 1j * eps)
    rho = -(a @ sys.weights).imag / np.pi
    return np.where(rho < 1e-12, 0.0, rho)


def density_grid(sys: DysonSystem, xs, eps: float = 1e-3) -> np.ndarray:
    """Smoothed density ``-Im s(x + i eps) / pi`` of the symmetrized law."""
    if eps <= 0:
        raise DomainError("eps must be positive")
    xs = np.asarray(xs, dtype=float)
    # symmetric by construction: evaluate |x| and reuse
    return _density(sys, np.abs(xs), eps)


EDGE_EPS = 1e-8
EDGE_LEVEL = 1e-4


def support_edge(sys: DysonSystem, eps: float = EDGE_EPS, level: float = EDGE_LEVEL,
                 xtol: float = 1e-6) -> float:
    """Largest ``x`` with ``density(x; eps) > level``, refined by bisection.

    Outside the support the smoothed density decays like
    ``eps / (2 pi sqrt(dist))``, so ``eps`` must be far below ``level``
    for the threshold crossing to sit near the true edge.
    """
    sigma = float(np.sqrt(sys.coefficients.sum(axis=1).max()))
    # the edge is ||S_free||, which lies in [sigma, 2 sigma]
    hi = 2.0 * sigma * 1.05 + 0.1
    xs = np.linspace(0.9 * sigma, hi, 601)
    rho = density_grid(sys, xs, eps)
    inside = np.nonzero(rho > level)[0]
    if inside.size == 0:
        raise NumericError("density vanishes on the search grid (degenerate system)")
    k = inside.max()
    if k == xs.size - 1:
        raise NumericError("support extends beyond the Pisier bound")
    lo, hi = xs[k], xs[k + 1]
    while hi - lo > xtol:
        mid = 0.5 * (lo + hi)
        if density_grid(sys, [mid], eps)[0] > level:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def semicircle_density(x):
    """Standard semicircle density ``sqrt(4 - x^2) / (2 pi)`` on ``[-2, 2]``."""
    x = np.asarray(x, dtype=float)
    return np.where(np.abs(x) < 2.0, np.sqrt(np.clip(4.0 - x * x, 0.0, None)) / (2.0 * np.pi), 0.0)


def semicircle_stieltjes(z):
    """``(z - sqrt(z^2 - 4)) / 2`` on the branch with ``Im <= 0`` for ``Im z > 0``."""
    z = np.asarray(z, dtype=complex)
    r = np.sqrt(z - 2.0) * np.sqrt(z + 2.0)
    return (z - r) / 2.0


def singular_value_cdf(sys: DysonSystem, eps: float = 1e-4, points: int = 4001, x_max: float | None = None):
    """CDF of the limiting singular-value law on ``[0, x_max]``.

    The law is the symmetrized density folded onto ``x >= 0`` (doubled),
    integrated by the trapezoid rule and normalized to end at 1.
    """
    if x_max is None:
        x_max = 1.1 * support_edge(sys) + 0.05
    xs = np.linspace(0.0, x_max, points)
    rho = 2.0 * density_grid(sys, xs, eps)
    F = np.concatenate([[0.0], np.cumsum(0.5 * (rho[1:] + rho[:-1]) * np.diff(xs))])
    F /= F[-1]
    return lambda t: np.interp(t, xs, F, left=0.0, right=1.0)

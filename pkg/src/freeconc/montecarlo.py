"""Seeded trial harness: spectra, Gaussian models, KS distances and reports.

Trial ``t`` always draws from ``seeding.mix(base_seed, t)``; results are
written to pre-allocated slots, so the output does not depend on the
number of threads.
"""
from __future__ import annotations

import csv
import io
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, NamedTuple, Sequence

import numpy as np

from . import bmc as _bmc
from .errors import ConfigError, DomainError, ShapeError
from .free_bounds import MarkovBoundParams, universality_H
from .matrix_core import selfadjoint_dilation
from .models import GnmSpec, SubWeibullSpec, gnm_centered, sample_gnm, sample_subweibull_wigner
from .seeding import generator, mix, trial_generator

MODELS = ("bmc", "gnm", "wigner")
MAX_MOMENT = 12
PSD_CLIP = 1e-9
DIGITS = 12


@dataclass(frozen=True)
class TrialConfig:
    """What to sample and which spectral statistics to keep.

    ``n_values`` limits the stored singular values per trial (``None`` keeps
    all); ``moments`` is the highest tracial moment order recorded.
    ``threads = 0`` uses every available CPU.
    """

    model: str
    spec: object
    trials: int = 1
    base_seed: int = 0
    n_values: int | None = None
    moments: int = 0
    threads: int = 1

    def __post_init__(self):
        if self.model not in MODELS:
            raise ConfigError(f"model must be one of {MODELS}")
        expected = {"bmc": _bmc.BmcSpec, "gnm": GnmSpec, "wigner": SubWeibullSpec}[self.model]
        if not isinstance(self.spec, expected):
            raise ConfigError(f"model {self.model!r} needs a {expected.__name__}")
        if self.trials < 1:
            raise ConfigError("trials must be at least 1")
        if not 0 <= self.moments <= MAX_MOMENT:
            raise ConfigError(f"moments must lie in [0, {MAX_MOMENT}]")
        if self.n_values is not None and self.n_values < 0:
            raise ConfigError("n_values must be nonnegative")
        if self.threads < 0:
            raise ConfigError("threads must be nonnegative")


@dataclass(frozen=True)
class SpectralSample:
    """One trial: descending singular values, the operator norm and tracial moments."""

    trial: int
    values: np.ndarray
    norm: float
    moments: np.ndarray = field(default_factory=lambda: np.zeros(0))


def draw_matrix(cfg: TrialConfig, trial: int) -> np.ndarray:
    """The symmetric matrix of one trial.

    ``bmc`` gives the dilation of ``M``, ``gnm`` the centered adjacency
    matrix and ``wigner`` gives ``W / sqrt(d)``.
    """
    seed = mix(cfg.base_seed, trial)
    if cfg.model == "bmc":
        spec = cfg.spec
        N = _bmc.frequency_matrix(_bmc.simulate_path(spec, seed), spec.d)
        return selfadjoint_dilation(_bmc.centered_scaled(spec, N))
    if cfg.model == "gnm":
        return gnm_centered(sample_gnm(cfg.spec, generator(seed)), cfg.spec)
    W = sample_subweibull_wigner(cfg.spec, generator(seed))
    return W / math.sqrt(cfg.spec.d)


def _spectrum(cfg: TrialConfig, trial: int) -> SpectralSample:
    S = draw_matrix(cfg, trial)
    if cfg.model == "bmc":
        d = S.shape[0] // 2
        sv = np.linalg.svd(S[:d, d:], compute_uv=False)
        eig = np.concatenate([sv, -sv])
    else:
        eig = np.linalg.eigvalsh(S)
        sv = np.sort(np.abs(eig))[::-1]
    mom = np.array([np.mean(eig**k) for k in range(1, cfg.moments + 1)])
    keep = sv if cfg.n_values is None else sv[: cfg.n_values]
    return SpectralSample(trial, keep.copy(), float(sv[0]), mom)


def _workers(threads: int) -> int:
    return os.cpu_count() or 1 if threads == 0 else threads


def run_trials(cfg: TrialConfig) -> list[SpectralSample]:
    """Run ``cfg.trials`` independent trials, returned in trial order."""
    slots: list[SpectralSample | None] = [None] * cfg.trials
    workers = min(_workers(cfg.threads), cfg.trials)

    def job(t):
        slots[t] = _spectrum(cfg, t)

    if workers <= 1:
        for t in range(cfg.trials):
            job(t)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(job, range(cfg.trials)))
    return slots  # type: ignore[return-value]


class GaussianModel:
    """Gaussian matrix with prescribed mean and ``d^2 x d^2`` entry covariance.

    The covariance square root is computed once by a symmetric eigen-decomposition;
    eigenvalues within ``1e-9 * ||cov||`` of zero (either sign) are clipped to zero.
    """

    def __init__(self, mean, cov):
        mean = np.asarray(mean, dtype=float)
        cov = np.asarray(cov, dtype=float)
        if mean.ndim != 2 or mean.shape[0] != mean.shape[1]:
            raise ShapeError("mean must be square")
        d = mean.shape[0]
        if d > 64:
            raise DomainError("Gaussian models are limited to d <= 64")
        if cov.shape != (d * d, d * d):
            raise ShapeError("cov must be d^2 x d^2")
        cov = 0.5 * (cov + cov.T)
        # entries (i, j) and (j, i) of a symmetric matrix coincide: Var(X_ij - X_ji) = 0
        swap = np.arange(d * d).reshape(d, d).T.ravel()
        tol = 1e-12 * max(np.abs(cov).max(initial=0.0), 1.0)
        idx = np.arange(d * d)
        if np.abs(cov[idx, idx] + cov[swap, swap] - 2.0 * cov[idx, swap]).max(initial=0.0) > tol:
            raise DomainError("cov is not the covariance of a symmetric matrix")
        w, V = np.linalg.eigh(cov)
        scale = max(abs(w[0]), abs(w[-1]), 1e-300)
        if w[0] < -PSD_CLIP * scale:
            raise DomainError(f"covariance is indefinite (min eigenvalue {w[0]:.3e})")
        keep = w > PSD_CLIP * scale
        self.d = d
        self.mean = mean
        self.root = V[:, keep] * np.sqrt(w[keep])

    def sample(self, rng: np.random.Generator, size: int | None = None) -> np.ndarray:
        """One ``d x d`` draw, or a ``(size, d, d)`` stack, symmetrized."""
        m = 1 if size is None else int(size)
        z = rng.standard_normal((m, self.root.shape[1]))
        X = (z @ self.root.T).reshape(m, self.d, self.d)
        X = self.mean + 0.5 * (X + X.transpose(0, 2, 1))
        return X[0] if size is None else X


def gaussian_model_sample(mean, cov, seed: int) -> np.ndarray:
    """A single draw of the Gaussian model with the given mean and covariance."""
    return GaussianModel(mean, cov).sample(generator(seed))


def ks_distance(samples, cdf: Callable[[np.ndarray], np.ndarray]) -> float:
    """Kolmogorov-Smirnov distance of the empirical law of ``samples`` to ``cdf``.

    Both one-sided gaps are taken at every sample point, so ties are
    handled exactly.
    """
    x = np.sort(np.asarray(samples, dtype=float).ravel())
    N = x.size
    if N == 0:
        raise DomainError("samples must be nonempty")
    F = np.asarray(cdf(x), dtype=float)
    hi = np.searchsorted(x, x, side="right") / N
    lo = np.searchsorted(x, x, side="left") / N
    return float(min(1.0, max(np.max(hi - F), np.max(F - lo))))


def histogram(values, edge: float, bins: int = 100, upper: float | None = None):
    """Mass histogram over ``[0, upper]`` (default ``1.2 * edge``); returns ``(edges, mass)``."""
    if upper is None:
        upper = 1.2 * edge
    edges = np.linspace(0.0, upper, bins + 1)
    counts, _ = np.histogram(np.asarray(values, dtype=float), bins=edges)
    total = np.asarray(values).size
    return edges, counts / total if total else counts.astype(float)


class MomentGap(NamedTuple):
    emp_S_moment: float
    emp_G_moment: float
    gap: float
    theory_bound: float
    std_error: float
    holds: bool
    var_S: float
    var_G: float


def bmc_markov_params(spec) -> MarkovBoundParams:
    """Markov-model parameters of the dilation of ``M`` (dimension ``2d``)."""
    rep = _bmc.bound_report(spec, p_max=1)
    return MarkovBoundParams(rep.sigma_bound, rep.v_bound, rep.varsigma_bound, rep.R_bound,
                             rep.PsiE_bound, 2 * spec.d)


def moment_gap(cfg: TrialConfig, p_order: int) -> MomentGap:
    """Compare ``E tr S^p`` with ``E tr G^p`` for a block Markov chain.

    ``S`` is the dilation of ``M`` and ``G`` its Gaussian model built from the
    exact covariance; ``tr`` is the normalized trace.  For ``p >= 3`` the
    universality bound is evaluated, for ``p <= 2`` the bound is ``0``.
    The inequality is accepted when ``|gap| <= bound + 3 s.e.``.
    """
    if cfg.model != "bmc":
        raise ConfigError("moment_gap needs a bmc configuration")
    spec = cfg.spec
    if spec.d > 32:
        raise DomainError("moment_gap is limited to d <= 32")
    if not 1 <= p_order <= 6:
        raise DomainError("p_order must lie in [1, 6]")
    D = 2 * spec.d
    model = GaussianModel(np.zeros((D, D)), _bmc.dilation_covariance(_bmc.exact_covariance(spec), spec.d))
    T = cfg.trials
    trS = np.empty(T)
    trG = np.empty(T)
    workers = min(_workers(cfg.threads), T)

    def job(t):
        S = draw_matrix(cfg, t)
        G = model.sample(trial_generator(mix(cfg.base_seed, 1 << 32), t))
        trS[t] = np.trace(np.linalg.matrix_power(S, p_order)) / D
        trG[t] = np.trace(np.linalg.matrix_power(G, p_order)) / D

    if workers <= 1:
        for t in range(T):
            job(t)
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(job, range(T)))
    mS, mG = float(trS.mean()), float(trG.mean())
    vS = float(trS.var(ddof=1)) if T > 1 else 0.0
    vG = float(trG.var(ddof=1)) if T > 1 else 0.0
    se = math.sqrt((vS + vG) / T)
    bound = universality_H(bmc_markov_params(spec), 0.0, p_order)[1] if p_order >= 3 else 0.0
    gap = mS - mG
    return MomentGap(mS, mG, gap, bound, se, abs(gap) <= bound + 3 * se, vS, vG)


def fmt(x) -> str:
    """Fixed 12-significant-digit rendering used by every CSV writer."""
    return format(float(x), f".{DIGITS}g")


def samples_csv(samples: Sequence[SpectralSample]) -> str:
    """``trial, norm, s_1..s_k, m_1..m_P`` with one row per trial."""
    k = max((s.values.size for s in samples), default=0)
    P = max((s.moments.size for s in samples), default=0)
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["trial", "norm"] + [f"s_{i}" for i in range(1, k + 1)] + [f"m_{i}" for i in range(1, P + 1)])
    for s in samples:
        w.writerow([s.trial, fmt(s.norm)] + [fmt(v) for v in s.values] + [fmt(v) for v in s.moments])
    return buf.getvalue()


def histogram_csv(edges, mass) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["bin_left", "bin_right", "mass"])
    for a, b, m in zip(edges[:-1], edges[1:], mass):
        w.writerow([fmt(a), fmt(b), fmt(m)])
    return buf.getvalue()


def _jsonable(x):
    if isinstance(x, dict):
        return {str(k): _jsonable(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_jsonable(v) for v in x]
    if isinstance(x, np.ndarray):
        return [_jsonable(v) for v in x.tolist()]
    if isinstance(x, (np.integer,)):
        return int(x)
    if isinstance(x, (float, np.floating)):
        return float(fmt(x))
    return x


def report_json(doc: dict) -> str:
    """Deterministic JSON (sorted keys, numbers rounded to 12 significant digits)."""
    return json.dumps(_jsonable(doc), sort_keys=True, indent=2) + "\n"

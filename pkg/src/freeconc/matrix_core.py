"""Dense symmetric matrix primitives.

Matrices are plain ``numpy.ndarray`` objects.  Only real matrices are
supported; every model in this package (block Markov chains, G(d, m)
graphs, Wigner matrices) is real.

A covariance tensor ``Cov(S)_{ij,kl} = E[(S-ES)_ij (S-ES)_kl]`` is stored
as a dense ``d^2 x d^2`` matrix with row index ``i*d + j``.  That is only
practical for ``d <= 64``; larger models use the analytic parameter
bounds of :mod:`freeconc.bmc`.
"""
from __future__ import annotations

import numpy as np

from .errors import DomainError, NumericError, ShapeError

PSD_TOL = 1e-9


def as_symmetric(A, name="A") -> np.ndarray:
    """Validate ``A`` as a finite real symmetric square matrix."""
    A = np.asarray(A, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise NumericError(f"{name} has non-finite entries")
    scale = max(np.abs(A).max(initial=0.0), 1.0)
    if np.abs(A - A.T).max(initial=0.0) > 1e-12 * scale:
        raise ShapeError(f"{name} is not symmetric")
    return A


def jacobi_eigh(A, tol=1e-12, max_sweeps=100):
    """Cyclic Jacobi eigen-decomposition of a real symmetric matrix.

    Sweeps rotate every pair ``(p, q)`` with ``p < q`` in row order until
    the off-diagonal Frobenius norm drops below ``tol * ||A||_F``.

    Returns
    -------
    w : ndarray
        Eigenvalues, ascending.
    V : ndarray
        Orthonormal eigenvectors as columns.
    """
    A = as_symmetric(A).copy()
    n = A.shape[0]
    V = np.eye(n)
    fro = np.linalg.norm(A)
    if fro == 0.0 or n == 1:
        return np.diag(A).copy(), V
    for _ in range(max_sweeps):
        off = np.linalg.norm(A - np.diag(np.diag(A)))
        if off < tol * fro:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if apq == 0.0:
                    continue
                tau = (A[q, q] - A[p, p]) / (2.0 * apq)
                t = np.sign(tau) / (abs(tau) + np.sqrt(1.0 + tau * tau)) if tau != 0 else 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = t * c
                Ap, Aq = A[:, p].copy(), A[:, q].copy()
                A[:, p] = c * Ap - s * Aq
                A[:, q] = s * Ap + c * Aq
                Ap, Aq = A[p, :].copy(), A[q, :].copy()
                A[p, :] = c * Ap - s * Aq
                A[q, :] = s * Ap + c * Aq
                Vp, Vq = V[:, p].copy(), V[:, q].copy()
                V[:, p] = c * Vp - s * Vq
                V[:, q] = s * Vp + c * Vq
    else:
        raise NumericError("Jacobi sweeps did not converge")
    w = np.diag(A).copy()
    order = np.argsort(w)
    return w[order], V[:, order]


def eigvalsh(A, method="lapack") -> np.ndarray:
    """Ascending eigenvalues of a symmetric matrix.

    ``method="lapack"`` uses ``numpy.linalg.eigvalsh``; ``"jacobi"`` uses
    :func:`jacobi_eigh` and is only sensible for small matrices.
    """
    A = as_symmetric(A)
    if method == "jacobi":
        return jacobi_eigh(A)[0]
    if method != "lapack":
        raise DomainError(f"unknown eigensolver {method!r}")
    return np.linalg.eigvalsh(A)


def selfadjoint_dilation(M) -> np.ndarray:
    """Return the ``2d x 2d`` matrix ``[[0, M], [M^T, 0]]`` for square ``M``."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2 or M.shape[0] != M.shape[1]:
        raise ShapeError(f"dilation needs a square matrix, got {M.shape}")
    d = M.shape[0]
    S = np.zeros((2 * d, 2 * d))
    S[:d, d:] = M
    S[d:, :d] = M.T
    return S


def operator_norm(A, method="lapack") -> float:
    """Largest absolute eigenvalue of a symmetric matrix."""
    w = eigvalsh(A, method=method)
    return float(max(abs(w[0]), abs(w[-1])))


def normalized_trace_power(A, p: int) -> float:
    """``(1/d) Tr(A^p)`` from the eigenvalues of ``A``."""
    if int(p) != p or p < 1:
        raise DomainError("p must be a positive integer")
    w = eigvalsh(A)
    return float(np.mean(w ** int(p)))


def _psd_norm(C, name):
    C = as_symmetric(C, name)
    w = np.linalg.eigvalsh(C)
    top = max(abs(w[0]), abs(w[-1]))
    if w[0] < -PSD_TOL * max(top, 1.0):
        raise DomainError(f"{name} is not positive semidefinite (min eigenvalue {w[0]:.3e})")
    return float(max(w[-1], 0.0))


def sigma_param(S2) -> float:
    """``sigma(S) = ||E(S - ES)^2||^{1/2}`` given the second-moment matrix."""
    return float(np.sqrt(_psd_norm(S2, "S2")))


def v_param(C) -> float:
    """``v(S) = ||Cov(S)||^{1/2}`` for a dense ``d^2 x d^2`` covariance."""
    return float(np.sqrt(_psd_norm(C, "Cov")))


def singular_values(M) -> np.ndarray:
    """Singular values in descending order."""
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ShapeError("expected a 2-d array")
    return np.linalg.svd(M, compute_uv=False)


def second_moment_from_cov(C, d: int | None = None) -> np.ndarray:
    """``E[(S-ES)^2]`` from the covariance tensor: ``sum_k Cov_{ik,kj}``."""
    C = np.asarray(C, dtype=float)
    if d is None:
        d = int(round(np.sqrt(C.shape[0])))
    if C.shape != (d * d, d * d):
        raise ShapeError("covariance must be d^2 x d^2")
    T = C.reshape(d, d, d, d)
    return np.einsum("ikkj->ij", T)


def empirical_covariance(samples) -> tuple[np.ndarray, np.ndarray]:
    """Mean matrix and ``d^2 x d^2`` covariance of a stack of ``(T, d, d)`` samples."""
    X = np.asarray(samples, dtype=float)
    T, d, _ = X.shape
    flat = X.reshape(T, d * d)
    mean = flat.mean(axis=0)
    Z = flat - mean
    return mean.reshape(d, d), Z.T @ Z / T

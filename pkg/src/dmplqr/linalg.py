"""Dense linear-algebra kernels shared by the rest of the package.

Thin, validated wrappers over numpy/scipy. All functions are pure and
deterministic for a fixed input.
"""

from __future__ import annotations

import numpy as np
import scipy.linalg as sla

from .errors import NotHurwitzError, ValidationError

#: spectral abscissa must be below ``-HURWITZ_TOL`` before a Lyapunov solve
HURWITZ_TOL = 1e-10


def as_matrix(M, name="matrix", square=False):
    """Return ``M`` as a finite 2-D float array, raising ValidationError otherwise."""
    arr = np.asarray(M, dtype=float)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    elif arr.ndim == 1:
        arr = arr.reshape(-1, 1)
    if arr.ndim != 2 or min(arr.shape) < 1:
        raise ValidationError(f"{name} must be a non-empty 2-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} has non-finite entries")
    if square and arr.shape[0] != arr.shape[1]:
        raise ValidationError(f"{name} must be square, got shape {arr.shape}")
    return arr


def symmetrize(X):
    return 0.5 * (X + X.T)


def matrix_exponential(A, s=1.0):
    """Compute ``exp(A s)`` by scaling and squaring with a Pade core."""
    A = as_matrix(A, "A", square=True)
    s = float(s)
    if not np.isfinite(s):
        raise ValidationError("time argument must be finite")
    if s == 0.0:
        return np.eye(A.shape[0])
    return sla.expm(A * s)


def spectral_abscissa(A):
    """Largest real part among the eigenvalues of ``A``."""
    A = as_matrix(A, "A", square=True)
    return float(np.max(np.linalg.eigvals(A).real))


def spectral_radius(A):
    A = as_matrix(A, "A", square=True)
    return float(np.max(np.abs(np.linalg.eigvals(A))))


def operator_norm(M):
    """Spectral norm (largest singular value)."""
    M = as_matrix(M, "M")
    return float(np.linalg.norm(M, 2))


def condition_number(M):
    """``lambda_max / lambda_min`` of a symmetric positive definite matrix."""
    M = as_matrix(M, "M", square=True)
    w = np.linalg.eigvalsh(symmetrize(M))
    if w[0] <= 0.0:
        raise ValidationError(f"condition_number requires a positive definite matrix (lambda_min={w[0]:.3e})")
    return float(w[-1] / w[0])


def check_positive_definite(M, name="matrix"):
    M = as_matrix(M, name, square=True)
    if not np.allclose(M, M.T, rtol=1e-10, atol=1e-12 * max(1.0, np.abs(M).max())):
        raise ValidationError(f"{name} must be symmetric")
    lam = np.linalg.eigvalsh(symmetrize(M))[0]
    if lam <= 0.0:
        raise ValidationError(f"{name} must be positive definite (lambda_min={lam:.3e})")
    return symmetrize(M)


def solve_lyapunov(F, S, hurwitz_tol=HURWITZ_TOL):
    """Solve ``F^T X + X F + S = 0`` for symmetric ``X``.

    Parameters
    ----------
    F : (n, n) array_like
        Hurwitz matrix.
    S : (n, n) array_like
        Symmetric right-hand side.
    hurwitz_tol : float
        ``F`` is rejected unless its spectral abscissa is below ``-hurwitz_tol``.

    Returns
    -------
    X : (n, n) ndarray
        The unique symmetric solution.

    Raises
    ------
    NotHurwitzError
        If ``F`` has an eigenvalue with real part ``>= -hurwitz_tol``.
    """
    F = as_matrix(F, "F", square=True)
    S = as_matrix(S, "S", square=True)
    if F.shape != S.shape:
        raise ValidationError(f"dimension mismatch: F {F.shape} vs S {S.shape}")
    eig = np.linalg.eigvals(F)
    worst = eig[np.argmax(eig.real)]
    if worst.real >= -hurwitz_tol:
        raise NotHurwitzError(complex(worst))
    # scipy solves a X + X a^H = q
    X = sla.solve_continuous_lyapunov(F.T, -symmetrize(S))
    return symmetrize(X)


def solve_discrete_lyapunov(F, S):
    """Solve ``F^T X F - X + S = 0`` for a Schur-stable ``F``."""
    F = as_matrix(F, "F", square=True)
    S = as_matrix(S, "S", square=True)
    if spectral_radius(F) >= 1.0:
        raise NotHurwitzError(complex(spectral_radius(F)), "matrix is not Schur stable")
    return symmetrize(sla.solve_discrete_lyapunov(F.T, symmetrize(S)))


def controllability_margin(A, B):
    """Normalized PBH margin ``min_lambda sigma_min([A - lambda I, B]) / ||[A, B]||``.

    Equivalent to a rank test of the controllability matrix but well
    conditioned for large state dimension, where the Krylov matrix
    ``[B, AB, A^2 B, ...]`` overflows.
    """
    A = as_matrix(A, "A", square=True)
    B = as_matrix(B, "B")
    n = A.shape[0]
    if B.shape[0] != n:
        raise ValidationError(f"dimension mismatch: A {A.shape} vs B {B.shape}")
    scale = np.linalg.norm(np.hstack([A, B]), 2)
    if scale == 0.0:
        return 0.0
    margin = np.inf
    for lam in np.linalg.eigvals(A):
        M = np.hstack([A - lam * np.eye(n), B.astype(complex)])
        margin = min(margin, np.linalg.svd(M, compute_uv=False)[-1])
    return float(margin / scale)


def is_controllable(A, B, tol=1e-8):
    return controllability_margin(A, B) > tol


def psd_factor(W):
    """Return ``L`` with ``L L^T = W`` for a symmetric PSD ``W`` (clips tiny negative eigenvalues)."""
    w, V = np.linalg.eigh(symmetrize(np.asarray(W, dtype=float)))
    return V * np.sqrt(np.clip(w, 0.0, None))

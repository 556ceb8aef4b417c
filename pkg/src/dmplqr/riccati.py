"""Algebraic Riccati solvers, the finite-horizon recursion and the gain map.

Conventions
-----------
Continuous time: ``A^T P + P A - P B R^{-1} B^T P + Q = 0`` with gain
``K = -R^{-1} B^T P`` so that ``u = K x``.

Discrete time uses the forward-Euler data ``A_tau = I + tau A``,
``B_tau = tau B``, ``Q_tau = tau Q``, ``R_tau = tau R``. With this scaling
the discrete value matrix converges to the continuous one as ``tau -> 0``
without any ``1/tau`` normalization, and ``K_tau -> K`` at first order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError, ValidationError
from .linalg import (
    as_matrix,
    check_positive_definite,
    is_controllable,
    operator_norm,
    solve_lyapunov,
    spectral_abscissa,
    spectral_radius,
    symmetrize,
)

CARE_TOL = 1e-8
MAX_NEWTON = 100
MAX_FIXED_POINT = 1_000_000


@dataclass
class RiccatiSolution:
    P: np.ndarray
    K: np.ndarray
    residual: float
    iterations: int
    method: str = ""

    def to_dict(self):
        return {"P": self.P.tolist(), "K": self.K.tolist(), "residual": self.residual,
                "iterations": self.iterations, "method": self.method}


@dataclass
class DiscretizedProblem:
    A_tau: np.ndarray
    B_tau: np.ndarray
    Q_tau: np.ndarray
    R_tau: np.ndarray
    tau: float

    @property
    def n_x(self):
        return self.A_tau.shape[0]


@dataclass
class DarrResult:
    P_N: np.ndarray
    K_Ttau: np.ndarray
    N: int
    terminal: np.ndarray


def _check_dims(A, B, Q, R):
    A = as_matrix(A, "A", square=True)
    B = as_matrix(B, "B")
    Q = as_matrix(Q, "Q", square=True)
    R = as_matrix(R, "R", square=True)
    n, m = B.shape
    if A.shape[0] != n or Q.shape[0] != n or R.shape[0] != m:
        raise ValidationError(f"dimension mismatch: A {A.shape}, B {B.shape}, Q {Q.shape}, R {R.shape}")
    return A, B, Q, R


def euler_discretize(A, B, Q, R, tau):
    """Forward-Euler data of the continuous LQR problem at sampling time ``tau``."""
    A, B, Q, R = _check_dims(A, B, Q, R)
    tau = float(tau)
    if not (tau > 0 and math.isfinite(tau)):
        raise ValidationError(f"tau must be positive and finite, got {tau}")
    return DiscretizedProblem(np.eye(A.shape[0]) + tau * A, tau * B, tau * Q, tau * R, tau)


def care_residual(A, B, Q, R, P):
    """Spectral norm of ``A^T P + P A - P B R^{-1} B^T P + Q``."""
    G = B @ np.linalg.solve(R, B.T)
    return operator_norm(A.T @ P + P @ A - P @ G @ P + Q)


def dare_residual(dp, P):
    At, Bt = dp.A_tau, dp.B_tau
    S = dp.R_tau + Bt.T @ P @ Bt
    rhs = At.T @ P @ At + dp.Q_tau - At.T @ P @ Bt @ np.linalg.solve(S, Bt.T @ P @ At)
    return operator_norm(rhs - P)


def _bass_gain(A, B, R):
    """Stabilizing initial gain by the Bass shift construction.

    With ``beta`` larger than the spectral radius of ``A``,
    ``(A + beta I) Z + Z (A + beta I)^T = 2 B R^{-1} B^T`` has ``Z > 0`` for a
    controllable pair and ``K = -R^{-1} B^T Z^{-1}`` makes ``A + B K`` Hurwitz.
    """
    n = A.shape[0]
    beta = max(1.0, spectral_radius(A)) * 1.5
    F = -(A + beta * np.eye(n))
    Z = solve_lyapunov(F.T, 2.0 * B @ np.linalg.solve(R, B.T))
    return -np.linalg.solve(R, B.T @ np.linalg.inv(Z))


def _newton_kleinman(A, B, Q, R, K, tol, max_iter):
    """Newton-Kleinman iteration from a stabilizing gain ``K``."""
    P_prev = None
    for it in range(1, max_iter + 1):
        F = A + B @ K
        P = solve_lyapunov(F, Q + K.T @ R @ K)
        K = -np.linalg.solve(R, B.T @ P)
        res = care_residual(A, B, Q, R, P)
        if res <= tol * max(1.0, operator_norm(P)):
            return P, K, res, it
        if P_prev is not None and operator_norm(P - P_prev) <= 1e-15 * max(1.0, operator_norm(P)):
            # stagnated at rounding level
            return P, K, res, it
        P_prev = P
    raise NumericalError(f"Newton-Kleinman did not converge in {max_iter} steps (residual {res:.3e})")


def solve_care(A, B, Q, R, method="schur", tol=CARE_TOL, max_iter=MAX_NEWTON, check_controllable=True, K0=None):
    """Stabilizing solution of the continuous algebraic Riccati equation.

    Parameters
    ----------
    A, B, Q, R : array_like
        Plant and cost data; ``Q`` and ``R`` positive definite.
    method : {"schur", "newton"}
        ``"schur"`` uses the Hamiltonian Schur solver from scipy followed by
        Newton-Kleinman polishing if the residual is above ``tol``.
        ``"newton"`` runs Newton-Kleinman from ``K0`` or from the Bass gain.
    tol : float
        Relative residual tolerance, ``||res|| <= tol * max(1, ||P||)``.

    Returns
    -------
    RiccatiSolution
    """
    A, B, Q, R = _check_dims(A, B, Q, R)
    Q = check_positive_definite(Q, "Q")
    R = check_positive_definite(R, "R")
    if check_controllable and not is_controllable(A, B):
        raise ValidationError("(A, B) is not controllable")
    if method not in ("schur", "newton"):
        raise ValidationError(f"unknown CARE method {method!r}")

    iterations = 0
    if method == "schur" and K0 is None:
        try:
            P = symmetrize(sla.solve_continuous_are(A, B, Q, R))
        except (np.linalg.LinAlgError, ValueError) as exc:
            raise NumericalError(f"Schur CARE solve failed: {exc}") from exc
        K = -np.linalg.solve(R, B.T @ P)
        res = care_residual(A, B, Q, R, P)
        if not np.all(np.isfinite(P)) or spectral_abscissa(A + B @ K) >= 0:
            raise NumericalError("Schur CARE solve returned a non-stabilizing solution")
        if res > tol * max(1.0, operator_norm(P)):
            P, K, res, iterations = _newton_kleinman(A, B, Q, R, K, tol, max_iter)
    else:
        K = _bass_gain(A, B, R) if K0 is None else as_matrix(K0, "K0")
        if spectral_abscissa(A + B @ K) >= 0:
            raise ValidationError("initial gain is not stabilizing")
        P, K, res, iterations = _newton_kleinman(A, B, Q, R, K, tol, max_iter)
        method = "newton"

    if np.linalg.eigvalsh(P)[0] <= 0:
        raise NumericalError("CARE solution is not positive definite")
    if spectral_abscissa(A + B @ K) >= 0:
        raise NumericalError("CARE closed loop is not Hurwitz")
    if res > tol * max(1.0, operator_norm(P)):
        raise NumericalError(f"CARE residual {res:.3e} above tolerance")
    return RiccatiSolution(P, K, float(res), iterations, method)


def gain_from_value(X, dp):
    """Gain map ``-(R_tau + B_tau^T X B_tau)^{-1} B_tau^T X A_tau``."""
    X = as_matrix(X, "X", square=True)
    Bt = dp.B_tau
    S = dp.R_tau + Bt.T @ X @ Bt
    try:
        return -np.linalg.solve(S, Bt.T @ X @ dp.A_tau)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular R_tau + B_tau^T X B_tau") from exc


def _darr_step(X, dp):
    At, Bt = dp.A_tau, dp.B_tau
    S = dp.R_tau + Bt.T @ X @ Bt
    XA = X @ At
    try:
        gain = np.linalg.solve(S, Bt.T @ XA)
    except np.linalg.LinAlgError as exc:
        raise NumericalError("singular R_tau + B_tau^T P B_tau in the Riccati recursion") from exc
    return symmetrize(At.T @ XA + dp.Q_tau - XA.T @ Bt @ gain)


def darr_sequence(dp, terminal, N):
    """All iterates ``[P_0 = terminal, P_1, ..., P_N]`` of the backward recursion."""
    X = check_terminal(terminal, dp)
    out = [X]
    for _ in range(int(N)):
        X = _darr_step(X, dp)
        out.append(X)
    return out


def check_terminal(terminal, dp):
    X = as_matrix(terminal, "terminal", square=True)
    if X.shape[0] != dp.n_x:
        raise ValidationError(f"terminal has shape {X.shape}, expected ({dp.n_x}, {dp.n_x})")
    X = symmetrize(X)
    if np.linalg.eigvalsh(X)[0] < -1e-12 * max(1.0, np.abs(X).max()):
        raise ValidationError("terminal value must be positive semidefinite")
    return X


def darr_finite_horizon(dp, terminal, N):
    """Run the discrete Riccati recursion ``N`` steps back from ``terminal``.

    Iteration stops early only if an iterate is reproduced exactly, in which
    case the remaining steps would return the same matrix.
    """
    N = int(N)
    if N < 1:
        raise ValidationError("N must be >= 1")
    X = check_terminal(terminal, dp)
    terminal = X
    for _ in range(N):
        X_new = _darr_step(X, dp)
        if np.array_equal(X_new, X):
            break
        X = X_new
    return DarrResult(X, gain_from_value(X, dp), N, terminal)


def solve_dare(dp, tol=CARE_TOL, max_iter=MAX_FIXED_POINT):
    """Stabilizing solution of the discrete algebraic Riccati equation.

    scipy's generalized Schur solver is tried first; if it fails or misses
    the residual tolerance the backward recursion is iterated from ``Q_tau``
    until the residual is met.
    """
    At, Bt, Qt, Rt = _check_dims(dp.A_tau, dp.B_tau, dp.Q_tau, dp.R_tau)
    check_positive_definite(Qt, "Q_tau")
    check_positive_definite(Rt, "R_tau")
    P = None
    iterations = 0
    method = "schur"
    try:
        P = symmetrize(sla.solve_discrete_are(At, Bt, Qt, Rt))
        if not np.all(np.isfinite(P)):
            P = None
    except (np.linalg.LinAlgError, ValueError):
        P = None
    if P is None or dare_residual(dp, P) > tol * max(1.0, operator_norm(P)):
        method = "fixed-point"
        X = Qt.copy() if P is None else P
        for iterations in range(1, max_iter + 1):
            X = _darr_step(X, dp)
            if iterations % 50 == 0 or iterations < 50:
                if dare_residual(dp, X) <= tol * max(1.0, operator_norm(X)):
                    break
        else:
            raise NumericalError(f"DARE fixed-point iteration did not converge in {max_iter} steps")
        P = X
    K = gain_from_value(P, dp)
    res = dare_residual(dp, P)
    if res > tol * max(1.0, operator_norm(P)):
        raise NumericalError(f"DARE residual {res:.3e} above tolerance")
    if np.linalg.eigvalsh(P)[0] <= 0:
        raise NumericalError("DARE solution is not positive definite")
    if spectral_radius(At + Bt @ K) >= 1.0:
        raise NumericalError("DARE closed loop is not Schur stable")
    return RiccatiSolution(P, K, float(res), iterations, method)


def horizon_steps(T, tau):
    """Discrete horizon ``N = max(1, floor(T / tau))``.

    A relative slack of 1e-9 keeps exact multiples from rounding down.
    """
    if tau <= 0:
        raise ValidationError("tau must be positive")
    return max(1, int(math.floor(T / tau * (1.0 + 1e-9))))

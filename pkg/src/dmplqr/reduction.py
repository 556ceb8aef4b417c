"""Balanced-truncation reduced models with Petrov-Galerkin projections.

For an unstable plant the state space is split by a reordered real Schur
form into the unstable invariant subspace, kept exactly, and a stable
complement, which is balanced with respect to the input ``B`` and the
cost-weighted output ``Q^{1/2} x`` and truncated. The projections satisfy
``U^T V = I`` and the reduced data are ``A_r = U^T A V``, ``B_r = U^T B``,
``Q_r = V^T Q V``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .errors import NumericalError, ValidationError
from .linalg import is_controllable, operator_norm, psd_factor, solve_lyapunov, spectral_abscissa, symmetrize
from .riccati import solve_care

#: modes with real part >= -UNSTABLE_TOL are kept exactly
UNSTABLE_TOL = 1e-10
Q_REG = 1e-10


@dataclass
class ReducedModel:
    """Reduced model ``M_i`` with its projection and Riccati data."""

    label: str
    order: int
    U: np.ndarray
    V: np.ndarray
    A_r: np.ndarray
    B_r: np.ndarray
    Q_r: np.ndarray
    P_r: np.ndarray | None = None
    K_r: np.ndarray | None = None
    alpha: float | None = None
    L_M: float | None = None
    hankel_singular_values: np.ndarray = field(default_factory=lambda: np.zeros(0))
    n_unstable: int = 0
    q_regularized: bool = False

    @property
    def is_full_order(self):
        return self.order == self.U.shape[0]

    def lift_gain(self, K_reduced):
        """Full-state gain ``K_reduced U^T`` acting on plant states."""
        return K_reduced @ self.U.T

    def to_dict(self):
        def m(x):
            return None if x is None else np.asarray(x).tolist()
        return {
            "label": self.label, "order": self.order, "U": m(self.U), "V": m(self.V),
            "A_r": m(self.A_r), "B_r": m(self.B_r), "Q_r": m(self.Q_r), "P_r": m(self.P_r),
            "K_r": m(self.K_r), "alpha": self.alpha, "L_M": self.L_M,
            "hankel_singular_values": m(self.hankel_singular_values),
            "n_unstable": self.n_unstable, "q_regularized": self.q_regularized,
        }


def _unstable_first_schur(A):
    T, Z, nu = sla.schur(A, output="real", sort=lambda re, im: re >= -UNSTABLE_TOL)
    return T, Z, int(nu)


def balanced_truncation(sys, cost, order, label=None):
    """Project ``sys`` onto ``order`` states.

    Parameters
    ----------
    sys : LtiSystem
    cost : CostSpec
        ``Q^{1/2}`` is used as the output map when computing the
        observability Gramian of the stable part.
    order : int
        Reduced dimension; at least the number of unstable modes.
    label : str, optional
        Model label, defaults to ``"order-<order>"``.

    Returns
    -------
    ReducedModel
        Projection and reduced data; Riccati fields are left empty.
    """
    n = sys.n_x
    order = int(order)
    label = label or f"order-{order}"
    if not 1 <= order <= n:
        raise ValidationError(f"order must be in [1, {n}], got {order}")
    cost.check_against(sys)
    A, B, Q = sys.A, sys.B, cost.Q

    if order == n:
        I = np.eye(n)
        return ReducedModel(label, n, I, I, A.copy(), B.copy(), Q.copy(),
                            n_unstable=int(np.sum(np.linalg.eigvals(A).real >= -UNSTABLE_TOL)))

    T, Z, nu = _unstable_first_schur(A)
    if order < nu:
        raise ValidationError(f"order {order} is smaller than the number of unstable modes ({nu})")
    ns = n - nu
    k = order - nu

    # block-diagonalize [[Auu, Aus], [0, Ass]] with Auu X - X Ass = -Aus
    Auu, Aus, Ass = T[:nu, :nu], T[:nu, nu:], T[nu:, nu:]
    X = sla.solve_sylvester(Auu, -Ass, -Aus) if nu > 0 else np.zeros((0, ns))
    Tm = np.eye(n)
    Tm[:nu, nu:] = X
    Tinv = np.eye(n)
    Tinv[:nu, nu:] = -X

    Bs = (Tinv @ Z.T @ B)[nu:]
    Qh = np.real(sla.sqrtm(Q))
    Cs = (Qh @ Z @ Tm)[:, nu:]
    try:
        Wc = solve_lyapunov(Ass.T, Bs @ Bs.T)
        Wo = solve_lyapunov(Ass, Cs.T @ Cs)
    except NumericalError as exc:
        raise NumericalError(f"Gramian solve failed: {exc}") from exc
    Lc, Lo = psd_factor(Wc), psd_factor(Wo)
    Wl, hsv, Vrt = np.linalg.svd(Lo.T @ Lc)
    if k > 0 and hsv[k - 1] <= 1e-14 * max(hsv[0], 1e-300):
        raise NumericalError(f"Hankel singular value {k} is numerically zero; order {order} is not balanced-reachable")
    Tr = Lc @ Vrt[:k].T / np.sqrt(hsv[:k])
    Tl = Lo @ Wl[:, :k] / np.sqrt(hsv[:k])

    Vb = np.zeros((n, order))
    Ub = np.zeros((n, order))
    Vb[:nu, :nu] = np.eye(nu)
    Ub[:nu, :nu] = np.eye(nu)
    Vb[nu:, nu:] = Tr
    Ub[nu:, nu:] = Tl
    V = Z @ Tm @ Vb
    U = Z @ Tinv.T @ Ub

    return ReducedModel(label, order, U, V, U.T @ A @ V, U.T @ B, symmetrize(V.T @ Q @ V),
                        hankel_singular_values=hsv, n_unstable=nu)


def rom_riccati(rm, cost):
    """Populate ``P_r``, ``K_r`` and the decay rate ``alpha`` of a reduced model."""
    Q_r = rm.Q_r
    if np.linalg.eigvalsh(Q_r)[0] < Q_REG:
        Q_r = Q_r + Q_REG * np.eye(rm.order)
        rm.q_regularized = True
    if not is_controllable(rm.A_r, rm.B_r):
        raise NumericalError(f"reduced pair of {rm.label} is not controllable")
    sol = solve_care(rm.A_r, rm.B_r, Q_r, cost.R, check_controllable=False)
    rm.P_r = sol.P
    rm.K_r = sol.K
    rm.alpha = -spectral_abscissa(rm.A_r + rm.B_r @ sol.K)
    if not rm.alpha > 0:
        raise NumericalError(f"reduced closed loop of {rm.label} is not stable")
    return rm


def rom_sector_gain(rm, P_star, sys, cost):
    """Reduction sector gain ``||R^{-1} B^T (U P_r U^T - P_star)||``."""
    if rm.P_r is None:
        raise ValidationError("reduced Riccati data missing; call rom_riccati first")
    P_star = np.asarray(P_star, dtype=float)
    if P_star.shape != (sys.n_x, sys.n_x) or rm.U.shape[0] != sys.n_x:
        raise ValidationError("dimension mismatch between reduced model, P_star and system")
    D = rm.U @ rm.P_r @ rm.U.T - P_star
    rm.L_M = operator_norm(np.linalg.solve(cost.R, sys.B.T @ D))
    return rm.L_M


def build_reduced_model(sys, cost, order, P_star, label=None):
    """Balanced truncation, reduced Riccati solve and sector gain in one call."""
    rm = balanced_truncation(sys, cost, order, label=label)
    rom_riccati(rm, cost)
    rom_sector_gain(rm, P_star, sys, cost)
    return rm

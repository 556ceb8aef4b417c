"""The scalar design meta-problem for receding-horizon LQR.

Given fitted sector-bound curves for each candidate model, choose the
sampling time ``tau`` (and with it the horizon ``T`` that saturates the
per-step compute budget) minimizing the performance-gap bound subject to
the small-gain stability condition, then compare the optima across models.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import ValidationError
from .linalg import check_positive_definite, operator_norm

#: seconds per flop of a 16 MHz microcontroller
DEFAULT_TAU_G = 6.25e-8
DEFAULT_RHO = 0.97
DEFAULT_GRID = (1e-4, 0.04, 2000)


@dataclass
class DissConstants:
    """Incremental-stability constants of the LQR baseline."""

    c: float
    sigma_coeff: float
    alpha1: float
    alpha2: float
    kappa: float

    def to_dict(self):
        return dict(c=self.c, sigma_coeff=self.sigma_coeff, alpha1=self.alpha1, alpha2=self.alpha2, kappa=self.kappa)


def diss_constants(P_star, Q, R):
    """Dissipation rate, supply coefficient and Lyapunov bounds from ``P_star``.

    ``c = lambda_min(Q) / lambda_max(P_star)``, ``sigma(z) = lambda_max(R) z^2``,
    ``alpha1, alpha2`` the extreme eigenvalues of ``P_star`` and
    ``kappa = alpha2 / alpha1``.
    """
    P = check_positive_definite(P_star, "P_star")
    Q = check_positive_definite(Q, "Q")
    R = check_positive_definite(R, "R")
    ev = np.linalg.eigvalsh(P)
    a1, a2 = float(ev[0]), float(ev[-1])
    return DissConstants(
        c=float(np.linalg.eigvalsh(Q)[0]) / a2,
        sigma_coeff=float(np.linalg.eigvalsh(R)[-1]),
        alpha1=a1,
        alpha2=a2,
        kappa=a2 / a1,
    )


def _check_rho(rho, allow_zero=False):
    lo_ok = rho >= 0 if allow_zero else rho > 0
    if not (lo_ok and rho < 1):
        raise ValidationError(f"rho must lie in (0, 1), got {rho}")


def mu_rho_slope(consts, rho):
    """Slope of the linear performance scaling ``mu_rho(z) = 2 sqrt(kappa) / (c (1 - rho)) z``."""
    _check_rho(rho, allow_zero=True)
    return 2.0 * math.sqrt(consts.kappa) / (consts.c * (1.0 - rho))


def flop_count(n_x, n_u=1):
    """Flops of one Riccati recursion step: ``4n^3 + 4n^2 m + 2n m^2 + m^4 / 3``."""
    if int(n_x) != n_x or int(n_u) != n_u or n_x < 1 or n_u < 1:
        raise ValidationError(f"n_x and n_u must be positive integers, got ({n_x}, {n_u})")
    n, m = int(n_x), int(n_u)
    return 4 * n**3 + 4 * n**2 * m + 2 * n * m**2 + m**4 / 3


def horizon_from_timing(tau, phi, tau_g):
    """Horizon ``T = tau^2 / (tau_g phi)`` that saturates the per-sample compute budget."""
    if not (tau > 0 and phi > 0 and tau_g > 0):
        raise ValidationError("tau, phi and tau_g must be positive")
    return tau * tau / (tau_g * phi)


def small_gain_threshold(consts, Q, R, rho):
    """``0.5 sqrt(rho lambda_min(Q) / (kappa lambda_max(R)))``, before subtracting ``L_M``."""
    _check_rho(rho)
    qmin = float(np.linalg.eigvalsh(np.asarray(Q, dtype=float))[0])
    rmax = float(np.linalg.eigvalsh(np.asarray(R, dtype=float))[-1])
    return 0.5 * math.sqrt(rho * qmin / (consts.kappa * rmax))


def small_gain_rhs(consts, Q, R, rho, L_M):
    """Right-hand side of the small-gain constraint; negative means structurally infeasible."""
    return small_gain_threshold(consts, Q, R, rho) - float(L_M)


def cost_lipschitz(consts, cost, K_star, B_X=1.0, B_K=2.0, L_bar=1.0):
    """Lipschitz constants of the quadratic cost in state and input.

    ``L_x = 3 sqrt(kappa) B_X (||Q|| + 2 B_K ||R||)`` and
    ``L_pi = sqrt(kappa) B_X ||R|| (2 ||K_star|| + L_bar)``.
    """
    if not (B_X > 0 and B_K > 0 and L_bar >= 0):
        raise ValidationError("B_X, B_K must be positive and L_bar nonnegative")
    sk = math.sqrt(consts.kappa)
    nQ, nR = operator_norm(cost.Q), operator_norm(cost.R)
    L_x = 3.0 * sk * B_X * (nQ + 2.0 * B_K * nR)
    L_pi = sk * B_X * nR * (2.0 * operator_norm(K_star) + L_bar)
    return L_x, L_pi


def performance_gap_bound(L_star_value, L_x, L_pi, mu_slope, x0_norm):
    """``(L_x + L_pi L_star) mu_slope ||x0||``."""
    if min(L_star_value, L_x, L_pi, mu_slope, x0_norm) < 0:
        raise ValidationError("performance_gap_bound inputs must be nonnegative")
    return (L_x + L_pi * L_star_value) * mu_slope * x0_norm


def log_grid(lo=DEFAULT_GRID[0], hi=DEFAULT_GRID[1], n=DEFAULT_GRID[2]):
    if not (0 < lo < hi) or n < 1:
        raise ValidationError("grid needs 0 < lo < hi and n >= 1")
    return np.geomspace(lo, hi, int(n))


@dataclass
class DmpConfig:
    rho: float = DEFAULT_RHO
    tau_g: float = DEFAULT_TAU_G
    tau_grid: np.ndarray = field(default_factory=log_grid)
    x0_norm: float = 1.0

    def __post_init__(self):
        _check_rho(self.rho)
        if not self.tau_g > 0:
            raise ValidationError("tau_g must be positive")
        self.tau_grid = np.asarray(self.tau_grid, dtype=float).ravel()
        if self.tau_grid.size == 0:
            raise ValidationError("empty tau grid")
        if np.any(self.tau_grid <= 0) or np.any(np.diff(self.tau_grid) <= 0):
            raise ValidationError("tau grid must be positive and strictly increasing")
        if not self.x0_norm >= 0:
            raise ValidationError("x0_norm must be nonnegative")

    def to_dict(self):
        return {"rho": self.rho, "tau_g": self.tau_g, "tau_grid_min": float(self.tau_grid[0]),
                "tau_grid_max": float(self.tau_grid[-1]), "tau_grid_size": int(self.tau_grid.size),
                "x0_norm": self.x0_norm}


@dataclass
class DmpSolution:
    """Optimum of the design problem for one model (or the aggregate)."""

    model_index: str
    order: int
    tau_opt: float | None
    T_opt: float | None
    objective: float | None
    feasible_taus: np.ndarray
    infeasible: bool
    objective_curve: list
    rhs: float = float("nan")
    objective_scaled: float | None = None
    performance_bound: float | None = None

    @property
    def n_feasible(self):
        return int(len(self.feasible_taus))

    def to_dict(self, include_curve=False):
        d = {
            "model": self.model_index, "order": self.order, "tau_opt": self.tau_opt, "T_opt": self.T_opt,
            "objective": self.objective, "objective_scaled": self.objective_scaled,
            "performance_bound": self.performance_bound, "infeasible": self.infeasible,
            "n_feasible": self.n_feasible, "rhs": self.rhs,
            "feasible_tau_min": float(self.feasible_taus[0]) if self.n_feasible else None,
            "feasible_tau_max": float(self.feasible_taus[-1]) if self.n_feasible else None,
        }
        if include_curve:
            d["objective_curve"] = self.objective_curve
        return d


CURVE_COLUMNS = ("tau", "T", "objective", "lhs", "rhs", "feasible")


def evaluate_curves(fit_star, fit_hat, n_x_model, n_u, tau, tau_g, rho):
    """Vectorized objective and constraint left-hand side on a ``tau`` array."""
    tau = np.asarray(tau, dtype=float)
    T = tau * tau / (tau_g * flop_count(n_x_model, n_u))
    objective = fit_star.evaluate(tau, T) / (1.0 - rho)
    lhs = fit_hat.evaluate(tau, T) - fit_hat.L_M
    return T, objective, lhs


def solve_dmp_fixed_model(fit_star, fit_hat, rm, cfg, consts, cost, n_u=None,
                          L_x=None, L_pi=None):
    """Grid solution of the fixed-model design problem.

    For each grid ``tau`` the horizon saturating the compute budget is
    ``T = tau^2 / (tau_g Phi)``; the objective is the fitted baseline-trajectory
    bound divided by ``1 - rho`` and the constraint is
    ``fit_hat(tau, T) - L_M <= rhs``, counted feasible on equality.

    If ``L_x`` and ``L_pi`` are given the full performance-gap bound at the
    optimum is reported as well.
    """
    n_u = cost.R.shape[0] if n_u is None else n_u
    grid = cfg.tau_grid
    if grid.size == 0:
        raise ValidationError("empty tau grid")
    rhs = small_gain_rhs(consts, cost.Q, cost.R, cfg.rho, rm.L_M)
    T, obj, lhs = evaluate_curves(fit_star, fit_hat, rm.order, n_u, grid, cfg.tau_g, cfg.rho)
    feas = lhs <= rhs
    curve = [dict(tau=float(a), T=float(b), objective=float(c), lhs=float(d), rhs=float(rhs), feasible=bool(e))
             for a, b, c, d, e in zip(grid, T, obj, lhs, feas)]
    sol = DmpSolution(rm.label, rm.order, None, None, None, grid[feas], not bool(feas.any()), curve, rhs=float(rhs))
    if feas.any():
        idx = np.flatnonzero(feas)
        best = idx[np.argmin(obj[idx])]
        sol.tau_opt = float(grid[best])
        sol.T_opt = float(T[best])
        sol.objective = float(obj[best])
        # raw fitted L_star at the optimum times mu_rho's slope
        mu = mu_rho_slope(consts, cfg.rho)
        L_star_opt = float(obj[best] * (1.0 - cfg.rho))
        sol.objective_scaled = L_star_opt * mu * cfg.x0_norm
        if L_x is not None and L_pi is not None:
            sol.performance_bound = performance_gap_bound(L_star_opt, L_x, L_pi, mu, cfg.x0_norm)
    return sol


def solve_dmp(solutions):
    """Best feasible solution across models; ties go to the smaller model."""
    if not solutions:
        raise ValidationError("no candidate solutions")
    feasible = [s for s in solutions if not s.infeasible]
    if not feasible:
        return DmpSolution("none", 0, None, None, None, np.zeros(0), True, [])
    return min(feasible, key=lambda s: (s.objective, s.order))


def rho_tau_sweep(rm, fit_star, fit_hat, consts, cost, rhos, tau_grid, tau_g, n_u=None):
    """Full factorial ``rho x tau`` evaluation for one model.

    Returns a list of rows ``(model, tau, rho, objective, lhs, rhs, feasible)``
    and the per-``rho`` feasible counts.
    """
    n_u = cost.R.shape[0] if n_u is None else n_u
    rhos = np.asarray(rhos, dtype=float).ravel()
    for r in rhos:
        _check_rho(r)
    tau_grid = np.asarray(tau_grid, dtype=float)
    T = tau_grid**2 / (tau_g * flop_count(rm.order, n_u))
    base = fit_star.evaluate(tau_grid, T)
    lhs = fit_hat.evaluate(tau_grid, T) - fit_hat.L_M
    rows, counts = [], []
    for r in rhos:
        rhs = small_gain_rhs(consts, cost.Q, cost.R, r, rm.L_M)
        feas = lhs <= rhs
        obj = base / (1.0 - r)
        counts.append(int(feas.sum()))
        rows.extend(dict(model=rm.label, tau=float(t), rho=float(r), objective=float(o), lhs=float(l),
                         rhs=float(rhs), feasible=bool(f)) for t, o, l, f in zip(tau_grid, obj, lhs, feas))
    return rows, counts


def compute_budget_sweep(rm, fit_star, fit_hat, consts, cost, rho, tau_grid, budgets, n_u=None):
    """Feasible ``tau`` sets as the seconds-per-flop budget varies.

    Returns ``{tau_g: feasible tau array}`` and a flag telling whether the
    sets are nested (each contained in the next as ``tau_g`` decreases).
    """
    n_u = cost.R.shape[0] if n_u is None else n_u
    budgets = [float(b) for b in budgets]
    if any(b <= 0 for b in budgets):
        raise ValidationError("compute budgets must be positive")
    tau_grid = np.asarray(tau_grid, dtype=float)
    rhs = small_gain_rhs(consts, cost.Q, cost.R, rho, rm.L_M)
    regions = {}
    for tg in budgets:
        T = tau_grid**2 / (tg * flop_count(rm.order, n_u))
        lhs = fit_hat.evaluate(tau_grid, T) - fit_hat.L_M
        regions[tg] = lhs <= rhs
    order = sorted(budgets, reverse=True)
    nested = all(not np.any(regions[a] & ~regions[b]) for a, b in zip(order, order[1:]))
    return {tg: tau_grid[mask] for tg, mask in regions.items()}, nested

"""Exact sampled-data simulation, Riemann-sum costs and Monte-Carlo studies.

The plant is LTI and inputs are piecewise constant, so every propagation
step is a matrix exponential and there is no integration error; the only
approximation is the left Riemann sum used for the running cost.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import scipy.optimize as sopt

from .errors import ValidationError
from .linalg import as_matrix, matrix_exponential, operator_norm, spectral_abscissa
from .sector import check_invertible_dynamics, zoh_blocks

DIVERGENCE_LIMIT = 1e9
H_FLOOR = 1e-4
SUBSTEPS = 20


@dataclass
class Trajectory:
    times: np.ndarray
    states: np.ndarray  # (len(times), n_x)
    inputs: np.ndarray  # (len(times), n_u), value applied on [t_j, t_{j+1})
    cumulative_cost: np.ndarray
    h: float
    diverged: bool = False

    def rows(self):
        """CSV rows ``t, x_norm, u..., cumulative_cost``."""
        xn = np.linalg.norm(self.states, axis=1)
        out = []
        for j, t in enumerate(self.times):
            row = {"t": float(t), "x_norm": float(xn[j])}
            for i, u in enumerate(self.inputs[j]):
                row[f"u{i}"] = float(u)
            row["cumulative_cost"] = float(self.cumulative_cost[j])
            out.append(row)
        return out


def default_substep(tau):
    """Sub-sampling step that divides ``tau``: ``tau / 20`` but not below ``1e-4`` when avoidable."""
    if tau <= H_FLOOR:
        return float(tau)
    m = min(SUBSTEPS, int(math.floor(tau / H_FLOOR)))
    return float(tau / max(m, 1))


def _steps(T_sim, h):
    if not (h > 0 and T_sim >= 0):
        raise ValidationError("h must be positive and T_sim nonnegative")
    return int(round(T_sim / h))


def _stage_cost(X, U, Q, R):
    """Column-wise ``x^T Q x + u^T R u`` for batched states ``X`` (n x r) and inputs ``U`` (m x r)."""
    return np.einsum("ir,ir->r", X, Q @ X) + np.einsum("ir,ir->r", U, R @ U)


def _run_baseline(Phi, K, Q, R, X0, n_steps, h, record):
    X = X0.copy()
    r = X.shape[1]
    cost = np.zeros(r)
    alive = np.ones(r, dtype=bool)
    states, inputs, costs = ([X.copy()], [], [cost.copy()]) if record else (None, None, None)
    for _ in range(n_steps):
        Ucur = K @ X
        cost = cost + h * np.where(alive, _stage_cost(X, Ucur, Q, R), 0.0)
        X = Phi @ X
        alive &= np.linalg.norm(X, axis=0) <= DIVERGENCE_LIMIT
        X[:, ~alive] = 0.0
        if record:
            states.append(X.copy())
            inputs.append(Ucur)
            costs.append(cost.copy())
        if not alive.any():
            break
    return cost, ~alive, (states, inputs, costs)


def _run_deployed(Gs, K, Q, R, X0, n_steps, m, h, record):
    """``Gs[i]`` maps the held state ``x(t_k)`` to ``x(t_k + i h)`` for ``i = 1..m``."""
    X = X0.copy()
    held = X.copy()
    r = X.shape[1]
    cost = np.zeros(r)
    alive = np.ones(r, dtype=bool)
    states, inputs, costs = ([X.copy()], [], [cost.copy()]) if record else (None, None, None)
    Uheld = K @ held
    for j in range(n_steps):
        i = j % m
        if i == 0:
            held = X
            Uheld = K @ held
        cost = cost + h * np.where(alive, _stage_cost(X, Uheld, Q, R), 0.0)
        X = Gs[i + 1] @ held
        alive &= np.linalg.norm(X, axis=0) <= DIVERGENCE_LIMIT
        X[:, ~alive] = 0.0
        if record:
            states.append(X.copy())
            inputs.append(Uheld)
            costs.append(cost.copy())
        if not alive.any():
            break
    return cost, ~alive, (states, inputs, costs)


def _pack(record, h, diverged):
    states, inputs, costs = record
    k = len(states)
    n_u = inputs[0].shape[0] if inputs else 0
    inp = np.array([u[:, 0] for u in inputs] + ([inputs[-1][:, 0]] if inputs else []))
    return Trajectory(
        times=h * np.arange(k),
        states=np.array([x[:, 0] for x in states]),
        inputs=inp.reshape(k, n_u) if inputs else np.zeros((k, 0)),
        cumulative_cost=np.array([c[0] for c in costs]),
        h=h,
        diverged=bool(diverged[0]),
    )


def simulate_baseline(A_lqr, x0, T_sim, h, K=None, Q=None, R=None):
    """Continuous-time LQR closed loop ``dx/dt = A_lqr x`` sampled every ``h``.

    Parameters
    ----------
    A_lqr : ndarray
        Hurwitz closed-loop matrix ``A + B K``.
    x0 : ndarray
        Initial state.
    T_sim, h : float
        Horizon and sampling step.
    K, Q, R : ndarray, optional
        Gain and cost weights; inputs and the running cost are recorded
        when given (zero otherwise).
    """
    A_lqr = as_matrix(A_lqr, "A_lqr", square=True)
    n = A_lqr.shape[0]
    if spectral_abscissa(A_lqr) >= 0:
        raise ValidationError("A_lqr must be Hurwitz")
    x0 = np.asarray(x0, dtype=float).reshape(n, 1)
    K = np.zeros((1, n)) if K is None else as_matrix(K, "K")
    Q = np.zeros((n, n)) if Q is None else as_matrix(Q, "Q")
    R = np.zeros((K.shape[0],) * 2) if R is None else as_matrix(R, "R")
    Phi = matrix_exponential(A_lqr, h)
    _, div, rec = _run_baseline(Phi, K, Q, R, x0, _steps(T_sim, h), h, True)
    return _pack(rec, h, div)


def _check_substep(tau, h):
    m = int(round(tau / h))
    if m < 1 or abs(m * h - tau) > 1e-9 * tau:
        raise ValidationError(f"h={h} must divide tau={tau}")
    return m


def _interval_maps(A, B, K, tau, m):
    h = tau / m
    maps = [None]
    for i in range(1, m + 1):
        E11, E12 = zoh_blocks(A, B, i * h)
        maps.append(E11 + E12 @ K)
    return maps


def simulate_deployed(sys, K_dep, tau, x0, T_sim, h=None, Q=None, R=None):
    """Sampled-data loop with the input ``K_dep x(t_k)`` held over each interval.

    Inside ``[t_k, t_k + tau]`` the state is ``G(s) x(t_k)``, evaluated exactly
    at the sub-sampling instants ``t_k + i h``.
    """
    check_invertible_dynamics(sys.A)
    h = default_substep(tau) if h is None else float(h)
    m = _check_substep(tau, h)
    K_dep = as_matrix(K_dep, "K_dep")
    n = sys.n_x
    x0 = np.asarray(x0, dtype=float).reshape(n, 1)
    Q = np.zeros((n, n)) if Q is None else as_matrix(Q, "Q")
    R = np.zeros((sys.n_u, sys.n_u)) if R is None else as_matrix(R, "R")
    Gs = _interval_maps(sys.A, sys.B, K_dep, tau, m)
    _, div, rec = _run_deployed(Gs, K_dep, Q, R, x0, _steps(T_sim, h), m, h, True)
    return _pack(rec, h, div)


def riemann_cost(traj, Q, R, h=None):
    """Left-endpoint Riemann sum of ``x^T Q x + u^T R u`` over the trajectory."""
    h = traj.h if h is None else h
    X = traj.states[:-1]
    U = traj.inputs[:-1]
    if X.shape[0] == 0:
        return 0.0
    Q = as_matrix(Q, "Q")
    R = as_matrix(R, "R")
    stage = np.einsum("ti,ij,tj->t", X, Q, X)
    if U.shape[1]:
        stage = stage + np.einsum("ti,ij,tj->t", U, R, U)
    return float(h * stage.sum())


@dataclass
class SuboptStats:
    gaps: np.ndarray
    median: float
    q1: float
    q3: float
    whisker_low: float
    whisker_high: float
    outliers: list
    n_diverged: int = 0
    deployed_costs: np.ndarray = field(default_factory=lambda: np.zeros(0))
    baseline_costs: np.ndarray = field(default_factory=lambda: np.zeros(0))

    @classmethod
    def from_gaps(cls, gaps, n_diverged=0, deployed=None, baseline=None):
        gaps = np.asarray(gaps, dtype=float)
        q1, med, q3 = np.percentile(gaps, [25, 50, 75])
        iqr = q3 - q1
        lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
        inside = gaps[(gaps >= lo_fence) & (gaps <= hi_fence)]
        return cls(gaps, float(med), float(q1), float(q3), float(inside.min()), float(inside.max()),
                   [float(g) for g in gaps[(gaps < lo_fence) | (gaps > hi_fence)]], int(n_diverged),
                   np.zeros(0) if deployed is None else deployed, np.zeros(0) if baseline is None else baseline)

    def to_dict(self):
        return dict(n_runs=int(self.gaps.size), median=self.median, q1=self.q1, q3=self.q3,
                    whisker_low=self.whisker_low, whisker_high=self.whisker_high, n_outliers=len(self.outliers),
                    outliers=self.outliers, n_diverged=self.n_diverged)


def unit_sphere_samples(seed, n_runs, n_x):
    """One unit vector per run from normalized Gaussians, each run with its own spawned stream."""
    children = np.random.SeedSequence(int(seed)).spawn(int(n_runs))
    X = np.empty((n_x, n_runs))
    for j, ss in enumerate(children):
        v = np.random.Generator(np.random.PCG64(ss)).standard_normal(n_x)
        X[:, j] = v / np.linalg.norm(v)
    return X


def monte_carlo_subopt(sys, cost, K_dep, tau, n_runs=1000, T_sim=10.0, seed=0, K_star=None, h=None, batch=250):
    """Distribution of ``|J_deployed - J_baseline|`` over unit initial states.

    Both costs are left Riemann sums on the same grid ``h`` over ``[0, T_sim]``.
    Runs whose state norm exceeds the divergence limit are stopped and keep
    the cost accumulated so far, so their gap is a lower bound; they are
    counted in ``n_diverged``.
    """
    if int(n_runs) < 1:
        raise ValidationError("n_runs must be >= 1")
    if K_star is None:
        from .riccati import solve_care
        K_star = solve_care(sys.A, sys.B, cost.Q, cost.R).K
    h = default_substep(tau) if h is None else float(h)
    m = _check_substep(tau, h)
    n_steps = _steps(T_sim, h)
    X0 = unit_sphere_samples(seed, n_runs, sys.n_x)
    Gs = _interval_maps(sys.A, sys.B, K_dep, tau, m)
    Phi = matrix_exponential(sys.A + sys.B @ K_star, h)
    Jd, Jb, div = [], [], []
    for s in range(0, n_runs, batch):
        Xb = X0[:, s:s + batch]
        cd, dd, _ = _run_deployed(Gs, K_dep, cost.Q, cost.R, Xb, n_steps, m, h, False)
        cb, _, _ = _run_baseline(Phi, K_star, cost.Q, cost.R, Xb, n_steps, h, False)
        Jd.append(cd)
        Jb.append(cb)
        div.append(dd)
    Jd, Jb, div = np.concatenate(Jd), np.concatenate(Jb), np.concatenate(div)
    return SuboptStats.from_gaps(np.abs(Jd - Jb), int(div.sum()), Jd, Jb)


@dataclass
class LocalOptimum:
    tau: float
    value: float
    at_boundary: bool
    grid: np.ndarray
    grid_values: np.ndarray


def local_optimal_tau(A_lqr, sys, gain_builder, tau_range=(1e-4, 0.04), n_grid=60):
    """Locally optimal sampling time minimizing ``||e^{A_lqr tau} - G^(tau)||``.

    ``G^`` is the hold transition with ``gain_builder(tau)``. A log-spaced
    coarse grid locates the interior local minima; the lowest one is refined
    by golden-section search in ``log tau``. If the grid has no interior
    local minimum the best boundary point is returned and flagged.
    """
    lo, hi = map(float, tau_range)
    if not 0 < lo < hi:
        raise ValidationError("tau_range must satisfy 0 < lo < hi")
    check_invertible_dynamics(sys.A)

    def f(log_tau):
        tau = float(np.exp(log_tau))
        E11, E12 = zoh_blocks(sys.A, sys.B, tau)
        return operator_norm(matrix_exponential(A_lqr, tau) - (E11 + E12 @ gain_builder(tau)))

    g = np.linspace(np.log(lo), np.log(hi), int(n_grid))
    v = np.array([f(x) for x in g])
    interior = [j for j in range(1, len(g) - 1) if v[j] <= v[j - 1] and v[j] <= v[j + 1]]
    if not interior:
        j = int(np.argmin(v))
        return LocalOptimum(float(np.exp(g[j])), float(v[j]), True, np.exp(g), v)
    j = min(interior, key=lambda k: v[k])
    try:
        res = sopt.minimize_scalar(f, bracket=(g[j - 1], g[j], g[j + 1]), method="golden", tol=1e-6)
        x, val = float(res.x), float(res.fun)
    except ValueError:
        x, val = g[j], v[j]
    if not (g[j - 1] <= x <= g[j + 1]) or val > v[j]:
        x, val = g[j], v[j]
    return LocalOptimum(float(np.exp(x)), float(val), False, np.exp(g), v)


def verify_small_gain_trajectory(baseline, deployed, consts, rho):
    """Pointwise check of ``||x^_t - x*_t|| <= sqrt(kappa) exp(-c (1 - rho) t / 2) ||x0||``.

    Returns a dict with the maximum violation (``0`` when the envelope holds)
    and the minimum slack.
    """
    tb, td = np.asarray(baseline.times), np.asarray(deployed.times)
    k = min(len(tb), len(td))
    if k == 0 or not np.allclose(tb[:k], td[:k], rtol=0, atol=1e-12 * max(1.0, tb[k - 1])):
        raise ValidationError("baseline and deployed trajectories must share the time grid")
    x0b, x0d = baseline.states[0], deployed.states[0]
    if not np.allclose(x0b, x0d):
        raise ValidationError("trajectories must share the initial state")
    t = tb[:k]
    err = np.linalg.norm(deployed.states[:k] - baseline.states[:k], axis=1)
    env = math.sqrt(consts.kappa) * np.exp(-consts.c * (1.0 - rho) * t / 2.0) * np.linalg.norm(x0b)
    slack = env - err
    return {"max_violation": float(max(0.0, -slack.min())), "min_slack": float(slack.min()),
            "holds": bool(slack.min() >= -1e-6), "n_points": int(k),
            "diverged": bool(deployed.diverged)}

"""Design-dependent sector gains and their fitted functional form.

Under zero-order hold with gain ``K`` the state evolves inside a sampling
interval as ``x(t_k + s) = G(s) x(t_k)`` with
``G(s) = e^{As} + (e^{As} - I) A^{-1} B K``. The deployed gain is the
finite-horizon Riccati gain of the Euler-discretized reduced model, lifted
to the plant through ``U^T``. Comparing it with the LQR gain along the
baseline (``G*``, built with ``K*``) and deployed (``G^``) trajectories gives

    L*  = ||K_dep G*(tau)^{-1} - K*||,    L^ = ||K_dep G^(tau)^{-1} - K*||.

Both are fitted by

    L(tau, T) ~ C1 tau [+ C1q tau^2] + (C2 + C3 tau) exp(-alpha T) + L_M.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla
import scipy.optimize as sopt

from .dmp import flop_count, horizon_from_timing
from .errors import NumericalError, ValidationError
from .linalg import as_matrix, operator_norm, spectral_radius
from .riccati import darr_finite_horizon, euler_discretize, horizon_steps

#: G(tau) with condition number above this is treated as singular
MAX_TRANSITION_COND = 1e12
FORMS = ("linear", "quadratic", "fitted_alpha")
KINDS = ("baseline", "deployed")


def check_invertible_dynamics(A):
    s = np.linalg.svd(A, compute_uv=False)
    if s[-1] <= 1e-12 * s[0]:
        raise ValidationError("A is numerically singular; the hold transition formula needs A invertible")


def zoh_blocks(A, B, s):
    """Blocks ``(e^{As}, (e^{As} - I) A^{-1} B)`` from one augmented exponential.

    ``expm([[A, B], [0, 0]] s) = [[e^{As}, int_0^s e^{Ar} dr B], [0, I]]`` and the
    integral equals ``(e^{As} - I) A^{-1} B``, so no explicit inverse is formed.
    """
    n, m = B.shape
    M = np.zeros((n + m, n + m))
    M[:n, :n] = A
    M[:n, n:] = B
    E = sla.expm(M * float(s))
    return E[:n, :n], E[:n, n:]


def zoh_transition(A, B, K, s):
    """Per-interval map ``G(s)`` under the held input ``u = K x(t_k)``."""
    A = as_matrix(A, "A", square=True)
    B = as_matrix(B, "B")
    K = as_matrix(K, "K")
    if B.shape[0] != A.shape[0] or K.shape != (B.shape[1], A.shape[0]):
        raise ValidationError(f"dimension mismatch: A {A.shape}, B {B.shape}, K {K.shape}")
    if s < 0:
        raise ValidationError("s must be nonnegative")
    check_invertible_dynamics(A)
    E11, E12 = zoh_blocks(A, B, s)
    return E11 + E12 @ K


@dataclass
class DeployedGain:
    K_dep: np.ndarray
    K_reduced: np.ndarray
    T_star: float
    N: int
    horizon_clamped: bool


def deployed_gain(rm, cost, tau, tau_g, n_u=None):
    """Finite-horizon Riccati gain of model ``rm`` at sampling time ``tau``.

    The horizon saturates the compute budget, ``N = floor(T*/tau)``, clamped to
    at least one step (flagged when the budget does not even cover one).
    The recursion starts from the terminal weight ``Q_tau``.
    """
    n_u = rm.B_r.shape[1] if n_u is None else n_u
    T = horizon_from_timing(tau, flop_count(rm.order, n_u), tau_g)
    N = horizon_steps(T, tau)
    dp = euler_discretize(rm.A_r, rm.B_r, rm.Q_r, cost.R, tau)
    res = darr_finite_horizon(dp, dp.Q_tau, N)
    return DeployedGain(rm.lift_gain(res.K_Ttau), res.K_Ttau, T, N, T < tau)


@dataclass
class SectorSample:
    tau: float
    T_star: float
    L_star: float
    L_hat: float
    N: int = 1
    horizon_clamped: bool = False
    spectral_radius_hat: float = float("nan")

    def to_row(self):
        return dict(tau=self.tau, T_star=self.T_star, L_star=self.L_star, L_hat=self.L_hat)


def sector_gain_at(sys, cost, rm, tau, tau_g, K_star, blocks=None):
    """Exact ``L*`` and ``L^`` of model ``rm`` at one sampling time.

    Parameters
    ----------
    sys : LtiSystem
    cost : CostSpec
    rm : ReducedModel
        Must carry reduced Riccati data.
    tau : float
        Sampling time.
    tau_g : float
        Seconds per flop.
    K_star : ndarray
        LQR gain of the full plant.
    blocks : tuple, optional
        Precomputed ``zoh_blocks(A, B, tau)``; shared between models.
    """
    if not tau > 0:
        raise ValidationError("tau must be positive")
    dg = deployed_gain(rm, cost, tau, tau_g, sys.n_u)
    E11, E12 = zoh_blocks(sys.A, sys.B, tau) if blocks is None else blocks
    G_star = E11 + E12 @ K_star
    G_hat = E11 + E12 @ dg.K_dep
    L = []
    for G in (G_star, G_hat):
        if np.linalg.cond(G) > MAX_TRANSITION_COND:
            raise NumericalError(f"transition matrix is singular at tau={tau:g}")
        # K G^{-1} via a transposed solve
        L.append(operator_norm(np.linalg.solve(G.T, dg.K_dep.T).T - K_star))
    return SectorSample(float(tau), dg.T_star, L[0], L[1], dg.N, dg.horizon_clamped, spectral_radius(G_hat))


def sample_taus(seed, n=10, lo=1e-4, hi=0.04):
    """``n`` random sampling times in ``[lo, hi]``, log-uniform and stratified.

    ``log tau`` is split into ``n`` equal strata with one uniform draw in each,
    so every sample is marginally log-uniform while the whole range is covered.
    """
    from .systems import make_rng

    n = int(n)
    if n < 1 or not 0 < lo < hi:
        raise ValidationError("need n >= 1 and 0 < lo < hi")
    rng = make_rng(seed, 0x5A)
    edges = np.linspace(np.log(lo), np.log(hi), n + 1)
    return np.exp(edges[:-1] + rng.uniform(0.0, 1.0, n) * np.diff(edges))


@dataclass
class SectorBoundFit:
    """Fitted coefficients of the aggregate sector bound."""

    C1: float
    C2: float
    C3: float
    alpha_used: float
    L_M: float
    trajectory_kind: str = "baseline"
    C1q: float = 0.0
    form: str = "linear"
    clamped: bool = False
    rss: float = 0.0
    relative_rms: float = 0.0
    n_samples: int = 0
    diagnostics: dict = field(default_factory=dict)

    def parts(self, tau, T):
        """Sampling term, horizon term and ``L_M`` evaluated separately."""
        tau = np.asarray(tau, dtype=float)
        T = np.asarray(T, dtype=float)
        tau_term = self.C1 * tau + self.C1q * tau**2
        horizon_term = (self.C2 + self.C3 * tau) * np.exp(-self.alpha_used * T)
        return tau_term, horizon_term, np.full_like(tau_term, self.L_M)

    def evaluate(self, tau, T):
        a, b, c = self.parts(tau, T)
        return a + b + c

    def to_dict(self):
        return dict(form=self.form, trajectory_kind=self.trajectory_kind, C1=self.C1, C1q=self.C1q,
                    C2=self.C2, C3=self.C3, alpha_used=self.alpha_used, L_M=self.L_M, clamped=self.clamped,
                    rss=self.rss, relative_rms=self.relative_rms, n_samples=self.n_samples,
                    diagnostics=self.diagnostics)


def _design(tau, T, alpha, quadratic):
    e = np.exp(-alpha * T)
    cols = [tau] + ([tau**2] if quadratic else []) + [e, tau * e]
    return np.column_stack(cols)


def _lsq(X, y):
    """Least squares on column-normalized regressors; NNLS refit if any coefficient is negative."""
    scale = np.linalg.norm(X, axis=0)
    if np.any(scale == 0) or np.linalg.matrix_rank(X / scale) < X.shape[1]:
        raise NumericalError("rank-deficient sector-bound regression (collinear samples)")
    Xs = X / scale
    coef, *_ = np.linalg.lstsq(Xs, y, rcond=None)
    clamped = bool(np.any(coef < 0))
    if clamped:
        coef, _ = sopt.nnls(Xs, y)
    coef = coef / scale
    r = X @ coef - y
    return coef, float(r @ r), clamped


def fit_sector_bound(samples, alpha_i, L_M, form="linear", kind="baseline", alpha_bounds=(0.1, 10.0)):
    """Least-squares fit of the sector-bound form.

    Parameters
    ----------
    samples : sequence of SectorSample
        Evaluated gains; ``kind`` selects ``L_star`` (baseline) or ``L_hat``
        (deployed).
    alpha_i : float
        Reduced closed-loop decay rate, used as the exponential rate for the
        ``linear`` and ``quadratic`` forms and to bracket the search for
        ``fitted_alpha``.
    L_M : float
        Reduction sector gain, subtracted from the target.
    form : {"linear", "quadratic", "fitted_alpha"}

    Returns
    -------
    SectorBoundFit
        Negative coefficients are refitted under a nonnegativity constraint
        and ``clamped`` is set.
    """
    if form not in FORMS:
        raise ValidationError(f"unknown fit form {form!r}")
    if kind not in KINDS:
        raise ValidationError(f"unknown trajectory kind {kind!r}")
    samples = list(samples)
    need = 4 if form == "linear" else 5
    if len(samples) < need:
        raise ValidationError(f"form {form!r} needs at least {need} samples, got {len(samples)}")
    if not alpha_i > 0:
        raise ValidationError("alpha_i must be positive")
    tau = np.array([s.tau for s in samples], dtype=float)
    T = np.array([s.T_star for s in samples], dtype=float)
    L = np.array([s.L_star if kind == "baseline" else s.L_hat for s in samples], dtype=float)
    y = L - L_M
    quadratic = form == "quadratic"

    if form == "fitted_alpha":
        def rss_of(log_a):
            try:
                return _lsq(_design(tau, T, np.exp(log_a), False), y)[1]
            except NumericalError:
                return np.inf
        lo, hi = np.log(alpha_bounds[0] * alpha_i), np.log(alpha_bounds[1] * alpha_i)
        grid = np.linspace(lo, hi, 41)
        vals = np.array([rss_of(g) for g in grid])
        j = int(np.argmin(vals))
        a, b = grid[max(j - 1, 0)], grid[min(j + 1, len(grid) - 1)]
        best = sopt.minimize_scalar(rss_of, bounds=(a, b), method="bounded", options={"xatol": 1e-10})
        log_alpha = best.x if best.fun <= vals[j] else grid[j]
        alpha = float(np.exp(log_alpha))
    else:
        alpha = float(alpha_i)

    coef, rss, clamped = _lsq(_design(tau, T, alpha, quadratic), y)
    if quadratic:
        C1, C1q, C2, C3 = coef
    else:
        (C1, C2, C3), C1q = coef, 0.0
    rms_L = float(np.sqrt(np.mean(L**2)))
    rel = float(np.sqrt(rss / len(L)) / rms_L) if rms_L > 0 else 0.0
    return SectorBoundFit(float(C1), float(C2), float(C3), alpha, float(L_M), kind, float(C1q), form,
                          clamped, rss, rel, len(samples))

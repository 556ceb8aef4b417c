import math
from fractions import Fraction
from types import SimpleNamespace

import numpy as np
import pytest

from dmplqr.dmp import (
    DmpConfig,
    compute_budget_sweep,
    cost_lipschitz,
    diss_constants,
    flop_count,
    horizon_from_timing,
    log_grid,
    mu_rho_slope,
    performance_gap_bound,
    rho_tau_sweep,
    small_gain_rhs,
    small_gain_threshold,
    solve_dmp,
    solve_dmp_fixed_model,
)
from dmplqr.errors import ValidationError
from dmplqr.sector import SectorBoundFit
from dmplqr.systems import CostSpec


def test_flop_count_exact():
    assert Fraction(flop_count(3, 1)).limit_denominator(10) == Fraction(451, 3)
    assert Fraction(flop_count(1, 1)).limit_denominator(10) == Fraction(31, 3)
    assert flop_count(3, 1) == 150 + 1 / 3
    assert flop_count(1, 1) == 10 + 1 / 3
    assert flop_count(2, 2) == 32 + 32 + 16 + 16 / 3
    with pytest.raises(ValidationError):
        flop_count(0, 1)
    with pytest.raises(ValidationError):
        flop_count(2.5, 1)


def test_timing_identity(rng):
    for _ in range(100):
        tau = 10 ** rng.uniform(-5, -1)
        phi = 10 ** rng.uniform(1, 7)
        tg = 10 ** rng.uniform(-10, -6)
        T = horizon_from_timing(tau, phi, tg)
        assert tg * (T / tau) * phi == pytest.approx(tau, rel=4 * np.finfo(float).eps)
    with pytest.raises(ValidationError):
        horizon_from_timing(0.0, 1.0, 1.0)


def test_diss_constants_identity():
    c = diss_constants(np.eye(3), np.eye(3), np.eye(1))
    assert (c.c, c.kappa, c.alpha1, c.alpha2, c.sigma_coeff) == (1.0, 1.0, 1.0, 1.0, 1.0)
    assert mu_rho_slope(c, 0.0) == 2.0
    assert small_gain_threshold(c, np.eye(3), np.eye(1), 0.64) == pytest.approx(0.4)
    with pytest.raises(ValidationError):
        diss_constants(-np.eye(2), np.eye(2), np.eye(1))


def test_threshold_monotone_in_rho():
    c = diss_constants(np.diag([1.0, 4.0]), np.eye(2), np.eye(1))
    vals = [small_gain_threshold(c, np.eye(2), np.eye(1), r) for r in np.linspace(0.01, 0.99, 30)]
    assert np.all(np.diff(vals) > 0)
    with pytest.raises(ValidationError):
        small_gain_threshold(c, np.eye(2), np.eye(1), 1.0)


def test_cost_lipschitz_and_gap_bound():
    c = diss_constants(np.eye(2), np.eye(2), np.eye(1))
    L_x, L_pi = cost_lipschitz(c, CostSpec.identity(2), np.array([[1.0, 0.0]]), B_X=1.0, B_K=2.0, L_bar=0.5)
    assert L_x == pytest.approx(3 * (1 + 4))
    assert L_pi == pytest.approx(2 + 0.5)
    assert performance_gap_bound(0.1, L_x, L_pi, 2.0, 1.0) == pytest.approx((15 + 0.25) * 2)
    assert performance_gap_bound(0.0, 0.0, 0.0, 1.0, 1.0) == 0.0


def _fit(C1, C2, L_M, alpha=1.0):
    return SectorBoundFit(C1, C2, 0.0, alpha, L_M)


def _model(label, order, L_M):
    return SimpleNamespace(label=label, order=order, L_M=L_M)


def test_fixed_model_decomposition_and_optimum():
    consts = diss_constants(np.eye(1), np.eye(1), np.eye(1))
    cost = CostSpec.identity(1)
    cfg = DmpConfig(rho=0.5, tau_g=1e-3, tau_grid=log_grid(1e-3, 1.0, 400))
    f = _fit(1.0, 1.0, 0.01)
    sol = solve_dmp_fixed_model(f, f, _model("A", 1, 0.01), cfg, consts, cost)
    assert not sol.infeasible
    tau = np.array([r["tau"] for r in sol.objective_curve])
    obj = np.array([r["objective"] for r in sol.objective_curve])
    T = tau**2 / (1e-3 * flop_count(1, 1))
    np.testing.assert_allclose(obj, (tau + np.exp(-T) + 0.01) / 0.5, rtol=1e-12)
    lhs = np.array([r["lhs"] for r in sol.objective_curve])
    np.testing.assert_allclose(lhs, tau + np.exp(-T), rtol=1e-12)
    feas = np.array([r["feasible"] for r in sol.objective_curve])
    assert sol.objective == pytest.approx(obj[feas].min())
    assert sol.rhs == pytest.approx(small_gain_rhs(consts, cost.Q, cost.R, 0.5, 0.01))


def test_structurally_infeasible_model():
    consts = diss_constants(np.eye(1), np.eye(1), np.eye(1))
    cost = CostSpec.identity(1)
    cfg = DmpConfig()
    f = _fit(1.0, 1.0, 10.0)
    sol = solve_dmp_fixed_model(f, f, _model("A", 1, 10.0), cfg, consts, cost)
    assert sol.infeasible and sol.rhs < 0 and sol.tau_opt is None
    assert solve_dmp([sol]).infeasible


def test_solve_dmp_tie_breaks_to_smaller_order():
    consts = diss_constants(np.eye(1), np.eye(1), np.eye(1))
    cost = CostSpec.identity(1)
    cfg = DmpConfig(rho=0.5, tau_g=1e-3, tau_grid=log_grid(1e-3, 1.0, 50))
    f = _fit(1.0, 0.0, 0.0)
    big = solve_dmp_fixed_model(f, f, _model("big", 5, 0.0), cfg, consts, cost)
    small = solve_dmp_fixed_model(f, f, _model("small", 2, 0.0), cfg, consts, cost)
    assert big.objective == small.objective
    assert solve_dmp([big, small]).model_index == "small"
    with pytest.raises(ValidationError):
        solve_dmp([])


def test_sweeps_monotone():
    consts = diss_constants(np.eye(1), np.eye(1), np.eye(1))
    cost = CostSpec.identity(1)
    f = _fit(2.0, 1.0, 0.01)
    grid = log_grid(1e-3, 1.0, 200)
    rows, counts = rho_tau_sweep(_model("A", 2, 0.01), f, f, consts, cost, np.linspace(0.05, 0.95, 20), grid, 1e-3)
    assert len(rows) == 20 * 200
    assert all(b >= a for a, b in zip(counts, counts[1:]))
    regions, nested = compute_budget_sweep(_model("A", 2, 0.01), f, f, consts, cost, 0.9, grid,
                                           [1e-2, 5e-3, 2.5e-3, 1.25e-3])
    assert nested
    sizes = [regions[t].size for t in (1e-2, 5e-3, 2.5e-3, 1.25e-3)]
    assert all(b >= a for a, b in zip(sizes, sizes[1:]))


def test_config_validation():
    with pytest.raises(ValidationError):
        DmpConfig(rho=1.0)
    with pytest.raises(ValidationError):
        DmpConfig(tau_g=0.0)
    with pytest.raises(ValidationError):
        DmpConfig(tau_grid=[0.1, 0.05])
    assert math.isclose(log_grid(1e-4, 0.04, 2000)[-1], 0.04)

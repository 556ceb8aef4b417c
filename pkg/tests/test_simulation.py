import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from dmplqr.dmp import diss_constants
from dmplqr.errors import ValidationError
from dmplqr.linalg import solve_lyapunov
from dmplqr.riccati import solve_care
from dmplqr.simulation import (
    SuboptStats,
    default_substep,
    local_optimal_tau,
    monte_carlo_subopt,
    riemann_cost,
    simulate_baseline,
    simulate_deployed,
    unit_sphere_samples,
    verify_small_gain_trajectory,
)
from dmplqr.systems import CostSpec, LtiSystem, random_controllable_system


def test_scalar_baseline_exponential():
    tr = simulate_baseline([[-1.0]], [1.0], 2.0, 0.01)
    np.testing.assert_allclose(tr.states[:, 0], np.exp(-tr.times), rtol=1e-12)
    assert tr.times[-1] == pytest.approx(2.0)


def test_zero_initial_state_stays_zero():
    s = random_controllable_system(1, 3)
    tr = simulate_deployed(s, np.zeros((1, 3)), 0.01, np.zeros(3), 1.0)
    assert np.all(tr.states == 0) and tr.cumulative_cost[-1] == 0


def test_riemann_rectangle_rule():
    # x = e^{-t}, Q = 1: left sum equals h * sum e^{-2 t_j}
    h = 0.1
    tr = simulate_baseline([[-1.0]], [1.0], 1.0, h, K=[[0.0]], Q=[[1.0]], R=[[1.0]])
    expected = h * sum(math.exp(-2 * h * j) for j in range(10))
    assert riemann_cost(tr, [[1.0]], [[1.0]]) == pytest.approx(expected, rel=1e-12)
    assert tr.cumulative_cost[-1] == pytest.approx(expected, rel=1e-12)


def test_riemann_refinement_converges():
    exact = (1 - math.exp(-4.0)) / 2
    errs = [abs(riemann_cost(simulate_baseline([[-1.0]], [1.0], 2.0, h), [[1.0]], [[1.0]]) - exact)
            for h in (0.02, 0.01)]
    assert errs[1] / errs[0] == pytest.approx(0.5, rel=0.02)


def test_deployed_matches_adaptive_integrator():
    s = random_controllable_system(5, 4)
    cost = CostSpec.identity(4)
    K = solve_care(s.A, s.B, cost.Q, cost.R).K
    tau, x0 = 0.05, np.ones(4) / 2
    tr = simulate_deployed(s, K, tau, x0, 1.0)
    x = x0.copy()
    for k in range(20):
        u = K @ x
        x = solve_ivp(lambda t, z: s.A @ z + s.B @ u, (0, tau), x, rtol=1e-11, atol=1e-13).y[:, -1]
    idx = int(round(1.0 / tr.h))
    np.testing.assert_allclose(tr.states[idx], x, atol=1e-8)


def test_deployed_substep_validation():
    s = random_controllable_system(5, 4)
    with pytest.raises(ValidationError):
        simulate_deployed(s, np.zeros((1, 4)), 0.01, np.ones(4), 1.0, h=0.003)
    assert default_substep(1e-4) == 1e-4
    assert default_substep(0.01) == pytest.approx(5e-4)
    assert default_substep(5e-4) == pytest.approx(1e-4)


def test_baseline_cost_lyapunov_identity():
    s = random_controllable_system(2, 5)
    cost = CostSpec.identity(5)
    K = solve_care(s.A, s.B, cost.Q, cost.R).K
    Acl = s.A + s.B @ K
    P_cl = solve_lyapunov(Acl, cost.Q + K.T @ cost.R @ K)
    x0 = np.ones(5) / math.sqrt(5)
    tr = simulate_baseline(Acl, x0, 30.0, 1e-3, K=K, Q=cost.Q, R=cost.R)
    assert tr.cumulative_cost[-1] == pytest.approx(x0 @ P_cl @ x0, rel=2e-3)


def test_unit_sphere_samples_deterministic():
    X = unit_sphere_samples(7, 5, 3)
    np.testing.assert_allclose(np.linalg.norm(X, axis=0), 1.0)
    np.testing.assert_array_equal(X, unit_sphere_samples(7, 5, 3))
    # the first runs do not depend on how many runs are drawn
    np.testing.assert_array_equal(X[:, :3], unit_sphere_samples(7, 3, 3))


def test_monte_carlo_deterministic_and_batched():
    s = random_controllable_system(5, 4)
    cost = CostSpec.identity(4)
    K = solve_care(s.A, s.B, cost.Q, cost.R).K
    a = monte_carlo_subopt(s, cost, K, 0.02, n_runs=30, T_sim=2.0, seed=3, batch=7)
    b = monte_carlo_subopt(s, cost, K, 0.02, n_runs=30, T_sim=2.0, seed=3, batch=250)
    np.testing.assert_allclose(a.gaps, b.gaps, rtol=1e-12, atol=1e-15)
    assert a.n_diverged == 0 and a.q1 <= a.median <= a.q3
    small = monte_carlo_subopt(s, cost, K, 0.002, n_runs=30, T_sim=2.0, seed=3)
    assert small.median < a.median


def test_subopt_stats_outliers():
    st = SuboptStats.from_gaps([1, 2, 3, 4, 100])
    assert st.median == 3 and st.outliers == [100.0]
    assert st.whisker_high == 4


def test_local_optimum_certificate():
    s = random_controllable_system(5, 4)
    cost = CostSpec.identity(4)
    K = solve_care(s.A, s.B, cost.Q, cost.R).K
    Acl = s.A + s.B @ K
    # a fixed perturbed gain: error grows for large tau and does not vanish at small tau
    res = local_optimal_tau(Acl, s, lambda tau: K + 0.05 * (1 + 1e4 * tau**2), (1e-4, 0.2), n_grid=40)
    if not res.at_boundary:
        import scipy.linalg as sla
        from dmplqr.sector import zoh_transition
        f = lambda t: np.linalg.norm(sla.expm(Acl * t) - zoh_transition(s.A, s.B, K + 0.05 * (1 + 1e4 * t**2), t), 2)
        assert f(res.tau) <= f(res.tau * 1.01) + 1e-12
        assert f(res.tau) <= f(res.tau / 1.01) + 1e-12
    assert res.value <= res.grid_values.min() + 1e-12
    with pytest.raises(ValidationError):
        local_optimal_tau(Acl, s, lambda t: K, (0.1, 0.01))


def test_verify_small_gain_envelope():
    s = random_controllable_system(5, 4)
    cost = CostSpec.identity(4)
    care = solve_care(s.A, s.B, cost.Q, cost.R)
    consts = diss_constants(care.P, cost.Q, cost.R)
    tau = 0.01
    x0 = np.ones(4) / 2
    base = simulate_baseline(s.A + s.B @ care.K, x0, 5.0, tau)
    dep = simulate_deployed(s, care.K, tau, x0, 5.0, h=tau)
    out = verify_small_gain_trajectory(base, dep, consts, 0.97)
    assert out["holds"] and out["max_violation"] == 0.0
    with pytest.raises(ValidationError):
        verify_small_gain_trajectory(base, simulate_deployed(s, care.K, tau, -x0, 5.0, h=tau), consts, 0.97)


def test_divergence_is_flagged():
    s = LtiSystem(np.array([[5.0]]), np.array([[1.0]]))
    tr = simulate_deployed(s, [[0.0]], 0.1, [1.0], 10.0, h=0.1)
    assert tr.diverged

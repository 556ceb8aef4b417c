import math

import numpy as np
import pytest

from dmplqr.errors import ValidationError
from dmplqr.linalg import spectral_abscissa, spectral_radius
from dmplqr.riccati import (
    care_residual,
    darr_finite_horizon,
    darr_sequence,
    dare_residual,
    euler_discretize,
    gain_from_value,
    horizon_steps,
    solve_care,
    solve_dare,
    DiscretizedProblem,
)
from dmplqr.systems import random_controllable_system

GOLDEN = (1 + math.sqrt(5)) / 2


def scalar_dp(a, b, q, r):
    m = lambda v: np.array([[float(v)]])
    return DiscretizedProblem(m(a), m(b), m(q), m(r), 1.0)


def test_euler_discretize_scalar():
    dp = euler_discretize([[-1.0]], [[1.0]], [[1.0]], [[1.0]], 0.1)
    assert dp.A_tau[0, 0] == pytest.approx(0.9)
    assert dp.B_tau[0, 0] == pytest.approx(0.1)
    assert dp.Q_tau[0, 0] == pytest.approx(0.1)
    assert dp.R_tau[0, 0] == pytest.approx(0.1)


def test_euler_discretize_rejects_nonpositive_tau():
    for tau in (0.0, -1e-3):
        with pytest.raises(ValidationError):
            euler_discretize([[-1.0]], [[1.0]], [[1.0]], [[1.0]], tau)


def test_euler_discretize_elementwise(rng):
    A, B = rng.standard_normal((3, 3)), rng.standard_normal((3, 2))
    dp = euler_discretize(A, B, np.eye(3), np.eye(2), 0.01)
    for i in range(3):
        for j in range(3):
            assert dp.A_tau[i, j] == (1.0 if i == j else 0.0) + 0.01 * A[i, j]
    np.testing.assert_array_equal(dp.B_tau, 0.01 * B)


@pytest.mark.parametrize("a,p", [(-1.0, math.sqrt(2) - 1), (0.0, 1.0)])
def test_care_scalar(a, p):
    sol = solve_care([[a]], [[1.0]], [[1.0]], [[1.0]])
    assert sol.P[0, 0] == pytest.approx(p, abs=1e-12)
    assert sol.K[0, 0] == pytest.approx(-p, abs=1e-12)


@pytest.mark.parametrize("method", ["schur", "newton"])
def test_care_random_system(method):
    s = random_controllable_system(6, 6)
    sol = solve_care(s.A, s.B, np.eye(6), np.eye(1), method=method)
    assert sol.residual <= 1e-8 * max(1.0, np.linalg.norm(sol.P, 2))
    assert spectral_abscissa(s.A + s.B @ sol.K) < 0
    np.testing.assert_allclose(sol.P, sol.P.T, atol=1e-10)


def test_care_matches_small_step_recursion_limit():
    s = random_controllable_system(6, 6)
    Q, R = np.eye(6), np.eye(1)
    care = solve_care(s.A, s.B, Q, R)
    dp = euler_discretize(s.A, s.B, Q, R, 1e-3)
    P = darr_finite_horizon(dp, dp.Q_tau, 200_000).P_N
    # first-order Euler bias only
    assert np.linalg.norm(P - care.P, 2) <= 5e-3 * np.linalg.norm(care.P, 2)


def test_care_uniqueness_across_starting_points():
    s = random_controllable_system(7, 5)
    Q, R = np.eye(5), np.eye(1)
    P1 = solve_care(s.A, s.B, Q, R).P
    P2 = solve_care(s.A, s.B, Q, R, method="newton").P
    K0 = solve_care(s.A, s.B, 10 * Q, R).K
    P3 = solve_care(s.A, s.B, Q, R, method="newton", K0=K0).P
    assert np.linalg.norm(P1 - P2, 2) <= 1e-7
    assert np.linalg.norm(P1 - P3, 2) <= 1e-7


def test_care_input_validation():
    with pytest.raises(ValidationError):
        solve_care(np.diag([-1.0, -2.0]), [[1.0], [0.0]], np.eye(2), np.eye(1))
    with pytest.raises(ValidationError):
        solve_care([[-1.0]], [[1.0]], [[-1.0]], [[1.0]])
    with pytest.raises(ValidationError):
        solve_care([[-1.0]], [[1.0]], [[1.0]], [[0.0]])


@pytest.mark.parametrize("a,p", [(1.0, GOLDEN), (0.0, 1.0)])
def test_dare_scalar(a, p):
    sol = solve_dare(scalar_dp(a, 1, 1, 1))
    assert sol.P[0, 0] == pytest.approx(p, abs=1e-12)


def test_dare_converges_to_care_without_rescaling():
    s = random_controllable_system(5, 4)
    Q, R = np.eye(4), np.eye(1)
    care = solve_care(s.A, s.B, Q, R)
    errs = []
    for tau in (1e-2, 1e-3):
        d = solve_dare(euler_discretize(s.A, s.B, Q, R, tau))
        assert d.residual <= 1e-8 * max(1.0, np.linalg.norm(d.P, 2))
        errs.append(np.linalg.norm(d.P - care.P, 2))
    assert errs[1] < 0.2 * errs[0]
    assert errs[1] <= 1e-2 * np.linalg.norm(care.P, 2)


def test_darr_fixed_point():
    dp = scalar_dp(1, 1, 1, 1)
    P = solve_dare(dp).P
    res = darr_finite_horizon(dp, P, 25)
    assert res.P_N[0, 0] == pytest.approx(P[0, 0], abs=1e-14)


def test_darr_single_step_formula():
    dp = scalar_dp(0.9, 0.1, 0.1, 0.1)
    q = 0.1
    expected = 0.81 * q + 0.1 - (0.9 * q * 0.1) ** 2 / (0.1 + 0.01 * q)
    assert darr_finite_horizon(dp, [[q]], 1).P_N[0, 0] == pytest.approx(expected, rel=1e-14)


def test_darr_scalar_golden_ratio_geometric():
    dp = scalar_dp(1, 1, 1, 1)
    seq = [P[0, 0] for P in darr_sequence(dp, [[1.0]], 30)]
    assert abs(seq[-1] - GOLDEN) <= 1e-6
    k = -GOLDEN / (1 + GOLDEN)
    rate = (1 + k) ** 2
    err = np.abs(np.array(seq) - GOLDEN)
    ratios = err[6:16] / err[5:15]
    np.testing.assert_allclose(ratios, rate, rtol=1e-3)


def test_darr_rejects_bad_inputs():
    dp = scalar_dp(1, 1, 1, 1)
    with pytest.raises(ValidationError):
        darr_finite_horizon(dp, [[1.0]], 0)
    with pytest.raises(ValidationError):
        darr_finite_horizon(dp, [[-1.0]], 3)


def test_gain_from_value_cases():
    dp = scalar_dp(1, 1, 1, 1)
    assert gain_from_value(np.zeros((1, 1)), dp)[0, 0] == 0.0
    assert gain_from_value([[GOLDEN]], dp)[0, 0] == pytest.approx(-(math.sqrt(5) - 1) / 2, abs=1e-14)


def test_gain_from_value_duplicate_evaluation(rng):
    A, B = rng.standard_normal((3, 3)), rng.standard_normal((3, 2))
    dp = euler_discretize(A, B, np.eye(3), np.eye(2), 0.05)
    L = rng.standard_normal((3, 3))
    X = L @ L.T
    S = dp.R_tau + dp.B_tau.T @ X @ dp.B_tau
    expected = -np.linalg.inv(S) @ dp.B_tau.T @ X @ dp.A_tau
    np.testing.assert_allclose(gain_from_value(X, dp), expected, rtol=1e-10, atol=1e-12)


def test_darr_monotone_sandwich():
    s = random_controllable_system(2, 4)
    dp = euler_discretize(s.A, s.B, np.eye(4), np.eye(1), 0.05)
    P = solve_dare(dp).P
    for N in (1, 5, 20, 80):
        lo = darr_finite_horizon(dp, np.zeros((4, 4)), N).P_N
        hi = darr_finite_horizon(dp, P + np.eye(4), N).P_N
        assert np.linalg.eigvalsh(P - lo)[0] >= -1e-9
        assert np.linalg.eigvalsh(hi - P)[0] >= -1e-9


def test_dare_closed_loop_stable():
    s = random_controllable_system(4, 5)
    dp = euler_discretize(s.A, s.B, np.eye(5), np.eye(1), 0.02)
    sol = solve_dare(dp)
    assert spectral_radius(dp.A_tau + dp.B_tau @ sol.K) < 1
    assert dare_residual(dp, sol.P) == pytest.approx(sol.residual)


def test_horizon_steps():
    assert horizon_steps(0.3, 0.1) == 3
    assert horizon_steps(0.05, 0.1) == 1
    assert horizon_steps(1.0, 0.3) == 3


def test_care_residual_zero_for_exact_solution():
    assert care_residual(np.array([[-1.0]]), np.eye(1), np.eye(1), np.eye(1),
                         np.array([[math.sqrt(2) - 1]])) <= 1e-15

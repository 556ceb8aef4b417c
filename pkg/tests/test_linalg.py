import numpy as np
import pytest

from dmplqr.errors import NotHurwitzError, ValidationError
from dmplqr.linalg import (
    as_matrix,
    condition_number,
    controllability_margin,
    matrix_exponential,
    operator_norm,
    solve_lyapunov,
    spectral_abscissa,
)


def taylor_expm(A, terms=80):
    out = np.eye(A.shape[0])
    term = np.eye(A.shape[0])
    for k in range(1, terms):
        term = term @ A / k
        out = out + term
    return out


def kron_lyapunov(F, S):
    n = F.shape[0]
    I = np.eye(n)
    M = np.kron(I, F.T) + np.kron(F.T, I)
    return np.linalg.solve(M, -S.reshape(-1, order="F")).reshape(n, n, order="F")


def power_norm(M, iters=2000):
    v = np.ones(M.shape[1])
    for _ in range(iters):
        v = M.T @ (M @ v)
        v /= np.linalg.norm(v)
    return np.sqrt(v @ (M.T @ (M @ v)))


def test_expm_zero_time_is_identity(rng):
    A = rng.standard_normal((4, 4))
    np.testing.assert_array_equal(matrix_exponential(A, 0.0), np.eye(4))


def test_expm_diagonal():
    np.testing.assert_allclose(matrix_exponential(np.diag([-1.0, -2.0]), 1.0), np.diag(np.exp([-1.0, -2.0])),
                               rtol=1e-14)


def test_expm_matches_taylor_series(rng):
    A = rng.standard_normal((5, 5))
    E = matrix_exponential(A, 0.3)
    ref = taylor_expm(0.3 * A)
    assert np.linalg.norm(E - ref, 2) <= 1e-10 * np.linalg.norm(ref, 2)


def test_expm_rejects_bad_input():
    with pytest.raises(ValidationError):
        matrix_exponential(np.ones((2, 3)), 1.0)
    with pytest.raises(ValidationError):
        matrix_exponential(np.array([[np.nan]]), 1.0)
    with pytest.raises(ValidationError):
        matrix_exponential(np.eye(2), np.inf)


def test_lyapunov_trivial_cases():
    np.testing.assert_allclose(solve_lyapunov(-np.eye(2), np.eye(2)), 0.5 * np.eye(2), atol=1e-15)
    np.testing.assert_allclose(solve_lyapunov([[-2.0]], [[4.0]]), [[1.0]], atol=1e-15)


def test_lyapunov_matches_kronecker(rng):
    F = rng.standard_normal((4, 4))
    F -= (spectral_abscissa(F) + 0.5) * np.eye(4)
    S = rng.standard_normal((4, 4))
    S = S + S.T
    X = solve_lyapunov(F, S)
    np.testing.assert_allclose(X, kron_lyapunov(F, S), atol=1e-10)
    assert np.linalg.norm(F.T @ X + X @ F + S, 2) <= 1e-9 * max(1.0, np.linalg.norm(S, 2))


def test_lyapunov_rejects_non_hurwitz():
    with pytest.raises(NotHurwitzError) as info:
        solve_lyapunov(np.diag([-1.0, 0.5]), np.eye(2))
    assert info.value.eigenvalue.real == pytest.approx(0.5)
    with pytest.raises(NotHurwitzError):
        solve_lyapunov(np.diag([-1.0, -1e-12]), np.eye(2))
    with pytest.raises(ValidationError):
        solve_lyapunov(-np.eye(2), np.eye(3))


def test_spectral_abscissa_simple():
    assert spectral_abscissa(np.diag([-1.0, -3.0])) == pytest.approx(-1.0)
    assert spectral_abscissa([[0.0, 1.0], [-1.0, 0.0]]) == pytest.approx(0.0, abs=1e-15)


def test_spectral_abscissa_matches_polynomial_roots(rng):
    A = rng.standard_normal((10, 10))
    roots = np.roots(np.poly(A))
    assert abs(spectral_abscissa(A) - roots.real.max()) <= 1e-8 * np.linalg.norm(A, 2)


def test_norm_and_condition():
    assert operator_norm(np.eye(3)) == 1.0
    assert condition_number(np.eye(3)) == 1.0
    assert condition_number(np.diag([4.0, 1.0])) == pytest.approx(4.0)
    with pytest.raises(ValidationError):
        condition_number(np.diag([1.0, -1.0]))


def test_operator_norm_matches_power_iteration(rng):
    M = rng.standard_normal((6, 4))
    assert operator_norm(M) == pytest.approx(power_norm(M), rel=1e-10)


def test_as_matrix_promotes_scalars_and_vectors():
    assert as_matrix(2.0).shape == (1, 1)
    assert as_matrix([1.0, 2.0]).shape == (2, 1)


def test_controllability_margin_detects_uncontrollable_mode():
    A = np.diag([-1.0, -2.0])
    assert controllability_margin(A, np.array([[1.0], [0.0]])) < 1e-12
    assert controllability_margin(A, np.array([[1.0], [1.0]])) > 1e-3

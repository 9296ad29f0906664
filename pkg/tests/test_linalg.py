import numpy as np
import pytest
import scipy.linalg
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from sloppykit.errors import NotPositiveDefinite, NotSquare, SingularSystem
from sloppykit.linalg import cholesky_solve, lyapunov_solve, svd_rank, sym_eigen


def _check_eigen(A, eig):
    V, w = eig.eigenvectors, eig.eigenvalues
    scale = max(1.0, np.max(np.abs(A)))
    assert np.all(np.diff(w) <= 0)
    assert np.max(np.abs(A @ V - V * w)) <= 1e-10 * scale
    assert np.max(np.abs(V.T @ V - np.eye(len(w)))) <= 1e-10


def test_sym_eigen_identity():
    eig = sym_eigen(np.eye(3))
    assert np.allclose(eig.eigenvalues, 1.0)


def test_sym_eigen_line_fim():
    eig = sym_eigen([[2.0, 1.0], [1.0, 1.0]])
    expected = [(3 + np.sqrt(5)) / 2, (3 - np.sqrt(5)) / 2]
    assert np.allclose(eig.eigenvalues, expected, rtol=0, atol=1e-14)
    _check_eigen(np.array([[2.0, 1.0], [1.0, 1.0]]), eig)


def test_sym_eigen_random_reconstruction(rng):
    B = rng.standard_normal((8, 8))
    A = B + B.T
    eig = sym_eigen(A)
    recon = eig.eigenvectors @ np.diag(eig.eigenvalues) @ eig.eigenvectors.T
    assert np.max(np.abs(recon - A)) <= 1e-10
    _check_eigen(A, eig)
    assert np.allclose(eig.eigenvalues, np.sort(np.linalg.eigvalsh(A))[::-1], atol=1e-12)


def test_sym_eigen_rejects_non_square():
    with pytest.raises(NotSquare):
        sym_eigen(np.ones((2, 3)))


def test_sym_eigen_graded_matrix():
    A = np.diag([1e12, 1.0, 1e-12])
    A[0, 1] = A[1, 0] = 1e-20
    _check_eigen(A, sym_eigen(A))


@settings(max_examples=200, deadline=None)
@given(st.floats(-1e3, 1e3), st.floats(-1e3, 1e3), st.floats(-1e3, 1e3))
def test_sym_eigen_2x2_matches_characteristic_roots(a, b, c):
    A = np.array([[a, b], [b, c]])
    # quadratic-formula roots with the discriminant in cancellation-free form
    tr = a + c
    disc = np.hypot((a - c) / 2, b)
    roots = np.array([tr / 2 + disc, tr / 2 - disc])
    w = sym_eigen(A).eigenvalues
    assert np.allclose(w, roots, rtol=0, atol=1e-12 * max(1.0, np.max(np.abs(A))) * 10)


@settings(max_examples=50, deadline=None)
@given(arrays(np.float64, (5, 5), elements=st.floats(-10, 10)))
def test_sym_eigen_invariants_hypothesis(B):
    A = B + B.T
    _check_eigen(A, sym_eigen(A))


def test_svd_rank_zero_matrix():
    assert svd_rank(np.zeros((3, 2))).numerical_rank == 0


def test_svd_rank_sum_exp_diagonal(sum_exp):
    from sloppykit.model import jacobian

    assert svd_rank(jacobian(sum_exp, [1.5, 1.5])).numerical_rank == 1
    assert svd_rank(jacobian(sum_exp, [1.5, 0.5])).numerical_rank == 2


def test_svd_rank_constructed_rank_two(rng):
    A = rng.standard_normal((3, 2)) @ rng.standard_normal((2, 5))
    res = svd_rank(A)
    assert res.numerical_rank == 2
    assert np.allclose(res.singular_values[:2], np.linalg.svd(A, compute_uv=False)[:2], rtol=1e-12)


@settings(max_examples=60, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(1, 6), st.integers(1, 6)), elements=st.floats(-5, 5)))
def test_svd_rank_transpose_invariant(A):
    a, b = svd_rank(A), svd_rank(A.T)
    assert a.numerical_rank == b.numerical_rank
    assert np.all(a.singular_values >= 0)
    assert np.all(np.diff(a.singular_values) <= 0)


def test_svd_matches_numpy(rng):
    A = rng.standard_normal((7, 4))
    assert np.allclose(svd_rank(A).singular_values, np.linalg.svd(A, compute_uv=False), rtol=1e-13)


def test_cholesky_solve_identity(rng):
    B = rng.standard_normal((4, 2))
    assert np.allclose(cholesky_solve(np.eye(4), B), B)


def test_cholesky_solve_diag():
    assert np.allclose(cholesky_solve(np.diag([4.0, 9.0]), [2.0, 3.0]), [0.5, 1 / 3])


def test_cholesky_solve_random_spd(rng):
    M = rng.standard_normal((6, 6))
    S = M @ M.T + 6 * np.eye(6)
    B = rng.standard_normal((6, 3))
    X = cholesky_solve(S, B)
    assert np.max(np.abs(S @ X - B)) <= 1e-10 * np.max(np.abs(B))


def test_cholesky_rejects_indefinite():
    with pytest.raises(NotPositiveDefinite):
        cholesky_solve(np.array([[1.0, 2.0], [2.0, 1.0]]), np.ones(2))
    with pytest.raises(NotPositiveDefinite):
        cholesky_solve(np.diag([1.0, 1e-15]), np.ones(2))


def test_lyapunov_minus_identity():
    for m in (1, 3, 5):
        P = lyapunov_solve(-np.eye(m), np.eye(m))
        assert np.allclose(P, np.eye(m) / 2, atol=1e-14)


def test_lyapunov_scalar():
    assert np.isclose(lyapunov_solve([[-3.0]], [[6.0]])[0, 0], 1.0)


def test_lyapunov_random_hurwitz(rng):
    M = rng.standard_normal((4, 4))
    A = M - (np.max(np.linalg.eigvals(M).real) + 1.0) * np.eye(4)
    C = rng.standard_normal((2, 4))
    Q = C.T @ C
    P = lyapunov_solve(A, Q)
    assert np.max(np.abs(A.T @ P + P @ A + Q)) <= 1e-8 * np.max(np.abs(Q))
    oracle = scipy.linalg.solve_continuous_lyapunov(A.T, -Q)
    assert np.allclose(P, oracle, atol=1e-10)


def test_lyapunov_singular_operator():
    with pytest.raises(SingularSystem):
        lyapunov_solve(np.diag([1.0, -1.0]), np.eye(2))

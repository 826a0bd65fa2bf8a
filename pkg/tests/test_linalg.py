import numpy as np
import pytest
import scipy.sparse as sp
from hypothesis import given, settings, strategies as st

from ocprom import linalg


def test_solve_dense_matches_numpy(rng):
    A = rng.standard_normal((12, 12)) + 12 * np.eye(12)
    b = rng.standard_normal(12)
    assert np.allclose(linalg.solve_dense(A, b), np.linalg.solve(A, b), atol=1e-13)


def test_solve_dense_singular_reports_row():
    A = np.array([[1.0, 2.0], [2.0, 4.0]])
    with pytest.raises(linalg.SingularMatrixError) as exc:
        linalg.solve_dense(A, np.ones(2))
    assert exc.value.row is not None


def test_solve_dense_rejects_nonsquare_and_nan():
    with pytest.raises(ValueError):
        linalg.solve_dense(np.ones((2, 3)), np.ones(2))
    with pytest.raises(ValueError):
        linalg.solve_dense(np.array([[np.nan, 0], [0, 1.0]]), np.ones(2))


def test_sparse_lu_solves_and_flags_empty_row():
    A = sp.diags([4.0, 5.0, 6.0]) + sp.eye(3, k=1)
    x = linalg.solve_sparse(A, np.array([1.0, 2.0, 3.0]))
    assert np.allclose(A @ x, [1.0, 2.0, 3.0])
    S = sp.csr_matrix(np.array([[1.0, 0, 0], [0, 0, 0], [0, 0, 1.0]]))
    with pytest.raises(linalg.SingularMatrixError):
        linalg.SparseLU(S)


@settings(max_examples=30, deadline=None)
@given(m=st.integers(3, 20), n=st.integers(1, 8), seed=st.integers(0, 10_000))
def test_svd_reconstructs(m, n, seed):
    M = np.random.default_rng(seed).standard_normal((m, n))
    r = linalg.svd(M)
    assert np.all(np.diff(r.singular_values) <= 1e-12)
    assert np.allclose(r.reconstruct(), M, atol=1e-10)


def test_weighted_svd_orthonormal_in_weight(rng):
    X = np.diag(rng.uniform(0.5, 2.0, 15))
    M = rng.standard_normal((15, 6))
    r = linalg.weighted_svd(M, X)
    k = r.left.shape[1]
    assert np.allclose(r.left.T @ X @ r.left, np.eye(k), atol=1e-10)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10_000), n=st.integers(2, 7))
def test_gram_schmidt_orthonormal_and_drops_dependent(seed, n):
    g = np.random.default_rng(seed)
    Z = g.standard_normal((20, n))
    Z = np.hstack([Z, Z[:, :1] * 2.0])          # one dependent column
    X = np.diag(g.uniform(0.5, 2.0, 20))
    Q = linalg.gram_schmidt(Z, X)
    assert Q.shape[1] == n
    assert np.allclose(Q.T @ X @ Q, np.eye(n), atol=1e-12)

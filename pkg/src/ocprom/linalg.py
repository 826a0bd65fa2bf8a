"""Dense and sparse linear-algebra kernels.

Everything is float64.  Sparse matrices are plain ``scipy.sparse`` CSR/CSC
objects and dense matrices are ``numpy.ndarray``; the helpers here add the
checks (finiteness, residual bounds, singularity detection) that the solvers
rely on.
"""

from dataclasses import dataclass
import warnings

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla


class SingularMatrixError(np.linalg.LinAlgError):
    """Raised when a factorization hits a (numerically) zero pivot."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class ConvergenceError(RuntimeError):
    """Raised when an iterative procedure does not converge.

    ``history`` carries whatever diagnostics the caller collected, e.g. the
    residual norms of a Newton loop.
    """

    def __init__(self, message, history=()):
        super().__init__(message)
        self.history = list(history)


@dataclass(frozen=True)
class SvdResult:
    """Thin SVD ``M = left @ diag(singular_values) @ right.T``."""

    left: np.ndarray
    singular_values: np.ndarray
    right: np.ndarray

    def reconstruct(self):
        return (self.left * self.singular_values) @ self.right.T


def _check_finite(M, name="matrix"):
    data = M.data if sp.issparse(M) else np.asarray(M)
    if not np.all(np.isfinite(data)):
        raise ValueError(f"{name} contains NaN or Inf entries")


def svd(M, method="auto"):
    """Thin singular value decomposition with descending singular values.

    Parameters
    ----------
    M : (m, n) array_like
        Finite real matrix.
    method : {"auto", "lapack", "snapshots"}
        ``"snapshots"`` computes the decomposition from the eigenpairs of the
        small Gram matrix ``M.T @ M``, which is what one wants for tall
        snapshot matrices.  ``"auto"`` picks it when ``m > 4 n``.

    Returns
    -------
    SvdResult
    """
    M = np.asarray(M, dtype=float)
    if M.ndim != 2:
        raise ValueError("svd expects a two-dimensional array")
    _check_finite(M)
    m, n = M.shape
    if method == "auto":
        method = "snapshots" if m > 4 * n else "lapack"
    if method == "lapack":
        try:
            L, s, Rt = sla.svd(M, full_matrices=False, lapack_driver="gesdd")
        except np.linalg.LinAlgError:
            try:
                L, s, Rt = sla.svd(M, full_matrices=False, lapack_driver="gesvd")
            except np.linalg.LinAlgError as exc:
                raise ConvergenceError(
                    f"SVD did not converge for a {m}x{n} matrix "
                    f"(gesdd and gesvd both failed: {exc})"
                ) from exc
        return SvdResult(L, s, Rt.T)
    if method == "snapshots":
        return _svd_snapshots(M)
    raise ValueError(f"unknown svd method {method!r}")


def _svd_snapshots(M, X=None):
    # Gram-matrix route: M.T X M = R diag(s^2) R.T, L = M R / s
    XM = M if X is None else X @ M
    gram = M.T @ XM
    gram = 0.5 * (gram + gram.T)
    try:
        lam, R = sla.eigh(gram)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceError(f"eigendecomposition of the {gram.shape[0]}x"
                               f"{gram.shape[0]} Gram matrix failed: {exc}") from exc
    order = np.argsort(lam)[::-1]
    lam = np.clip(lam[order], 0.0, None)
    R = R[:, order]
    s = np.sqrt(lam)
    L = np.zeros((M.shape[0], len(s)))
    # columns with negligible singular value are left at zero; the Gram route
    # cannot resolve them and they carry no energy anyway
    keep = s > s[0] * 1e-7 if len(s) and s[0] > 0 else np.zeros(len(s), bool)
    L[:, keep] = (M @ R[:, keep]) / s[keep]
    return SvdResult(L, s, R)


def weighted_svd(M, X):
    """SVD of ``M`` in the inner product induced by the SPD matrix ``X``.

    Returns left vectors orthonormal in ``X`` (``L.T @ X @ L = I`` on the
    non-negligible modes) via the method of snapshots.
    """
    M = np.asarray(M, dtype=float)
    _check_finite(M)
    return _svd_snapshots(M, X)


def _residual_ok(A, x, b, rtol=1e-10):
    r = A @ x - b
    normA = spla.norm(A, np.inf) if sp.issparse(A) else np.linalg.norm(A, np.inf)
    bound = rtol * (normA * np.linalg.norm(x, np.inf) + np.linalg.norm(b, np.inf))
    return np.linalg.norm(r, np.inf) <= bound, np.linalg.norm(r, np.inf), bound


class SparseLU:
    """Direct sparse factorization (SuperLU) with zero-pivot diagnostics."""

    def __init__(self, A):
        if not sp.issparse(A):
            raise TypeError("SparseLU expects a scipy.sparse matrix")
        if A.shape[0] != A.shape[1]:
            raise ValueError(f"matrix must be square, got {A.shape}")
        _check_finite(A)
        self.A = sp.csc_matrix(A, dtype=float)
        try:
            self._lu = spla.splu(self.A, permc_spec="COLAMD")
        except RuntimeError as exc:
            # SuperLU reports "Factor is exactly singular" with the column
            row = _zero_pivot_row(self.A)
            raise SingularMatrixError(
                f"singular factorization ({exc}); zero pivot near row {row}", row=row
            ) from exc
        diag = np.abs(self._lu.U.diagonal())
        scale = max(diag.max(initial=0.0), 1e-300)
        small = np.flatnonzero(diag <= 1e-14 * scale)
        if small.size:
            row = int(self._lu.perm_r.argsort()[small[0]]) if self._lu.perm_r is not None else int(small[0])
            raise SingularMatrixError(
                f"numerically singular factorization: pivot {diag[small[0]]:.3e} "
                f"(max {scale:.3e}) at row {row}", row=row)

    def solve(self, b):
        b = np.asarray(b, dtype=float)
        return self._lu.solve(b)


def _zero_pivot_row(A):
    A = sp.csr_matrix(A)
    empty = np.flatnonzero(np.diff(A.indptr) == 0)
    if empty.size:
        return int(empty[0])
    return None


def solve_sparse(A, b, check=True):
    """Solve ``A x = b`` with a direct sparse factorization.

    Raises
    ------
    SingularMatrixError
        If the factorization encounters a zero pivot; ``.row`` names it.
    """
    A = sp.csc_matrix(A, dtype=float)
    x = SparseLU(A).solve(b)
    if check:
        ok, res, bound = _residual_ok(A, x, np.asarray(b, dtype=float))
        if not ok:
            raise SingularMatrixError(
                f"residual {res:.3e} exceeds bound {bound:.3e}; matrix is ill-conditioned")
    return x


def solve_dense(A, b, check=True, rcond_min=1e-15):
    """Solve a dense square system by LU with partial pivoting.

    A reciprocal condition estimate below ``rcond_min`` is treated as
    singular.
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"matrix must be square, got {A.shape}")
    _check_finite(A)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", sla.LinAlgWarning)   # zero pivots handled below
        lu, piv = sla.lu_factor(A, check_finite=False)
    diag = np.abs(np.diag(lu))
    if diag.size and diag.min() == 0.0:
        row = int(np.argmin(diag))
        raise SingularMatrixError(f"exactly zero pivot at row {row}", row=row)
    gecon, = sla.get_lapack_funcs(("gecon",), (lu,))
    rcond, info = gecon(lu, np.linalg.norm(A, 1), norm="1")
    if rcond < rcond_min:
        row = int(np.argmin(diag))
        raise SingularMatrixError(
            f"matrix is numerically singular (rcond={rcond:.2e}); smallest pivot at row {row}",
            row=row)
    x = sla.lu_solve((lu, piv), b, check_finite=False)
    if check:
        ok, res, bound = _residual_ok(A, x, b)
        if not ok:
            raise SingularMatrixError(
                f"residual {res:.3e} exceeds bound {bound:.3e}; matrix is ill-conditioned")
    return x


def gram_schmidt(Z, X=None, drop_tol=1e-12, passes=2):
    """Orthonormalize the columns of ``Z`` in the ``X`` inner product.

    Modified Gram-Schmidt repeated ``passes`` times.  Columns whose norm after
    orthogonalization falls below ``drop_tol`` times their original norm are
    dropped (rank deficiency).
    """
    Z = np.array(Z, dtype=float, copy=True)
    out = []

    def ip(a, b):
        return a @ (b if X is None else X @ b)

    for j in range(Z.shape[1]):
        z = Z[:, j]
        n0 = np.sqrt(max(ip(z, z), 0.0))
        if n0 == 0.0:
            continue
        for _ in range(passes):
            for q in out:
                z = z - ip(q, z) * q
        nz = np.sqrt(max(ip(z, z), 0.0))
        if nz <= drop_tol * n0:
            continue
        out.append(z / nz)
    if not out:
        return np.zeros((Z.shape[0], 0))
    return np.column_stack(out)

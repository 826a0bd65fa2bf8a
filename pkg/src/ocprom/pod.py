"""Proper orthogonal decomposition: single-stage and nested (temporal, then
parametric) compression of snapshot matrices.

The energy criterion sums singular values by default; set ``squared=True``
for the conventional sum of squares.
"""

from dataclasses import dataclass, field

import numpy as np
import scipy.linalg as sla

from .linalg import ConvergenceError, gram_schmidt

# singular values below this fraction of the largest are treated as zero
RANK_RTOL = 1e-13

VARIABLES = ("v", "p", "u", "w", "q", "s", "r")


class PodError(ValueError):
    """Invalid input to a compression routine."""


@dataclass
class PodBasis:
    """Orthonormal basis with its spectrum.

    ``singular_values`` holds the full spectrum of the compressed matrix,
    ``Z`` its leading ``N`` modes.
    """

    Z: np.ndarray
    singular_values: np.ndarray
    squared: bool = False

    @property
    def N(self):
        return self.Z.shape[1]

    @property
    def energy_curve(self):
        return energy_curve(self.singular_values, self.squared)


def energy_fraction(sigma, N, squared=False):
    """Fraction of the total carried by the first ``N`` singular values."""
    s = np.asarray(sigma, dtype=float)
    if np.any(s < 0):
        raise PodError("singular values must be nonnegative")
    if not 0 <= N <= len(s):
        raise PodError(f"N={N} outside [0, {len(s)}]")
    if squared:
        s = s ** 2
    tot = s.sum()
    if tot <= 0:
        raise PodError("all singular values are zero")
    return float(s[:N].sum() / tot)


def energy_curve(sigma, squared=False):
    """Cumulative energy fractions; the last entry is exactly 1."""
    s = np.asarray(sigma, dtype=float)
    if squared:
        s = s ** 2
    tot = s.sum()
    if tot <= 0:
        return np.zeros(len(s))
    c = np.minimum(np.cumsum(s) / tot, 1.0)
    if len(c):
        c[-1] = 1.0
    return np.maximum.accumulate(c)


def select_modes(sigma, eps_tol, squared=False):
    """Smallest ``N`` whose energy fraction exceeds ``1 - eps_tol``."""
    if not 0 < eps_tol < 1:
        raise PodError("eps_tol must lie in (0, 1)")
    curve = energy_curve(sigma, squared)
    hit = np.flatnonzero(curve > 1 - eps_tol)
    return int(hit[0]) + 1 if hit.size else len(curve)


def weighted_qr(S, X=None, passes=2):
    """``S = Q R`` with ``Q' X Q = I`` by block classical Gram-Schmidt with
    reorthogonalization.  Columns in the span of earlier ones give a zero
    column in ``Q`` and a zero diagonal in ``R``."""
    S = np.asarray(S, dtype=float)
    n, m = S.shape
    Q = np.zeros((n, m))
    XQ = np.zeros((n, m))
    R = np.zeros((m, m))
    for j in range(m):
        z = S[:, j].copy()
        Xz = z if X is None else X @ z
        n0 = np.sqrt(max(z @ Xz, 0.0))
        for _ in range(passes):
            c = XQ[:, :j].T @ z
            R[:j, j] += c
            z -= Q[:, :j] @ c
        Xz = z if X is None else X @ z
        nz = np.sqrt(max(z @ Xz, 0.0))
        if nz <= 1e-13 * n0 or nz == 0.0:
            continue
        R[j, j] = nz
        Q[:, j] = z / nz
        XQ[:, j] = Xz / nz
    return Q, R


def _gram_pod(S, X):
    """Weighted POD through ``S = Q R`` and the SVD of ``R``.  Returns the
    left modes spanning the numerical range, all singular values and the
    right singular vectors.  Singular values are accurate to rounding
    relative to the largest one."""
    S = np.asarray(S, dtype=float)
    Q, R = weighted_qr(S, X)
    try:
        U, sigma, Vt = sla.svd(R, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        U, sigma, Vt = sla.svd(R, lapack_driver="gesvd")
    except ValueError as exc:
        raise ConvergenceError(f"SVD failed: {exc}") from exc
    rank = int(np.sum(sigma > RANK_RTOL * sigma[0])) if len(sigma) and sigma[0] > 0 else 0
    L = Q @ U[:, :rank]
    return L, sigma, Vt.T


def pod(S, X=None, N=None, eps_tol=None, squared=False):
    """POD basis of the columns of ``S`` in the inner product ``X``.

    The number of modes is ``N`` if given, else chosen by ``eps_tol``, and is
    capped by the numerical rank.  Columns are re-orthonormalized in ``X`` so
    that ``Z' X Z = I`` holds to rounding.
    """
    S = np.asarray(S, dtype=float)
    if S.ndim != 2:
        raise PodError("snapshot matrix must be two-dimensional")
    if not np.all(np.isfinite(S)):
        raise PodError("snapshot matrix contains NaN or Inf")
    if S.shape[1] == 0 or not np.any(S):
        return PodBasis(np.zeros((S.shape[0], 0)), np.zeros(S.shape[1]), squared)
    L, sigma, _ = _gram_pod(S, X)
    if N is None:
        N = select_modes(sigma, eps_tol, squared) if eps_tol is not None else L.shape[1]
    N = min(int(N), L.shape[1])
    Z = gram_schmidt(L[:, :N], X)
    return PodBasis(Z, sigma, squared)


@dataclass
class TemporalCompression:
    """Per-parameter compression: basis ``Z``, coefficients ``Z' X S`` and the
    singular-value-weighted modes passed on to the parametric stage."""

    basis: PodBasis
    coeffs: np.ndarray
    weighted: np.ndarray

    def reconstruct(self):
        return self.basis.Z @ self.coeffs


def temporal_compress(S, n_t_pod, X=None, squared=False):
    """Keep the leading ``n_t_pod`` temporal modes of one trajectory.

    Raises
    ------
    PodError
        If ``n_t_pod`` exceeds the number of columns.
    """
    S = np.asarray(S, dtype=float)
    if n_t_pod > S.shape[1]:
        raise PodError(f"n_t_pod={n_t_pod} exceeds the {S.shape[1]} snapshot columns")
    if not np.any(S):
        Z = np.zeros((S.shape[0], 0))
        return TemporalCompression(PodBasis(Z, np.zeros(S.shape[1]), squared),
                                   np.zeros((0, S.shape[1])), np.zeros((S.shape[0], n_t_pod)))
    L, sigma, _ = _gram_pod(S, X)
    k = min(n_t_pod, L.shape[1])
    Z = gram_schmidt(L[:, :k], X)
    k = Z.shape[1]
    coeffs = Z.T @ (S if X is None else X @ S)
    # exactly n_t_pod columns per parameter; missing rank is zero padded
    weighted = np.zeros((S.shape[0], n_t_pod))
    weighted[:, :k] = Z * sigma[:k]
    return TemporalCompression(PodBasis(Z, sigma, squared), coeffs, weighted)


def stack_compressed(compressed):
    """Second-stage snapshot matrix: the weighted temporal modes of every
    parameter side by side (``n_t_pod * n_train`` columns)."""
    if not compressed:
        raise PodError("nothing to stack")
    rows = {c.weighted.shape[0] for c in compressed}
    if len(rows) != 1:
        raise PodError(f"inconsistent row dimensions {sorted(rows)}")
    return np.hstack([c.weighted for c in compressed])


def parametric_compress(compressed, n_max, X=None, squared=False):
    """POD of the stacked compressed matrices, keeping ``n_max`` modes."""
    return pod(stack_compressed(compressed), X, N=n_max, squared=squared)


@dataclass
class ReducedBasis:
    """Per-variable bases plus the enriched velocity bases ``Zvs``, ``Zwr``."""

    bases: dict
    Zvs: np.ndarray
    Zwr: np.ndarray
    enrichment: str = "paired"
    info: dict = field(default_factory=dict)

    @property
    def Zp(self):
        return self.bases["p"].Z

    @property
    def Zu(self):
        return self.bases["u"].Z

    @property
    def Zq(self):
        return self.bases["q"].Z

    def sizes(self):
        return {"vs": self.Zvs.shape[1], "p": self.Zp.shape[1], "u": self.Zu.shape[1],
                "wr": self.Zwr.shape[1], "q": self.Zq.shape[1]}


def truncate(basis, N, ops, n_supremizer=-1):
    """Basis of the leading ``N`` modes per variable, re-enriched.

    Supremizer blocks keep as many modes as the paired pressure basis unless
    ``n_supremizer >= 0``.
    """
    X = inner_products(ops)["v"]
    bases = {}
    for v, b in basis.bases.items():
        if v in ("s", "r"):
            continue
        bases[v] = PodBasis(b.Z[:, :N], b.singular_values, b.squared)
    for sup, pres in (("s", "p"), ("r", "q")):
        k = bases[pres].N if n_supremizer < 0 else n_supremizer
        b = basis.bases[sup]
        bases[sup] = PodBasis(b.Z[:, :k], b.singular_values, b.squared)
    Zvs, Zwr = enrich(bases, X, basis.enrichment)
    return ReducedBasis(bases, Zvs, Zwr, basis.enrichment, {**basis.info, "truncated": N})


def inner_products(ops):
    """POD inner product per variable: H1 for velocity-like fields, L2 for
    pressures and the outlet L2 for the control."""
    Xv = ops.velocity_inner
    return {"v": Xv, "w": Xv, "s": Xv, "r": Xv, "p": ops.Mp, "q": ops.Mp, "u": ops.R_reg}


def enrich(bases, X, enrichment="paired"):
    """Velocity bases with supremizer blocks.

    ``"paired"`` (default) uses ``[v, s]`` for the state and ``[w, r]`` for
    the adjoint velocity.  ``"cross"`` puts both supremizer families in both
    bases and ``"aggregated"`` uses one common space ``[v, w, s, r]``; both
    are larger and, on the test problems, less accurate because the extra
    directions in the state trial space are poorly tested.  ``"none"`` skips
    the enrichment, which leaves the reduced saddle point singular.
    """
    Zv, Zw = bases["v"].Z, bases["w"].Z
    Zs, Zr = bases["s"].Z, bases["r"].Z
    if enrichment == "cross":
        return gram_schmidt(np.hstack([Zv, Zs, Zr]), X), gram_schmidt(np.hstack([Zw, Zr, Zs]), X)
    if enrichment == "paired":
        return gram_schmidt(np.hstack([Zv, Zs]), X), gram_schmidt(np.hstack([Zw, Zr]), X)
    if enrichment == "transposed":
        return gram_schmidt(np.hstack([Zv, Zr]), X), gram_schmidt(np.hstack([Zw, Zs]), X)
    if enrichment == "aggregated":
        Z = gram_schmidt(np.hstack([Zv, Zw, Zs, Zr]), X)
        return Z, Z.copy()
    if enrichment == "none":
        return Zv.copy(), Zw.copy()
    raise PodError(f"unknown enrichment {enrichment!r}")


def nested_pod(snapshots, ops, n_t_pod, n_max, n_supremizer=-1, squared=False,
               enrichment="paired"):
    """Two-stage POD of per-parameter snapshot matrices.

    Parameters
    ----------
    snapshots : list of dict
        One dict per training parameter mapping each name in ``VARIABLES`` to
        a snapshot matrix (velocity snapshots lift-subtracted).
    n_supremizer : int
        Supremizer modes per family; ``-1`` uses as many as pressure modes.

    Raises
    ------
    PodError
        If the adjoint snapshots vanish (uncontrolled data).
    """
    Xs = inner_products(ops)
    if all(not np.any(sn["w"]) for sn in snapshots):
        raise PodError("adjoint snapshots are zero; nested POD needs controlled trajectories")
    bases, stage2 = {}, {}
    for var in VARIABLES:
        comp = [temporal_compress(sn[var], n_t_pod, Xs[var], squared) for sn in snapshots]
        n = n_max
        if var in ("s", "r") and n_supremizer >= 0:
            n = n_supremizer
        stacked = stack_compressed(comp)
        stage2[var] = stacked.shape[1]
        bases[var] = pod(stacked, Xs[var], N=n, squared=squared)
    if n_supremizer < 0:
        for sup, pres in (("s", "p"), ("r", "q")):
            k = bases[pres].N
            bases[sup] = PodBasis(bases[sup].Z[:, :k], bases[sup].singular_values, squared)
    Zvs, Zwr = enrich(bases, Xs["v"], enrichment)
    return ReducedBasis(bases, Zvs, Zwr, enrichment, {"stage2_columns": stage2})


def classical_pod(snapshots, ops, n_max, n_supremizer=-1, squared=False, enrichment="paired"):
    """Single-stage POD of all snapshots side by side (reference method)."""
    Xs = inner_products(ops)
    bases = {}
    for var in VARIABLES:
        S = np.hstack([sn[var] for sn in snapshots])
        n = n_max if not (var in ("s", "r") and n_supremizer >= 0) else n_supremizer
        bases[var] = pod(S, Xs[var], N=n, squared=squared)
    if n_supremizer < 0:
        for sup, pres in (("s", "p"), ("r", "q")):
            bases[sup] = PodBasis(bases[sup].Z[:, :bases[pres].N],
                                  bases[sup].singular_values, squared)
    Zvs, Zwr = enrich(bases, Xs["v"], enrichment)
    return ReducedBasis(bases, Zvs, Zwr, enrichment, {"method": "classical"})


def principal_angles(A, B, X=None):
    """Largest principal angle (radians) between the column spans of ``A``
    and ``B`` in the ``X`` inner product."""
    Qa = gram_schmidt(A, X)
    Qb = gram_schmidt(B, X)
    K = Qa.T @ (Qb if X is None else X @ Qb)
    s = np.clip(np.linalg.svd(K, compute_uv=False), -1, 1)
    if len(s) < min(Qa.shape[1], Qb.shape[1]) or not len(s):
        return float(np.pi / 2)
    return float(np.arccos(s.min()))

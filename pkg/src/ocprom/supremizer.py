"""Pressure supremizers.

For a pressure field ``p`` the supremizer ``s`` is the velocity field that
realizes ``sup_z b(p, z) / |z|_V``: it solves ``X_V s = B' p`` on the
velocity dofs free of Dirichlet constraints, with ``s = 0`` on constrained
dofs.  ``X_V`` is the H1 inner product ``M + stiffness``.
"""

import numpy as np

from .linalg import SparseLU


class SupremizerSolver:
    """Factorized velocity inner product shared by all supremizer solves."""

    def __init__(self, space, ops):
        self.space = space
        self.B = ops.B.tocsr()
        self.free = space.free_dofs
        if len(self.free) == 0:
            raise ValueError("every velocity dof is constrained; no supremizer space")
        X = ops.velocity_inner
        self.X = X
        self._lu = SparseLU(X[self.free][:, self.free].tocsc())

    def __call__(self, p):
        """Supremizer(s) of ``p`` (a vector or an ``(n_p, k)`` matrix)."""
        p = np.asarray(p, dtype=float)
        if p.shape[0] != self.B.shape[0]:
            raise ValueError(f"expected {self.B.shape[0]} pressure coefficients, got {p.shape[0]}")
        rhs = (self.B.T @ p)[self.free]
        out = np.zeros((self.B.shape[1],) + p.shape[1:])
        out[self.free] = self._lu.solve(rhs)
        return out

    def residual(self, s, p):
        """Relative residual of the defining system on free dofs."""
        r = (self.X @ s - self.B.T @ p)[self.free]
        den = np.linalg.norm((self.B.T @ p)[self.free]) + 1e-300
        return float(np.linalg.norm(r) / den)


def compute_supremizer(solver, p):
    return solver(p)


def supremizer_snapshots(solver, traj):
    """Supremizer snapshot matrices ``(S_s, S_r)`` of the state and adjoint
    pressures of a trajectory, one column per stored time."""
    return solver(traj.p), solver(traj.q)


def reduced_inf_sup(ops, Zv, Zp, X=None):
    """Smallest singular value of ``Zv' B' Zp`` with orthonormal bases.

    ``Zv`` should be orthonormal in the velocity inner product and ``Zp`` in
    the pressure mass; the returned value is the reduced inf-sup constant
    measured in those norms.
    """
    K = Zv.T @ (ops.B.T @ Zp)
    if K.size == 0:
        return 0.0
    s = np.linalg.svd(K, compute_uv=False)
    if K.shape[0] < K.shape[1]:
        return 0.0
    return float(s[-1])

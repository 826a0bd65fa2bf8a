"""Reduced-order one-shot solver.

The reduced unknowns are coefficients in the bases ``Zvs`` (state
velocity), ``Zp``, ``Zu``, ``Zwr`` (adjoint velocity) and ``Zq``.  The state
velocity is ``v = sum_i c_i(t) L_i + Zvs a_v`` with ``L_i`` the lift shapes
and ``c_i = nu Re_i f(t)``; writing ``Zhat = [L_1 .. L_k, Zvs]`` and
``ahat = [c, a_v]`` every state term becomes linear or quadratic in
``ahat``.  The convection enters through one tensor

    T[l, j, k] = e(Zhat_j, Zhat_k, Zwr_l),

which gives the state convection ``T : ahat ahat``, the adjoint convection
and both their derivatives without touching the full mesh online.

Each row of the full step residual is tested with the basis of the variable
whose derivative it is, so the reduced system is the stationarity condition
of the per-step Lagrangian restricted to the reduced spaces and its Newton
matrix is symmetric, as at full order.
"""

from dataclasses import dataclass, field
import hashlib
import time

import numpy as np

from . import fem
from . import scenarios as sc
from .fom import FIELDS, Trajectory
from .linalg import ConvergenceError, SingularMatrixError, solve_dense

ROM_TOL = 1e-10


class RomError(ValueError):
    """Inconsistent reduced data."""


def basis_hash(basis):
    """Short digest of the five reduced bases."""
    h = hashlib.sha256()
    for Z in (basis.Zvs, basis.Zp, basis.Zu, basis.Zwr, basis.Zq):
        Z = np.ascontiguousarray(Z, dtype="<f8")
        h.update(np.array(Z.shape, dtype="<i8").tobytes())
        h.update(Z.tobytes())
    return h.hexdigest()[:16]


@dataclass
class ReducedOperators:
    """Projected operators.

    Matrices with a ``_wv``/``_vv``/``_qv`` suffix act on ``ahat`` (lift
    coefficients first, then ``a_v``); the others act on plain reduced
    coefficients.  ``n_lift`` is the number of lift shapes.
    """

    n_lift: int
    A_wv: np.ndarray
    M_wv: np.ndarray
    Bt_wp: np.ndarray
    C_wu: np.ndarray
    F_w: np.ndarray
    Md_vv: np.ndarray
    G_v: np.ndarray
    A_vw: np.ndarray
    M_vw: np.ndarray
    Bt_vq: np.ndarray
    B_pw: np.ndarray
    R_uu: np.ndarray
    Mg_uw: np.ndarray
    H_u: np.ndarray
    B_qv: np.ndarray
    T: np.ndarray
    alpha: float
    nu: float
    basis_hash: str = ""
    cfg_hash: str = ""

    def __post_init__(self):
        for name, val in self.arrays().items():
            if not np.all(np.isfinite(val)):
                raise RomError(f"reduced operator {name} is not finite")
        nw, n1 = self.A_wv.shape
        nv = n1 - self.n_lift
        nq, np_, nu = self.Bt_vq.shape[1], self.Bt_wp.shape[1], self.C_wu.shape[1]
        expect = {"M_wv": (nw, n1), "Md_vv": (nv, n1), "A_vw": (nv, nw), "M_vw": (nv, nw),
                  "B_pw": (np_, nw), "R_uu": (nu, nu), "Mg_uw": (nu, nw), "B_qv": (nq, n1),
                  "T": (nw, n1, n1)}
        for name, shape in expect.items():
            if getattr(self, name).shape != shape:
                raise RomError(f"{name} has shape {getattr(self, name).shape}, expected {shape}")

    def arrays(self):
        return {k: v for k, v in self.__dict__.items() if isinstance(v, np.ndarray)}

    @property
    def sizes(self):
        nw, n1 = self.A_wv.shape
        return {"vs": n1 - self.n_lift, "p": self.Bt_wp.shape[1], "u": self.C_wu.shape[1],
                "wr": nw, "q": self.Bt_vq.shape[1]}

    # blocks named after their full-order counterparts
    @property
    def A_rd(self):
        return self.A_wv[:, self.n_lift:]

    @property
    def M_rd(self):
        return self.M_wv[:, self.n_lift:]

    @property
    def B_rd(self):
        return self.B_qv[:, self.n_lift:]

    @property
    def C_rd(self):
        return self.C_wu


def _tensor(space, Zhat, Zw, chunk=2048):
    """``T[l, j, k] = e(Zhat_j, Zhat_k, Zw_l)`` by quadrature, in cell chunks."""
    n1, nw = Zhat.shape[1], Zw.shape[1]
    T = np.zeros((nw, n1 * n1))
    nq = len(space.qw)
    cells_per = max(1, chunk // nq)
    nc = space.mesh.num_cells
    for c0 in range(0, nc, cells_per):
        cells = np.arange(c0, min(nc, c0 + cells_per))
        U, GU, w = fem.basis_at_quadrature(space, Zhat, cells)
        W, _, _ = fem.basis_at_quadrature(space, Zw, cells)
        # adv[q, j, k, a] = sum_g U_j[g] d_g U_k[a]
        adv = np.einsum("qjg,qkag->qajk", U, GU, optimize=True)
        Ww = (W * w[:, None, None]).transpose(0, 2, 1)          # (q, a, l)
        T += Ww.reshape(-1, nw).T @ adv.reshape(-1, n1 * n1)
    return T.reshape(nw, n1, n1)


def project_operators(problem, basis):
    """Project the full operators onto ``basis`` (a ``pod.ReducedBasis``).

    Raises
    ------
    RomError
        If a basis has the wrong number of rows.
    """
    ops, space, cfg = problem.ops, problem.space, problem.cfg
    Zv, Zw, Zp, Zu, Zq = basis.Zvs, basis.Zwr, basis.Zp, basis.Zu, basis.Zq
    for name, Z, n in (("Zvs", Zv, space.n_v), ("Zwr", Zw, space.n_v), ("Zp", Zp, space.n_p),
                       ("Zu", Zu, space.n_u), ("Zq", Zq, space.n_p)):
        if Z.ndim != 2 or Z.shape[0] != n:
            raise RomError(f"{name} has {Z.shape[0]} rows, expected {n}")
    L = np.column_stack(problem.lift_shapes) if problem.lift_shapes else np.zeros((space.n_v, 0))
    Zhat = np.hstack([L, Zv])
    AZh, MZh = ops.A @ Zhat, ops.M @ Zhat
    AZw, MZw = ops.A @ Zw, ops.M @ Zw
    return ReducedOperators(
        n_lift=L.shape[1],
        A_wv=Zw.T @ AZh, M_wv=Zw.T @ MZh,
        Bt_wp=Zw.T @ (ops.B.T @ Zp), C_wu=Zw.T @ (ops.C @ Zu), F_w=Zw.T @ ops.F,
        Md_vv=Zv.T @ (ops.M_d @ Zhat), G_v=Zv.T @ ops.G,
        A_vw=Zv.T @ AZw, M_vw=Zv.T @ MZw, Bt_vq=Zv.T @ (ops.B.T @ Zq),
        B_pw=Zp.T @ (ops.B @ Zw),
        R_uu=Zu.T @ (ops.R_reg @ Zu), Mg_uw=Zu.T @ (ops.M_Gamma @ Zw), H_u=Zu.T @ ops.H,
        B_qv=Zq.T @ (ops.B @ Zhat),
        T=_tensor(space, Zhat, Zw),
        alpha=cfg.alpha, nu=cfg.nu_mm2_s, basis_hash=basis_hash(basis), cfg_hash=cfg.hash())


# --------------------------------------------------------------------------
# reduced trajectories

@dataclass
class ReducedTrajectory:
    """Reduced coefficients, one column per stored time."""

    times: np.ndarray
    v: np.ndarray
    p: np.ndarray
    u: np.ndarray
    w: np.ndarray
    q: np.ndarray
    mu: sc.ParameterPoint
    basis_hash: str = ""
    info: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)


@dataclass
class _RState:
    v: np.ndarray
    p: np.ndarray
    u: np.ndarray
    w: np.ndarray
    q: np.ndarray

    def copy(self):
        return _RState(*(getattr(self, f).copy() for f in FIELDS))

    def pack(self):
        return np.concatenate([self.v, self.p, self.u, self.w, self.q])


class _Stepper:
    """Residual and Newton matrix of one reduced step."""

    def __init__(self, ro, idt, convection=True):
        self.ro = ro
        self.idt = idt
        self.convection = convection
        self.k = ro.n_lift
        self.S_wv = ro.A_wv + idt * ro.M_wv
        self.S_vw = ro.A_vw + idt * ro.M_vw
        s = ro.sizes
        self.split = np.cumsum([s["vs"], s["p"], s["u"], s["wr"]])

    def unpack(self, x):
        return _RState(*np.split(x, self.split))

    def _conv(self, ahat):
        T = self.ro.T
        if not self.convection:
            z = np.zeros(T.shape[0])
            return z, np.zeros((T.shape[0], T.shape[1]))
        Ta = T @ ahat                                   # (l, j): sum_k T[l, j, k] a_k
        aT = np.einsum("ljk,j->lk", T, ahat)            # sum_j T[l, j, k] a_j
        return Ta @ ahat, Ta + aT

    def residual(self, s, c, prev, prev_c):
        ro, k, idt = self.ro, self.k, self.idt
        ah = np.concatenate([c, s.v])
        ah_prev = np.concatenate([prev_c, prev.v])
        nl, D = self._conv(ah)
        conv_adj = D[:, k:].T @ s.w
        r4 = -(self.S_wv @ ah + nl + ro.Bt_wp @ s.p + ro.C_wu @ s.u - ro.F_w
               - idt * (ro.M_wv @ ah_prev))
        r1 = (ro.Md_vv @ ah - ro.G_v - self.S_vw @ s.w - conv_adj - ro.Bt_vq @ s.q
              + idt * (ro.M_vw @ prev.w))
        r2 = -(ro.B_pw @ s.w)
        r3 = ro.alpha * (ro.R_uu @ s.u) + ro.Mg_uw @ s.w + ro.H_u
        r5 = -(ro.B_qv @ ah)
        terms = [self.S_wv @ ah, nl, ro.Bt_wp @ s.p, ro.C_wu @ s.u, ro.F_w,
                 idt * (ro.M_wv @ ah_prev), ro.Md_vv @ ah, ro.G_v, self.S_vw @ s.w, conv_adj,
                 ro.Bt_vq @ s.q, idt * (ro.M_vw @ prev.w), ro.alpha * (ro.R_uu @ s.u),
                 ro.Mg_uw @ s.w]
        scale = max(sum(np.linalg.norm(t) for t in terms), 1e-300)
        return np.concatenate([r1, r2, r3, r4, r5]), scale, D

    def jacobian(self, s, D):
        ro, k = self.ro, self.k
        sz = ro.sizes
        nv, np_, nu, nw, nq = sz["vs"], sz["p"], sz["u"], sz["wr"], sz["q"]
        J11 = ro.Md_vv[:, k:].copy()
        if self.convection:
            Hw = np.einsum("l,ljk->jk", s.w, ro.T[:, k:, k:])
            J11 -= Hw + Hw.T
        L = self.S_wv[:, k:] + D[:, k:]                 # (nw, nv)
        Z = np.zeros
        return np.block([
            [J11, Z((nv, np_)), Z((nv, nu)), -L.T, -ro.Bt_vq],
            [Z((np_, nv)), Z((np_, np_)), Z((np_, nu)), -ro.B_pw, Z((np_, nq))],
            [Z((nu, nv)), Z((nu, np_)), ro.alpha * ro.R_uu, ro.Mg_uw, Z((nu, nq))],
            [-L, -ro.Bt_wp, -ro.C_wu, Z((nw, nw)), Z((nw, nq))],
            [-ro.B_qv[:, k:], Z((nq, np_)), Z((nq, nu)), Z((nq, nw)), Z((nq, nq))],
        ])


def reduced_step(stepper, prev, c, prev_c, tol=ROM_TOL, maxit=25):
    """Newton solve of one reduced step, warm-started from ``prev``.

    Returns ``(state, history)``; raises ``SingularMatrixError`` or
    ``ConvergenceError``.
    """
    s = prev.copy()
    history = []
    for it in range(maxit + 1):
        r, scale, D = stepper.residual(s, c, prev, prev_c)
        rel = np.linalg.norm(r) / scale
        history.append(rel)
        if rel <= tol and it > 0:
            return s, history
        if it == maxit:
            break
        J = stepper.jacobian(s, D)
        dx = solve_dense(J, -r)
        s = stepper.unpack(s.pack() + dx)
    raise ConvergenceError(f"reduced Newton did not converge (last residual {history[-1]:.3e})",
                           history)


def reduced_residuals(ro, s, c):
    """Relative reduced optimality and divergence residuals of a state."""
    a = ro.alpha * (ro.R_uu @ s.u)
    b = ro.Mg_uw @ s.w
    opt = np.linalg.norm(a + b) / max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)
    ah = np.concatenate([c, s.v])
    div = np.linalg.norm(ro.B_qv @ ah) / max(np.linalg.norm(np.abs(ro.B_qv) @ np.abs(ah)), 1e-300)
    return float(opt), float(div)


def reduced_solve(ro, mu, cfg, tol=ROM_TOL, basis_hash_expected=None, convection=True):
    """March the reduced system from ``t = 0`` to ``T``.

    Raises
    ------
    RomError
        Basis hash mismatch or a parameter with the wrong number of entries.
    SingularMatrixError
        Singular reduced Newton matrix (typically a missing supremizer
        enrichment).
    """
    if basis_hash_expected is not None and basis_hash_expected != ro.basis_hash:
        raise RomError("reduced operators were built from a different basis")
    k = ro.n_lift
    try:
        c_of = lambda t: sc.lift_coefficients(mu, ro.nu, t, k)   # noqa: E731
        c_of(0.0)
    except sc.ConfigError as exc:
        raise RomError(str(exc)) from exc
    sz = ro.sizes
    s = _RState(np.zeros(sz["vs"]), np.zeros(sz["p"]), np.zeros(sz["u"]),
                np.zeros(sz["wr"]), np.zeros(sz["q"]))
    stepper = _Stepper(ro, 1.0 / cfg.dt_s, convection)
    stored, times = [s.copy()], [0.0]
    its, opt_max, div_max, res_max = [], 0.0, 0.0, 0.0
    c_prev = c_of(0.0)
    t0 = time.perf_counter()
    for n in range(1, cfg.n_steps + 1):
        t = n * cfg.dt_s
        c = c_of(t)
        try:
            s, hist = reduced_step(stepper, s, c, c_prev, tol, cfg.newton_maxit)
        except SingularMatrixError as exc:
            raise SingularMatrixError(f"step {n} (t={t:.4g}): reduced system singular; "
                                      f"check the supremizer enrichment ({exc})", row=exc.row)
        its.append(len(hist) - 1)
        res_max = max(res_max, hist[-1])
        o, dv = reduced_residuals(ro, s, c)
        opt_max, div_max = max(opt_max, o), max(div_max, dv)
        c_prev = c
        if n % cfg.snapshot_stride == 0:
            stored.append(s.copy())
            times.append(t)
    wall = time.perf_counter() - t0
    cols = {f: np.column_stack([getattr(x, f) for x in stored]) for f in FIELDS}
    info = {"newton_iterations": its, "wall_time_s": wall, "max_residual": res_max,
            "max_optimality": opt_max, "max_divergence": div_max}
    return ReducedTrajectory(np.array(times), mu=mu, basis_hash=ro.basis_hash, info=info, **cols)


def lift(red, basis, problem):
    """Full-order trajectory from reduced coefficients (lift re-added to v)."""
    if red.v.shape[0] != basis.Zvs.shape[1] or red.w.shape[0] != basis.Zwr.shape[1]:
        raise RomError("reduced trajectory does not match the basis dimensions")
    v = basis.Zvs @ red.v
    for j, t in enumerate(red.times):
        v[:, j] += problem.lift(red.mu, t)
    return Trajectory(times=red.times.copy(), v=v, p=basis.Zp @ red.p, u=basis.Zu @ red.u,
                      w=basis.Zwr @ red.w, q=basis.Zq @ red.q, mu=red.mu,
                      cfg_hash=problem.cfg.hash(), controlled=True,
                      info={"basis_hash": red.basis_hash, **red.info})


def project_state(state, basis, problem, mu):
    """Reduced coefficients of a full state (orthogonal projections)."""
    from .pod import inner_products
    X = inner_products(problem.ops)
    hom = state.v - problem.lift(mu, state.t)
    return _RState(basis.Zvs.T @ (X["v"] @ hom), basis.Zp.T @ (X["p"] @ state.p),
                   basis.Zu.T @ (X["u"] @ state.u), basis.Zwr.T @ (X["w"] @ state.w),
                   basis.Zq.T @ (X["q"] @ state.q))


def trajectory_snapshots(problem, traj, supremizers):
    """Snapshot matrices of one trajectory for the POD stage: lift-subtracted
    state velocity, the other fields, and both supremizer families."""
    v = traj.v.copy()
    for j, t in enumerate(traj.times):
        v[:, j] -= problem.lift(traj.mu, t)
    s, r = supremizers(traj.p), supremizers(traj.q)
    return {"v": v, "p": traj.p, "u": traj.u, "w": traj.w, "q": traj.q, "s": s, "r": r}


__all__ = ["ReducedOperators", "ReducedTrajectory", "RomError", "basis_hash", "lift",
           "project_operators", "project_state", "reduced_solve", "reduced_residuals",
           "trajectory_snapshots"]

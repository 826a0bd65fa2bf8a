"""High-fidelity one-shot solver for the unsteady boundary-control problem.

At each implicit Euler step the state ``(v, p)``, control ``u`` and adjoint
``(w, q)`` are obtained together by Newton's method applied to the
stationarity conditions of the per-step Lagrangian

    L = 1/2 v'M_d v - G'v + alpha/2 u'R u + (1/dt) (M w_prev)'v
        - w'[(M/dt + A) v + e(v, v, .) + B'p + C u - F - (M/dt) v_prev]
        - q'B v.

The adjoint is marched forward in time through the ``w_prev`` coupling; the
terminal condition ``w(T) = 0`` is not imposed and ``|w(T)|`` is reported as
a diagnostic.  Velocity and adjoint velocity are constrained on the inlet and
wall dofs (the velocity to the inlet lift, the adjoint to zero); the control
is the traction on the outlet.

The Newton matrix is the (symmetric) Hessian of ``L``:

    [ M_d - H(w)   0      0        -(S+E+K)'   -B' ]
    [ 0            0      0        -B           0  ]
    [ 0            0      alpha R   M_Gamma     0  ]
    [ -(S+E+K)    -B'    -C         0           0  ]
    [ -B           0      0         0           0  ]

with ``S = M/dt + A``, ``E = E(v)``, ``K = K(v)`` the linearized convection
and ``H(w)`` the convection Hessian.
"""

from dataclasses import dataclass, field
import logging
import os
import struct
import time
import zlib

import numpy as np
import scipy.sparse as sp

from . import fem
from . import geometry as geo
from . import scenarios as sc
from .linalg import ConvergenceError, SingularMatrixError, SparseLU

log = logging.getLogger(__name__)

FIELDS = ("v", "p", "u", "w", "q")


# --------------------------------------------------------------------------
# problem setup

@dataclass(eq=False)
class OCPProblem:
    """Everything a trajectory solve needs, independent of ``mu``."""

    cfg: sc.ScenarioConfig
    mesh: geo.Mesh
    centerline: geo.Centerline
    space: fem.FunctionSpace
    ops: fem.OCPOperators
    lift_shapes: list

    @property
    def n_inlets(self):
        return len(self.lift_shapes)

    def lift(self, mu, t):
        c = sc.lift_coefficients(mu, self.cfg.nu_mm2_s, t, self.n_inlets)
        out = np.zeros(self.space.n_v)
        for ci, L in zip(c, self.lift_shapes):
            out += ci * L
        return out

    def target(self, X):
        return sc.target_profile(self.centerline, self.cfg.v_const_mm_s, X)


def setup_problem(cfg, mesh=None, centerline=None):
    """Generate (or take) the mesh, build spaces and assemble operators."""
    if mesh is None:
        mesh, centerline = geo.generate(cfg.geometry)
    space = fem.build_spaces(mesh)
    ops = fem.assemble_all(space, cfg.nu_mm2_s)
    if centerline is not None:
        ops.G = fem.assemble_target_load(
            space, lambda X: sc.target_profile(centerline, cfg.v_const_mm_s, X))
    return OCPProblem(cfg=cfg, mesh=mesh, centerline=centerline, space=space, ops=ops,
                      lift_shapes=sc.inlet_lift_shapes(space))


# --------------------------------------------------------------------------
# states and trajectories

@dataclass
class OCPState:
    v: np.ndarray
    p: np.ndarray
    u: np.ndarray
    w: np.ndarray
    q: np.ndarray
    t: float = 0.0

    def copy(self):
        return OCPState(*(getattr(self, f).copy() for f in FIELDS), t=self.t)


def zero_state(space, t=0.0):
    return OCPState(np.zeros(space.n_v), np.zeros(space.n_p), np.zeros(space.n_u),
                    np.zeros(space.n_v), np.zeros(space.n_p), t)


@dataclass
class Trajectory:
    """Stored states as column matrices, one column per stored time."""

    times: np.ndarray
    v: np.ndarray
    p: np.ndarray
    u: np.ndarray
    w: np.ndarray
    q: np.ndarray
    mu: sc.ParameterPoint
    cfg_hash: str = ""
    controlled: bool = True
    info: dict = field(default_factory=dict)

    def __len__(self):
        return len(self.times)

    def state(self, k):
        return OCPState(*(getattr(self, f)[:, k].copy() for f in FIELDS), t=float(self.times[k]))

    @property
    def states(self):
        return [self.state(k) for k in range(len(self))]

    @classmethod
    def from_states(cls, states, mu, cfg_hash="", controlled=True, info=None):
        if any(b.t <= a.t for a, b in zip(states, states[1:])):
            raise ValueError("trajectory times must be strictly increasing")
        cols = {f: np.column_stack([getattr(s, f) for s in states]) for f in FIELDS}
        return cls(times=np.array([s.t for s in states]), mu=mu, cfg_hash=cfg_hash,
                   controlled=controlled, info=dict(info or {}), **cols)


# --------------------------------------------------------------------------
# per-step residual and Jacobian

@dataclass
class StepContext:
    """Data of one time step that does not change during Newton."""

    problem: OCPProblem
    mu: sc.ParameterPoint
    prev: OCPState
    t: float
    steady: bool = False
    convection: bool = True

    @property
    def inv_dt(self):
        return 0.0 if self.steady else 1.0 / self.problem.cfg.dt_s


def _apply_dirichlet(ctx, state):
    sp_ = ctx.problem.space
    D = sp_.dirichlet_dofs
    lift = ctx.problem.lift(ctx.mu, ctx.t)
    state.v[D] = lift[D]
    state.w[D] = 0.0


def step_residual(ctx, s):
    """Residual blocks ``(r1, ..., r5)`` on all rows (Dirichlet rows included)."""
    ops, cfg = ctx.problem.ops, ctx.problem.cfg
    idt = ctx.inv_dt
    S_v = ops.A @ s.v + idt * (ops.M @ s.v)
    S_w = ops.A @ s.w + idt * (ops.M @ s.w)
    r4 = -(S_v + ops.B.T @ s.p + ops.C @ s.u - ops.F - idt * (ops.M @ ctx.prev.v))
    r1 = ops.M_d @ s.v - ops.G - S_w - ops.B.T @ s.q + idt * (ops.M @ ctx.prev.w)
    if ctx.convection:
        r4 -= fem.convection_residual(ctx.problem.space, s.v)
        r1 -= fem.convection_adjoint_residual(ctx.problem.space, s.v, s.w)
    r2 = -(ops.B @ s.w)
    r3 = cfg.alpha * (ops.R_reg @ s.u) + ops.M_Gamma @ s.w
    r5 = -(ops.B @ s.v)
    return r1, r2, r3, r4, r5


def _scale(ctx, s):
    """Magnitude of the terms entering the residual, for relative tests."""
    ops, cfg = ctx.problem.ops, ctx.problem.cfg
    idt = max(ctx.inv_dt, 1.0)
    terms = [ops.M @ s.v * idt, ops.A @ s.v, ops.M @ s.w * idt, ops.A @ s.w,
             ops.B.T @ s.p, ops.B.T @ s.q, ops.C @ s.u, cfg.alpha * (ops.R_reg @ s.u),
             ops.M_Gamma @ s.w, ops.M_d @ s.v, ops.G, ops.F, ops.M @ ctx.prev.v * idt,
             ops.M @ ctx.prev.w * idt]
    return max(sum(np.linalg.norm(x) for x in terms), 1e-300)


def _row_masks(space, controlled):
    free = np.zeros(space.n_v, dtype=bool)
    free[space.free_dofs] = True
    allp = np.ones(space.n_p, dtype=bool)
    if not controlled:
        return np.concatenate([free, allp])
    return np.concatenate([free, allp, np.ones(space.n_u, dtype=bool), free, allp])


def step_jacobian(ctx, s, controlled=True):
    """Newton matrix on free dofs (CSC)."""
    ops, cfg, space = ctx.problem.ops, ctx.problem.cfg, ctx.problem.space
    S = ops.A + ctx.inv_dt * ops.M if ctx.inv_dt else ops.A
    if ctx.convection:
        E, K = fem.assemble_convection(space, s.v)
        L = (S + E + K).tocsr()
    else:
        L = S.tocsr()
    B = ops.B
    if controlled:
        J11 = ops.M_d
        if ctx.convection:
            J11 = J11 - fem.assemble_convection_hessian(space, s.w)
        blocks = [
            [J11, None, None, -L.T, -B.T],
            [None, None, None, -B, None],
            [None, None, cfg.alpha * ops.R_reg, ops.M_Gamma, None],
            [-L, -B.T, -ops.C, None, None],
            [-B, None, None, None, None],
        ]
        # keep an explicit zero pressure block so the shapes are defined
        blocks[1][1] = sp.csr_matrix((space.n_p, space.n_p))
        blocks[4][4] = sp.csr_matrix((space.n_p, space.n_p))
    else:
        blocks = [[-L, -B.T], [-B, sp.csr_matrix((space.n_p, space.n_p))]]
    J = sp.bmat(blocks, format="csr")
    keep = np.flatnonzero(_row_masks(space, controlled))
    return J[keep][:, keep].tocsc(), keep


def _pack(s, controlled):
    parts = [s.v, s.p, s.u, s.w, s.q] if controlled else [s.v, s.p]
    return np.concatenate(parts)


def _unpack(x, space, controlled):
    nv, np_, nu = space.n_v, space.n_p, space.n_u
    if controlled:
        sizes = [nv, np_, nu, nv, np_]
    else:
        sizes = [nv, np_]
    out, k = [], 0
    for n in sizes:
        out.append(x[k:k + n])
        k += n
    return out


def solve_timestep(ctx, guess=None, controlled=True, tol=None, maxit=None):
    """One Newton-solved step; returns ``(state, history)``.

    ``history`` lists the relative combined residual before each update and
    after the last one.

    Raises
    ------
    ConvergenceError
        No convergence within ``maxit`` iterations (history attached).
    SingularMatrixError
        Singular Newton matrix.
    """
    cfg = ctx.problem.cfg
    space = ctx.problem.space
    tol = cfg.newton_tol if tol is None else tol
    maxit = cfg.newton_maxit if maxit is None else maxit
    s = (guess or ctx.prev).copy()
    s.t = ctx.t
    if not controlled:
        s.u[:] = 0.0
        s.w[:] = 0.0
        s.q[:] = 0.0
    _apply_dirichlet(ctx, s)
    keep = np.flatnonzero(_row_masks(space, controlled))
    history = []
    linear = not ctx.convection
    for it in range(maxit + 1):
        r = _residual_vector(ctx, s, controlled)
        rel = np.linalg.norm(r[keep]) / _scale(ctx, s)
        history.append(rel)
        if (rel <= tol and it > 0) or (linear and it == 1):
            return s, history
        if it == maxit:
            break
        J, _ = step_jacobian(ctx, s, controlled)
        try:
            dx = SparseLU(J).solve(-r[keep])
        except SingularMatrixError as exc:
            raise SingularMatrixError(f"t={ctx.t:.4g}: {exc}", row=exc.row) from exc
        x = _pack(s, controlled)
        x[keep] += dx
        parts = _unpack(x, space, controlled)
        s.v, s.p = parts[0], parts[1]
        if controlled:
            s.u, s.w, s.q = parts[2], parts[3], parts[4]
    raise ConvergenceError(
        f"Newton did not converge at t={ctx.t:.4g} after {maxit} iterations "
        f"(last relative residual {history[-1]:.3e})", history)


def _residual_vector(ctx, s, controlled):
    r1, r2, r3, r4, r5 = step_residual(ctx, s) if controlled else _state_residual(ctx, s)
    # order of unknowns: the Newton matrix has rows d/d(v,p,u,w,q) = (r1..r5)
    if controlled:
        return np.concatenate([r1, r2, r3, r4, r5])
    return np.concatenate([r4, r5])


def _state_residual(ctx, s):
    ops = ctx.problem.ops
    idt = ctx.inv_dt
    r4 = -(ops.A @ s.v + idt * (ops.M @ s.v) + ops.B.T @ s.p - ops.F - idt * (ops.M @ ctx.prev.v))
    if ctx.convection:
        r4 -= fem.convection_residual(ctx.problem.space, s.v)
    return None, None, None, r4, -(ops.B @ s.v)


# --------------------------------------------------------------------------
# residual report

@dataclass
class KKTReport:
    """Norms of the five block rows on free dofs, absolute and relative."""

    absolute: dict
    relative: dict

    def max_relative(self):
        return max(self.relative.values())


def kkt_residual(problem, state, mu, prev, steady=False, convection=True):
    """Per-row residual norms of ``state`` as the solution of the step that
    starts from ``prev``.

    Relative values divide by the sum of the norms of the terms that make up
    each row, so they are scale-free.
    """
    ctx = StepContext(problem, mu, prev, state.t, steady=steady, convection=convection)
    r = step_residual(ctx, state)
    space, ops, cfg = problem.space, problem.ops, problem.cfg
    f = space.free_dofs
    idt = ctx.inv_dt
    conv_v = fem.convection_residual(space, state.v) if convection else 0 * state.v
    if convection:
        conv_w = fem.convection_adjoint_residual(space, state.v, state.w)
    else:
        conv_w = 0 * state.w
    sc1 = [ops.M_d @ state.v, ops.G, ops.A @ state.w, idt * (ops.M @ state.w), conv_w,
           ops.B.T @ state.q, idt * (ops.M @ prev.w)]
    sc4 = [ops.A @ state.v, idt * (ops.M @ state.v), conv_v, ops.B.T @ state.p,
           ops.C @ state.u, ops.F, idt * (ops.M @ prev.v)]
    scales = {
        "adjoint": sum(np.linalg.norm(x[f]) for x in sc1),
        "adjoint_div": _div_scale(ops, state.w),
        "optimality": max(np.linalg.norm(cfg.alpha * (ops.R_reg @ state.u)),
                          np.linalg.norm(ops.M_Gamma @ state.w)),
        "state": sum(np.linalg.norm(x[f]) for x in sc4),
        "state_div": _div_scale(ops, state.v),
    }
    absolute = {"adjoint": np.linalg.norm(r[0][f]), "adjoint_div": np.linalg.norm(r[1]),
                "optimality": np.linalg.norm(r[2]), "state": np.linalg.norm(r[3][f]),
                "state_div": np.linalg.norm(r[4])}
    floor = 1e-300
    relative = {k: absolute[k] / max(scales[k], floor) if absolute[k] > 0 else 0.0
                for k in absolute}
    return KKTReport(absolute, relative)


def _div_scale(ops, v):
    """Scale for ``|B v|``: the norm of ``|B| |v|`` (no cancellation)."""
    return float(np.linalg.norm(abs(ops.B) @ np.abs(v)))


def optimality_residual(problem, state):
    """Relative ``|alpha R u + M_Gamma w|``."""
    ops, cfg = problem.ops, problem.cfg
    a = cfg.alpha * (ops.R_reg @ state.u)
    b = ops.M_Gamma @ state.w
    den = max(np.linalg.norm(a), np.linalg.norm(b), 1e-300)
    return float(np.linalg.norm(a + b) / den) if np.linalg.norm(a + b) > 0 else 0.0


def divergence_residual(problem, v):
    """Relative ``|B v|`` against ``| |B| |v| |``."""
    ops = problem.ops
    num = np.linalg.norm(ops.B @ v)
    return float(num / max(_div_scale(ops, v), 1e-300)) if num > 0 else 0.0


# --------------------------------------------------------------------------
# time marching

def initial_state(problem, mu):
    """All fields zero at t=0 except the Dirichlet velocity dofs (inlet lift)."""
    s = zero_state(problem.space, 0.0)
    D = problem.space.dirichlet_dofs
    s.v[D] = problem.lift(mu, 0.0)[D]
    return s


def _march(problem, mu, controlled, start=None, start_step=0, stored=None,
           checkpoint=None, stop_step=None):
    cfg = problem.cfg
    n_steps = cfg.n_steps
    stop = n_steps if stop_step is None else min(stop_step, n_steps)
    s = initial_state(problem, mu) if start is None else start.copy()
    states = list(stored) if stored is not None else [s.copy()]
    newton_its = []
    opt_max = div_max = 0.0
    t0 = time.perf_counter()
    for n in range(start_step + 1, stop + 1):
        t = n * cfg.dt_s
        ctx = StepContext(problem, mu, s, t)
        try:
            s, hist = solve_timestep(ctx, controlled=controlled)
        except (ConvergenceError, SingularMatrixError) as exc:
            raise type(exc)(f"step {n}: {exc}", getattr(exc, "history", None) or
                            getattr(exc, "row", None)) from exc
        newton_its.append(len(hist) - 1)
        div_max = max(div_max, divergence_residual(problem, s.v))
        if controlled:
            opt_max = max(opt_max, optimality_residual(problem, s))
        if n % cfg.snapshot_stride == 0:
            states.append(s.copy())
        if checkpoint is not None and checkpoint.get("every") and n % checkpoint["every"] == 0:
            checkpoint_save(checkpoint["path"], s, n, mu, cfg, states, controlled)
    info = {"newton_iterations": newton_its, "wall_time_s": time.perf_counter() - t0,
            "max_optimality": opt_max, "max_divergence": div_max,
            "last_step": stop, "w_terminal_norm": float(np.sqrt(s.w @ (problem.ops.M @ s.w)))}
    traj = Trajectory.from_states(states, mu, cfg.hash(), controlled, info)
    traj.info["final_state"] = s
    return traj


def solve_ocp(problem, mu, checkpoint_path=None, checkpoint_every=None, stop_step=None):
    """Controlled trajectory from ``t = 0`` to ``T`` (or to ``stop_step``).

    With ``checkpoint_path`` and ``checkpoint_every`` a checkpoint is written
    every that many steps.
    """
    ck = {"path": checkpoint_path, "every": checkpoint_every} if checkpoint_path else None
    return _march(problem, mu, True, checkpoint=ck, stop_step=stop_step)


def solve_uncontrolled(problem, mu, stop_step=None):
    """Navier-Stokes with a traction-free outlet (``u = 0``)."""
    return _march(problem, mu, False, stop_step=stop_step)


def steady_solve(problem, mu, t=0.0, controlled=True, convection=True, guess=None):
    """Steady variant (time-derivative terms dropped) with the inlet data at
    time ``t``.  Linear when ``convection`` is False."""
    prev = zero_state(problem.space, t)
    ctx = StepContext(problem, mu, prev, t, steady=True, convection=convection)
    s, _ = solve_timestep(ctx, guess=guess, controlled=controlled)
    return s


# --------------------------------------------------------------------------
# checkpoints

CKPT_MAGIC = b"OCPCKPT1"
CKPT_VERSION = 1


class CheckpointError(ValueError):
    """Corrupted, foreign or incompatible checkpoint file."""


def _f8(a):
    return np.asarray(a, dtype="<f8").tobytes()


def checkpoint_save(path, state, step, mu, cfg, stored, controlled=True):
    """Write the full solver state at ``step`` plus the stored states so far.

    Layout (little-endian): magic, u32 version, 16-byte cfg hash, u32 flags,
    u32 n_mu, n_mu f8, f8 t, u64 step, 5 x u64 field lengths, field data,
    u64 n_stored, stored times, stored field data, u32 CRC32 of everything
    before it.
    """
    body = bytearray()
    body += CKPT_MAGIC
    body += struct.pack("<I", CKPT_VERSION)
    body += cfg.hash().encode("ascii").ljust(16, b"\0")[:16]
    body += struct.pack("<I", 1 if controlled else 0)
    body += struct.pack("<I", len(mu.re)) + _f8(mu.re)
    body += struct.pack("<dQ", state.t, step)
    arrs = [getattr(state, f) for f in FIELDS]
    body += struct.pack("<5Q", *(len(a) for a in arrs))
    for a in arrs:
        body += _f8(a)
    body += struct.pack("<Q", len(stored)) + _f8([s.t for s in stored])
    for s in stored:
        for f in FIELDS:
            body += _f8(getattr(s, f))
    body += struct.pack("<I", zlib.crc32(bytes(body)) & 0xFFFFFFFF)
    tmp = str(path) + ".tmp"
    with open(tmp, "wb") as fh:
        fh.write(body)
    os.replace(tmp, path)


def checkpoint_load(path, cfg=None):
    """Read a checkpoint.  Returns a dict with state, step, mu, stored states."""
    with open(path, "rb") as fh:
        data = fh.read()
    if len(data) < len(CKPT_MAGIC) + 8 or data[:len(CKPT_MAGIC)] != CKPT_MAGIC:
        raise CheckpointError("not a checkpoint file (bad magic)")
    crc, = struct.unpack("<I", data[-4:])
    if zlib.crc32(data[:-4]) & 0xFFFFFFFF != crc:
        raise CheckpointError("checkpoint checksum mismatch (corrupted file)")
    pos = len(CKPT_MAGIC)

    def take(fmt):
        nonlocal pos
        vals = struct.unpack_from(fmt, data, pos)
        pos += struct.calcsize(fmt)
        return vals

    def arr(n):
        nonlocal pos
        a = np.frombuffer(data, dtype="<f8", count=n, offset=pos).astype(float)
        pos += 8 * n
        return a

    version, = take("<I")
    if version != CKPT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {version}")
    h = data[pos:pos + 16].rstrip(b"\0").decode("ascii")
    pos += 16
    if cfg is not None and h != cfg.hash():
        raise CheckpointError(f"checkpoint was written with config {h}, current config is {cfg.hash()}")
    flags, = take("<I")
    nmu, = take("<I")
    mu = sc.ParameterPoint(tuple(arr(nmu)))
    t, step = take("<dQ")
    lens = take("<5Q")
    state = OCPState(*(arr(n) for n in lens), t=t)
    nst, = take("<Q")
    times = arr(nst)
    stored = []
    for k in range(nst):
        stored.append(OCPState(*(arr(n) for n in lens), t=float(times[k])))
    return {"state": state, "step": int(step), "mu": mu, "stored": stored,
            "cfg_hash": h, "controlled": bool(flags & 1)}


def checkpoint_resume(problem, path, checkpoint_every=None):
    """Continue a controlled solve from a checkpoint to ``T``.

    Raises
    ------
    CheckpointError
        If the file is corrupted or was written under a different config.
    """
    ck = checkpoint_load(path, problem.cfg)
    again = {"path": path, "every": checkpoint_every} if checkpoint_every else None
    return _march(problem, ck["mu"], ck["controlled"], start=ck["state"],
                  start_step=ck["step"], stored=ck["stored"], checkpoint=again)

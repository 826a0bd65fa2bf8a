"""Quantities of interest: cost functional, wall shear stress, trajectory
errors and CSV output."""

from dataclasses import dataclass
import csv
import io

import numpy as np
from scipy.spatial import cKDTree

from . import fem
from . import geometry as geo


class PostError(ValueError):
    """Incompatible inputs to a post-processing routine."""


def _trapz_weights(times):
    t = np.asarray(times, dtype=float)
    if len(t) < 2:
        return np.ones(len(t))
    dt = np.diff(t)
    w = np.zeros(len(t))
    w[:-1] += dt / 2
    w[1:] += dt / 2
    return w


# --------------------------------------------------------------------------
# cost

@dataclass(frozen=True)
class CostReport:
    tracking: float
    control: float

    @property
    def total(self):
        return self.tracking + self.control


def tracking_integrand(space, v, target):
    """``1/2 int |v - v_d|^2`` by cell quadrature; ``target`` maps points
    ``(n, dim)`` to values."""
    val, _ = fem.field_at_quadrature(space, v)
    X = space.quadrature_points()
    vd = np.asarray(target(X.reshape(-1, space.dim)), dtype=float).reshape(val.shape)
    diff = val - vd
    return 0.5 * float(np.sum(space.weights() * np.einsum("cqi,cqi->cq", diff, diff)))


def cost_functional(problem, traj, target=None, alpha=None):
    """Tracking and control terms integrated in time by the trapezoidal rule
    over the stored states."""
    target = problem.target if target is None else target
    alpha = problem.cfg.alpha if alpha is None else alpha
    R = problem.ops.R_reg
    wt = _trapz_weights(traj.times)
    track = sum(w * tracking_integrand(problem.space, traj.v[:, k], target)
                for k, w in enumerate(wt))
    ctrl = sum(w * 0.5 * alpha * float(traj.u[:, k] @ (R @ traj.u[:, k]))
               for k, w in enumerate(wt))
    return CostReport(float(track), float(ctrl))


# --------------------------------------------------------------------------
# wall shear stress

@dataclass
class WssField:
    """Per wall-facet tangential traction magnitude (facet average).

    ``facets`` indexes ``mesh.facets``; ``midpoints`` and ``measures`` are
    per listed facet.  Values are in mm^2/s^2 unless a density was applied.
    """

    facets: np.ndarray
    values: np.ndarray
    midpoints: np.ndarray
    measures: np.ndarray
    units: str = "mm^2/s^2"


def facet_normals(mesh, facets, cells):
    """Unit outward normals of boundary facets with owning ``cells``."""
    P = mesh.vertices[mesh.facets[facets]]
    d = mesh.dim
    if d == 2:
        t = P[:, 1] - P[:, 0]
        n = np.column_stack([t[:, 1], -t[:, 0]])
    else:
        n = np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0])
    n /= np.linalg.norm(n, axis=1)[:, None]
    centroid = mesh.vertices[mesh.cells[cells]].mean(axis=1)
    flip = np.einsum("ij,ij->i", n, P[:, 0] - centroid) < 0
    n[flip] *= -1
    return n


def wss(space, v, nu, density=0.0, tag=geo.WALL):
    """Wall shear stress ``|nu (grad v + grad v') n|_tangential`` per facet.

    Gradients are the exact P2 gradients of the owning cell at facet
    quadrature points.  With ``density > 0`` (g/mm^3) the result is in Pa.

    Raises
    ------
    PostError
        If the mesh has no facets with ``tag``.
    """
    mesh = space.mesh
    d = space.dim
    sel = np.flatnonzero(mesh.facet_tags == tag)
    if sel.size == 0:
        raise PostError("mesh has no wall facets")
    cells = space.facet_cells[sel]
    n = facet_normals(mesh, sel, cells)
    fq, fw = fem.simplex_quadrature(d - 1, 4)
    P = mesh.vertices[mesh.facets[sel]]                                 # (f, d, d)
    bary = np.column_stack([1.0 - fq.sum(axis=1), fq])                  # (nq, d)
    X = np.einsum("qk,fkd->fqd", bary, P)                               # facet points
    x0 = mesh.vertices[mesh.cells[cells, 0]]
    ref = np.einsum("fde,fqe->fqd", space.invJ[cells], X - x0[:, None, :])
    nodal = np.asarray(v, dtype=float).reshape(space.n_nodes, d)[space.cell_nodes[cells]]
    out = np.zeros(len(sel))
    for q in range(len(fw)):
        _, dref = fem.p2_basis(ref[:, q])                   # (f, nloc, d)
        G = np.einsum("fad,fde->fae", dref, space.invJ[cells])
        grad = np.einsum("fai,fag->fig", nodal, G)          # d_g v_i
        tr = nu * np.einsum("fig,fg->fi", grad + grad.transpose(0, 2, 1), n)
        tang = tr - np.einsum("fi,fi->f", tr, n)[:, None] * n
        mag = np.linalg.norm(tang, axis=1)
        out += mag * fw[q]
    out /= fw.sum()
    units = "mm^2/s^2"
    if density > 0:
        out = out * density
        units = "Pa"
    meas = _facet_measures(P)
    return WssField(sel, out, P.mean(axis=1), meas, units)


def _facet_measures(P):
    if P.shape[1] == 2:
        return np.linalg.norm(P[:, 1] - P[:, 0], axis=1)
    return 0.5 * np.linalg.norm(np.cross(P[:, 1] - P[:, 0], P[:, 2] - P[:, 0]), axis=1)


def mirror_asymmetry(field, axis=1, tol=1e-8):
    """Relative difference between a WSS field and its mirror image across
    the plane ``x[axis] = 0``.

    Each facet is matched to the facet whose midpoint is its reflection; the
    result is ``|tau - tau_mirror| / |tau|`` in the facet-measure-weighted L2
    sense.
    """
    mids = field.midpoints
    refl = mids.copy()
    refl[:, axis] *= -1
    dist, idx = cKDTree(mids).query(refl)
    scale = np.max(np.abs(mids)) + 1.0
    if np.any(dist > tol * scale):
        raise PostError("wall facets are not mirror symmetric")
    diff = field.values - field.values[idx]
    m = field.measures
    den = np.sqrt(np.sum(m * field.values ** 2))
    return float(np.sqrt(np.sum(m * diff ** 2)) / max(den, 1e-300))


# --------------------------------------------------------------------------
# errors between trajectories

NORMS = {"v": "M", "p": "Mp", "u": "R_reg", "w": "M", "q": "Mp"}


@dataclass
class ErrorReport:
    """``relative`` holds L2-in-time relative errors per variable,
    ``per_time`` the relative error at each stored time, ``absolute`` the
    pointwise absolute error fields ``|a - b|``."""

    relative: dict
    per_time: dict
    absolute: dict
    times: np.ndarray


def error_norms(ops, a, b, floor=1e-14):
    """Errors of trajectory ``a`` against reference ``b``.

    Raises
    ------
    PostError
        If the stored time stamps differ.
    """
    if len(a.times) != len(b.times) or not np.allclose(a.times, b.times, rtol=0, atol=1e-12):
        raise PostError("trajectories have different stored times (stride mismatch)")
    wt = _trapz_weights(b.times)
    rel, per, absf = {}, {}, {}
    for f, mname in NORMS.items():
        W = getattr(ops, mname)
        A, B = getattr(a, f), getattr(b, f)
        D = A - B
        e2 = np.einsum("ik,ik->k", D, W @ D)
        b2 = np.einsum("ik,ik->k", B, W @ B)
        e2, b2 = np.clip(e2, 0, None), np.clip(b2, 0, None)
        rel[f] = float(np.sqrt(wt @ e2) / max(np.sqrt(wt @ b2), floor))
        per[f] = np.sqrt(e2) / np.maximum(np.sqrt(b2), floor)
        absf[f] = np.abs(D)
    return ErrorReport(rel, per, absf, b.times.copy())


# --------------------------------------------------------------------------
# CSV

def csv_text(header, rows, meta=None):
    """CSV with ``# key=value`` comment lines from ``meta`` above the header."""
    buf = io.StringIO()
    for k, v in (meta or {}).items():
        buf.write(f"# {k}={v}\n")
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for r in rows:
        w.writerow([repr(float(x)) if isinstance(x, (float, np.floating)) else x for x in r])
    return buf.getvalue()


def write_csv(path, header, rows, meta=None):
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(csv_text(header, rows, meta))


def read_csv(path):
    """Return ``(meta, header, rows)`` of a file written by ``write_csv``."""
    meta, lines = {}, []
    with open(path, encoding="utf-8") as fh:
        for line in fh:
            if line.startswith("# ") and "=" in line and not lines:
                k, v = line[2:].rstrip("\n").split("=", 1)
                meta[k] = v
            else:
                lines.append(line)
    r = list(csv.reader(lines))
    return meta, r[0], r[1:]


def spectrum_rows(sigma, squared=False):
    from .pod import energy_curve
    s = np.asarray(sigma, dtype=float)
    curve = energy_curve(s, squared)
    s0 = s[0] if len(s) and s[0] > 0 else 1.0
    return [(i + 1, s[i], s[i] / s0, curve[i]) for i in range(len(s))]


def wss_rows(field, centerline=None):
    rows = []
    if centerline is not None:
        s, _, _, _, br = geo.centerline_query(centerline, field.midpoints)
    for i, f in enumerate(field.facets):
        row = [int(f), *field.midpoints[i], field.values[i]]
        if centerline is not None:
            row = [int(f), int(br[i]), s[i], *field.midpoints[i], field.values[i]]
        rows.append(row)
    return rows

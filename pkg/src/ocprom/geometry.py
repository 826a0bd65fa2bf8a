"""Idealized vessel geometries: simplicial meshes with tagged boundaries and
analytic centerlines.

Two families are generated:

* a straight channel (rectangle in 2D, box in 3D), used to validate the solver
  against Poiseuille flow;
* a Y-shaped bifurcation with two inlet branches merging into one outlet trunk.
  In 2D the upper half of the domain is split into two convex quadrilaterals
  that are meshed with structured transfinite grids and mirrored, so the mesh is
  exactly symmetric about the trunk axis.  The 3D variant
  extrudes the planar domain into a slab of square cross-section.

Coordinates are in millimetres.
"""

from dataclasses import dataclass, field
import math

import numpy as np

WALL, INLET_1, INLET_2, OUTLET = 1, 2, 3, 4
TAG_NAMES = {WALL: "WALL", INLET_1: "INLET_1", INLET_2: "INLET_2", OUTLET: "OUTLET"}
TAG_IDS = {v: k for k, v in TAG_NAMES.items()}
INLET_TAGS = (INLET_1, INLET_2)

MESH_MAGIC = "OCPMESH1"


class GeometryError(ValueError):
    """Invalid geometry parameters or a malformed mesh file."""


@dataclass(frozen=True)
class GeometryParams:
    """Geometry description.  Lengths in mm, angle in radians."""

    kind: str = "bifurcation_2d"
    inlet_radius: float = 1.0
    branch_angle: float = math.pi / 6
    branch_length: float = 10.0
    outlet_length: float = 10.0
    target_h: float = 0.5

    def validate(self):
        if self.kind not in ("channel", "channel_3d", "bifurcation_2d", "bifurcation_3d"):
            raise GeometryError(f"unknown geometry kind {self.kind!r}")
        for name in ("inlet_radius", "branch_length", "outlet_length", "target_h"):
            if not getattr(self, name) > 0:
                raise GeometryError(f"{name} must be positive, got {getattr(self, name)}")
        if self.kind.startswith("bifurcation") and not 0 < self.branch_angle < math.pi / 2:
            raise GeometryError(f"branch_angle must lie in (0, pi/2), got {self.branch_angle}")


@dataclass
class Mesh:
    """Conforming simplicial mesh.

    ``cells`` holds ``dim + 1`` vertex indices per simplex (positively
    oriented), ``facets`` holds ``dim`` vertex indices per boundary facet and
    ``facet_tags`` one tag per facet.
    """

    vertices: np.ndarray
    cells: np.ndarray
    facets: np.ndarray
    facet_tags: np.ndarray
    # inlet data used by the inlet profile: tag -> (centroid, outward normal, radius)
    inlets: dict = field(default_factory=dict)

    @property
    def dim(self):
        return self.vertices.shape[1]

    @property
    def num_vertices(self):
        return self.vertices.shape[0]

    @property
    def num_cells(self):
        return self.cells.shape[0]

    def cell_volumes(self):
        v = self.vertices[self.cells]
        J = (v[:, 1:, :] - v[:, :1, :]).transpose(0, 2, 1)
        return np.linalg.det(J) / math.factorial(self.dim)

    def facet_measures(self, tag=None):
        f = self.facets if tag is None else self.facets[self.facet_tags == tag]
        v = self.vertices[f]
        if self.dim == 2:
            return np.linalg.norm(v[:, 1] - v[:, 0], axis=1)
        return 0.5 * np.linalg.norm(np.cross(v[:, 1] - v[:, 0], v[:, 2] - v[:, 0]), axis=1)

    def measure(self):
        return float(self.cell_volumes().sum())

    def __eq__(self, other):
        if not isinstance(other, Mesh):
            return NotImplemented
        if set(self.inlets) != set(other.inlets):
            return False
        for k, (c, n, r) in self.inlets.items():
            c2, n2, r2 = other.inlets[k]
            if not (np.array_equal(c, c2) and np.array_equal(n, n2) and r == r2):
                return False
        return (np.array_equal(self.vertices, other.vertices)
                and np.array_equal(self.cells, other.cells)
                and np.array_equal(self.facets, other.facets)
                and np.array_equal(self.facet_tags, other.facet_tags))


@dataclass
class Centerline:
    """Centerline made of one or more branches.

    Each branch is a polyline sampled at increasing arclength ``s`` with
    points ``c``, unit tangents ``t`` (flow direction) and local radius ``R``.
    Branches may share points (e.g. the outlet trunk); ties in nearest-point
    queries go to the lowest branch index.
    """

    branches: list

    def __post_init__(self):
        if not self.branches:
            return
        for b in self.branches:
            s = b["s"]
            if np.any(np.diff(s) <= 0):
                raise GeometryError("centerline arclength must be strictly increasing")
            if np.any(b["R"] <= 0):
                raise GeometryError("centerline radius must be positive")


def _branch(points, radius):
    points = np.asarray(points, dtype=float)
    seg = np.diff(points, axis=0)
    seglen = np.linalg.norm(seg, axis=1)
    s = np.concatenate([[0.0], np.cumsum(seglen)])
    segdir = seg / seglen[:, None]
    t = np.empty_like(points)
    t[0], t[-1] = segdir[0], segdir[-1]
    if len(points) > 2:
        avg = segdir[:-1] + segdir[1:]
        t[1:-1] = avg / np.linalg.norm(avg, axis=1)[:, None]
    return {"s": s, "c": points, "t": t, "R": np.full(len(points), float(radius))}


def _polyline(a, b, h):
    n = max(1, int(math.ceil(np.linalg.norm(np.subtract(b, a)) / h)))
    w = np.linspace(0.0, 1.0, n + 1)[:, None]
    return (1 - w) * np.asarray(a, float) + w * np.asarray(b, float)


def centerline_query(cl, x):
    """Nearest centerline point to ``x``.

    Returns ``(s, r, t, R, branch)``: arclength along the branch, distance to
    the nearest point, interpolated unit tangent and radius there, and the
    branch index.  ``x`` may also be an ``(n, dim)`` array, in which case each
    returned quantity is an array.
    """
    if cl is None or not cl.branches:
        raise GeometryError("empty centerline")
    x = np.asarray(x, dtype=float)
    single = x.ndim == 1
    X = np.atleast_2d(x)
    n = X.shape[0]
    best_d = np.full(n, np.inf)
    best_s = np.zeros(n)
    best_t = np.zeros_like(X)
    best_R = np.zeros(n)
    best_b = np.zeros(n, dtype=int)
    for bi, br in enumerate(cl.branches):
        c, s, t, R = br["c"], br["s"], br["t"], br["R"]
        a, b = c[:-1], c[1:]
        ab = b - a
        L2 = np.einsum("ij,ij->i", ab, ab)
        # projection parameter onto every segment: (n, nseg)
        lam = np.einsum("nij,ij->ni", X[:, None, :] - a[None], ab) / L2[None]
        lam = np.clip(lam, 0.0, 1.0)
        proj = a[None] + lam[..., None] * ab[None]
        d = np.linalg.norm(X[:, None, :] - proj, axis=2)
        k = np.argmin(d, axis=1)
        dk = d[np.arange(n), k]
        lk = lam[np.arange(n), k]
        better = dk < best_d - 1e-12 * max(1.0, float(np.max(R)))
        if not np.any(better):
            continue
        sk = s[k] + lk * (s[k + 1] - s[k])
        tk = (1 - lk)[:, None] * t[k] + lk[:, None] * t[k + 1]
        tk /= np.linalg.norm(tk, axis=1)[:, None]
        Rk = (1 - lk) * R[k] + lk * R[k + 1]
        best_d[better] = dk[better]
        best_s[better] = sk[better]
        best_t[better] = tk[better]
        best_R[better] = Rk[better]
        best_b[better] = bi
    if single:
        return best_s[0], best_d[0], best_t[0], best_R[0], int(best_b[0])
    return best_s, best_d, best_t, best_R, best_b


# --------------------------------------------------------------------------
# structured pieces

def _transfinite(corners, n_a, n_b):
    """Bilinear grid on the quadrilateral ``corners`` (counter-clockwise).

    Returns ``(n_a + 1) * (n_b + 1)`` points indexed ``i * (n_b + 1) + j``.
    """
    p00, p10, p11, p01 = (np.asarray(c, float) for c in corners)
    u = np.linspace(0.0, 1.0, n_a + 1)[:, None, None]
    v = np.linspace(0.0, 1.0, n_b + 1)[None, :, None]
    P = ((1 - u) * (1 - v) * p00 + u * (1 - v) * p10 + u * v * p11 + (1 - u) * v * p01)
    return P.reshape(-1, 2)


def _grid_triangles(n_a, n_b, offset=0):
    tris = []
    for i in range(n_a):
        for j in range(n_b):
            a = offset + i * (n_b + 1) + j
            b = a + (n_b + 1)
            tris.append((a, b, b + 1))
            tris.append((a, b + 1, a + 1))
    return np.array(tris, dtype=np.int64)


def _merge_points(points, cells, tol):
    """Merge coincident points (within ``tol``) deterministically."""
    key = np.round(points / tol).astype(np.int64)
    _, first, inverse = np.unique(key, axis=0, return_index=True, return_inverse=True)
    inverse = inverse.ravel()
    # renumber by first appearance to keep ordering stable
    order = np.argsort(first, kind="stable")
    rank = np.empty_like(order)
    rank[order] = np.arange(len(order))
    new_index = rank[inverse]
    new_points = points[first[order]]
    return new_points, new_index[cells]


def _orient(vertices, cells):
    v = vertices[cells]
    J = (v[:, 1:, :] - v[:, :1, :]).transpose(0, 2, 1)
    det = np.linalg.det(J)
    cells = cells.copy()
    neg = det < 0
    cells[neg, 0], cells[neg, 1] = cells[neg, 1].copy(), cells[neg, 0].copy()
    return cells


def boundary_facets(cells, dim):
    """Facets that belong to exactly one cell, in a canonical order."""
    k = dim + 1
    local = [tuple(j for j in range(k) if j != i) for i in range(k)]
    f = np.concatenate([cells[:, l] for l in local], axis=0)
    fs = np.sort(f, axis=1)
    _, idx, counts = np.unique(fs, axis=0, return_index=True, return_counts=True)
    bf = f[np.sort(idx[counts == 1])]
    return bf


def _tag_facets(vertices, facets, classify):
    mid = vertices[facets].mean(axis=1)
    tags = np.array([classify(m) for m in mid], dtype=np.int64)
    return tags


def _finalize(vertices, cells, classify, inlets):
    cells = _orient(vertices, cells)
    facets = boundary_facets(cells, vertices.shape[1])
    tags = _tag_facets(vertices, facets, classify)
    return Mesh(vertices=vertices, cells=cells, facets=facets, facet_tags=tags, inlets=inlets)


# --------------------------------------------------------------------------
# generators

def generate_channel(params):
    """Straight channel of length ``outlet_length`` and half-width ``inlet_radius``.

    The 2D channel is ``[0, L] x [-R, R]``; the 3D variant (``kind="channel_3d"``)
    is the box ``[0, L] x [-R, R]^2``.  The left end is ``INLET_1``, the right
    end ``OUTLET`` and the rest ``WALL``.
    """
    params.validate()
    if params.kind not in ("channel", "channel_3d"):
        raise GeometryError(f"generate_channel needs kind 'channel', got {params.kind!r}")
    L, R, h = params.outlet_length, params.inlet_radius, params.target_h
    nx = max(1, int(math.ceil(L / h)))
    ny = max(1, int(math.ceil(2 * R / h)))
    if params.kind == "channel":
        pts = _transfinite([(0, -R), (L, -R), (L, R), (0, R)], nx, ny)
        cells = _grid_triangles(nx, ny)
        dim = 2
    else:
        pts, cells = _box_tets(L, R, nx, ny)
        dim = 3
    tol = 1e-9 * max(L, R)

    def classify(m):
        if abs(m[0]) < tol:
            return INLET_1
        if abs(m[0] - L) < tol:
            return OUTLET
        return WALL

    inlet_c = np.zeros(dim)
    n_in = np.zeros(dim)
    n_in[0] = -1.0
    mesh = _finalize(pts, cells, classify, {INLET_1: (inlet_c, n_in, float(R))})
    axis = np.zeros((2, dim))
    axis[1, 0] = L
    cl = Centerline([_branch(_polyline(axis[0], axis[1], h / 2), R)])
    return mesh, cl


def _box_tets(L, R, nx, ny):
    xs = np.linspace(0, L, nx + 1)
    ys = np.linspace(-R, R, ny + 1)
    X, Y, Z = np.meshgrid(xs, ys, ys, indexing="ij")
    pts = np.column_stack([X.ravel(), Y.ravel(), Z.ravel()])

    def idx(i, j, k):
        return (i * (ny + 1) + j) * (ny + 1) + k

    # Kuhn subdivision: six tets per cube sharing the main diagonal
    perms = [(0, 1, 2), (0, 2, 1), (1, 0, 2), (1, 2, 0), (2, 0, 1), (2, 1, 0)]
    tets = []
    for i in range(nx):
        for j in range(ny):
            for k in range(ny):
                base = np.array([i, j, k])
                for p in perms:
                    cur = base.copy()
                    tet = [idx(*cur)]
                    for ax in p:
                        cur = cur.copy()
                        cur[ax] += 1
                        tet.append(idx(*cur))
                    tets.append(tet)
    return pts, np.array(tets, dtype=np.int64)


def _bifurcation_frame(params):
    R, th = params.inlet_radius, params.branch_angle
    Lb, Lo = params.branch_length, params.outlet_length
    d1 = np.array([-math.cos(th), math.sin(th)])        # junction -> inlet 1
    n_out = np.array([math.sin(th), math.cos(th)])      # outer side of branch 1
    crotch = np.array([-R / math.sin(th), 0.0])
    notch = np.array([R * math.tan(th / 2), R])
    inlet_c = Lb * d1
    # inner wall of branch 1 must stay above the axis all the way to the inlet
    if Lb * math.sin(th) - R * math.cos(th) <= 0 or Lb <= R / math.tan(th) + 1e-9:
        raise GeometryError(
            "branch overlap: branch_length too short for the branch angle "
            f"(need branch_length > R / tan(angle) = {R / math.tan(th):.3f} mm)")
    if Lo <= notch[0]:
        raise GeometryError("outlet_length shorter than the junction region")
    return R, d1, n_out, crotch, notch, inlet_c, Lo


def generate_bifurcation(params):
    """Y-shaped bifurcation: two inlet branches at +/- ``branch_angle`` joining an
    outlet trunk along the positive x axis.  The junction is at the origin.
    """
    params.validate()
    if params.kind == "bifurcation_3d":
        return _bifurcation_3d(params)
    if params.kind != "bifurcation_2d":
        raise GeometryError(f"generate_bifurcation needs a bifurcation kind, got {params.kind!r}")
    R, d1, n_out, crotch, notch, inlet_c, Lo = _bifurcation_frame(params)
    h = params.target_h
    inlet_up = inlet_c + R * n_out
    inlet_lo = inlet_c - R * n_out

    # quadrilateral P1: crotch, outlet axis end, outlet top, notch
    # quadrilateral P2: crotch, notch, inlet top, inlet bottom
    n_short = max(2, int(math.ceil(2 * R / h)))
    len_trunk = 0.5 * ((Lo - crotch[0]) + (Lo - notch[0]))
    n_trunk = max(1, int(math.ceil(len_trunk / h)))
    len_branch = 0.5 * (np.linalg.norm(inlet_up - notch) + np.linalg.norm(inlet_lo - crotch))
    n_branch = max(1, int(math.ceil(len_branch / h)))

    # P1 parameterized with u along the trunk (from the crotch/notch edge to the
    # outlet) and v across (axis -> top wall)
    p1 = _transfinite([crotch, (Lo, 0.0), (Lo, R), notch], n_trunk, n_short)
    t1 = _grid_triangles(n_trunk, n_short)
    # P2: u along the branch from the crotch/notch edge to the inlet, v across
    # (inner wall -> outer wall)
    p2 = _transfinite([crotch, inlet_lo, inlet_up, notch], n_branch, n_short)
    t2 = _grid_triangles(n_branch, n_short, offset=len(p1))
    upper = np.vstack([p1, p2])
    ucells = np.vstack([t1, t2])
    lower = upper * np.array([1.0, -1.0])
    lcells = ucells + len(upper)
    pts = np.vstack([upper, lower])
    cells = np.vstack([ucells, lcells])
    tol = 1e-9 * max(params.branch_length, Lo)
    pts, cells = _merge_points(pts, cells, tol)

    inlet2_c = inlet_c * np.array([1.0, -1.0])

    def classify(m):
        if abs(m[0] - Lo) < tol:
            return OUTLET
        if abs(np.dot(m - inlet_c, d1)) < tol:
            return INLET_1
        d2 = d1 * np.array([1.0, -1.0])
        if abs(np.dot(m - inlet2_c, d2)) < tol:
            return INLET_2
        return WALL

    inlets = {INLET_1: (inlet_c.copy(), d1.copy(), float(R)),
              INLET_2: (inlet2_c.copy(), d1 * np.array([1.0, -1.0]), float(R))}
    mesh = _finalize(pts, cells, classify, inlets)
    cl = _bifurcation_centerline(inlet_c, inlet2_c, np.zeros(2), np.array([Lo, 0.0]), R, h)
    return mesh, cl


def _bifurcation_centerline(in1, in2, junction, outlet, R, h):
    step = h / 2
    trunk = _polyline(junction, outlet, step)
    b1 = np.vstack([_polyline(in1, junction, step)[:-1], trunk])
    b2 = np.vstack([_polyline(in2, junction, step)[:-1], trunk])
    return Centerline([_branch(b1, R), _branch(b2, R)])


def _bifurcation_3d(params):
    """Slab bifurcation: the planar bifurcation extruded over ``[-R, R]`` in z.

    Each extruded triangle is split into three tetrahedra using the global
    vertex order, which keeps neighbouring prisms conforming.  The cross
    sections are square, so wall points lie between ``R`` and ``sqrt(2) R``
    from the centerline.
    """
    flat = GeometryParams(kind="bifurcation_2d", inlet_radius=params.inlet_radius,
                          branch_angle=params.branch_angle,
                          branch_length=params.branch_length,
                          outlet_length=params.outlet_length, target_h=params.target_h)
    m2, _ = generate_bifurcation(flat)
    R, h = params.inlet_radius, params.target_h
    nz = max(1, int(math.ceil(2 * R / h)))
    P, cells = _extrude(m2.vertices, m2.cells, np.linspace(-R, R, nz + 1))
    th = params.branch_angle
    Lb, Lo = params.branch_length, params.outlet_length
    d1 = np.array([-math.cos(th), math.sin(th), 0.0])
    d2 = np.array([-math.cos(th), -math.sin(th), 0.0])
    in1, in2 = Lb * d1, Lb * d2
    tol = 1e-9 * max(Lb, Lo)

    def classify(m):
        if abs(m[0] - Lo) < tol:
            return OUTLET
        if abs(np.dot(m - in1, d1)) < tol:
            return INLET_1
        if abs(np.dot(m - in2, d2)) < tol:
            return INLET_2
        return WALL

    inlets = {INLET_1: (in1, d1.copy(), float(R)), INLET_2: (in2, d2.copy(), float(R))}
    mesh = _finalize(P, cells, classify, inlets)
    cl = _bifurcation_centerline(in1, in2, np.zeros(3), np.array([Lo, 0.0, 0.0]), R, h)
    return mesh, cl


def _extrude(vertices, tris, zs):
    nv = len(vertices)
    P = np.vstack([np.column_stack([vertices, np.full(nv, z)]) for z in zs])
    tets = []
    for k in range(len(zs) - 1):
        for tri in tris:
            a, b, c = sorted(int(i) for i in tri)
            lo = [a + k * nv, b + k * nv, c + k * nv]
            up = [a + (k + 1) * nv, b + (k + 1) * nv, c + (k + 1) * nv]
            # staircase split driven by sorted vertex ids (conforming)
            tets.append([lo[0], lo[1], lo[2], up[2]])
            tets.append([lo[0], lo[1], up[1], up[2]])
            tets.append([lo[0], up[0], up[1], up[2]])
    return P, np.array(tets, dtype=np.int64)


def generate(params):
    """Dispatch on ``params.kind``."""
    if params.kind in ("channel", "channel_3d"):
        return generate_channel(params)
    return generate_bifurcation(params)


# --------------------------------------------------------------------------
# text format

def _fmt(x):
    return float(x).hex()


def _meta_lines(meta):
    return [f"# {k}={v}" for k, v in (meta or {}).items()]


def save_mesh(mesh, path, meta=None):
    """Write ``mesh`` in the versioned OCPMESH1 text format.

    Floats are written as exact hexadecimal literals so a round trip is
    bit-identical.  ``meta`` entries follow the ``end`` line as ``# key=value``
    comments, which the reader ignores.
    """
    lines = [f"{MESH_MAGIC}", f"dim {mesh.dim}"]
    lines.append(f"vertices {mesh.num_vertices}")
    lines += [" ".join(_fmt(c) for c in v) for v in mesh.vertices]
    lines.append(f"cells {mesh.num_cells}")
    lines += [" ".join(str(int(i)) for i in c) for c in mesh.cells]
    lines.append(f"facets {len(mesh.facets)}")
    lines += [" ".join(str(int(i)) for i in f) + " " + TAG_NAMES[int(t)]
              for f, t in zip(mesh.facets, mesh.facet_tags)]
    lines.append(f"inlets {len(mesh.inlets)}")
    for tag in sorted(mesh.inlets):
        c, n, r = mesh.inlets[tag]
        lines.append(" ".join([TAG_NAMES[tag]] + [_fmt(x) for x in c] + [_fmt(x) for x in n] + [_fmt(r)]))
    lines.append("end")
    lines += _meta_lines(meta)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_mesh(path):
    """Read a mesh written by :func:`save_mesh`.

    Raises
    ------
    GeometryError
        On a wrong header, a truncated file or any malformed line; the message
        carries the 1-based line number.
    """
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    pos = 0

    def take():
        nonlocal pos
        if pos >= len(lines):
            raise GeometryError(f"line {pos + 1}: unexpected end of file")
        pos += 1
        return lines[pos - 1]

    def section(name):
        line = take()
        parts = line.split()
        if len(parts) != 2 or parts[0] != name:
            raise GeometryError(f"line {pos}: expected '{name} <count>', got {line!r}")
        try:
            return int(parts[1])
        except ValueError:
            raise GeometryError(f"line {pos}: bad count in {line!r}") from None

    header = take().strip()
    if header != MESH_MAGIC:
        raise GeometryError(f"line 1: unsupported mesh header {header!r} (expected {MESH_MAGIC})")
    dim = section("dim")
    if dim not in (2, 3):
        raise GeometryError(f"line {pos}: dim must be 2 or 3")
    try:
        nv = section("vertices")
        V = np.empty((nv, dim))
        for i in range(nv):
            parts = take().split()
            if len(parts) != dim:
                raise GeometryError(f"line {pos}: expected {dim} coordinates")
            V[i] = [float.fromhex(p) for p in parts]
        nc = section("cells")
        C = np.empty((nc, dim + 1), dtype=np.int64)
        for i in range(nc):
            parts = take().split()
            if len(parts) != dim + 1:
                raise GeometryError(f"line {pos}: expected {dim + 1} vertex indices")
            C[i] = [int(p) for p in parts]
        nf = section("facets")
        F = np.empty((nf, dim), dtype=np.int64)
        T = np.empty(nf, dtype=np.int64)
        for i in range(nf):
            parts = take().split()
            if len(parts) != dim + 1 or parts[-1] not in TAG_IDS:
                raise GeometryError(f"line {pos}: expected {dim} indices and a tag")
            F[i] = [int(p) for p in parts[:-1]]
            T[i] = TAG_IDS[parts[-1]]
        ni = section("inlets")
        inlets = {}
        for _ in range(ni):
            parts = take().split()
            if len(parts) != 2 * dim + 2 or parts[0] not in TAG_IDS:
                raise GeometryError(f"line {pos}: malformed inlet record")
            vals = [float.fromhex(p) for p in parts[1:]]
            inlets[TAG_IDS[parts[0]]] = (np.array(vals[:dim]), np.array(vals[dim:2 * dim]), vals[-1])
    except ValueError as exc:
        raise GeometryError(f"line {pos}: {exc}") from None
    if take().strip() != "end":
        raise GeometryError(f"line {pos}: expected 'end'")
    if C.size and (C.min() < 0 or C.max() >= nv):
        raise GeometryError("cell index out of range")
    return Mesh(vertices=V, cells=C, facets=F, facet_tags=T, inlets=inlets)


def save_centerline(cl, path, meta=None):
    """Plain-text centerline: one ``branch <n>`` block per branch with rows
    ``s c_x c_y [c_z] t_x t_y [t_z] R`` in hexadecimal floats."""
    lines = ["OCPCL1", f"branches {len(cl.branches)}"]
    for b in cl.branches:
        lines.append(f"branch {len(b['s'])}")
        for i in range(len(b["s"])):
            row = [b["s"][i], *b["c"][i], *b["t"][i], b["R"][i]]
            lines.append(" ".join(_fmt(x) for x in row))
    lines += _meta_lines(meta)
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")


def load_centerline(path):
    with open(path, encoding="utf-8") as fh:
        lines = fh.read().splitlines()
    if not lines or lines[0] != "OCPCL1":
        raise GeometryError("line 1: unsupported centerline header")
    nb = int(lines[1].split()[1])
    pos = 2
    branches = []
    for _ in range(nb):
        n = int(lines[pos].split()[1])
        rows = np.array([[float.fromhex(x) for x in lines[pos + 1 + i].split()] for i in range(n)])
        dim = (rows.shape[1] - 2) // 2
        branches.append({"s": rows[:, 0], "c": rows[:, 1:1 + dim],
                         "t": rows[:, 1 + dim:1 + 2 * dim], "R": rows[:, -1]})
        pos += n + 1
    return Centerline(branches)

"""Taylor-Hood (P2-P1) finite elements on simplicial meshes.

Velocity is vector-valued continuous P2, pressure continuous P1 and the
control lives on the P2 trace space of the outlet boundary.  Node numbering
is deterministic: mesh vertices first, then edge midpoints ordered by their
sorted vertex pair.  A vector dof is ``node * dim + component``.

All assembly is vectorized over cells; sparse matrices are CSR.
"""

from dataclasses import dataclass, field
import math

import numpy as np
import scipy.sparse as sp
from scipy.special import roots_jacobi

from .geometry import INLET_TAGS, OUTLET, WALL

# local edges of the reference simplex, in the order of the local P2 nodes
LOCAL_EDGES = {
    1: [(0, 1)],
    2: [(0, 1), (1, 2), (0, 2)],
    3: [(0, 1), (1, 2), (0, 2), (0, 3), (1, 3), (2, 3)],
}


class AssemblyError(ValueError):
    """Invalid input to a space constructor or an assembly routine."""


# --------------------------------------------------------------------------
# quadrature

def simplex_quadrature(dim, degree):
    """Collapsed Gauss-Jacobi rule on the reference simplex.

    Exact for polynomials of total degree ``degree``.  Returns points of shape
    ``(nq, dim)`` on ``{x >= 0, sum(x) <= 1}`` and weights summing to
    ``1 / dim!``.
    """
    n = degree // 2 + 1
    if dim == 1:
        x, w = roots_jacobi(n, 0.0, 0.0)
        return ((x + 1) / 2)[:, None], w / 2
    if dim == 2:
        a, wa = roots_jacobi(n, 0.0, 0.0)
        b, wb = roots_jacobi(n, 1.0, 0.0)
        A, B = np.meshgrid(a, b, indexing="ij")
        W = np.outer(wa, wb) / 8
        x = (1 + A) * (1 - B) / 4
        y = (1 + B) / 2
        return np.column_stack([x.ravel(), y.ravel()]), W.ravel()
    if dim == 3:
        a, wa = roots_jacobi(n, 0.0, 0.0)
        b, wb = roots_jacobi(n, 1.0, 0.0)
        c, wc = roots_jacobi(n, 2.0, 0.0)
        A, B, C = np.meshgrid(a, b, c, indexing="ij")
        W = wa[:, None, None] * wb[None, :, None] * wc[None, None, :] / 64
        x = (1 + A) * (1 - B) * (1 - C) / 8
        y = (1 + B) * (1 - C) / 4
        z = (1 + C) / 2
        return np.column_stack([x.ravel(), y.ravel(), z.ravel()]), W.ravel()
    raise AssemblyError(f"unsupported simplex dimension {dim}")


# --------------------------------------------------------------------------
# reference bases

def _barycentric(X):
    return np.column_stack([1.0 - X.sum(axis=1), X])


def p1_basis(X):
    """P1 values ``(nq, d+1)`` and reference gradients ``(nq, d+1, d)``."""
    X = np.atleast_2d(X)
    d = X.shape[1]
    L = _barycentric(X)
    G = np.zeros((d + 1, d))
    G[0] = -1.0
    G[1:] = np.eye(d)
    return L, np.broadcast_to(G, (X.shape[0], d + 1, d)).copy()


def p2_basis(X):
    """P2 values ``(nq, nloc)`` and reference gradients ``(nq, nloc, d)``.

    Local nodes: vertices, then edge midpoints in ``LOCAL_EDGES`` order.
    """
    X = np.atleast_2d(X)
    d = X.shape[1]
    L, GL = p1_basis(X)
    edges = LOCAL_EDGES[d]
    nq = X.shape[0]
    nloc = d + 1 + len(edges)
    V = np.empty((nq, nloc))
    G = np.empty((nq, nloc, d))
    for i in range(d + 1):
        V[:, i] = L[:, i] * (2 * L[:, i] - 1)
        G[:, i] = (4 * L[:, i] - 1)[:, None] * GL[:, i]
    for k, (i, j) in enumerate(edges):
        V[:, d + 1 + k] = 4 * L[:, i] * L[:, j]
        G[:, d + 1 + k] = 4 * (L[:, j][:, None] * GL[:, i] + L[:, i][:, None] * GL[:, j])
    return V, G


# --------------------------------------------------------------------------
# sparse pattern helper

class _Pattern:
    """Fixed sparsity pattern for repeated assembly from per-cell blocks."""

    def __init__(self, rows, cols, shape):
        rows = np.asarray(rows, dtype=np.int64).ravel()
        cols = np.asarray(cols, dtype=np.int64).ravel()
        key = rows * shape[1] + cols
        uniq, self.slot = np.unique(key, return_inverse=True)
        self.slot = self.slot.ravel()
        self.shape = shape
        r = uniq // shape[1]
        self.indices = (uniq % shape[1]).astype(np.int64)
        self.indptr = np.zeros(shape[0] + 1, dtype=np.int64)
        np.add.at(self.indptr, r + 1, 1)
        self.indptr = np.cumsum(self.indptr)
        self.nnz = len(uniq)

    def build(self, values):
        data = np.bincount(self.slot, weights=np.asarray(values).ravel(), minlength=self.nnz)
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=self.shape)


# --------------------------------------------------------------------------
# function space

@dataclass(eq=False)
class FunctionSpace:
    """P2 vector velocity, P1 pressure and P2 outlet-trace control spaces."""

    mesh: object
    dim: int
    node_coords: np.ndarray          # (n_nodes, dim)
    cell_nodes: np.ndarray           # (n_cells, nloc) P2 node indices
    edges: np.ndarray                # (n_edges, 2) sorted vertex pairs
    outlet_nodes: np.ndarray         # sorted P2 nodes on OUTLET facets
    facet_nodes: np.ndarray          # (n_facets, nloc_facet) P2 nodes per boundary facet
    facet_cells: np.ndarray          # owning cell of each boundary facet
    dirichlet_maps: dict = field(default_factory=dict)  # tag -> velocity dofs
    # quadrature data filled by build_spaces
    qx: np.ndarray = None
    qw: np.ndarray = None
    phi: np.ndarray = None           # (nq, nloc) P2 values
    dphi_ref: np.ndarray = None      # (nq, nloc, d)
    psi: np.ndarray = None           # (nq, d+1) P1 values
    det: np.ndarray = None           # (n_cells,) |det J|
    invJ: np.ndarray = None          # (n_cells, d, d)
    _patterns: dict = field(default_factory=dict, repr=False)
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def n_nodes(self):
        return self.node_coords.shape[0]

    @property
    def n_v(self):
        return self.n_nodes * self.dim

    @property
    def n_p(self):
        return self.mesh.num_vertices

    @property
    def n_u(self):
        return len(self.outlet_nodes) * self.dim

    @property
    def n_h(self):
        return 2 * (self.n_v + self.n_p) + self.n_u

    @property
    def nloc(self):
        return self.cell_nodes.shape[1]

    @property
    def control_dofs(self):
        """Velocity dof index of each control dof (trace map)."""
        return (self.outlet_nodes[:, None] * self.dim + np.arange(self.dim)).ravel()

    @property
    def dirichlet_dofs(self):
        if not self.dirichlet_maps:
            return np.zeros(0, dtype=np.int64)
        return np.unique(np.concatenate(list(self.dirichlet_maps.values())))

    @property
    def free_dofs(self):
        mask = np.ones(self.n_v, dtype=bool)
        mask[self.dirichlet_dofs] = False
        return np.flatnonzero(mask)

    def vector_dofs(self, cells=None):
        """``(n_cells, nloc * dim)`` velocity dofs, ordered (node, component)."""
        cn = self.cell_nodes if cells is None else self.cell_nodes[cells]
        return (cn[:, :, None] * self.dim + np.arange(self.dim)).reshape(len(cn), -1)

    def physical_gradients(self):
        """``(n_cells, nq, nloc, d)`` P2 gradients in physical coordinates
        (cached, read-only)."""
        if "grad" not in self._cache:
            g = np.einsum("qad,cde->cqae", self.dphi_ref, self.invJ)
            g.flags.writeable = False
            self._cache["grad"] = g
        return self._cache["grad"]

    def weighted_phi(self):
        """``(n_cells, nloc, nq)`` products ``w_q |det J| phi_a(x_q)`` (cached)."""
        if "wphi" not in self._cache:
            a = np.ascontiguousarray(np.einsum("cq,qa->caq", self.weights(), self.phi))
            a.flags.writeable = False
            self._cache["wphi"] = a
        return self._cache["wphi"]

    def quadrature_points(self):
        """``(n_cells, nq, d)`` physical quadrature points."""
        V = self.mesh.vertices[self.mesh.cells]
        return V[:, :1, :] + np.einsum("qd,cde->cqe", self.qx, V[:, 1:, :] - V[:, :1, :])

    def weights(self):
        """``(n_cells, nq)`` physical quadrature weights."""
        return self.det[:, None] * self.qw[None, :]

    def pattern(self, key, rows, cols, shape):
        if key not in self._patterns:
            self._patterns[key] = _Pattern(rows, cols, shape)
        return self._patterns[key]


def _edge_index(edges, nv, pairs):
    keys = edges[:, 0] * nv + edges[:, 1]
    p = np.sort(pairs, axis=-1)
    q = p[..., 0] * nv + p[..., 1]
    idx = np.searchsorted(keys, q)
    return idx


def build_spaces(mesh, quad_degree=5):
    """Build the Taylor-Hood spaces on ``mesh``.

    Raises
    ------
    AssemblyError
        If the mesh has no OUTLET facets (empty control space).
    """
    d = mesh.dim
    nv = mesh.num_vertices
    cells = mesh.cells
    loc = LOCAL_EDGES[d]
    pairs = np.stack([cells[:, [i, j]] for i, j in loc], axis=1)  # (nc, ne, 2)
    sp_pairs = np.sort(pairs.reshape(-1, 2), axis=1)
    edges = np.unique(sp_pairs, axis=0)
    eidx = _edge_index(edges, nv, pairs)
    cell_nodes = np.hstack([cells, nv + eidx]).astype(np.int64)
    node_coords = np.vstack([mesh.vertices, mesh.vertices[edges].mean(axis=1)])

    floc = LOCAL_EDGES[d - 1]
    fpairs = np.stack([mesh.facets[:, [i, j]] for i, j in floc], axis=1)
    facet_nodes = np.hstack([mesh.facets, nv + _edge_index(edges, nv, fpairs)]).astype(np.int64)

    out = mesh.facet_tags == OUTLET
    if not np.any(out):
        raise AssemblyError("mesh has no OUTLET facets; the control space would be empty")
    outlet_nodes = np.unique(facet_nodes[out])

    dmaps = {}
    for tag in (*INLET_TAGS, WALL):
        sel = mesh.facet_tags == tag
        if np.any(sel):
            nodes = np.unique(facet_nodes[sel])
            dmaps[tag] = (nodes[:, None] * d + np.arange(d)).ravel()

    # owning cell of each boundary facet
    fkey = np.sort(mesh.facets, axis=1)
    k = d + 1
    cf = np.concatenate([np.sort(cells[:, [j for j in range(k) if j != i]], axis=1) for i in range(k)])
    owner = np.tile(np.arange(len(cells)), k)
    base = np.int64(nv)
    def encode(a):
        code = np.zeros(len(a), dtype=np.int64)
        for c in range(a.shape[1]):
            code = code * base + a[:, c]
        return code
    ccode = encode(cf)
    order = np.argsort(ccode, kind="stable")
    pos = np.searchsorted(ccode[order], encode(fkey))
    facet_cells = owner[order[pos]]

    V = mesh.vertices[cells]
    J = (V[:, 1:, :] - V[:, :1, :]).transpose(0, 2, 1)
    det = np.linalg.det(J)
    if np.any(det <= 0):
        raise AssemblyError("mesh has degenerate or negatively oriented cells")
    qx, qw = simplex_quadrature(d, quad_degree)
    phi, dphi = p2_basis(qx)
    psi, _ = p1_basis(qx)
    return FunctionSpace(mesh=mesh, dim=d, node_coords=node_coords, cell_nodes=cell_nodes,
                         edges=edges, outlet_nodes=outlet_nodes, facet_nodes=facet_nodes,
                         facet_cells=facet_cells, dirichlet_maps=dmaps, qx=qx, qw=qw,
                         phi=phi, dphi_ref=dphi, psi=psi, det=det, invJ=np.linalg.inv(J))


# --------------------------------------------------------------------------
# operators

@dataclass(eq=False)
class OCPOperators:
    """Parameter-independent matrices of the optimality system.

    ``M_d`` equals ``M`` (observation over the whole domain) but is kept as a
    separate operator.  ``C = -M_Gamma.T``.  ``K_scalar`` is the scalar P2
    stiffness and ``Mp`` the P1 pressure mass, used as inner products.
    """

    space: FunctionSpace
    nu: float
    M: sp.csr_matrix
    M_d: sp.csr_matrix
    A: sp.csr_matrix
    B: sp.csr_matrix
    C: sp.csr_matrix
    R_reg: sp.csr_matrix
    M_Gamma: sp.csr_matrix
    F: np.ndarray
    G: np.ndarray
    H: np.ndarray
    Mp: sp.csr_matrix
    stiffness: sp.csr_matrix          # vector Laplacian without nu

    @property
    def velocity_inner(self):
        """H1 inner product on velocities: ``M + stiffness``."""
        return (self.M + self.stiffness).tocsr()


def _scalar_cell_matrix(space, kind):
    w = space.weights()
    if kind == "mass":
        return np.einsum("cq,qa,qb->cab", w, space.phi, space.phi)
    if kind == "stiff":
        G = space.physical_gradients()
        return np.einsum("cq,cqad,cqbd->cab", w, G, G)
    raise ValueError(kind)


def _scalar_assemble(space, local):
    cn = space.cell_nodes
    n = space.n_nodes
    rows = np.repeat(cn[:, :, None], cn.shape[1], axis=2)
    cols = np.repeat(cn[:, None, :], cn.shape[1], axis=1)
    pat = space.pattern("p2p2", rows, cols, (n, n))
    return pat.build(local)


def _vectorize(S, dim):
    return sp.kron(S, sp.identity(dim, format="csr"), format="csr")


def _outlet_mass(space):
    """Scalar P2 boundary mass on OUTLET facets, over all nodes."""
    mesh = space.mesh
    d = space.dim
    sel = mesh.facet_tags == OUTLET
    fn = space.facet_nodes[sel]
    meas = mesh.facet_measures(OUTLET) * math.factorial(d - 1)
    qx, qw = simplex_quadrature(d - 1, 4)
    phi, _ = p2_basis(qx)
    loc = meas[:, None, None] * np.einsum("q,qa,qb->ab", qw, phi, phi)[None]
    rows = np.repeat(fn[:, :, None], fn.shape[1], axis=2)
    cols = np.repeat(fn[:, None, :], fn.shape[1], axis=1)
    n = space.n_nodes
    return sp.csr_matrix((loc.ravel(), (rows.ravel(), cols.ravel())), shape=(n, n))


def assemble_all(space, nu):
    """Assemble every parameter-independent operator.

    Parameters
    ----------
    space : FunctionSpace
    nu : float
        Kinematic viscosity (mm^2/s), must be positive.
    """
    if not nu > 0:
        raise AssemblyError(f"viscosity must be positive, got {nu}")
    d = space.dim
    Ms = _scalar_assemble(space, _scalar_cell_matrix(space, "mass"))
    Ks = _scalar_assemble(space, _scalar_cell_matrix(space, "stiff"))
    M = _vectorize(Ms, d)
    K = _vectorize(Ks, d)
    A = (nu * K).tocsr()

    # pressure-divergence coupling  B[k, (j, b)] = -int psi_k d_b phi_j
    w = space.weights()
    G = space.physical_gradients()
    loc = -np.einsum("cq,qk,cqjb->ckjb", w, space.psi, G).reshape(len(w), d + 1, -1)
    vd = space.vector_dofs()
    pc = space.mesh.cells
    rows = np.repeat(pc[:, :, None], vd.shape[1], axis=2)
    cols = np.repeat(vd[:, None, :], d + 1, axis=1)
    B = sp.csr_matrix((loc.ravel(), (rows.ravel(), cols.ravel())), shape=(space.n_p, space.n_v))

    Mp_loc = np.einsum("cq,qa,qb->cab", w, space.psi, space.psi)
    rows = np.repeat(pc[:, :, None], d + 1, axis=2)
    cols = np.repeat(pc[:, None, :], d + 1, axis=1)
    Mp = sp.csr_matrix((Mp_loc.ravel(), (rows.ravel(), cols.ravel())), shape=(space.n_p, space.n_p))

    Mb = _outlet_mass(space)
    on = space.outlet_nodes
    Mg_scalar = Mb[on, :]
    M_Gamma = _vectorize(Mg_scalar, d)
    R_reg = _vectorize(Mb[on][:, on], d)
    C = (-M_Gamma.T).tocsr()
    return OCPOperators(space=space, nu=float(nu), M=M, M_d=M.copy(), A=A, B=B, C=C,
                        R_reg=R_reg, M_Gamma=M_Gamma.tocsr(), F=np.zeros(space.n_v),
                        G=np.zeros(space.n_v), H=np.zeros(space.n_u), Mp=Mp, stiffness=K)


# --------------------------------------------------------------------------
# evaluation of finite-element fields at quadrature points

def field_at_quadrature(space, coeffs):
    """Values ``(nc, nq, dim)`` and gradients ``(nc, nq, dim, d)`` of a
    velocity field, ``grad[..., a, g] = d_g v_a``."""
    coeffs = np.asarray(coeffs, dtype=float)
    if coeffs.shape[0] != space.n_v:
        raise AssemblyError(f"expected {space.n_v} velocity coefficients, got {coeffs.shape[0]}")
    d = space.dim
    nodal = coeffs.reshape(space.n_nodes, d)[space.cell_nodes]  # (nc, nloc, d)
    val = np.einsum("qa,cai->cqi", space.phi, nodal)
    G = space.physical_gradients()
    nc, nq, nl, _ = G.shape
    # grad[c, q, i, g] = sum_a nodal[c, a, i] G[c, q, a, g]
    grad = (nodal.transpose(0, 2, 1)[:, None] @ G).reshape(nc, nq, d, d)
    return val, grad


def basis_at_quadrature(space, Z, cells=None):
    """Values ``(nq_tot, n, dim)`` and gradients ``(nq_tot, n, dim, d)`` of the
    columns of ``Z``, together with the flat weights ``(nq_tot,)``."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    d = space.dim
    cidx = np.arange(space.mesh.num_cells) if cells is None else np.asarray(cells)
    n = Z.shape[1]
    nodal = Z.reshape(space.n_nodes, d, n)[space.cell_nodes[cidx]]  # (nc, nloc, d, n)
    val = np.einsum("qa,cain->cqni", space.phi, nodal)
    G = np.einsum("qad,cde->cqae", space.dphi_ref, space.invJ[cidx])
    grad = np.einsum("cqag,cain->cqnig", G, nodal)
    w = space.det[cidx][:, None] * space.qw[None, :]
    nq = len(space.qw)
    return (val.reshape(len(cidx) * nq, n, d), grad.reshape(len(cidx) * nq, n, d, d),
            w.ravel())


# --------------------------------------------------------------------------
# convection

def _vector_block_pattern(space):
    vd = space.vector_dofs()
    m = vd.shape[1]
    rows = np.repeat(vd[:, :, None], m, axis=2)
    cols = np.repeat(vd[:, None, :], m, axis=1)
    return space.pattern("vv", rows, cols, (space.n_v, space.n_v))


def assemble_convection(space, vbar):
    """Linearized convection matrices for the frozen field ``vbar``.

    Returns
    -------
    E : csr_matrix
        ``E[i, j] = e(vbar, phi_j, phi_i)`` (advection by ``vbar``).
    K : csr_matrix
        ``K[i, j] = e(phi_j, vbar, phi_i)`` (advected by the basis).
    """
    d = space.dim
    val, grad = field_at_quadrature(space, vbar)
    G = space.physical_gradients()
    wphi = space.weighted_phi()                       # (c, a, q)
    nc, nl = wphi.shape[0], wphi.shape[1]
    adv = np.einsum("cqg,cqbg->cqb", val, G)          # vbar . grad phi_b
    Es = wphi @ adv                                   # (c, a, b)
    E = np.zeros((nc, nl, d, nl, d))
    for a in range(d):
        E[:, :, a, :, a] = Es
    # K[c, a, i, b, g] = sum_q w phi_a phi_b d_g vbar_i
    pb = wphi[:, :, None, :] * space.phi.T[None, None, :, :]   # (c, a, b, q)
    K = (pb.reshape(nc, nl * nl, -1) @ grad.reshape(nc, grad.shape[1], d * d))
    K = K.reshape(nc, nl, nl, d, d).transpose(0, 1, 3, 2, 4)
    pat = _vector_block_pattern(space)
    return pat.build(E.reshape(nc, -1)), pat.build(K.reshape(nc, -1))


def assemble_convection_hessian(space, w_adj):
    """Second derivative of ``v -> e(v, v, w_adj)``.

    ``H[(i,a),(m,g)] = int phi_i d_a phi_m W_g + phi_m d_g phi_i W_a``; the
    matrix is symmetric.
    """
    d = space.dim
    val, _ = field_at_quadrature(space, w_adj)
    G = space.physical_gradients()                   # (c, q, m, a)
    wphi = space.weighted_phi()
    nc, nl, nq = wphi.shape
    X = G[:, :, :, :, None] * val[:, :, None, None, :]   # (c, q, m, a, g)
    T1 = (wphi @ X.reshape(nc, nq, -1)).reshape(nc, nl, nl, d, d)  # (c, i, m, a, g)
    T1 = T1.transpose(0, 1, 3, 2, 4)                 # (c, i, a, m, g)
    H = T1 + T1.transpose(0, 3, 4, 1, 2)
    return _vector_block_pattern(space).build(H.reshape(nc, -1))


def convection_residual(space, v):
    """Vector ``e(v, v, phi_i)`` for all test functions."""
    val, grad = field_at_quadrature(space, v)
    adv = np.einsum("cqig,cqg->cqi", grad, val)
    loc = space.weighted_phi() @ adv                 # (c, a, i)
    out = np.zeros(space.n_v)
    np.add.at(out, space.vector_dofs().ravel(), loc.reshape(-1))
    return out


def convection_adjoint_residual(space, v, w):
    """Vector ``(E(v) + K(v))' w``: entry ``(j, g)`` equals
    ``int (v . grad phi_j) w_g + phi_j (d_g v) . w``."""
    val, grad = field_at_quadrature(space, v)
    wv, _ = field_at_quadrature(space, w)
    G = space.physical_gradients()
    adv = np.einsum("cqg,cqbg->cqb", val, G)                       # (c, q, b)
    qw = space.weights()
    t1 = np.einsum("cq,cqb,cqg->cbg", qw, adv, wv)
    gw = np.einsum("cqig,cqi->cqg", grad, wv)                      # (d_g v) . w
    t2 = space.weighted_phi() @ gw
    out = np.zeros(space.n_v)
    np.add.at(out, space.vector_dofs().ravel(), (t1 + t2).reshape(-1))
    return out


# --------------------------------------------------------------------------
# loads, interpolation, Dirichlet data

def assemble_target_load(space, target):
    """``G_i = int v_d . phi_i`` for a callable ``target(X) -> (n, dim)``."""
    X = space.quadrature_points()
    nc, nq, d = X.shape
    vals = np.asarray(target(X.reshape(-1, d)), dtype=float).reshape(nc, nq, d)
    loc = np.einsum("cq,qa,cqi->cai", space.weights(), space.phi, vals)
    out = np.zeros(space.n_v)
    np.add.at(out, space.vector_dofs().ravel(), loc.reshape(-1))
    return out


def interpolate(space, func):
    """P2 nodal interpolation of ``func(X) -> (n, dim)`` on velocity nodes."""
    vals = np.asarray(func(space.node_coords), dtype=float)
    if vals.shape != (space.n_nodes, space.dim):
        raise AssemblyError(f"field function returned shape {vals.shape}, "
                            f"expected {(space.n_nodes, space.dim)}")
    return vals.ravel()


def interpolate_pressure(space, func):
    """P1 interpolation of a scalar ``func(X) -> (n,)`` at mesh vertices."""
    return np.asarray(func(space.mesh.vertices), dtype=float).ravel()


@dataclass
class DirichletData:
    """Boundary values per tag: ``tag -> f(X, t) -> (n, dim)``.

    Tags absent from ``values`` but constrained in the space (the wall) get
    zero.
    """

    values: dict = field(default_factory=dict)


def lift_dirichlet(space, data, t, tol=1e-12):
    """Lift vector with boundary values on constrained dofs, zero elsewhere.

    Returns
    -------
    lift : ndarray (n_v,)
    dofs : ndarray
        Constrained velocity dofs (sorted).

    Raises
    ------
    AssemblyError
        If two tags prescribe different values at a shared dof.
    """
    d = space.dim
    lift = np.zeros(space.n_v)
    seen = np.zeros(space.n_v, dtype=bool)
    for tag in sorted(space.dirichlet_maps):
        dofs = space.dirichlet_maps[tag]
        nodes = dofs[::d] // d
        f = data.values.get(tag)
        if f is None:
            vals = np.zeros((len(nodes), d))
        else:
            vals = np.asarray(f(space.node_coords[nodes], t), dtype=float).reshape(len(nodes), d)
        vals = vals.ravel()
        clash = seen[dofs] & (np.abs(lift[dofs] - vals) > tol * max(1.0, np.abs(vals).max(initial=0)))
        if np.any(clash):
            bad = int(dofs[np.flatnonzero(clash)[0]])
            raise AssemblyError(f"conflicting Dirichlet values at velocity dof {bad}")
        lift[dofs] = vals
        seen[dofs] = True
    return lift, space.dirichlet_dofs


def inf_sup_constant(space, ops):
    """Smallest generalized singular value of ``B`` on the free velocity dofs,
    measured in the H1 velocity and L2 pressure norms, modulo constants when
    the pressure is determined only up to a constant.  Dense; coarse meshes
    only."""
    import scipy.linalg as sla
    f = space.free_dofs
    Bf = ops.B[:, f].toarray()
    X = ops.velocity_inner[f][:, f].toarray()
    Mp = ops.Mp.toarray()
    S = Bf @ np.linalg.solve(X, Bf.T)
    lam = sla.eigh(0.5 * (S + S.T), Mp, eigvals_only=True)
    return float(np.sqrt(max(lam[0], 0.0)))

import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ocprom import fem
from ocprom import geometry as geo


@pytest.fixture(scope="module")
def space_ops():
    mesh, _ = geo.generate(geo.GeometryParams(target_h=0.8, branch_length=4.0,
                                              outlet_length=4.0))
    space = fem.build_spaces(mesh)
    return space, fem.assemble_all(space, 3.6)


@settings(max_examples=25, deadline=None)
@given(dim=st.integers(1, 3), deg=st.integers(0, 6), seed=st.integers(0, 1000))
def test_quadrature_exact_for_monomials(dim, deg, seed):
    g = np.random.default_rng(seed)
    e = g.multinomial(deg, np.ones(dim) / dim)
    x, w = fem.simplex_quadrature(dim, deg)
    num = float(w @ np.prod(x ** e, axis=1))
    exact = np.prod([math.factorial(k) for k in e]) / math.factorial(deg + dim)
    assert num == pytest.approx(exact, rel=1e-12)


def test_p2_basis_partition_of_unity_and_nodality():
    X = np.array([[0, 0], [1, 0], [0, 1], [0.5, 0], [0.5, 0.5], [0, 0.5]], dtype=float)
    phi, dphi = fem.p2_basis(X)
    assert np.allclose(phi, np.eye(6), atol=1e-14)
    pts = np.random.default_rng(1).dirichlet(np.ones(3), 10)[:, :2]
    phi, dphi = fem.p2_basis(pts)
    assert np.allclose(phi.sum(axis=1), 1.0)
    assert np.allclose(dphi.sum(axis=1), 0.0)


def test_mass_and_pressure_mass_give_area(space_ops):
    space, ops = space_ops
    area = space.mesh.measure()
    ex = np.zeros(space.n_v)
    ex[0::2] = 1.0
    assert ex @ ops.M @ ex == pytest.approx(area, rel=1e-12)
    one = np.ones(space.n_p)
    assert one @ ops.Mp @ one == pytest.approx(area, rel=1e-12)


def test_stiffness_of_linear_field(space_ops):
    space, ops = space_ops
    # v = (x, 0): |grad v|^2 = 1 so the stiffness form gives the area
    v = fem.interpolate(space, lambda X: np.column_stack([X[:, 0], 0 * X[:, 0]]))
    assert v @ ops.stiffness @ v == pytest.approx(space.mesh.measure(), rel=1e-10)
    assert np.allclose(ops.stiffness @ fem.interpolate(space, lambda X: np.ones_like(X)), 0,
                       atol=1e-12)


def test_divergence_of_quadratic_field(space_ops):
    space, ops = space_ops
    # div (x^2, -2xy) = 0 and B is exact for P2 fields
    v = fem.interpolate(space, lambda X: np.column_stack([X[:, 0] ** 2,
                                                          -2 * X[:, 0] * X[:, 1]]))
    assert np.linalg.norm(ops.B @ v) < 1e-11 * np.linalg.norm(abs(ops.B) @ np.abs(v))
    # div (x, y) = 2 tested with the constant pressure gives -2 |Omega|
    r = fem.interpolate(space, lambda X: X)
    assert np.ones(space.n_p) @ (ops.B @ r) == pytest.approx(-2 * space.mesh.measure(),
                                                             rel=1e-10)


def test_outlet_operators(space_ops):
    space, ops = space_ops
    ex = np.zeros(space.n_u)
    ex[0::2] = 1.0
    width = space.mesh.facet_measures(geo.OUTLET).sum()
    assert ex @ ops.R_reg @ ex == pytest.approx(width, rel=1e-12)
    assert (ops.C + ops.M_Gamma.T).nnz == 0 or abs(ops.C + ops.M_Gamma.T).max() == 0
    assert abs(ops.R_reg - ops.R_reg.T).max() < 1e-15


def test_convection_matrices_are_derivatives(space_ops, rng):
    space, _ = space_ops
    v = rng.standard_normal(space.n_v)
    dv = rng.standard_normal(space.n_v)
    w = rng.standard_normal(space.n_v)
    E, K = fem.assemble_convection(space, v)
    h = 1e-6
    fd = (fem.convection_residual(space, v + h * dv)
          - fem.convection_residual(space, v - h * dv)) / (2 * h)
    assert np.allclose((E + K) @ dv, fd, rtol=1e-7, atol=1e-7 * np.abs(fd).max())
    assert np.allclose(fem.convection_adjoint_residual(space, v, w), (E + K).T @ w)
    H = fem.assemble_convection_hessian(space, w)
    E2, K2 = fem.assemble_convection(space, v + h * dv)
    E1, K1 = fem.assemble_convection(space, v - h * dv)
    fdH = ((E2 + K2).T @ w - (E1 + K1).T @ w) / (2 * h)
    assert np.allclose(H @ dv, fdH, rtol=1e-6, atol=1e-7 * np.abs(fdH).max())
    assert abs(H - H.T).max() < 1e-12 * abs(H).max()


def test_interpolation_reproduces_quadratics(space_ops):
    space, _ = space_ops
    f = lambda X: np.column_stack([X[:, 0] ** 2 - X[:, 1], X[:, 0] * X[:, 1]])   # noqa: E731
    v = fem.interpolate(space, f)
    val, _ = fem.field_at_quadrature(space, v)
    X = space.quadrature_points().reshape(-1, 2)
    assert np.allclose(val.reshape(-1, 2), f(X), atol=1e-12)


def test_lift_conflict_raises(space_ops):
    space, _ = space_ops
    data = fem.DirichletData({geo.INLET_1: lambda X, t: np.ones_like(X)})
    with pytest.raises(fem.AssemblyError, match="conflicting"):
        fem.lift_dirichlet(space, data, 0.0)


def test_invalid_viscosity(space_ops):
    with pytest.raises(fem.AssemblyError):
        fem.assemble_all(space_ops[0], 0.0)


def test_discrete_inf_sup_is_positive():
    mesh, _ = geo.generate(geo.GeometryParams(kind="channel", target_h=1.0, outlet_length=3.0))
    space = fem.build_spaces(mesh)
    beta = fem.inf_sup_constant(space, fem.assemble_all(space, 1.0))
    assert 0.05 < beta < 1.0

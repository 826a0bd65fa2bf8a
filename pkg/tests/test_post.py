import numpy as np
import pytest

from ocprom import fem, fom, post
from ocprom import geometry as geo
from ocprom import scenarios as sc


@pytest.fixture(scope="module")
def channel():
    mesh, cl = geo.generate(geo.GeometryParams(kind="channel", target_h=0.5, outlet_length=6.0))
    return fem.build_spaces(mesh), cl


def _traj(space, times, v, u):
    n = len(times)
    z = np.zeros((space.n_p, n))
    return fom.Trajectory(times=np.asarray(times, float), v=v, p=z, u=u,
                          w=np.zeros_like(v), q=z.copy(), mu=sc.ParameterPoint((60,)))


def test_cost_of_constant_fields(channel_problem):
    prob = channel_problem
    space = prob.space
    times = np.linspace(0, 1, 5)
    v1 = fem.interpolate(space, lambda X: np.column_stack([np.ones(len(X)), np.zeros(len(X))]))
    u1 = np.zeros(space.n_u)
    u1[0::2] = 2.0
    tr = _traj(space, times, np.tile(v1[:, None], 5), np.tile(u1[:, None], 5))
    rep = post.cost_functional(prob, tr, target=lambda X: np.zeros_like(X), alpha=0.1)
    area, width = prob.mesh.measure(), 2.0
    assert rep.tracking == pytest.approx(0.5 * area, rel=1e-12)
    assert rep.control == pytest.approx(0.5 * 0.1 * 4.0 * width, rel=1e-12)
    assert rep.total == pytest.approx(rep.tracking + rep.control)


def test_tracking_vanishes_on_target(channel_problem):
    prob = channel_problem
    # the target is quadratic across the channel, so P2 interpolation is exact
    v = fem.interpolate(prob.space, prob.target)
    assert post.tracking_integrand(prob.space, v, prob.target) < 1e-20


def test_wss_of_poiseuille(channel):
    space, _ = channel
    U, nu = 7.2, 3.6
    v = fem.interpolate(space, lambda X: np.column_stack([U * (1 - X[:, 1] ** 2), 0 * X[:, 1]]))
    f = post.wss(space, v, nu)
    assert np.allclose(f.values, 2 * nu * U, rtol=1e-12)
    assert f.units == "mm^2/s^2"
    assert f.measures.sum() == pytest.approx(12.0)
    pa = post.wss(space, v, nu, density=1.06e-3)
    assert pa.units == "Pa" and np.allclose(pa.values, 1.06e-3 * f.values)
    assert post.mirror_asymmetry(f) < 1e-12


def test_wss_invariant_under_rigid_translation(channel):
    space, _ = channel
    v = fem.interpolate(space, lambda X: np.column_stack([X[:, 1] ** 2, X[:, 0] * X[:, 1]]))
    shift = fem.interpolate(space, lambda X: np.tile([3.0, -1.0], (len(X), 1)))
    a, b = post.wss(space, v, 2.0), post.wss(space, v + shift, 2.0)
    assert np.allclose(a.values, b.values, rtol=1e-12, atol=1e-12)


def test_mirror_asymmetry_closed_form(channel):
    space, _ = channel
    f = post.wss(space, np.zeros(space.n_v), 1.0)
    top = f.midpoints[:, 1] > 0
    f.values = np.where(top, 1.0, 2.0)
    assert post.mirror_asymmetry(f) == pytest.approx(np.sqrt(2.0 / 5.0), rel=1e-12)
    f.midpoints = f.midpoints + np.array([0.0, 0.3])
    with pytest.raises(post.PostError):
        post.mirror_asymmetry(f)


def test_wss_requires_wall(channel):
    space, _ = channel
    with pytest.raises(post.PostError):
        post.wss(space, np.zeros(space.n_v), 1.0, tag=99)


def test_error_norms(channel_problem, rng):
    prob = channel_problem
    space = prob.space
    times = np.linspace(0, 1, 4)
    v = rng.standard_normal((space.n_v, 4))
    u = rng.standard_normal((space.n_u, 4))
    ref = _traj(space, times, v, u)
    ref.p = rng.standard_normal(ref.p.shape)
    same = post.error_norms(prob.ops, ref, ref)
    assert all(e == 0 for e in same.relative.values())
    double = _traj(space, times, 2 * v, 2 * u)
    double.p = 2 * ref.p
    rep = post.error_norms(prob.ops, double, ref)
    assert rep.relative["v"] == pytest.approx(1.0)
    assert rep.relative["u"] == pytest.approx(1.0)
    assert rep.relative["p"] == pytest.approx(1.0)
    assert rep.relative["w"] == 0.0
    assert np.allclose(rep.per_time["v"], 1.0)
    with pytest.raises(post.PostError, match="stride"):
        post.error_norms(prob.ops, _traj(space, times[:3], v[:, :3], u[:, :3]), ref)


def test_csv_round_trip(tmp_path):
    p = tmp_path / "x.csv"
    post.write_csv(p, ["a", "b"], [(1, 0.1), (2, 1e-17)], {"config_hash": "abc", "seed": 5})
    meta, head, rows = post.read_csv(p)
    assert meta == {"config_hash": "abc", "seed": "5"}
    assert head == ["a", "b"]
    assert float(rows[1][1]) == 1e-17


def test_spectrum_rows():
    rows = post.spectrum_rows(np.array([4.0, 2.0, 2.0]))
    assert [r[0] for r in rows] == [1, 2, 3]
    assert rows[1][2] == 0.5
    assert rows[-1][3] == 1.0


def test_wss_rows_with_centerline(channel):
    space, cl = channel
    f = post.wss(space, np.zeros(space.n_v), 1.0)
    rows = post.wss_rows(f, cl)
    assert len(rows) == len(f.facets) and len(rows[0]) == 6

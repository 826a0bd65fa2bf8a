import math

import numpy as np
import pytest

from ocprom import geometry as geo


def test_channel_measure_and_tags():
    mesh, cl = geo.generate(geo.GeometryParams(kind="channel", target_h=0.5, outlet_length=6.0))
    assert mesh.measure() == pytest.approx(12.0, rel=1e-12)
    assert np.all(mesh.cell_volumes() > 0)
    assert mesh.facet_measures(geo.INLET_1).sum() == pytest.approx(2.0)
    assert mesh.facet_measures(geo.OUTLET).sum() == pytest.approx(2.0)
    assert mesh.facet_measures(geo.WALL).sum() == pytest.approx(12.0)


def test_boundary_facets_all_tagged_and_closed():
    mesh, _ = geo.generate(geo.GeometryParams(target_h=0.5))
    assert len(mesh.facets) == len(geo.boundary_facets(mesh.cells, 2))
    assert set(np.unique(mesh.facet_tags)) == {geo.WALL, geo.INLET_1, geo.INLET_2, geo.OUTLET}
    # every vertex of a closed boundary curve has exactly two boundary facets
    counts = np.bincount(mesh.facets.ravel(), minlength=mesh.num_vertices)
    assert set(np.unique(counts[counts > 0])) == {2}


def test_bifurcation_is_mirror_symmetric():
    mesh, _ = geo.generate(geo.GeometryParams(target_h=0.5))
    V = mesh.vertices
    refl = V * np.array([1.0, -1.0])
    d = np.min(np.linalg.norm(V[:, None] - refl[None], axis=2), axis=1)
    assert d.max() < 1e-10


def test_inlet_width_and_normals():
    R = 1.0
    mesh, _ = geo.generate(geo.GeometryParams(target_h=0.5, inlet_radius=R))
    for tag in geo.INLET_TAGS:
        assert mesh.facet_measures(tag).sum() == pytest.approx(2 * R, rel=1e-12)
        c, n, r = mesh.inlets[tag]
        assert np.linalg.norm(n) == pytest.approx(1.0)
        assert r == R
        # the outward normal points away from the domain interior
        assert n @ (c - mesh.vertices.mean(axis=0)) > 0


def test_wall_points_lie_at_radius_from_centerline():
    mesh, cl = geo.generate(geo.GeometryParams(target_h=0.5))
    wall = np.unique(mesh.facets[mesh.facet_tags == geo.WALL])
    _, r, _, R, _ = geo.centerline_query(cl, mesh.vertices[wall])
    # away from the junction the wall is exactly one radius off the axis
    far = np.abs(mesh.vertices[wall, 0]) > 3.0
    assert np.allclose(r[far], R[far], atol=1e-9)


def test_centerline_query_single_point_on_channel():
    _, cl = geo.generate(geo.GeometryParams(kind="channel", target_h=0.5, outlet_length=6.0))
    s, r, t, R, b = geo.centerline_query(cl, np.array([2.5, 0.3]))
    assert s == pytest.approx(2.5)
    assert r == pytest.approx(0.3)
    assert np.allclose(t, [1.0, 0.0])
    assert b == 0


def test_refinement_increases_cells():
    a, _ = geo.generate(geo.GeometryParams(target_h=1.0))
    b, _ = geo.generate(geo.GeometryParams(target_h=0.5))
    assert b.num_cells > 3 * a.num_cells
    assert b.measure() == pytest.approx(a.measure(), rel=1e-9)


def test_mesh_round_trip_bit_identical(tmp_path):
    mesh, cl = geo.generate(geo.GeometryParams(target_h=0.7))
    p = tmp_path / "m.txt"
    geo.save_mesh(mesh, p, {"config_hash": "abc"})
    back = geo.load_mesh(p)
    assert back == mesh
    geo.save_mesh(back, tmp_path / "m2.txt", {"config_hash": "abc"})
    assert p.read_bytes() == (tmp_path / "m2.txt").read_bytes()
    geo.save_centerline(cl, tmp_path / "c.txt")
    cl2 = geo.load_centerline(tmp_path / "c.txt")
    for a, b in zip(cl.branches, cl2.branches):
        for k in ("s", "c", "t", "R"):
            assert np.array_equal(a[k], b[k])


def test_generation_is_deterministic():
    a, _ = geo.generate(geo.GeometryParams(target_h=0.6))
    b, _ = geo.generate(geo.GeometryParams(target_h=0.6))
    assert a == b


@pytest.mark.parametrize("text,msg", [
    ("OCPMESH0\n", "header"),
    ("OCPMESH1\ndim 2\nvertices 2\n0x0p+0 0x0p+0\n", "end of file"),
    ("OCPMESH1\ndim 2\nvertices 1\n0x0p+0\n", "coordinates"),
])
def test_load_mesh_rejects_malformed(tmp_path, text, msg):
    p = tmp_path / "bad.txt"
    p.write_text(text)
    with pytest.raises(geo.GeometryError, match=msg):
        geo.load_mesh(p)


@pytest.mark.parametrize("kw", [dict(target_h=0.0), dict(inlet_radius=-1.0),
                                dict(branch_angle=math.pi / 2), dict(kind="torus")])
def test_invalid_params(kw):
    with pytest.raises(geo.GeometryError):
        geo.generate(geo.GeometryParams(**kw))


@pytest.mark.parametrize("kind", ["channel_3d", "bifurcation_3d"])
def test_3d_meshes_are_valid(kind):
    mesh, cl = geo.generate(geo.GeometryParams(kind=kind, target_h=1.0, branch_length=3.0,
                                               outlet_length=3.0))
    assert mesh.dim == 3
    assert np.all(mesh.cell_volumes() > 0)
    assert len(mesh.facets) == len(geo.boundary_facets(mesh.cells, 3))
    assert geo.OUTLET in set(mesh.facet_tags.tolist())

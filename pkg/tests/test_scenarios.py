import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ocprom import fem
from ocprom import geometry as geo
from ocprom import scenarios as sc


def test_config_text_round_trip_and_hash():
    cfg = sc.ScenarioConfig(alpha=0.01, n_params=2, energy_squared=True)
    back = sc.parse_config(cfg.to_text())
    assert back == cfg
    assert back.hash() == cfg.hash()
    assert sc.ScenarioConfig().hash() != cfg.hash()


def test_config_extra_keys_and_comments():
    cfg, extra = sc.parse_config("alpha = 0.5  # cheap control\nworkdir = /tmp/x\n", {"workdir"})
    assert cfg.alpha == 0.5
    assert extra == {"workdir": "/tmp/x"}


@pytest.mark.parametrize("text,msg", [
    ("alpha = 0\n", "alpha"),
    ("alpha = 2\n", "alpha"),
    ("bogus = 1\n", "unknown key"),
    ("T_s = 1.0\ndt_s = 0.3\n", "integer"),
    ("n_params = 3\n", "n_params"),
    ("re_min = 90\n", "re_min"),
    ("alpha 0.1\n", "key = value"),
    ("energy_squared = maybe\n", "line 1"),
])
def test_config_rejects(text, msg):
    with pytest.raises(sc.ConfigError, match=msg):
        sc.parse_config(text)


def test_counts():
    cfg = sc.ScenarioConfig()
    assert cfg.n_steps == 100
    assert cfg.n_stored == 21


def test_waveform_values():
    assert sc.waveform(0.0) == pytest.approx(0.02)
    assert sc.waveform(0.5) == pytest.approx(0.04)
    assert sc.waveform(1.0) == pytest.approx(0.02)


@pytest.mark.parametrize("P,n", [(1, 21), (2, 21), (2, 3)])
def test_training_set_corners_and_box(P, n):
    cfg = sc.ScenarioConfig(n_params=P, n_train=n)
    ts = sc.sample_training_set(cfg)
    arr = ts.array()
    assert arr.shape == (n, P)
    assert np.all((arr >= 50) & (arr <= 80))
    corners = {tuple(c) for c in arr[-2 ** P:]} if n >= 2 ** P else set()
    if n >= 2 ** P:
        assert len(corners) == 2 ** P
        assert all(set(c) <= {50.0, 80.0} for c in corners)
    assert np.array_equal(arr, sc.sample_training_set(cfg).array())


def test_expand_mu():
    assert sc.expand_mu(sc.ParameterPoint((70,)), 2) == (70.0, 70.0)
    with pytest.raises(sc.ConfigError):
        sc.expand_mu(sc.ParameterPoint((70, 60, 50)), 2)
    with pytest.raises(sc.ConfigError):
        sc.ParameterPoint((float("nan"),))


def test_inlet_profile_is_parabolic_and_inward():
    mesh, _ = geo.generate(geo.GeometryParams(kind="channel", target_h=0.5))
    X = np.column_stack([np.zeros(5), np.linspace(-1, 1, 5)])
    v = sc.inlet_profile(mesh, sc.ParameterPoint((60,)), 3.6, 0.5, X)
    umax = 3.6 * 60 * 0.04
    assert np.allclose(v[:, 0], umax * (1 - X[:, 1] ** 2))
    assert np.allclose(v[:, 1], 0.0)
    with pytest.raises(sc.ConfigError):
        sc.inlet_profile(mesh, sc.ParameterPoint((60,)), 3.6, 0.5, np.array([[1.0, 0.0]]))


def test_lift_shapes_reproduce_boundary_data():
    mesh, _ = geo.generate(geo.GeometryParams(target_h=0.8))
    space = fem.build_spaces(mesh)
    mu = sc.ParameterPoint((80, 50))
    data = sc.dirichlet_data(mesh, mu, 3.6)
    full, D = fem.lift_dirichlet(space, data, 0.3)
    c = sc.lift_coefficients(mu, 3.6, 0.3, 2)
    shapes = sc.inlet_lift_shapes(space)
    assert np.allclose(sum(ci * L for ci, L in zip(c, shapes)), full, atol=1e-12)


@settings(max_examples=20, deadline=None)
@given(s=st.floats(0.5, 9.5), r=st.floats(-0.99, 0.99))
def test_target_profile_on_channel(s, r):
    _, cl = geo.generate(geo.GeometryParams(kind="channel", target_h=0.5))
    v = sc.target_profile(cl, 250.0, np.array([[s, r]]))
    assert v[0, 0] == pytest.approx(250.0 * (1 - r ** 2), rel=1e-9, abs=1e-9)
    assert v[0, 1] == pytest.approx(0.0, abs=1e-9)


def test_target_profile_vanishes_outside_radius():
    _, cl = geo.generate(geo.GeometryParams(kind="channel", target_h=0.5))
    assert np.allclose(sc.target_profile(cl, 250.0, np.array([[3.0, 1.5]])), 0.0)

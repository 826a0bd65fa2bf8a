import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ocprom import pod

sigmas = arrays(float, st.integers(1, 30), elements=st.floats(0, 1e3)).filter(
    lambda s: s.sum() > 1e-6)


@pytest.mark.parametrize("squared,expected", [(False, 3 / 6), (True, 9 / 14)])
def test_energy_fraction_example(squared, expected):
    assert pod.energy_fraction([3.0, 2.0, 1.0], 1, squared) == pytest.approx(expected)


def test_energy_fraction_errors():
    with pytest.raises(pod.PodError):
        pod.energy_fraction([1.0, -1.0], 1)
    with pytest.raises(pod.PodError):
        pod.energy_fraction([1.0], 2)
    with pytest.raises(pod.PodError):
        pod.energy_fraction([0.0, 0.0], 1)


@settings(max_examples=60, deadline=None)
@given(s=sigmas, squared=st.booleans())
def test_energy_curve_monotone_ending_at_one(s, squared):
    c = pod.energy_curve(np.sort(s)[::-1], squared)
    assert np.all(np.diff(c) >= 0)
    assert c[-1] == 1.0
    assert np.all((c >= 0) & (c <= 1))


@settings(max_examples=60, deadline=None)
@given(s=sigmas, eps=st.floats(1e-12, 0.5))
def test_select_modes_is_minimal(s, eps):
    s = np.sort(s)[::-1]
    N = pod.select_modes(s, eps)
    c = pod.energy_curve(s)
    assert 1 <= N <= len(s)
    if N < len(s):
        assert c[N - 1] > 1 - eps
    if N > 1:
        assert c[N - 2] <= 1 - eps


def _spd(n, rng):
    Q = rng.standard_normal((n, n))
    return Q @ Q.T / n + np.eye(n)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 5000), m=st.integers(2, 12), N=st.integers(1, 5))
def test_pod_orthonormal_and_eckart_young(seed, m, N):
    rng = np.random.default_rng(seed)
    n = 25
    X = _spd(n, rng)
    S = rng.standard_normal((n, m)) * np.logspace(0, -3, m)
    b = pod.pod(S, X, N=N)
    k = b.N
    assert k == min(N, m)
    assert np.allclose(b.Z.T @ X @ b.Z, np.eye(k), atol=1e-10)
    # best rank-k approximation error in the X-Frobenius norm
    E = S - b.Z @ (b.Z.T @ X @ S)
    err2 = np.trace(E.T @ X @ E)
    assert err2 == pytest.approx(np.sum(b.singular_values[k:] ** 2), rel=1e-6, abs=1e-20)
    # singular values agree with the Cholesky-transformed SVD
    Lc = np.linalg.cholesky(X)
    ref = np.linalg.svd(Lc.T @ S, compute_uv=False)
    assert np.allclose(b.singular_values[:len(ref)], ref, rtol=1e-9, atol=1e-12 * ref[0])


def test_pod_by_tolerance_and_rank_cap(rng):
    U = np.linalg.qr(rng.standard_normal((30, 3)))[0]
    S = U @ np.diag([1.0, 1e-2, 1e-4]) @ rng.standard_normal((3, 8))
    assert pod.pod(S, N=6).N == 3
    assert pod.pod(S, eps_tol=1e-1).N == 1


def test_pod_rejects_bad_input():
    with pytest.raises(pod.PodError):
        pod.pod(np.ones(4))
    with pytest.raises(pod.PodError):
        pod.pod(np.array([[np.nan, 1.0]]))


def test_temporal_compression_shapes_and_errors(rng):
    S = rng.standard_normal((20, 6))
    c = pod.temporal_compress(S, 4)
    assert c.weighted.shape == (20, 4)
    assert np.allclose(c.weighted.T @ c.weighted, np.diag(c.basis.singular_values[:4] ** 2))
    with pytest.raises(pod.PodError, match="exceeds"):
        pod.temporal_compress(S, 7)
    z = pod.temporal_compress(np.zeros((20, 6)), 4)
    assert z.weighted.shape == (20, 4) and not np.any(z.weighted)


def test_stacking_column_count(rng):
    comps = [pod.temporal_compress(rng.standard_normal((15, 8)), 3) for _ in range(5)]
    assert pod.stack_compressed(comps).shape == (15, 15)
    with pytest.raises(pod.PodError):
        pod.stack_compressed([])


def test_nested_equals_classical_for_exactly_low_rank_data(rng):
    # every parameter's data lives in a shared 3-dimensional space
    U = rng.standard_normal((40, 3))
    mats = [U @ rng.standard_normal((3, 7)) for _ in range(4)]
    comps = [pod.temporal_compress(M, 3) for M in mats]
    nested = pod.pod(pod.stack_compressed(comps), N=3)
    classical = pod.pod(np.hstack(mats), N=3)
    assert pod.principal_angles(nested.Z, classical.Z) < 1e-8
    assert np.allclose(nested.singular_values[:3], classical.singular_values[:3], rtol=1e-10)


def test_principal_angles(rng):
    A = rng.standard_normal((10, 2))
    assert pod.principal_angles(A, A @ np.array([[1.0, 2.0], [0.0, 1.0]])) < 1e-7
    e = np.eye(10)
    assert pod.principal_angles(e[:, :1], e[:, 1:2]) == pytest.approx(np.pi / 2)


def test_nested_pod_on_trajectories(tiny_offline, bifurcation_problem):
    ops, cfg = bifurcation_problem.ops, bifurcation_problem.cfg
    snaps = tiny_offline[1]
    b = pod.nested_pod(snaps, ops, cfg.n_t_pod, cfg.n_max)
    assert set(b.info["stage2_columns"].values()) == {cfg.n_t_pod * len(snaps)}
    X = pod.inner_products(ops)
    for v in pod.VARIABLES:
        Z = b.bases[v].Z
        assert np.allclose(Z.T @ X[v] @ Z, np.eye(Z.shape[1]), atol=1e-9), v
    assert b.bases["s"].N == b.bases["p"].N and b.bases["r"].N == b.bases["q"].N
    t = pod.truncate(b, 2, ops)
    assert t.sizes()["p"] == 2 and t.bases["s"].N == 2
    with pytest.raises(pod.PodError, match="adjoint"):
        pod.nested_pod([{**s, "w": 0 * s["w"]} for s in snaps], ops, cfg.n_t_pod, cfg.n_max)
    with pytest.raises(pod.PodError, match="enrichment"):
        pod.enrich(b.bases, X["v"], "sideways")


@pytest.mark.parametrize("enrichment", ["paired", "transposed", "cross", "aggregated", "none"])
def test_enrichment_sizes(tiny_offline, bifurcation_problem, enrichment):
    ops, cfg = bifurcation_problem.ops, bifurcation_problem.cfg
    b = pod.nested_pod(tiny_offline[1], ops, cfg.n_t_pod, cfg.n_max, enrichment=enrichment)
    nv, np_ = b.bases["v"].N, b.bases["p"].N
    assert nv <= b.Zvs.shape[1] <= nv + 2 * np_ + b.bases["w"].N
    if enrichment == "none":
        assert b.Zvs.shape[1] == nv

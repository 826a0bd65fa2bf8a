import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from ocprom import matrixfile as mf
from ocprom import store


@settings(max_examples=30, deadline=None)
@given(a=arrays(float, st.tuples(st.integers(0, 5), st.integers(0, 4)),
                elements=st.floats(allow_nan=False)),
       v=arrays(float, st.integers(0, 6), elements=st.floats(allow_nan=False)),
       key=st.text(min_size=1, max_size=8), val=st.text(max_size=20))
def test_round_trip(a, v, key, val):
    data = mf.dumps("test", {"a": a, "v": v}, {key: val})
    kind, meta, arr = mf.loads(data, "test")
    assert kind == "test" and meta == {key: val}
    assert np.array_equal(arr["a"], a) and np.array_equal(arr["v"][:, 0], v)


def test_integrity_checks(tmp_path):
    data = mf.dumps("test", {"x": np.arange(6.0)})
    with pytest.raises(mf.MatrixFileError, match="checksum"):
        mf.loads(data[:30] + bytes([data[30] ^ 1]) + data[31:])
    with pytest.raises(mf.MatrixFileError, match="expected"):
        mf.loads(data, "basis")
    with pytest.raises(mf.MatrixFileError, match="not an"):
        mf.loads(b"hello world, this is not a matrix file")
    with pytest.raises(mf.MatrixFileError):
        mf.dumps("a-very-long-kind-tag", {})
    p = tmp_path / "x.ocprom"
    mf.save(p, "test", {"x": np.eye(2)}, {"k": 1})
    assert mf.load(p)[1] == {"k": "1"}


def test_trajectory_round_trip(tmp_path, tiny_offline):
    tr = tiny_offline[0][0]
    p = tmp_path / "t.ocprom"
    store.save_trajectory(p, tr, {"seed": 3}, {"s": 2 * tr.v})
    back, meta, extra = store.load_trajectory(p)
    assert meta["seed"] == "3" and back.mu == tr.mu and back.controlled
    for f in ("times", "v", "p", "u", "w", "q"):
        assert np.array_equal(getattr(back, f), getattr(tr, f))
    assert np.array_equal(extra["s"], 2 * tr.v)


def test_basis_and_operators_round_trip(tmp_path, tiny_rom, bifurcation_problem):
    basis, ro = tiny_rom
    store.save_basis(tmp_path / "b.ocprom", basis)
    store.save_reduced_operators(tmp_path / "r.ocprom", ro)
    b2, _ = store.load_basis(tmp_path / "b.ocprom")
    r2, _ = store.load_reduced_operators(tmp_path / "r.ocprom")
    assert b2.sizes() == basis.sizes() and b2.enrichment == basis.enrichment
    for k, v in ro.arrays().items():
        assert np.array_equal(getattr(r2, k), v), k
    assert (r2.n_lift, r2.alpha, r2.nu, r2.basis_hash) == (ro.n_lift, ro.alpha, ro.nu,
                                                           ro.basis_hash)
    # a basis file whose contents no longer match its recorded hash is refused
    _, meta, arr = mf.load(tmp_path / "b.ocprom")
    arr["Zvs"][0, 0] += 1.0
    mf.save(tmp_path / "b.ocprom", "basis", arr, meta)
    with pytest.raises(mf.MatrixFileError, match="hash"):
        store.load_basis(tmp_path / "b.ocprom")


def test_reduced_trajectory_round_trip(tmp_path, tiny_rom, bifurcation_problem):
    from ocprom import rom, scenarios as sc
    _, ro = tiny_rom
    red = rom.reduced_solve(ro, sc.ParameterPoint((65.0,)), bifurcation_problem.cfg)
    store.save_reduced_trajectory(tmp_path / "r.ocprom", red)
    back, meta = store.load_reduced_trajectory(tmp_path / "r.ocprom")
    assert back.basis_hash == red.basis_hash
    assert np.array_equal(back.v, red.v) and np.array_equal(back.times, red.times)
    assert len(store.file_digest(tmp_path / "r.ocprom")) == 16

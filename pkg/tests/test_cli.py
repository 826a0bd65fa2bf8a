import os
import subprocess
import sys

import pytest

from ocprom import cli
from ocprom import matrixfile as mf
from ocprom import post

CONFIG = """\
target_h_mm = 1.0
branch_length_mm = 4.0
outlet_length_mm = 4.0
T_s = 0.1
snapshot_stride = 2
n_train = 4
n_t_pod = 3
n_max = 4
n_params = 2
"""


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    d = tmp_path_factory.mktemp("run")
    cfg = d / "case.cfg"
    cfg.write_text(CONFIG + f"workdir = {d / 'work'}\n")
    return d, str(cfg)


def run(cfg, *argv):
    return cli.main([argv[0], "--config", cfg, *argv[1:]])


def test_pipeline(workdir, capsys):
    d, cfg = workdir
    w = d / "work"
    assert run(cfg, "online", "--mu", "70,60") == cli.EXIT_PREREQ
    assert run(cfg, "mesh") == 0
    first = (w / "mesh.txt").read_bytes()
    assert run(cfg, "mesh") == 0
    assert (w / "mesh.txt").read_bytes() == first
    assert run(cfg, "train") == cli.EXIT_PREREQ
    assert run(cfg, "offline") == 0
    assert len(os.listdir(w / "snapshots")) == 4
    assert run(cfg, "offline") == 0               # everything cached
    assert "4 of 4" in capsys.readouterr().out
    assert run(cfg, "train") == 0
    manifest = (w / "manifest.txt").read_text()
    assert "basis_hash=" in manifest and "snapshot_003=" in manifest
    meta, head, rows = post.read_csv(w / "spectra" / "spectrum_v.csv")
    assert head[0] == "mode" and "config_hash" in meta
    assert run(cfg, "online", "--mu", "70,60") == 0
    assert (w / "online" / "70_60" / "reduced.ocprom").exists()
    assert post.read_csv(w / "timings.csv")[2][0][0] == "70_60"
    assert run(cfg, "compare", "--mu", "65,65") == 0
    _, _, rows = post.read_csv(w / "compare" / "rom_65_65" / "errors.csv")
    assert {r[0] for r in rows} == {"v", "p", "u", "w", "q"}
    assert run(cfg, "compare", "--mu", "65,65", "--mode", "control") == 0
    assert run(cfg, "wss", "--mu", "80,50", "--time", "0.1") == 0
    assert run(cfg, "wss", "--mu", "80,50", "--source", "rom") == 0
    assert len(os.listdir(w / "wss")) == 2


def test_input_errors(workdir, tmp_path):
    d, cfg = workdir
    assert run(cfg, "online", "--mu", "120,60") == cli.EXIT_INPUT
    assert run(cfg, "online", "--mu", "abc") == cli.EXIT_INPUT
    assert run(cfg, "online", "--mu", "70,60,50") == cli.EXIT_INPUT
    bad = tmp_path / "bad.cfg"
    bad.write_text("alpha = -1\n")
    assert cli.main(["mesh", "--config", str(bad)]) == cli.EXIT_INPUT
    assert cli.main(["mesh", "--config", str(tmp_path / "missing.cfg")]) == cli.EXIT_INPUT
    geo_bad = tmp_path / "geo.cfg"
    geo_bad.write_text("branch_angle_rad = 2.0\n")
    assert cli.main(["mesh", "--config", str(geo_bad), "--workdir", str(tmp_path)]) == \
        cli.EXIT_INPUT


def test_extrapolate_flag(workdir):
    d, cfg = workdir
    if not (d / "work" / "reduced_ops.ocprom").exists():
        pytest.skip("pipeline test did not run")
    assert run(cfg, "online", "--mu", "85,60", "--extrapolate") == 0


def test_integrity_errors(workdir, tmp_path):
    d, cfg = workdir
    w = d / "work"
    if not (w / "basis.ocprom").exists():
        pytest.skip("pipeline test did not run")
    saved = (w / "basis.ocprom").read_bytes()
    try:
        (w / "basis.ocprom").write_bytes(saved[:-1] + bytes([saved[-1] ^ 1]))
        assert run(cfg, "online", "--mu", "70,60") == cli.EXIT_INTEGRITY
        # a consistent basis that differs from the one the operators were built from
        _, meta, arr = mf.loads(saved)
        arr["Zvs"] = -arr["Zvs"]
        meta.pop("basis_hash")
        mf.save(w / "basis.ocprom", "basis", arr, meta)
        assert run(cfg, "online", "--mu", "70,60") == cli.EXIT_INTEGRITY
    finally:
        (w / "basis.ocprom").write_bytes(saved)
    other = tmp_path / "other.cfg"
    other.write_text(CONFIG.replace("T_s = 0.1", "T_s = 0.2") + f"workdir = {w}\n")
    assert cli.main(["online", "--config", str(other), "--mu", "70,60"]) == cli.EXIT_INTEGRITY


def test_module_entry_point(tmp_path):
    out = subprocess.run([sys.executable, "-m", "ocprom", "--help"], capture_output=True,
                         text=True)
    assert out.returncode == 0
    for name in ("mesh", "offline", "train", "online", "compare", "wss"):
        assert name in out.stdout
    cfgfile = tmp_path / "c.cfg"
    cfgfile.write_text("geometry_kind = channel\ntarget_h_mm = 1.0\n")
    out = subprocess.run([sys.executable, "-m", "ocprom", "mesh", "--config", str(cfgfile),
                          "--workdir", str(tmp_path / "w")], capture_output=True, text=True)
    assert out.returncode == 0, out.stderr
    assert (tmp_path / "w" / "mesh.txt").read_text().startswith("OCPMESH1")

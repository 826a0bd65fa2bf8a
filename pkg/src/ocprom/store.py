"""Persistence of trajectories, reduced bases and reduced operators in the
``matrixfile`` container."""

import hashlib

from . import matrixfile as mf
from . import scenarios as sc
from .fom import FIELDS, Trajectory
from .pod import PodBasis, ReducedBasis, VARIABLES
from .rom import ReducedOperators, ReducedTrajectory, basis_hash

KIND_TRAJ = "trajectory"
KIND_RTRAJ = "reduced-traj"
KIND_BASIS = "basis"
KIND_REDOPS = "reduced-ops"


def _mu_meta(mu):
    return ",".join(repr(r) for r in mu.re)


def _mu_parse(s):
    return sc.ParameterPoint(tuple(float(x) for x in s.split(",")))


def save_trajectory(path, traj, meta=None, extra=None):
    arrays = {"times": traj.times, **{f: getattr(traj, f) for f in FIELDS}}
    arrays.update(extra or {})
    m = {"mu": _mu_meta(traj.mu), "cfg_hash": traj.cfg_hash,
         "controlled": int(traj.controlled)}
    for k in ("wall_time_s", "w_terminal_norm"):
        if k in traj.info:
            m[k] = repr(float(traj.info[k]))
    m.update(meta or {})
    mf.save(path, KIND_TRAJ, arrays, m)


def load_trajectory(path):
    """Return ``(trajectory, meta, extra arrays)``."""
    _, meta, arr = mf.load(path, KIND_TRAJ)
    traj = Trajectory(times=arr.pop("times")[:, 0], mu=_mu_parse(meta["mu"]),
                      cfg_hash=meta.get("cfg_hash", ""),
                      controlled=bool(int(meta.get("controlled", 1))),
                      **{f: arr.pop(f) for f in FIELDS})
    return traj, meta, arr


def save_reduced_trajectory(path, red, meta=None):
    arrays = {"times": red.times, **{f: getattr(red, f) for f in FIELDS}}
    m = {"mu": _mu_meta(red.mu), "basis_hash": red.basis_hash,
         "wall_time_s": repr(red.info.get("wall_time_s", 0.0))}
    m.update(meta or {})
    mf.save(path, KIND_RTRAJ, arrays, m)


def load_reduced_trajectory(path):
    _, meta, arr = mf.load(path, KIND_RTRAJ)
    return ReducedTrajectory(times=arr.pop("times")[:, 0], mu=_mu_parse(meta["mu"]),
                             basis_hash=meta.get("basis_hash", ""),
                             **{f: arr[f] for f in FIELDS}), meta


def save_basis(path, basis, meta=None):
    arrays = {"Zvs": basis.Zvs, "Zwr": basis.Zwr}
    for v in VARIABLES:
        arrays[f"Z_{v}"] = basis.bases[v].Z
        arrays[f"sigma_{v}"] = basis.bases[v].singular_values
    m = {"enrichment": basis.enrichment, "basis_hash": basis_hash(basis),
         "squared": int(next(iter(basis.bases.values())).squared)}
    m.update(meta or {})
    mf.save(path, KIND_BASIS, arrays, m)


def load_basis(path):
    _, meta, arr = mf.load(path, KIND_BASIS)
    sq = bool(int(meta.get("squared", 0)))
    bases = {v: PodBasis(arr[f"Z_{v}"], arr[f"sigma_{v}"][:, 0], sq) for v in VARIABLES}
    basis = ReducedBasis(bases, arr["Zvs"], arr["Zwr"], meta.get("enrichment", "paired"))
    if meta.get("basis_hash") and meta["basis_hash"] != basis_hash(basis):
        raise mf.MatrixFileError("basis contents do not match the recorded basis hash")
    return basis, meta


_VECTORS = ("F_w", "G_v", "H_u")


def save_reduced_operators(path, ro, meta=None):
    arrays = ro.arrays()
    m = {"n_lift": ro.n_lift, "alpha": repr(ro.alpha), "nu": repr(ro.nu),
         "basis_hash": ro.basis_hash, "cfg_hash": ro.cfg_hash}
    m.update(meta or {})
    mf.save(path, KIND_REDOPS, arrays, m)


def load_reduced_operators(path):
    _, meta, arr = mf.load(path, KIND_REDOPS)
    for k in _VECTORS:
        arr[k] = arr[k][:, 0]
    nw = arr["A_wv"].shape[0]
    n1 = arr["A_wv"].shape[1]
    arr["T"] = arr["T"].reshape(nw, n1, n1)
    ro = ReducedOperators(n_lift=int(meta["n_lift"]), alpha=float(meta["alpha"]),
                          nu=float(meta["nu"]), basis_hash=meta["basis_hash"],
                          cfg_hash=meta.get("cfg_hash", ""), **arr)
    return ro, meta


def file_digest(path):
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()[:16]


__all__ = ["save_trajectory", "load_trajectory", "save_reduced_trajectory",
           "load_reduced_trajectory", "save_basis", "load_basis", "save_reduced_operators",
           "load_reduced_operators", "file_digest"]

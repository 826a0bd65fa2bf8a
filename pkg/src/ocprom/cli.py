"""Command line: ``python -m ocprom <command> [options]``.

Commands
--------
mesh     generate the mesh and centerline into the work directory
offline  solve the full-order problem for every training parameter
train    nested POD, supremizer enrichment and reduced operators
online   reduced solve for one parameter (never reads the snapshot store)
compare  full-order vs reduced, or controlled vs uncontrolled, errors
wss      wall shear stress along the wall at one stored time

Exit codes: 0 success, 1 internal error, 2 invalid input or geometry,
3 missing prerequisites, 4 integrity mismatch.
"""

import argparse
import logging
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor

import numpy as np

from . import fom, post, pod, rom, store
from . import geometry as geo
from . import matrixfile as mf
from . import scenarios as sc
from .supremizer import SupremizerSolver

log = logging.getLogger("ocprom")

EXIT_OK, EXIT_INTERNAL, EXIT_INPUT, EXIT_PREREQ, EXIT_INTEGRITY = 0, 1, 2, 3, 4
RUN_KEYS = {"workdir"}


class CliError(Exception):
    def __init__(self, message, code):
        super().__init__(message)
        self.code = code


# --------------------------------------------------------------------------
# run configuration and paths

class Run:
    """Scenario configuration plus the work directory layout."""

    def __init__(self, cfg, workdir, workers=1):
        self.cfg = cfg
        self.workdir = os.path.abspath(workdir)
        self.workers = max(1, int(workers))

    @property
    def meta(self):
        return {"config_hash": self.cfg.hash(), "seed": self.cfg.seed}

    def path(self, *parts):
        return os.path.join(self.workdir, *parts)

    mesh_file = property(lambda self: self.path("mesh.txt"))
    centerline_file = property(lambda self: self.path("centerline.txt"))
    basis_file = property(lambda self: self.path("basis.ocprom"))
    redops_file = property(lambda self: self.path("reduced_ops.ocprom"))

    def snapshot_file(self, i):
        return self.path("snapshots", f"mu_{i:03d}.ocprom")

    def ensure(self, *parts):
        d = self.path(*parts)
        os.makedirs(d, exist_ok=True)
        return d


def load_run(args):
    extra = {}
    try:
        if args.config:
            cfg, extra = sc.load_config(args.config, RUN_KEYS)
        else:
            cfg = sc.ScenarioConfig()
    except OSError as exc:
        raise CliError(f"cannot read config: {exc}", EXIT_INPUT) from exc
    except sc.ConfigError as exc:
        raise CliError(f"invalid config: {exc}", EXIT_INPUT) from exc
    workdir = args.workdir or extra.get("workdir") or "ocprom_work"
    return Run(cfg, workdir, getattr(args, "workers", 1) or 1)


def parse_mu(text, cfg, extrapolate=False):
    try:
        vals = tuple(float(x) for x in text.split(","))
        mu = sc.ParameterPoint(vals)
    except (ValueError, sc.ConfigError) as exc:
        raise CliError(f"invalid --mu {text!r}: {exc}", EXIT_INPUT) from exc
    if len(vals) not in (1, cfg.n_params):
        raise CliError(f"--mu needs {cfg.n_params} value(s), got {len(vals)}", EXIT_INPUT)
    if not cfg.in_domain(mu) and not extrapolate:
        raise CliError(f"mu={vals} is outside [{cfg.re_min}, {cfg.re_max}]; "
                       "pass --extrapolate to run anyway", EXIT_INPUT)
    return mu


def problem_from_files(run):
    if not os.path.exists(run.mesh_file):
        raise CliError(f"no mesh in {run.workdir}; run 'mesh' first", EXIT_PREREQ)
    try:
        mesh = geo.load_mesh(run.mesh_file)
        cl = geo.load_centerline(run.centerline_file)
    except (OSError, geo.GeometryError) as exc:
        raise CliError(f"cannot read mesh: {exc}", EXIT_INPUT) from exc
    return fom.setup_problem(run.cfg, mesh, cl)


# --------------------------------------------------------------------------
# commands

def cmd_mesh(run, args):
    try:
        mesh, cl = geo.generate(run.cfg.geometry)
    except geo.GeometryError as exc:
        raise CliError(f"geometry rejected: {exc}", EXIT_INPUT) from exc
    run.ensure()
    geo.save_mesh(mesh, run.mesh_file, run.meta)
    geo.save_centerline(cl, run.centerline_file, run.meta)
    sc.save_config(run.cfg, run.path("config.txt"))
    print(f"mesh: {mesh.num_vertices} vertices, {mesh.num_cells} cells -> {run.mesh_file}")
    return EXIT_OK


def _offline_one(args):
    """Worker: solve one training parameter and write its snapshot file."""
    workdir, cfg_text, i, re = args
    cfg = sc.parse_config(cfg_text)
    run = Run(cfg, workdir)
    problem = problem_from_files(run)
    mu = sc.ParameterPoint(tuple(re))
    ck = run.path("checkpoints", f"mu_{i:03d}.ckpt")
    t0 = time.perf_counter()
    if os.path.exists(ck):
        try:
            traj = fom.checkpoint_resume(problem, ck, checkpoint_every=cfg.snapshot_stride * 4)
        except fom.CheckpointError:
            log.warning("discarding unusable checkpoint %s", ck)
            traj = fom.solve_ocp(problem, mu, ck, cfg.snapshot_stride * 4)
    else:
        traj = fom.solve_ocp(problem, mu, ck, cfg.snapshot_stride * 4)
    sup = SupremizerSolver(problem.space, problem.ops)
    s, r = sup(traj.p), sup(traj.q)
    wall = time.perf_counter() - t0
    traj.info["wall_time_s"] = wall
    store.save_trajectory(run.snapshot_file(i), traj, {**run.meta, "index": i},
                          {"s": s, "r": r})
    if os.path.exists(ck):
        os.remove(ck)
    return i, wall


def _snapshot_ok(run, i):
    path = run.snapshot_file(i)
    if not os.path.exists(path):
        return False
    try:
        _, meta, _ = store.load_trajectory(path)
    except mf.MatrixFileError:
        return False
    return meta.get("config_hash") == run.cfg.hash()


def cmd_offline(run, args):
    problem_from_files(run)            # fail early without a mesh
    run.ensure("snapshots")
    run.ensure("checkpoints")
    ts = sc.sample_training_set(run.cfg)
    todo = [i for i in range(len(ts)) if not _snapshot_ok(run, i)]
    print(f"offline: {len(ts) - len(todo)} of {len(ts)} parameters already done")
    jobs = [(run.workdir, run.cfg.to_text(), i, ts.points[i].re) for i in todo]
    failed, rows = [], []
    if run.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(run.workers) as ex:
            futs = {ex.submit(_offline_one, j): j[2] for j in jobs}
            for fut, i in futs.items():
                try:
                    rows.append(fut.result())
                except Exception as exc:       # noqa: BLE001 - keep sweeping
                    log.error("mu #%d failed: %s", i, exc)
                    failed.append(i)
    else:
        for j in jobs:
            try:
                rows.append(_offline_one(j))
                print(f"  mu #{j[2]} {j[3]} done in {rows[-1][1]:.1f} s")
            except Exception as exc:           # noqa: BLE001 - keep sweeping
                log.error("mu #%d failed: %s", j[2], exc)
                failed.append(j[2])
    if rows:
        path = run.path("offline_times.csv")
        old = post.read_csv(path)[2] if os.path.exists(path) else []
        allrows = sorted({int(r[0]): r for r in old + [list(r) for r in rows]}.items())
        post.write_csv(path, ["index", "wall_time_s"], [r for _, r in allrows], run.meta)
    if failed:
        print(f"offline: {len(failed)} parameter(s) failed: {sorted(failed)}", file=sys.stderr)
        return EXIT_INTERNAL
    return EXIT_OK


def _load_snapshots(run, problem):
    ts = sc.sample_training_set(run.cfg)
    missing = [i for i in range(len(ts)) if not _snapshot_ok(run, i)]
    if missing:
        raise CliError(f"snapshot store incomplete: missing {missing}; run 'offline'",
                       EXIT_PREREQ)
    snaps, digests = [], {}
    for i in range(len(ts)):
        traj, _, extra = store.load_trajectory(run.snapshot_file(i))
        v = traj.v.copy()
        for j, t in enumerate(traj.times):
            v[:, j] -= problem.lift(traj.mu, t)
        snaps.append({"v": v, "p": traj.p, "u": traj.u, "w": traj.w, "q": traj.q,
                      "s": extra["s"], "r": extra["r"]})
        digests[i] = store.file_digest(run.snapshot_file(i))
    return snaps, digests


def cmd_train(run, args):
    problem = problem_from_files(run)
    snaps, digests = _load_snapshots(run, problem)
    cfg = run.cfg
    basis = pod.nested_pod(snaps, problem.ops, cfg.n_t_pod, cfg.n_max, cfg.n_supremizer,
                           cfg.energy_squared, args.enrichment)
    ro = rom.project_operators(problem, basis)
    store.save_basis(run.basis_file, basis, run.meta)
    store.save_reduced_operators(run.redops_file, ro, run.meta)
    spec_dir = run.ensure("spectra")
    for v in pod.VARIABLES:
        post.write_csv(os.path.join(spec_dir, f"spectrum_{v}.csv"),
                       ["mode", "sigma", "sigma_normalized", "cumulative_energy"],
                       post.spectrum_rows(basis.bases[v].singular_values, cfg.energy_squared),
                       run.meta)
    lines = [f"config_hash={cfg.hash()}", f"seed={cfg.seed}", f"basis_hash={ro.basis_hash}",
             f"reduced_ops={store.file_digest(run.redops_file)}",
             f"enrichment={basis.enrichment}",
             *(f"size_{k}={n}" for k, n in basis.sizes().items()),
             *(f"snapshot_{i:03d}={d}" for i, d in digests.items())]
    with open(run.path("manifest.txt"), "w", encoding="utf-8") as fh:
        fh.write("\n".join(lines) + "\n")
    print(f"train: basis sizes {basis.sizes()}, basis hash {ro.basis_hash}")
    return EXIT_OK


def _load_reduced(run):
    for p in (run.basis_file, run.redops_file):
        if not os.path.exists(p):
            raise CliError(f"missing {os.path.basename(p)}; run 'train'", EXIT_PREREQ)
    try:
        basis, bmeta = store.load_basis(run.basis_file)
        ro, _ = store.load_reduced_operators(run.redops_file)
    except mf.MatrixFileError as exc:
        raise CliError(f"corrupt reduced data: {exc}", EXIT_INTEGRITY) from exc
    if ro.basis_hash != rom.basis_hash(basis):
        raise CliError("reduced operators were built from a different basis", EXIT_INTEGRITY)
    if ro.cfg_hash and ro.cfg_hash != run.cfg.hash():
        raise CliError("reduced operators were built with a different configuration",
                       EXIT_INTEGRITY)
    return basis, ro


def _online(run, mu):
    basis, ro = _load_reduced(run)
    red = rom.reduced_solve(ro, mu, run.cfg, basis_hash_expected=rom.basis_hash(basis))
    return basis, ro, red


def cmd_online(run, args):
    mu = parse_mu(args.mu, run.cfg, args.extrapolate)
    problem = problem_from_files(run)
    basis, ro, red = _online(run, mu)
    out = run.ensure("online", mu.label())
    meta = {**run.meta, "basis_hash": ro.basis_hash}
    store.save_reduced_trajectory(os.path.join(out, "reduced.ocprom"), red, meta)
    full = rom.lift(red, basis, problem)
    store.save_trajectory(os.path.join(out, "lifted.ocprom"), full, meta)
    cost = post.cost_functional(problem, full)
    post.write_csv(os.path.join(out, "cost.csv"), ["tracking", "control", "total"],
                   [(cost.tracking, cost.control, cost.total)], meta)
    tpath = run.path("timings.csv")
    rows = post.read_csv(tpath)[2] if os.path.exists(tpath) else []
    rows.append([mu.label(), "online", repr(red.info["wall_time_s"])])
    post.write_csv(tpath, ["mu", "kind", "wall_time_s"], rows, run.meta)
    print(f"online: mu={mu.re} solved in {red.info['wall_time_s']:.3f} s, J={cost.total:.6g}")
    return EXIT_OK


def cmd_compare(run, args):
    mu = parse_mu(args.mu, run.cfg, args.extrapolate)
    problem = problem_from_files(run)
    out = run.ensure("compare", f"{args.mode}_{mu.label()}")
    ref = fom.solve_ocp(problem, mu)
    if args.mode == "control":
        other = fom.solve_uncontrolled(problem, mu)
        meta = dict(run.meta)
    else:
        basis, ro, red = _online(run, mu)
        other = rom.lift(red, basis, problem)
        meta = {**run.meta, "basis_hash": ro.basis_hash}
    rep = post.error_norms(problem.ops, other, ref)
    post.write_csv(os.path.join(out, "errors.csv"), ["variable", "relative_l2_time"],
                   sorted(rep.relative.items()), meta)
    post.write_csv(os.path.join(out, "errors_per_time.csv"),
                   ["time", *fom.FIELDS],
                   [(t, *(rep.per_time[f][k] for f in fom.FIELDS))
                    for k, t in enumerate(rep.times)], meta)
    mf.save(os.path.join(out, "abs_error.ocprom"), "abs-error",
            {"times": rep.times, **rep.absolute}, meta)
    print("compare (" + args.mode + "): " +
          ", ".join(f"{k}={v:.3e}" for k, v in sorted(rep.relative.items())))
    return EXIT_OK


def cmd_wss(run, args):
    mu = parse_mu(args.mu, run.cfg, args.extrapolate)
    problem = problem_from_files(run)
    if args.source == "rom":
        basis, _, red = _online(run, mu)
        traj = rom.lift(red, basis, problem)
    else:
        traj = fom.solve_ocp(problem, mu)
    k = int(np.argmin(np.abs(traj.times - args.time)))
    field = post.wss(problem.space, traj.v[:, k], run.cfg.nu_mm2_s, run.cfg.density_g_mm3)
    out = run.ensure("wss")
    path = os.path.join(out, f"wss_{args.source}_{mu.label()}_t{traj.times[k]:g}.csv")
    coords = ["x", "y", "z"][:problem.space.dim]
    post.write_csv(path, ["facet", "branch", "arclength", *coords, f"wss_{field.units}"],
                   post.wss_rows(field, problem.centerline),
                   {**run.meta, "time": traj.times[k], "units": field.units})
    print(f"wss: max {field.values.max():.4g} {field.units} at t={traj.times[k]:g} -> {path}")
    return EXIT_OK


COMMANDS = {"mesh": cmd_mesh, "offline": cmd_offline, "train": cmd_train,
            "online": cmd_online, "compare": cmd_compare, "wss": cmd_wss}


def build_parser():
    p = argparse.ArgumentParser(prog="ocprom", description=__doc__.split("\n")[0])
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)
    for name in COMMANDS:
        s = sub.add_parser(name)
        s.add_argument("--config", metavar="PATH", help="flat key = value configuration")
        s.add_argument("--workdir", metavar="DIR", help="work directory (default ocprom_work)")
        if name in ("online", "compare", "wss"):
            s.add_argument("--mu", required=True, help="Reynolds number(s), e.g. 70 or 80,50")
            s.add_argument("--extrapolate", action="store_true",
                           help="allow parameters outside the training box")
        if name == "offline":
            s.add_argument("--workers", type=int, default=1)
        if name == "train":
            s.add_argument("--enrichment", default="paired",
                           choices=["paired", "transposed", "cross", "aggregated", "none"])
        if name == "compare":
            s.add_argument("--mode", default="rom", choices=["rom", "control"])
        if name == "wss":
            s.add_argument("--time", type=float, default=1.0, help="time (s), nearest stored")
            s.add_argument("--source", default="fom", choices=["fom", "rom"])
    return p


def main(argv=None):
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        run = load_run(args)
        return COMMANDS[args.command](run, args)
    except CliError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.code
    except mf.MatrixFileError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INTEGRITY
    except (sc.ConfigError, geo.GeometryError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except Exception as exc:                   # noqa: BLE001 - exit code contract
        log.exception("internal error")
        print(f"internal error: {exc}", file=sys.stderr)
        return EXIT_INTERNAL

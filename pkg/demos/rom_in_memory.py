"""Offline/online cycle in memory on a short, coarse bifurcation.

Solves the controlled problem at a few training Reynolds numbers, builds the
nested-POD basis with supremizer enrichment and compares the reduced solution
with a fresh full-order solve at an unseen parameter.
"""

import time

from ocprom import fom, pod, post, rom
from ocprom import scenarios as sc
from ocprom.supremizer import SupremizerSolver

cfg = sc.ScenarioConfig(target_h_mm=0.8, T_s=0.3, n_train=6, n_t_pod=5, n_max=8)
prob = fom.setup_problem(cfg)
sup = SupremizerSolver(prob.space, prob.ops)

snaps = []
for mu in sc.sample_training_set(cfg):
    tr = fom.solve_ocp(prob, mu)
    snaps.append(rom.trajectory_snapshots(prob, tr, sup))
    print(f"offline Re={mu.re[0]:.1f}: {tr.info['wall_time_s']:.1f} s")

basis = pod.nested_pod(snaps, prob.ops, cfg.n_t_pod, cfg.n_max)
ro = rom.project_operators(prob, basis)
print("basis sizes", basis.sizes())

mu = sc.ParameterPoint((63.0,))
t0 = time.perf_counter()
ref = fom.solve_ocp(prob, mu)
t_fom = time.perf_counter() - t0
red = rom.reduced_solve(ro, mu, cfg)
err = post.error_norms(prob.ops, rom.lift(red, basis, prob), ref).relative
print("relative errors", {k: f"{v:.1e}" for k, v in err.items()})
print(f"FOM {t_fom:.2f} s, ROM {red.info['wall_time_s']:.3f} s")
print("cost (FOM)", post.cost_functional(prob, ref))

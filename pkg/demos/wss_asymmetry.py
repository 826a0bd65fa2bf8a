"""Wall shear stress mirror asymmetry for equal and unequal inlet Reynolds
numbers on the planar bifurcation, at peak inflow."""

import numpy as np

from ocprom import fom, post
from ocprom import scenarios as sc

cfg = sc.ScenarioConfig(n_params=2, T_s=0.5)
prob = fom.setup_problem(cfg)
for re in ((70.0, 70.0), (80.0, 50.0)):
    tr = fom.solve_ocp(prob, sc.ParameterPoint(re))
    k = int(np.argmin(np.abs(tr.times - 0.5)))
    field = post.wss(prob.space, tr.v[:, k], cfg.nu_mm2_s)
    print(f"Re={re}: max WSS {field.values.max():.1f} {field.units}, "
          f"mirror asymmetry {post.mirror_asymmetry(field):.2e}")

"""Steady channel flow against the analytic parabola and linear pressure."""

import numpy as np

from ocprom import fom
from ocprom import scenarios as sc

cfg = sc.ScenarioConfig(geometry_kind="channel", target_h_mm=0.5)
prob = fom.setup_problem(cfg)
mu = sc.ParameterPoint((65.0,))
s = fom.steady_solve(prob, mu, t=0.5, controlled=False)

umax = cfg.nu_mm2_s * 65.0 * float(sc.waveform(0.5)) / cfg.inlet_radius_mm
X = prob.space.node_coords
v = np.column_stack([umax * (1 - X[:, 1] ** 2), 0 * X[:, 1]]).ravel()
p = 2 * cfg.nu_mm2_s * umax * (cfg.outlet_length_mm - prob.mesh.vertices[:, 0])
print(f"dofs {prob.space.n_h}")
print(f"velocity rel. error {np.linalg.norm(s.v - v) / np.linalg.norm(v):.2e}")
print(f"pressure rel. error {np.linalg.norm(s.p - p) / np.linalg.norm(p):.2e}")

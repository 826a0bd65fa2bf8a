import numpy as np
import pytest

from ocprom import fom
from ocprom import scenarios as sc


def small_channel_cfg(**kw):
    """Short coarse channel used by the fast tests."""
    base = dict(geometry_kind="channel", target_h_mm=1.0, outlet_length_mm=4.0,
                T_s=0.1, dt_s=0.01, snapshot_stride=2, n_train=4, n_t_pod=3, n_max=3)
    base.update(kw)
    return sc.ScenarioConfig(**base)


@pytest.fixture(scope="session")
def channel_problem():
    return fom.setup_problem(small_channel_cfg())


@pytest.fixture(scope="session")
def bifurcation_problem():
    cfg = sc.ScenarioConfig(target_h_mm=1.0, branch_length_mm=4.0, outlet_length_mm=4.0,
                            T_s=0.1, snapshot_stride=2, n_train=4, n_t_pod=3, n_max=4)
    return fom.setup_problem(cfg)


@pytest.fixture
def rng():
    return np.random.default_rng(7)


@pytest.fixture(scope="session")
def tiny_offline(bifurcation_problem):
    """Controlled trajectories and snapshot dicts on the coarse bifurcation."""
    from ocprom import rom
    from ocprom.supremizer import SupremizerSolver
    prob = bifurcation_problem
    sup = SupremizerSolver(prob.space, prob.ops)
    trajs = [fom.solve_ocp(prob, mu) for mu in sc.sample_training_set(prob.cfg)]
    snaps = [rom.trajectory_snapshots(prob, tr, sup) for tr in trajs]
    return trajs, snaps


@pytest.fixture(scope="session")
def tiny_rom(bifurcation_problem, tiny_offline):
    from ocprom import pod, rom
    prob = bifurcation_problem
    cfg = prob.cfg
    basis = pod.nested_pod(tiny_offline[1], prob.ops, cfg.n_t_pod, cfg.n_max)
    return basis, rom.project_operators(prob, basis)


# --------------------------------------------------------------------------
# acceptance report: one line per criterion, repeated in the terminal summary

ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[n])

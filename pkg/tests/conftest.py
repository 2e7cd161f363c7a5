import numpy as np
import pytest

from mmcf_lab.barriers import BarrierSpec, cap_field, horosphere_field
from mmcf_lab.flow_solver import FlowConfig, evolve
from mmcf_lab.sphere_grid import GridSpec, build_grid


@pytest.fixture(scope="session")
def grid_n1():
    return build_grid(GridSpec(n=1, resolution=257, theta_max=1.4))


@pytest.fixture(scope="session")
def grid_axisym():
    return build_grid(GridSpec(n=2, resolution=129, theta_max=1.2,
                               mode="axisymmetric"))


@pytest.fixture(scope="session")
def grid_full():
    return build_grid(GridSpec(n=2, resolution=(65, 48), theta_max=1.2))


def make_horosphere_trajectory(resolution, snap, sigma=0.5, theta_max=1.2,
                               n=2, mode="axisymmetric", c0=1.0, n_snaps=6):
    grid = build_grid(GridSpec(n=n, resolution=resolution,
                               theta_max=theta_max, mode=mode))
    v0 = horosphere_field(c0, 0.0, sigma, grid)
    cfg = FlowConfig(sigma=sigma, T=n_snaps * snap, snapshot_dt=snap,
                     boundary="prescribed")
    return evolve(v0, cfg, grid,
                  boundary_values=lambda t: horosphere_field(c0, t, sigma, grid))


def make_perturbed_cap_trajectory(resolution, snap, sigma=0.5, theta_max=1.2,
                                  amp=0.05, n_snaps=6):
    grid = build_grid(GridSpec(n=2, resolution=resolution,
                               theta_max=theta_max, mode="axisymmetric"))
    spec = BarrierSpec(kind="cap", n=2, sigma=sigma, r=1.0)
    vc, _ = cap_field(spec, grid)
    th, tc, lam = grid.theta, 0.55, 0.18
    bump = amp * (np.exp(-((th - tc) / lam) ** 2)
                  + np.exp(-((th + tc) / lam) ** 2))
    cfg = FlowConfig(sigma=sigma, T=n_snaps * snap, snapshot_dt=snap)
    return evolve(vc + bump, cfg, grid)


@pytest.fixture(scope="session")
def horosphere_traj_axisym():
    return make_horosphere_trajectory(129, 0.002)


@pytest.fixture(scope="session")
def hemisphere_traj_n1(grid_n1):
    cfg = FlowConfig(sigma=0.0, T=0.05, snapshot_dt=0.01)
    return evolve(np.zeros(grid_n1.num_nodes), cfg, grid_n1)

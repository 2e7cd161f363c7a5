import numpy as np
import pytest

from mmcf_lab.barriers import (
    BarrierError,
    BarrierSpec,
    cap_field,
    comparison_check,
    cone_field,
    hemisphere_field,
    horosphere_field,
)
from mmcf_lab.flow_solver import FlowConfig, evolve
from mmcf_lab.geometry import curvature, embed
from mmcf_lab.sphere_grid import GridSpec, build_grid


def test_cap_degenerates_to_hemisphere(grid_n1):
    v, mask = cap_field(BarrierSpec(kind="cap", n=1, sigma=0.0, r=1.5), grid_n1)
    assert np.max(np.abs(v - np.log(1.5))) < 1e-14
    assert mask.include.all()


def test_cap_pole_value(grid_axisym):
    # point (0, 0, 1/2) lies on the sphere of radius 1 centered at (0, 0, -1/2)
    v, _ = cap_field(BarrierSpec(kind="cap", n=2, sigma=1.0, r=1.0), grid_axisym)
    assert np.exp(v[0]) == pytest.approx(0.5, abs=1e-14)


@pytest.mark.parametrize("sigma,r", [(0.5, 1.0), (1.5, 2.0), (-0.8, 1.0)])
def test_cap_has_constant_mean_curvature(grid_axisym, sigma, r):
    v, _ = cap_field(BarrierSpec(kind="cap", n=2, sigma=sigma, r=r), grid_axisym)
    st = curvature(v, grid_axisym)
    inner = st.mask.interior.copy()
    inner[-4:] = False
    assert np.max(np.abs(st.H[inner] - sigma)) < 50.0 * grid_axisym.h**2
    assert np.max(np.abs(st.A2[inner] - sigma**2 / 2.0)) < 100.0 * grid_axisym.h**2


def test_cap_curvature_refinement_order():
    errs = []
    for res in (129, 257):
        grid = build_grid(GridSpec(n=2, resolution=res, theta_max=1.2,
                                   mode="axisymmetric"))
        v, _ = cap_field(BarrierSpec(kind="cap", n=2, sigma=0.8, r=1.0), grid)
        st = curvature(v, grid)
        inner = st.mask.interior.copy()
        inner[grid.theta > 1.1] = False
        errs.append(np.max(np.abs(st.H[inner] - 0.8)))
    assert np.log2(errs[0] / errs[1]) >= 1.8


def test_horosphere_field_values(grid_n1):
    v = horosphere_field(2.0, 0.0, 0.5, grid_n1)
    pole = np.argmin(grid_n1.theta)
    assert v[pole] == pytest.approx(np.log(2.0))
    # strictly increasing in t while sigma < n
    v_later = horosphere_field(2.0, 0.3, 0.5, grid_n1)
    assert np.all(v_later > v)
    x = embed(horosphere_field(2.0, 0.7, 0.5, grid_n1), grid_n1)
    assert np.max(np.abs(x[:, -1] - 2.0 * np.exp(0.5 * 0.7))) < 1e-12


def test_horosphere_satisfies_flow_to_second_order():
    from mmcf_lab.flow_solver import rhs

    errs = []
    for res in (129, 257):
        grid = build_grid(GridSpec(n=1, resolution=res, theta_max=1.3))
        cfg = FlowConfig(sigma=0.4, T=1.0)
        r = rhs(horosphere_field(1.0, 0.0, 0.4, grid), grid, cfg)
        inner = grid.theta <= 1.2  # fixed physical window across resolutions
        errs.append(np.max(np.abs(r[inner] - (1.0 - 0.4))))
    assert np.log2(errs[0] / errs[1]) >= 1.8


def test_hemisphere_field_validates():
    with pytest.raises(BarrierError):
        hemisphere_field(None, radius=-1.0)


def test_barrier_spec_validation():
    with pytest.raises(BarrierError):
        BarrierSpec(kind="torus", n=1)
    with pytest.raises(BarrierError):
        BarrierSpec(kind="cap", n=1, sigma=1.0)
    with pytest.raises(BarrierError):
        BarrierSpec(kind="horosphere", n=1, c0=-2.0)


def test_comparison_two_horospheres(grid_n1):
    c1, c2, sigma = 1.0, 1.5, 0.3
    cfg = FlowConfig(sigma=sigma, T=0.1, snapshot_dt=0.02, boundary="prescribed")
    t1 = evolve(horosphere_field(c1, 0.0, sigma, grid_n1), cfg, grid_n1,
                boundary_values=lambda t: horosphere_field(c1, t, sigma, grid_n1),
                record_states=False)
    t2 = evolve(horosphere_field(c2, 0.0, sigma, grid_n1), cfg, grid_n1,
                boundary_values=lambda t: horosphere_field(c2, t, sigma, grid_n1),
                record_states=False)
    rep = comparison_check(t1, t2)
    assert rep.passed
    # exact translation law: the separation stays log(c2/c1) at all times
    assert rep.margin == pytest.approx(np.log(c2 / c1), abs=2e-3)


def test_comparison_identical_trajectories(grid_n1):
    cfg = FlowConfig(sigma=0.0, T=0.05, snapshot_dt=0.01)
    t1 = evolve(np.zeros(grid_n1.num_nodes), cfg, grid_n1, record_states=False)
    t2 = evolve(np.zeros(grid_n1.num_nodes), cfg, grid_n1, record_states=False)
    rep = comparison_check(t1, t2)
    assert rep.margin == 0.0
    assert rep.passed


def test_cap_below_horosphere_order_preserved(grid_n1):
    sigma = 0.5
    v_cap, _ = cap_field(BarrierSpec(kind="cap", n=1, sigma=sigma, r=0.8), grid_n1)
    v_horo = horosphere_field(2.0, 0.0, sigma, grid_n1)
    assert np.all(v_cap <= v_horo)
    cfg = FlowConfig(sigma=sigma, T=1.0, snapshot_dt=0.25)
    t_lo = evolve(v_cap, cfg, grid_n1, record_states=False)
    t_hi = evolve(v_horo, cfg, grid_n1, record_states=False)
    rep = comparison_check(t_lo, t_hi)
    assert rep.passed


def test_trajectory_stays_between_cap_barriers(grid_n1):
    # radial height of any flow started between two stationary caps stays
    # between the caps' own radial bounds
    sigma = 0.4
    lo, _ = cap_field(BarrierSpec(kind="cap", n=1, sigma=sigma, r=0.7), grid_n1)
    hi, _ = cap_field(BarrierSpec(kind="cap", n=1, sigma=sigma, r=1.8), grid_n1)
    rng = np.random.default_rng(5)
    mid = 0.5 * (lo + hi) + 0.05 * np.cos(3.0 * grid_n1.coords)
    assert np.all(mid > lo) and np.all(mid < hi)
    cfg = FlowConfig(sigma=sigma, T=0.5, snapshot_dt=0.1)
    traj = evolve(mid, cfg, grid_n1, record_states=False)
    t_lo = evolve(lo, cfg, grid_n1, record_states=False)
    t_hi = evolve(hi, cfg, grid_n1, record_states=False)
    assert comparison_check(t_lo, traj).passed
    assert comparison_check(traj, t_hi).passed


def test_cone_field_is_lipschitz(grid_n1):
    v = cone_field(grid_n1, slope=1.3)
    slopes = np.abs(np.diff(v)) / grid_n1.h
    assert np.max(slopes) <= 1.3 + 1e-12

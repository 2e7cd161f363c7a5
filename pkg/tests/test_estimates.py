import numpy as np
import pytest

from conftest import make_horosphere_trajectory, make_perturbed_cap_trajectory
from mmcf_lab.barriers import BarrierSpec, cap_field, cone_field, horosphere_field
from mmcf_lab.flow_solver import FlowConfig, evolve, mollify
from mmcf_lab.estimates import (
    CutoffParams,
    EstimateError,
    check_identity,
    check_inequality,
    heat_operator_numeric,
    interior_selector,
    matched_time_indices,
    verify_curvature_bounds,
    verify_gradient_bound,
)
from mmcf_lab.sphere_grid import GridSpec, build_grid


# ----------------------------------------------------------------------
# heat operator


def test_heat_operator_constant_field(hemisphere_traj_n1):
    traj = hemisphere_traj_n1
    series = [np.full(traj.grid.num_nodes, 4.2) for _ in traj.times]
    out = heat_operator_numeric(series, traj, 2)
    sel = interior_selector(traj.grid, traj.mask)
    assert np.max(np.abs(out[sel])) <= 1e-10


def test_heat_operator_stationary_radial_potential(hemisphere_traj_n1):
    # static flow: the operator reduces to -Lap cosh r = -n cosh r
    traj = hemisphere_traj_n1
    series = [st.cosh_r for st in traj.states]
    out = heat_operator_numeric(series, traj, 2)
    sel = interior_selector(traj.grid, traj.mask, edge_margin=0.15)
    target = -traj.grid.n * traj.states[2].cosh_r
    assert np.max(np.abs(out[sel] - target[sel])) < 60.0 * traj.grid.h**2


def test_heat_operator_linear_in_time(hemisphere_traj_n1):
    traj = hemisphere_traj_n1
    base = np.cos(traj.grid.coords)
    series = [t * base for t in traj.times]
    out = heat_operator_numeric(series, traj, 2)
    sel = interior_selector(traj.grid, traj.mask, edge_margin=0.15)
    # d/dt of t*q is q; the stationary surface contributes -t * Lap q
    from mmcf_lab.geometry import surface_laplace_beltrami
    lap = surface_laplace_beltrami(base, traj.states[2], traj.grid, traj.mask)
    target = base - traj.times[2] * lap
    assert np.max(np.abs(out[sel] - target[sel])) < 1e-8


def test_heat_operator_needs_neighbors(hemisphere_traj_n1):
    series = [st.cosh_r for st in hemisphere_traj_n1.states]
    with pytest.raises(EstimateError):
        heat_operator_numeric(series, hemisphere_traj_n1, 0)


# ----------------------------------------------------------------------
# identities


def test_identity_unknown_name(horosphere_traj_axisym):
    with pytest.raises(EstimateError):
        check_identity("coshr_typo", horosphere_traj_axisym)


def test_identity_needs_snapshots(grid_n1):
    cfg = FlowConfig(sigma=0.0, T=0.01, snapshot_dt=0.01)
    short = evolve(np.zeros(grid_n1.num_nodes), cfg, grid_n1)
    with pytest.raises(EstimateError):
        check_identity("coshr", short)


def test_simons_hemisphere_exactly_flat(hemisphere_traj_n1):
    rep = check_identity("simons", hemisphere_traj_n1)
    assert rep.max_residual <= 1e-10


def test_simons_cap_umbilic_cancellation():
    # on the constant-curvature cap both sides cancel to zero; the residual
    # is pure discretization and refines at second order
    resids = []
    for res in (129, 257):
        grid = build_grid(GridSpec(n=2, resolution=res, theta_max=1.2,
                                   mode="axisymmetric"))
        v, _ = cap_field(BarrierSpec(kind="cap", n=2, sigma=1.0, r=1.0), grid)
        cfg = FlowConfig(sigma=1.0, T=0.006, snapshot_dt=0.002)
        traj = evolve(v, cfg, grid)
        rep = check_identity("simons", traj, edge_margin=0.1)
        resids.append(rep.max_residual)
    assert resids[1] < 1e-3
    assert resids[0] / resids[1] >= 2.5


def test_identity_suite_refines_on_horosphere():
    coarse = make_horosphere_trajectory(129, 0.002)
    fine = make_horosphere_trajectory(257, 0.0005)
    ia, ib = matched_time_indices(coarse, fine)
    edge = 8 * coarse.grid.h
    for name in ("coshr", "nu_h_support", "nu_e_support", "A_evolution"):
        rc = check_identity(name, coarse, time_indices=ia, edge_margin=edge)
        rf = check_identity(name, fine, time_indices=ib, edge_margin=edge)
        assert rc.max_residual / rf.max_residual >= 2.5, name
        assert rf.scaled_residual <= 1e-2, name


def test_identity_full_grid_rejected_for_tensor_checks(grid_full):
    cfg = FlowConfig(sigma=0.0, T=0.006, snapshot_dt=0.002)
    traj = evolve(np.zeros(grid_full.num_nodes), cfg, grid_full)
    with pytest.raises(EstimateError):
        check_identity("simons", traj)
    rep = check_identity("coshr", traj)  # scalar checks do run on full grids
    assert rep.scaled_residual < 1e-2  # discretization-level on the hemisphere


def test_identity_requires_nonnegative_sigma(grid_n1):
    cfg = FlowConfig(sigma=-0.5, T=0.006, snapshot_dt=0.002)
    traj = evolve(np.zeros(grid_n1.num_nodes), cfg, grid_n1)
    with pytest.raises(EstimateError):
        check_identity("coshr", traj)


# ----------------------------------------------------------------------
# inequalities


def test_eta_cutoff_value_at_radius():
    # the space-time cutoff at t = 0 on the cylinder r = R equals
    # -sigma/(n + sigma) by construction
    from mmcf_lab.estimates import _eta_series

    traj = make_horosphere_trajectory(129, 0.002)
    grid = traj.grid
    node = 60
    params = CutoffParams(cosh_R=float(1.0 / grid.y[node]), theta=0.5,
                          T=traj.times[-1], sigma=0.5, n=2)
    eta0 = _eta_series(traj, params)[0]
    assert eta0[node] == pytest.approx(-0.5 / 2.5, abs=1e-12)


def test_eta_margin_hemisphere(hemisphere_traj_n1):
    # the hemisphere is caloric for the cutoff: margin is zero up to
    # discretization noise
    params = CutoffParams(cosh_R=3.0, theta=0.5,
                          T=hemisphere_traj_n1.times[-1], sigma=0.0, n=1)
    rep = check_inequality("eta_spacetime", hemisphere_traj_n1, params,
                           edge_margin=0.15)
    ident = check_identity("coshr", hemisphere_traj_n1, edge_margin=0.15)
    assert rep.worst_violation <= 10.0 * max(ident.max_residual, 1e-12)


def test_xi_inequality_on_cap():
    traj = make_perturbed_cap_trajectory(129, 0.002, amp=0.0)
    params = CutoffParams.from_trajectory(traj, cosh_R=2.4, theta=0.6)
    rep = check_inequality("xi", traj, params)
    ident = check_identity("coshr", traj)
    assert rep.worst_violation <= 10.0 * max(ident.max_residual, 1e-12)
    assert not rep.skipped


def test_a_phi_skipped_at_sigma_zero(hemisphere_traj_n1):
    params = CutoffParams(cosh_R=3.0, theta=0.5,
                          T=hemisphere_traj_n1.times[-1], sigma=0.0, n=1,
                          k=1.0, c0=1.0)
    rep = check_inequality("A_phi", hemisphere_traj_n1, params)
    assert rep.skipped
    assert "sigma = 0" in rep.note


def test_a_phi_holds_on_steep_cap():
    grid = build_grid(GridSpec(n=2, resolution=129, theta_max=1.2,
                               mode="axisymmetric"))
    v, _ = cap_field(BarrierSpec(kind="cap", n=2, sigma=1.5, r=1.0), grid)
    cfg = FlowConfig(sigma=1.5, T=0.012, snapshot_dt=0.002)
    traj = evolve(v, cfg, grid)
    params = CutoffParams.from_trajectory(traj, cosh_R=2.4, theta=0.6)
    rep = check_inequality("A_phi", traj, params)
    assert not rep.skipped  # |A|^2 = sigma^2/2 = 1.125 >= 1 on the cap
    assert rep.worst_violation == 0.0


def test_cutoff_params_from_trajectory_invariants():
    traj = make_horosphere_trajectory(129, 0.002)
    params = CutoffParams.from_trajectory(traj, cosh_R=2.4, theta=0.6)
    grid = traj.grid
    region = (1.0 / grid.y <= 2.4) & traj.mask.include
    sup_u2 = max(float(np.max(1.0 / st.support_e[region] ** 2))
                 for st in traj.states)
    assert params.k * sup_u2 == pytest.approx(0.5, abs=1e-12)
    # c0 lower-bounds phi = u^2/(1 - k u^2) pointwise
    for st in traj.states:
        u2 = 1.0 / st.support_e[region] ** 2
        phi = u2 / (1.0 - params.k * u2)
        assert params.c0 <= np.min(phi) + 1e-12


def test_cutoff_params_validation():
    with pytest.raises(EstimateError):
        CutoffParams(cosh_R=0.5, theta=0.5, T=1.0, sigma=0.0, n=1)
    with pytest.raises(EstimateError):
        CutoffParams(cosh_R=2.0, theta=1.5, T=1.0, sigma=0.0, n=1)
    with pytest.raises(EstimateError):
        CutoffParams(cosh_R=2.0, theta=0.5, T=1.0, sigma=-0.1, n=1)
    p = CutoffParams(cosh_R=1.5, theta=0.5, T=1.0, sigma=0.0, n=2)
    with pytest.raises(EstimateError):
        p.validate_for_second_order()  # cosh R < n
    steep = CutoffParams(cosh_R=1.2, theta=0.9, T=2.0, sigma=0.9, n=1)
    with pytest.raises(EstimateError):
        steep.validate_for_gradient_bound()


# ----------------------------------------------------------------------
# bounds


def test_gradient_bound_hemisphere(hemisphere_traj_n1):
    params = CutoffParams(cosh_R=3.0, theta=0.5,
                          T=hemisphere_traj_n1.times[-1], sigma=0.0, n=1)
    rep = verify_gradient_bound(hemisphere_traj_n1, params)
    assert rep.passed
    # w = 1 identically, the bound holds with full slack
    assert all(l == pytest.approx(1.0) for l in rep.lhs if l is not None)


def test_gradient_bound_horosphere_slack():
    traj = make_horosphere_trajectory(129, 0.01, sigma=0.5)
    params = CutoffParams.from_trajectory(traj, cosh_R=2.4, theta=0.7)
    params.validate_for_gradient_bound()
    rep = verify_gradient_bound(traj, params)
    assert rep.passed
    assert rep.max_value < 1.0  # strict slack e^{(n+2)t}


def test_gradient_bound_shift_invariance_at_sigma_zero(grid_n1):
    # adding a constant to v leaves w unchanged; at sigma = 0 the flow and
    # the bound shift together, so the lhs series is literally identical
    cfg = FlowConfig(sigma=0.0, T=0.05, snapshot_dt=0.01)
    t1 = evolve(np.zeros(grid_n1.num_nodes), cfg, grid_n1)
    t2 = evolve(np.full(grid_n1.num_nodes, 0.7), cfg, grid_n1)
    params = CutoffParams(cosh_R=3.0, theta=0.5, T=0.05, sigma=0.0, n=1)
    r1 = verify_gradient_bound(t1, params)
    r2 = verify_gradient_bound(t2, params)
    assert r1.lhs == r2.lhs


def test_curvature_bound_cap_closed_form():
    sigma = 1.5
    grid = build_grid(GridSpec(n=2, resolution=129, theta_max=1.2,
                               mode="axisymmetric"))
    v, _ = cap_field(BarrierSpec(kind="cap", n=2, sigma=sigma, r=1.0), grid)
    cfg = FlowConfig(sigma=sigma, T=0.05, snapshot_dt=0.01)
    traj = evolve(v, cfg, grid)
    params = CutoffParams.from_trajectory(traj, cosh_R=2.4, theta=0.5)
    rep = verify_curvature_bounds(traj, params, m=0)
    # |A|^2 = sigma^2/n is constant: C_emp(t) = |A|^2 t/(1+t) (1-theta)^2/sup u^4
    for t, c in zip(rep.times, rep.rhs):
        sup_u4 = rep.factors["final_sup_u4"]
        predicted = (sigma**2 / 2.0) * (t / (1.0 + t)) * (1.0 - 0.5) ** 2 / sup_u4
        assert c == pytest.approx(predicted, rel=1e-3)


def test_curvature_bound_hemisphere_zero(hemisphere_traj_n1):
    params = CutoffParams(cosh_R=3.0, theta=0.5,
                          T=hemisphere_traj_n1.times[-1], sigma=0.0, n=1)
    rep = verify_curvature_bounds(hemisphere_traj_n1, params, m=0)
    assert rep.max_value == 0.0


def test_curvature_bound_higher_derivative_modes():
    traj = make_perturbed_cap_trajectory(129, 0.002)
    params = CutoffParams.from_trajectory(traj, cosh_R=2.4, theta=0.6)
    rep1 = verify_curvature_bounds(traj, params, m=1)
    assert np.isfinite(rep1.max_value)
    with pytest.raises(EstimateError):
        verify_curvature_bounds(traj, params, m=2)  # curve-only
    # m = 2 runs on curves
    grid = build_grid(GridSpec(n=1, resolution=257, theta_max=1.4))
    v0 = mollify(cone_field(grid, 1.0), 6 * grid.h, grid)
    cfg = FlowConfig(sigma=0.0, T=0.05, snapshot_dt=0.01)
    t1 = evolve(v0, cfg, grid)
    p1 = CutoffParams(cosh_R=3.0, theta=0.5, T=0.05, sigma=0.0, n=1)
    rep2 = verify_curvature_bounds(t1, p1, m=2)
    assert np.isfinite(rep2.max_value)


def test_reports_serialize(horosphere_traj_axisym):
    rep = check_identity("coshr", horosphere_traj_axisym)
    d = rep.to_dict()
    assert d["name"] == "coshr"
    assert isinstance(d["max_residual"], float)
    params = CutoffParams.from_trajectory(horosphere_traj_axisym,
                                          cosh_R=2.4, theta=0.6)
    rep2 = check_inequality("eta_spacetime", horosphere_traj_axisym, params)
    assert isinstance(rep2.to_dict()["margin"], float)

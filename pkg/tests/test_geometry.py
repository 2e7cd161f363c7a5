import numpy as np
import pytest

from mmcf_lab.barriers import BarrierSpec, cap_field, horosphere_field
from mmcf_lab.geometry import (
    GeometryError,
    connection_correction,
    cosh_radial,
    curvature,
    embed,
    reflect,
    slope_and_normal,
    surface_laplace_beltrami,
)
from mmcf_lab.sphere_grid import GridSpec, build_grid


def _interior(grid, skip=3):
    inner = np.ones(grid.num_nodes, dtype=bool)
    if grid.mode == "full" and grid.n == 2:
        inner[-skip * grid.n_phi:] = False
    else:
        inner[:skip] = inner[-skip:] = False
        if grid.mode == "axisymmetric":
            inner[:skip] = True
    return inner


# ----------------------------------------------------------------------
# embedding, slope, normals


def test_embed_identity_and_scaling(grid_n1):
    x = embed(np.zeros(grid_n1.num_nodes), grid_n1)
    assert np.allclose(x, grid_n1.z, atol=1e-15)
    x2 = embed(np.full(grid_n1.num_nodes, np.log(2.0)), grid_n1)
    assert np.max(np.abs(np.linalg.norm(x2, axis=1) - 2.0)) < 1e-14


def test_embed_horosphere_has_constant_height(grid_axisym):
    v = horosphere_field(0.7, 0.0, 0.0, grid_axisym)
    x = embed(v, grid_axisym)
    assert np.max(np.abs(x[:, -1] - 0.7)) < 1e-13


def test_slope_and_normal_constant(grid_n1):
    w, nu = slope_and_normal(np.full(grid_n1.num_nodes, 1.3), grid_n1)
    assert np.max(np.abs(w - 1.0)) == 0.0
    assert np.max(np.abs(nu - grid_n1.z)) < 1e-15


def test_slope_and_normal_horosphere():
    # w = 1/y and nu_E = e for the flat horizontal plane; the grid is laid
    # out so that s = pi/3 (y = 1/2, w = 2) is exactly a node
    grid = build_grid(GridSpec(n=1, resolution=241, theta_max=2.0 * np.pi / 5.0))
    v = horosphere_field(1.0, 0.0, 0.0, grid)
    w, nu = slope_and_normal(v, grid)
    inner = _interior(grid)
    assert np.max(np.abs(w[inner] - 1.0 / grid.y[inner])) < 5e-2
    node = 220
    assert grid.y[node] == pytest.approx(0.5, abs=1e-12)
    assert w[node] == pytest.approx(2.0, abs=5e-4)
    e = np.array([0.0, 1.0])
    assert np.max(np.abs(nu[node] - e)) < 5e-4


def test_support_is_positive_for_lipschitz_fields(grid_n1):
    rng = np.random.default_rng(3)
    coeff = rng.normal(scale=0.1, size=4)
    s = grid_n1.coords
    v = sum(c * np.cos((k + 1) * s) for k, c in enumerate(coeff))
    w, nu = slope_and_normal(v, grid_n1)
    support = np.exp(v) / w
    assert np.all(support > 0.0)


# ----------------------------------------------------------------------
# scalar utilities


def test_cosh_radial_values():
    assert cosh_radial(np.array([0.0, 2.0])) == pytest.approx(1.0)
    assert cosh_radial(np.array([3.0, 4.0])) == pytest.approx(1.25)
    with pytest.raises(GeometryError):
        cosh_radial(np.array([1.0, 0.0]))


def test_cosh_radial_hemisphere(grid_n1):
    x = embed(np.zeros(grid_n1.num_nodes), grid_n1)
    assert np.max(np.abs(cosh_radial(x) - 1.0 / grid_n1.y)) < 1e-12


def test_connection_correction_cases():
    e = np.array([0.0, 0.0, 1.0])
    ex = np.array([1.0, 0.0, 0.0])
    ey = np.array([0.0, 1.0, 0.0])
    x1 = np.array([0.0, 0.0, 1.0])
    # horizontal orthogonal pair: all three terms vanish
    assert np.allclose(connection_correction(ex, ey, x1), 0.0)
    # X = Y = e at height 1: (e - e - e)/1 = -e
    assert np.allclose(connection_correction(e, e, x1), -e)
    # X = Y horizontal unit at height 2: only <X,Y> e / x survives
    x2 = np.array([0.0, 0.0, 2.0])
    assert np.allclose(connection_correction(ex, ex, x2), e / 2.0)


def test_reflect_properties(grid_n1):
    x = embed(np.zeros(grid_n1.num_nodes), grid_n1)
    assert np.max(np.abs(reflect(x) - x)) < 1e-15
    assert np.allclose(reflect(np.array([0.0, 2.0])), [0.0, 0.5])
    pts = embed(horosphere_field(1.3, 0.0, 0.0, grid_n1), grid_n1)
    assert np.max(np.abs(reflect(reflect(pts)) - pts)) <= 1e-14
    with pytest.raises(GeometryError):
        reflect(np.zeros(2))


# ----------------------------------------------------------------------
# curvature pipeline


def test_hemisphere_flat_in_hyperbolic_metric(grid_n1, grid_axisym, grid_full):
    for grid in (grid_n1, grid_axisym, grid_full):
        st = curvature(np.zeros(grid.num_nodes), grid)
        assert np.max(np.abs(st.H[st.mask.interior])) == 0.0
        assert np.max(np.abs(st.kappa_E[st.mask.interior] + 1.0)) == 0.0


def test_horosphere_umbilic(grid_axisym):
    st = curvature(horosphere_field(1.0, 0.0, 0.0, grid_axisym), grid_axisym)
    inner = _interior(grid_axisym)
    assert np.max(np.abs(st.H[inner] - 2.0)) < 1e-4
    assert np.max(np.abs(st.kappa_H[inner] - 1.0)) < 1e-4
    assert np.max(np.abs(st.A2[inner] - 2.0)) < 2e-4


def test_hemisphere_curvature_refines():
    # the mean curvature of e^v z with v = log(cap rho), sigma=0.3 tests the
    # full pipeline; refinement order of max|H - sigma| must be >= 1.8
    errs = []
    for res in (129, 257):
        grid = build_grid(GridSpec(n=1, resolution=res, theta_max=1.3))
        v, _ = cap_field(BarrierSpec(kind="cap", n=1, sigma=0.3, r=1.0), grid)
        st = curvature(v, grid)
        inner = _interior(grid, skip=4)
        errs.append(np.max(np.abs(st.H[inner] - 0.3)))
    assert np.log2(errs[0] / errs[1]) >= 1.8


def test_state_internal_consistency(grid_axisym):
    v = horosphere_field(1.0, 0.0, 0.5, grid_axisym) + 0.05 * np.cos(
        3.0 * grid_axisym.theta)
    st = curvature(v, grid_axisym)
    sel = st.mask.include
    # eigenvalue-sum route equals the metric-trace route
    assert np.max(np.abs(st.H[sel] - st.H_trace[sel])) < 1e-10
    # unit normal
    assert np.max(np.abs(np.linalg.norm(st.nu_E[sel], axis=1) - 1.0)) <= 1e-12
    # the two support routes and the Euclidean/hyperbolic support relation
    dot = np.einsum("na,na->n", st.nu_E, st.x)
    assert np.max(np.abs(dot[sel] - st.support_e[sel])) < 1e-10
    assert np.max(np.abs(st.support_e[sel]
                         - st.height[sel] * st.support_h[sel])) < 1e-10
    assert np.max(np.abs(st.nu_dot_z[sel] - 1.0 / st.w[sel])) <= 1e-13
    # Cauchy-Schwarz on the principal curvatures
    assert np.all(st.A2[sel] >= st.H[sel] ** 2 / grid_axisym.n - 1e-12)
    assert st.min_support > 0.0


def test_rotation_commutes_with_curvature(grid_full):
    rng = np.random.default_rng(11)
    pole, blk = grid_full.rings(np.zeros(grid_full.num_nodes))
    prof = 0.2 * np.exp(-((grid_full._theta_rings[1:] - 0.5) / 0.2) ** 2)
    wave = np.cos(3.0 * grid_full._phi)
    blk = prof[:, None] * wave[None, :]
    v = grid_full.from_rings(0.1, blk)

    shift = 5  # rotate by 5 azimuthal spacings
    blk_rot = np.roll(blk, shift, axis=1)
    v_rot = grid_full.from_rings(0.1, blk_rot)

    st = curvature(v, grid_full)
    st_rot = curvature(v_rot, grid_full)
    for field in ("H", "A2", "w", "support_e"):
        a = getattr(st, field)
        b = getattr(st_rot, field)
        _, blk_a = grid_full.rings(a)
        _, blk_b = grid_full.rings(b)
        assert np.max(np.abs(np.roll(blk_a, shift, axis=1) - blk_b)) < 1e-10


def test_degenerate_input_raises(grid_n1):
    bad = np.zeros(grid_n1.num_nodes)
    bad[10] = np.inf
    with pytest.raises(GeometryError):
        curvature(bad, grid_n1)


# ----------------------------------------------------------------------
# surface Laplace-Beltrami


def test_lb_exact_on_constants(grid_n1, grid_axisym, grid_full):
    for grid in (grid_n1, grid_axisym, grid_full):
        st = curvature(np.zeros(grid.num_nodes), grid)
        lap = surface_laplace_beltrami(np.full(grid.num_nodes, 2.2), st, grid)
        assert np.max(np.abs(lap)) == 0.0


@pytest.mark.parametrize("maker", [
    lambda: build_grid(GridSpec(n=1, resolution=257, theta_max=1.3)),
    lambda: build_grid(GridSpec(n=2, resolution=129, theta_max=1.2,
                                mode="axisymmetric")),
    lambda: build_grid(GridSpec(n=2, resolution=(65, 48), theta_max=1.2)),
])
def test_lb_hemisphere_radial_distance(maker):
    # on the unit hemisphere the distance-to-axis potential satisfies
    # Lap cosh r = n cosh r
    grid = maker()
    st = curvature(np.zeros(grid.num_nodes), grid)
    lap = surface_laplace_beltrami(st.cosh_r.copy(), st, grid)
    inner = _interior(grid, skip=5)
    err = np.max(np.abs(lap[inner] - grid.n * st.cosh_r[inner]))
    assert err < 60.0 * grid.h**2


def test_lb_two_route_cross_validation(grid_n1):
    # On the horosphere the surface value of the ambient height is constant,
    # so the intrinsic Laplacian must vanish; the ambient-derivative route
    # (conformal decomposition of the heat operator) gives the same answer.
    v = horosphere_field(1.0, 0.0, 0.0, grid_n1)
    st = curvature(v, grid_n1)
    f = st.height.copy()
    lap = surface_laplace_beltrami(f, st, grid_n1)
    inner = _interior(grid_n1, skip=5)

    # Euclidean-form heat operator for f = x_{n+1}: grad_E f = e everywhere,
    # Hessian 0, so (d/dt - Lap) f = x((n-2) + 2 nu_vert^2 - sigma nu_vert)
    # and d/dt f = (H - sigma) x nu_vert; here sigma = 0.
    n = grid_n1.n
    rate = st.H * st.height * st.nu_vertical
    heat = st.height * ((n - 2.0) + 2.0 * st.nu_vertical**2)
    lap_euclid = rate - heat
    assert np.max(np.abs(lap[inner] - lap_euclid[inner])) < 50.0 * grid_n1.h**2
    assert np.max(np.abs(lap[inner])) < 50.0 * grid_n1.h**2


def test_lb_axisym_matches_full():
    ga = build_grid(GridSpec(n=2, resolution=65, theta_max=1.2,
                             mode="axisymmetric"))
    gf = build_grid(GridSpec(n=2, resolution=(65, 32), theta_max=1.2))
    prof_v = 0.1 * np.cos(2.0 * ga.theta)
    v_full = 0.1 * np.cos(2.0 * gf.theta)
    f_prof = np.sin(ga.theta) ** 2
    f_full = np.sin(gf.theta) ** 2
    st_a = curvature(prof_v, ga)
    st_f = curvature(v_full, gf)
    lap_a = surface_laplace_beltrami(f_prof, st_a, ga)
    lap_f = surface_laplace_beltrami(f_full, st_f, gf)
    assert abs(lap_f[0] - lap_a[0]) <= 1e-10
    for ring in range(ga.num_nodes - 2):
        row = 1 + ring * gf.n_phi
        assert abs(lap_f[row] - lap_a[ring + 1]) <= 1e-10

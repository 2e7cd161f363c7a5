"""Numerical verification of the flow's evolution identities, pointwise
differential inequalities, and interior bounds along computed trajectories.

All parabolic checks compare a numerically evaluated heat operator
(d/dt - Laplace-Beltrami) against closed-form right sides taken from the
surface state.  The time derivative is the material derivative along the
normal flow: the radial parameterization moves points with an extra
tangential velocity v_t x^T, so the fixed-grid-label time difference is
corrected by the advection term v_t <grad q, x>_H = v_t (grad v . grad q)/w^2.
Without this correction the identity residuals stall at O(1) instead of
refining away.

Names of checks
---------------
identities:    coshr, nu_h_support, nu_e_support, simons, A_evolution
inequalities:  eta_spacetime, xi, A_phi
bounds:        gradient (interior slope bound), curvature (m = 0),
               higher derivatives (m >= 1)
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .flow_solver import Trajectory
from .geometry import surface_laplace_beltrami
from .sphere_grid import AXISYMMETRIC, FULL, Grid
from .surface_calculus import (
    ProfileMetric,
    grad_tensor_norm2,
    iterated_scalar_derivative_norm2,
    scalar_hessian,
    tensor_laplacian,
)

IDENTITY_NAMES = ("coshr", "nu_h_support", "nu_e_support", "simons", "A_evolution")
INEQUALITY_NAMES = ("eta_spacetime", "xi", "A_phi")


class EstimateError(ValueError):
    pass


# ----------------------------------------------------------------------
# report types


@dataclass
class ResidualReport:
    """Max-norm residual of an exact identity, with refinement metadata."""

    name: str
    max_residual: float
    scaled_residual: float
    scale: float
    per_time: list[dict]
    meta: dict
    tolerance: float | None = None
    passed: bool | None = None
    refinement: dict | None = None

    def to_dict(self) -> dict:
        return _plain(self.__dict__)


@dataclass
class MarginReport:
    """Worst margin of a pointwise inequality (margin = min of rhs - lhs)."""

    name: str
    margin: float
    worst_violation: float
    per_time: list
    meta: dict
    tolerance: float | None = None
    passed: bool | None = None
    skipped: bool = False
    note: str = ""

    def to_dict(self) -> dict:
        return _plain(self.__dict__)


@dataclass
class BoundReport:
    """Time series of an interior bound (lhs vs rhs, or an empirical
    constant) with factor breakdown."""

    name: str
    times: list[float]
    lhs: list
    rhs: list
    max_value: float
    factors: dict
    meta: dict
    passed: bool | None = None
    note: str = ""

    def to_dict(self) -> dict:
        return _plain(self.__dict__)


def _plain(obj):
    if isinstance(obj, dict):
        return {k: _plain(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_plain(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    return obj


# ----------------------------------------------------------------------
# cutoff parameters


@dataclass(frozen=True)
class CutoffParams:
    """Radius/time cutoff data shared by the inequality and bound checks.

    k is the curvature-weight constant (2 sup u^2)^{-1} and c0 the lower
    bound c0 <= |x|^{-2} <= phi, both taken over {cosh r <= cosh R} along
    the trajectory when built with :meth:`from_trajectory`.
    """

    cosh_R: float
    theta: float
    T: float
    sigma: float
    n: int
    k: float | None = None
    c0: float | None = None
    pole_margin: float = 0.1

    def __post_init__(self):
        if self.cosh_R < 1.0:
            raise EstimateError("cosh R must be >= 1")
        if not (0.0 < self.theta < 1.0):
            raise EstimateError("theta must lie in (0, 1)")
        if self.sigma < 0.0:
            raise EstimateError(
                "cutoff checks require sigma >= 0; reflect the flow first")

    @classmethod
    def from_trajectory(cls, traj: Trajectory, cosh_R: float, theta: float,
                        T: float | None = None, pole_margin: float = 0.1):
        grid = traj.grid
        region = (1.0 / grid.y) <= cosh_R
        region &= traj.mask.include
        if not region.any():
            raise EstimateError("cutoff region is empty on this grid")
        sup_u2 = 0.0
        min_c0 = np.inf
        for st in traj.states:
            u2 = (1.0 / st.support_e[region]) ** 2
            sup_u2 = max(sup_u2, float(u2.max()))
            min_c0 = min(min_c0, float(np.exp(-2.0 * st.v[region]).min()))
        return cls(
            cosh_R=cosh_R, theta=theta,
            T=T if T is not None else traj.times[-1],
            sigma=traj.cfg.sigma, n=grid.n,
            k=1.0 / (2.0 * sup_u2), c0=min_c0, pole_margin=pole_margin)

    def validate_for_gradient_bound(self) -> None:
        if self.sigma > 0.0:
            ratio = self.sigma / (self.n + self.sigma)
            floor = ratio * math.exp((self.n + self.sigma) * self.T)
            if self.cosh_R < floor:
                raise EstimateError(
                    f"cosh R = {self.cosh_R} too small for T = {self.T}: "
                    f"needs cosh R >= {floor:.6g}")
            theta_floor = floor / self.cosh_R
            if self.theta <= theta_floor:
                raise EstimateError(
                    f"theta must exceed {theta_floor:.6g} for this (R, T)")

    def validate_for_second_order(self) -> None:
        if self.cosh_R < self.n:
            raise EstimateError(
                f"second-order checks need cosh R >= n, got {self.cosh_R}")


# ----------------------------------------------------------------------
# shared helpers


def _require_modes(traj: Trajectory, tensor: bool) -> None:
    if tensor and traj.grid.mode == FULL and traj.grid.n == 2:
        raise EstimateError(
            "tensor-valued checks need a curve or axisymmetric grid")
    if traj.cfg.sigma < 0.0:
        raise EstimateError("checks assume sigma >= 0; reflect the flow first")


def interior_selector(grid: Grid, mask, margin: int = 4,
                      edge_margin: float | None = None) -> np.ndarray:
    """Included nodes at least ``margin`` stencil widths from the mask
    boundary (the pole counts as interior).

    ``edge_margin`` widens the excluded band to a fixed polar width in
    radians.  Refinement studies must pass the same physical value at
    every resolution, otherwise the evaluation region creeps toward the
    boundary as h shrinks and the one-sided-stencil error there hides the
    interior convergence order.
    """
    skip = margin
    if edge_margin is not None:
        skip = max(margin, int(math.ceil(edge_margin / grid.h)))
    sel = np.zeros(grid.num_nodes, dtype=bool)
    if grid.mode == AXISYMMETRIC or grid.n == 1:
        a, b = grid._interval(mask)
        lo = a if (grid.mode == AXISYMMETRIC and a == 0) else a + skip
        hi = b - skip
        if hi >= lo:
            sel[lo:hi + 1] = True
        return sel
    m = grid._ring_limit(mask)
    keep = max(0, m - skip)
    sel[0] = True
    rings = np.zeros((grid.n_theta - 1, grid.n_phi), dtype=bool)
    rings[:keep] = True
    sel[1:] = rings.ravel()
    return sel


def _advection_coefficient(state, qhat: np.ndarray) -> np.ndarray:
    """<grad q, x>_H for the surface gradient: (grad v . grad q) / w^2."""
    dot = np.einsum("nk,nk->n", state.grad_v, qhat)
    return dot / state.w**2


def _inner_h(state, grid: Grid, p_hat: np.ndarray, q_hat: np.ndarray) -> np.ndarray:
    """<grad p, grad q>_H = y^2 (p_hat . alpha q_hat)."""
    pq = np.einsum("nk,nk->n", p_hat, q_hat)
    vp = np.einsum("nk,nk->n", state.grad_v, p_hat)
    vq = np.einsum("nk,nk->n", state.grad_v, q_hat)
    return grid.y**2 * (pq - vp * vq / state.w**2)


def _drift_term(state, grid: Grid, s_hat: np.ndarray) -> np.ndarray:
    """<grad S, x_{n+1} e>_H = y (alpha S_hat) . (y grad v + e_frame)."""
    vs = np.einsum("nk,nk->n", state.grad_v, s_hat)
    alpha_s = s_hat - state.grad_v * (vs / state.w**2)[:, None]
    target = grid.y[:, None] * state.grad_v + grid.e_frame
    return grid.y * np.einsum("nk,nk->n", alpha_s, target)


def heat_operator_numeric(series, traj: Trajectory, ti: int) -> np.ndarray:
    """(d/dt - Laplacian) of a scalar surface quantity at snapshot ``ti``.

    ``series`` is the per-snapshot list/array of node fields.  The time
    derivative is the three-point (nonuniform-safe) centered difference of
    the fixed-grid-label samples minus the tangential advection
    v_t (grad v . grad q)/w^2, which converts to the material derivative of
    the normal flow.
    """
    if traj.states is None:
        raise EstimateError("trajectory was recorded without surface states")
    if not (0 < ti < len(traj.times) - 1):
        raise EstimateError("need snapshots on both sides of the evaluation time")
    t = traj.times
    dp = t[ti + 1] - t[ti]
    dm = t[ti] - t[ti - 1]
    qp = np.asarray(series[ti + 1], dtype=float)
    q0 = np.asarray(series[ti], dtype=float)
    qm = np.asarray(series[ti - 1], dtype=float)
    q_t = (dm**2 * qp + (dp**2 - dm**2) * q0 - dp**2 * qm) / (dp * dm * (dp + dm))
    state = traj.states[ti]
    grid = traj.grid
    qhat = grid.gradient(q0, traj.mask)
    adv = traj.rates[ti] * _advection_coefficient(state, qhat)
    lap = surface_laplace_beltrami(q0, state, grid, traj.mask)
    return q_t - adv - lap


def _default_time_indices(traj: Trajectory, cap: int = 8) -> list[int]:
    inner = list(range(1, len(traj.times) - 1))
    if not inner:
        raise EstimateError("need at least three snapshots")
    if len(inner) <= cap:
        return inner
    idx = np.unique(np.linspace(0, len(inner) - 1, cap).round().astype(int))
    return [inner[i] for i in idx]


def matched_time_indices(traj_a: Trajectory, traj_b: Trajectory):
    """Interior snapshot indices of the two trajectories at matching
    physical times.

    Residual-refinement comparisons must evaluate both resolutions on the
    same surfaces: under (h, dt) -> (h/2, dt/4) the early fine snapshots
    sit on rougher data than any coarse snapshot, which corrupts the ratio.
    """
    lookup = {round(t, 12): i for i, t in enumerate(traj_b.times)}
    pairs_a, pairs_b = [], []
    for ia in range(1, len(traj_a.times) - 1):
        ib = lookup.get(round(traj_a.times[ia], 12))
        if ib is not None and 0 < ib < len(traj_b.times) - 1:
            pairs_a.append(ia)
            pairs_b.append(ib)
    if not pairs_a:
        raise EstimateError("trajectories share no interior snapshot times")
    return pairs_a, pairs_b


def _profile_metric(state, grid: Grid, window) -> ProfileMetric:
    a, b = window
    if grid.n == 1:
        return ProfileMetric(h=grid.h, G1=state.g_H[a:b + 1, 0, 0].copy(), G2=None)
    st2 = np.sin(grid.theta[a:b + 1]) ** 2
    return ProfileMetric(
        h=grid.h,
        G1=state.g_H[a:b + 1, 0, 0].copy(),
        G2=st2 * state.g_H[a:b + 1, 1, 1],
    )


def _grad_A_norm2(state, grid: Grid, window) -> np.ndarray:
    """|grad A|^2 over the profile window, frame-invariant scalar."""
    a, b = window
    metric = _profile_metric(state, grid, window)
    T1 = state.a_H[a:b + 1, 0, 0].copy()
    if grid.n == 1:
        vals = grad_tensor_norm2(metric, T1, None)
    else:
        T2 = np.sin(grid.theta[a:b + 1]) ** 2 * state.a_H[a:b + 1, 1, 1]
        vals = grad_tensor_norm2(metric, T1, T2)
    out = np.zeros(grid.num_nodes)
    out[a:b + 1] = vals
    return out


# ----------------------------------------------------------------------
# identity checks


def _identity_rhs(name: str, traj: Trajectory, ti: int) -> np.ndarray:
    state = traj.states[ti]
    grid = traj.grid
    sigma = traj.cfg.sigma
    n = grid.n
    if name == "coshr":
        nz = state.nu_dot_z
        return ((1.0 - nz**2) / state.cosh_r
                - (n - sigma * state.nu_vertical) * state.cosh_r
                - sigma * nz)
    if name == "nu_h_support":
        return (state.A2 - n) * state.support_h
    if name == "nu_e_support":
        s_hat = grid.gradient(state.support_e, traj.mask)
        return ((state.A2 - sigma * state.nu_vertical) * state.support_e
                - 2.0 * _drift_term(state, grid, s_hat))
    if name == "A_evolution":
        window = grid._interval(traj.mask)
        grad_a2 = _grad_A_norm2(state, grid, window)
        tr_a3 = np.einsum("nk->n", state.kappa_H**3)
        return (2.0 * state.A2**2 + 2.0 * n * state.A2 - 2.0 * grad_a2
                - 4.0 * state.H**2 + 2.0 * sigma * (state.H - tr_a3))
    raise EstimateError(f"unknown identity {name!r}")


def _simons_residual(traj: Trajectory, ti: int, sel: np.ndarray):
    """Frame-component residual of the elliptic second-form identity."""
    state = traj.states[ti]
    grid = traj.grid
    n = grid.n
    a, b = grid._interval(traj.mask)
    metric = _profile_metric(state, grid, (a, b))
    T1 = state.a_H[a:b + 1, 0, 0].copy()
    H = state.H[a:b + 1]
    A2 = state.A2[a:b + 1]
    hess1, hess2 = scalar_hessian(metric, H)
    if grid.n == 1:
        L1, _ = tensor_laplacian(metric, T1, None)
        R1 = hess1 + H * T1**2 / metric.G1 - (A2 + n) * T1 + H * metric.G1
        resid = np.zeros(grid.num_nodes)
        resid[a:b + 1] = np.abs(L1 - R1)
        scale_f = np.zeros(grid.num_nodes)
        scale_f[a:b + 1] = np.maximum(np.abs(L1), np.abs(R1))
        valid = np.zeros(grid.num_nodes, dtype=bool)
        valid[a + 2:b - 1] = True
        return resid, scale_f, valid
    st2 = np.sin(grid.theta[a:b + 1]) ** 2
    T2 = st2 * state.a_H[a:b + 1, 1, 1]
    L1, L2 = tensor_laplacian(metric, T1, T2)
    R1 = hess1 + H * T1**2 / metric.G1 - (A2 + n) * T1 + H * metric.G1
    R2 = hess2 + H * T2**2 * metric.inv2 - (A2 + n) * T2 + H * metric.G2
    resid = np.zeros(grid.num_nodes)
    scale_f = np.zeros(grid.num_nodes)
    with np.errstate(divide="ignore", invalid="ignore"):
        r2_frame = np.abs(L2 - R2) / st2
        s2_frame = np.maximum(np.abs(L2), np.abs(R2)) / st2
    r2_frame = np.where(np.isfinite(r2_frame), r2_frame, 0.0)
    s2_frame = np.where(np.isfinite(s2_frame), s2_frame, 0.0)
    resid[a:b + 1] = np.maximum(np.abs(L1 - R1), r2_frame)
    scale_f[a:b + 1] = np.maximum(np.abs(L1), np.abs(R1))
    scale_f[a:b + 1] = np.maximum(scale_f[a:b + 1], s2_frame)
    valid = np.zeros(grid.num_nodes, dtype=bool)
    valid[a + 2:b - 1] = True
    return resid, scale_f, valid


def check_identity(name: str, traj: Trajectory, params: CutoffParams | None = None,
                   time_indices: list[int] | None = None,
                   margin: int = 4, edge_margin: float | None = None) -> ResidualReport:
    """Max residual of one evolution identity along the trajectory.

    Tensor-valued identities (simons, A_evolution) run on curves and
    axisymmetric grids; near-pole nodes (theta below the pole margin) are
    excluded there because the azimuthal metric block degenerates.
    ``edge_margin`` fixes the physical width of the excluded boundary band
    (default 8 h of this grid); refinement studies pass the coarse value.
    """
    if name not in IDENTITY_NAMES:
        raise EstimateError(f"unknown identity {name!r}; choose from {IDENTITY_NAMES}")
    tensor = name in ("simons", "A_evolution")
    _require_modes(traj, tensor)
    if traj.states is None:
        raise EstimateError("trajectory was recorded without surface states")
    if len(traj.times) < 3:
        raise EstimateError("too-short trajectory: need at least 3 snapshots")
    grid = traj.grid
    if edge_margin is None:
        edge_margin = 8.0 * grid.h
    sel = interior_selector(grid, traj.mask, margin, edge_margin)
    pole_margin = params.pole_margin if params is not None else 0.1
    if tensor and grid.mode == AXISYMMETRIC:
        sel = sel & (grid.theta >= pole_margin)
    times = time_indices if time_indices is not None else _default_time_indices(traj)

    per_time = []
    worst = 0.0
    scale = 1.0
    for ti in times:
        if name == "simons":
            resid, scale_f, valid = _simons_residual(traj, ti, sel)
            use = sel & valid
            r = float(resid[use].max()) if use.any() else 0.0
            s = float(scale_f[use].max()) if use.any() else 0.0
        else:
            series = _identity_series(name, traj)
            lhs = heat_operator_numeric(series, traj, ti)
            rhs = _identity_rhs(name, traj, ti)
            use = sel
            r = float(np.max(np.abs(lhs[use] - rhs[use])))
            s = float(max(np.max(np.abs(lhs[use])), np.max(np.abs(rhs[use]))))
        worst = max(worst, r)
        scale = max(scale, s)
        per_time.append({"t": traj.times[ti], "max_residual": r})
    return ResidualReport(
        name=name,
        max_residual=worst,
        scaled_residual=worst / scale,
        scale=scale,
        per_time=per_time,
        meta={"h": grid.h, "n": grid.n, "mode": grid.mode,
              "sigma": traj.cfg.sigma,
              "snapshot_dt": traj.times[1] - traj.times[0],
              "nodes_evaluated": int(sel.sum())},
    )


def _identity_series(name: str, traj: Trajectory):
    if name == "coshr":
        return [st.cosh_r for st in traj.states]
    if name == "nu_h_support":
        return [st.support_h for st in traj.states]
    if name == "nu_e_support":
        return [st.support_e for st in traj.states]
    if name == "A_evolution":
        return [st.A2 for st in traj.states]
    raise EstimateError(name)


# ----------------------------------------------------------------------
# inequality checks


def _eta_series(traj: Trajectory, params: CutoffParams):
    n, sigma = params.n, params.sigma
    shift = sigma / (n + sigma)
    cosh_r = 1.0 / traj.grid.y
    return [params.cosh_R - math.exp((n + sigma) * t) * (cosh_r + shift)
            for t in traj.times]


def check_inequality(name: str, traj: Trajectory, params: CutoffParams,
                     time_indices: list[int] | None = None,
                     margin: int = 4, edge_margin: float | None = None) -> MarginReport:
    """Worst margin (min of rhs - lhs) of one differential inequality.

    eta_spacetime:  (d/dt - Lap) eta <= 0 for the space-time cutoff.
    xi:             (d/dt - Lap) xi <= (n + 2) xi on {eta >= 0}.
    A_phi:          the weighted second-form inequality on {|A|^2 >= 1};
                    skipped at sigma = 0 where its constants degenerate.
    """
    if name not in INEQUALITY_NAMES:
        raise EstimateError(
            f"unknown inequality {name!r}; choose from {INEQUALITY_NAMES}")
    _require_modes(traj, tensor=False)
    grid = traj.grid
    sigma = traj.cfg.sigma
    n = grid.n
    if edge_margin is None:
        edge_margin = 8.0 * grid.h
    sel = interior_selector(grid, traj.mask, margin, edge_margin)
    times = time_indices if time_indices is not None else _default_time_indices(traj)

    if name == "A_phi" and sigma == 0.0:
        return MarginReport(
            name=name, margin=0.0, worst_violation=0.0, per_time=[],
            meta={"sigma": sigma}, skipped=True,
            note="skipped at sigma = 0: the weight constants c1 = c0 k/sigma "
                 "and c2 = 1/sigma degenerate")

    eta = _eta_series(traj, params)
    margins = []
    meta = {"h": grid.h, "n": n, "sigma": sigma, "cosh_R": params.cosh_R}

    if name == "eta_spacetime":
        for ti in times:
            lhs = heat_operator_numeric(eta, traj, ti)
            margins.append(float(-np.max(lhs[sel])))
    elif name == "xi":
        u_series = [1.0 / st.support_e for st in traj.states]
        xi_series = [e**3 * u for e, u in zip(eta, u_series)]
        for ti in times:
            lhs = heat_operator_numeric(xi_series, traj, ti)
            rhs = (n + 2.0) * xi_series[ti]
            use = sel & (eta[ti] >= 0.0)
            if not use.any():
                continue
            margins.append(float(np.min(rhs[use] - lhs[use])))
        meta["region"] = "eta >= 0"
    else:  # A_phi
        if params.k is None or params.c0 is None:
            raise EstimateError("A_phi needs k and c0 (CutoffParams.from_trajectory)")
        k, c0 = params.k, params.c0
        c2_const = 6.0 * n + (sigma**2 + 4.0) / (c0 * k)
        u_series = [1.0 / st.support_e for st in traj.states]
        phi_series = [u**2 / (1.0 - k * u**2) for u in u_series]
        g_series = [st.A2 * phi for st, phi in zip(traj.states, phi_series)]
        cosh_r = 1.0 / grid.y
        n_eval = 0
        for ti in times:
            st = traj.states[ti]
            u, phi, gfun = u_series[ti], phi_series[ti], g_series[ti]
            lhs = heat_operator_numeric(g_series, traj, ti)
            u_hat = grid.gradient(u, traj.mask)
            phi_hat = grid.gradient(phi, traj.mask)
            g_hat = grid.gradient(gfun, traj.mask)
            grad_u2 = _inner_h(st, grid, u_hat, u_hat)
            phi_prime = 1.0 / (1.0 - k * u**2) ** 2
            rhs = (-k * st.A2**2 * phi**2
                   + (c2_const - k * phi_prime * grad_u2) * st.A2 * phi
                   - _inner_h(st, grid, phi_hat, g_hat) / phi
                   + sigma**2 * phi)
            use = sel & (st.A2 >= 1.0) & (cosh_r <= params.cosh_R)
            if not use.any():
                continue
            n_eval += int(use.sum())
            margins.append(float(np.min(rhs[use] - lhs[use])))
        meta["region"] = "|A|^2 >= 1 and cosh r <= cosh R"
        meta["k"] = k
        meta["c0"] = c0
        if n_eval == 0:
            return MarginReport(
                name=name, margin=0.0, worst_violation=0.0, per_time=[],
                meta=meta, skipped=True,
                note="vacuous: no nodes with |A|^2 >= 1 in the cutoff region")

    if not margins:
        return MarginReport(name=name, margin=0.0, worst_violation=0.0,
                            per_time=[], meta=meta, skipped=True,
                            note="empty evaluation region")
    margin_val = min(margins)
    return MarginReport(
        name=name, margin=margin_val,
        worst_violation=max(0.0, -margin_val),
        per_time=margins, meta=meta)


# ----------------------------------------------------------------------
# interior bounds


def verify_gradient_bound(traj: Trajectory, params: CutoffParams) -> BoundReport:
    """Interior slope bound over the shrinking cutoff set.

    Checks sup w over {e^{(n+sigma)t}(cosh r + sigma/(n+sigma)) <= theta cosh R}
    against e^{(n+2)t + v_osc} (1-theta)^{-3} sup_0 w, the latter sup over
    the full {r <= R} slice at t = 0.  An empty set is reported, not failed.
    """
    params.validate_for_gradient_bound()
    _require_modes(traj, tensor=False)
    grid = traj.grid
    n, sigma = params.n, params.sigma
    cosh_r = 1.0 / grid.y
    ball = (cosh_r <= params.cosh_R) & traj.mask.include
    if not ball.any():
        raise EstimateError("the R-ball misses the computational mask")
    if not np.all(traj.mask.include[cosh_r <= params.cosh_R]):
        raise EstimateError("{r <= R} is not compactly contained in the mask")
    shift = sigma / (n + sigma)
    sup0 = float(np.max(traj.states[0].w[ball]))
    vmax = -np.inf
    vmin = np.inf
    times, lhs_list, rhs_list, empty = [], [], [], []
    passed = True
    for ti, t in enumerate(traj.times):
        st = traj.states[ti]
        vmax = max(vmax, float(np.max(st.v[ball])))
        vmin = min(vmin, float(np.min(st.v[ball])))
        v_osc = vmax - vmin
        shrink = (math.exp((n + sigma) * t) * (cosh_r + shift)
                  <= params.theta * params.cosh_R) & ball
        times.append(t)
        if not shrink.any():
            lhs_list.append(None)
            rhs_list.append(None)
            empty.append(t)
            continue
        lhs = float(np.max(st.w[shrink]))
        rhs = math.exp((n + 2.0) * t + v_osc) * (1.0 - params.theta) ** -3 * sup0
        lhs_list.append(lhs)
        rhs_list.append(rhs)
        if lhs > rhs * (1.0 + 1e-9):
            passed = False
    note = f"set empty from t={empty[0]:.4g}" if empty else ""
    return BoundReport(
        name="gradient_bound", times=times, lhs=lhs_list, rhs=rhs_list,
        max_value=max((l / r) for l, r in zip(lhs_list, rhs_list)
                      if l is not None),
        factors={"sup0_w": sup0, "one_minus_theta_pow": (1.0 - params.theta) ** -3},
        meta={"cosh_R": params.cosh_R, "theta": params.theta, "sigma": sigma,
              "n": n}, passed=passed, note=note)


def verify_curvature_bounds(traj: Trajectory, params: CutoffParams,
                            m: int = 0) -> BoundReport:
    """Empirical-constant monitor for the interior curvature bounds.

    C_emp(t) = sup |grad^m A|^2 / [(1 + 1/t)^{m+1} (1-theta)^{-2}
    sup_{s<=t} sup u^4] over {cosh r <= theta cosh R}.  The bound constants
    are unspecified, so the report asserts finiteness; stability under
    refinement is the caller's cross-run check.  m = 1 needs a curve or
    axisymmetric grid; m >= 2 needs a curve.
    """
    params.validate_for_second_order()
    _require_modes(traj, tensor=m >= 1)
    if m < 0:
        raise EstimateError("m must be >= 0")
    grid = traj.grid
    if m >= 2 and grid.n != 1:
        raise EstimateError("m >= 2 derivative monitors are curve-only")
    cosh_r = 1.0 / grid.y
    ball = (cosh_r <= params.cosh_R) & traj.mask.include
    inner = (cosh_r <= params.theta * params.cosh_R) & interior_selector(
        grid, traj.mask)
    if grid.mode == AXISYMMETRIC and m >= 1:
        inner &= grid.theta >= params.pole_margin
    if not inner.any():
        raise EstimateError("inner cutoff region is empty")
    sup_u4 = 0.0
    times, c_emp, sup_vals = [], [], []
    window = grid._interval(traj.mask) if grid.mode != FULL or grid.n == 1 else None
    for ti, t in enumerate(traj.times):
        st = traj.states[ti]
        sup_u4 = max(sup_u4, float(np.max((1.0 / st.support_e[ball]) ** 4)))
        if t <= 0.0:
            continue
        if m == 0:
            field = st.A2
        elif m == 1:
            field = _grad_A_norm2(st, grid, window)
        else:
            a, b = window
            metric = _profile_metric(st, grid, window)
            vals = iterated_scalar_derivative_norm2(metric, st.H[a:b + 1], m)
            field = np.zeros(grid.num_nodes)
            field[a:b + 1] = vals
        sup_f = float(np.max(field[inner]))
        denom = ((1.0 + 1.0 / t) ** (m + 1)
                 * (1.0 - params.theta) ** -2 * sup_u4)
        times.append(t)
        sup_vals.append(sup_f)
        c_emp.append(sup_f / denom)
    if not times:
        raise EstimateError("trajectory has no snapshots with t > 0")
    max_c = max(c_emp)
    return BoundReport(
        name=f"curvature_bound_m{m}",
        times=times, lhs=sup_vals, rhs=c_emp, max_value=max_c,
        factors={"time_power": m + 1,
                 "one_minus_theta_pow": (1.0 - params.theta) ** -2,
                 "final_sup_u4": sup_u4},
        meta={"m": m, "cosh_R": params.cosh_R, "theta": params.theta,
              "sigma": params.sigma, "n": params.n, "h": grid.h},
        passed=bool(np.isfinite(max_c)),
        note="rhs column holds the empirical constants C_emp(t)")

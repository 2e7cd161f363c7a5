"""Half-space-model geometry of radial graphs over the hemisphere.

A height field v on a hemisphere grid describes the surface x = e^v z in
the upper half space.  This module derives every pointwise quantity of
that surface: slope and Euclidean normal, support functions, the distance
to the vertical axis through cosh r = |x|_E / x_{n+1}, induced metrics and
second fundamental forms in both the Euclidean and the hyperbolic picture,
principal and mean curvatures, and the surface Laplace-Beltrami operator.

Curvatures are computed in the Euclidean picture and converted with the
affine relation kappa_H = x_{n+1} kappa_E + <nu_E, e>, which is exact for
conformally related ambient metrics.  The orientation convention is the
outward one (<nu_E, x> > 0): the unit hemisphere then has kappa_E = -1 and
vanishing hyperbolic mean curvature, and horospheres have H = n.
"""

from __future__ import annotations

from dataclasses import dataclass, fields

import numpy as np

from .sphere_grid import FULL, DomainMask, Grid, GridError


class GeometryError(ValueError):
    """Degenerate surface data (graph condition violated, bad heights)."""


@dataclass(frozen=True)
class SurfaceState:
    """All pointwise geometry of the radial graph of ``v`` at one instant.

    Tensor-valued fields carry frame components in the grid's orthonormal
    round-metric frame.  Arrays are read-only snapshots.
    """

    v: np.ndarray            # height field
    grad_v: np.ndarray       # (N, k) frame gradient of v
    x: np.ndarray            # (N, n+1) embedding e^v z
    height: np.ndarray       # x_{n+1}
    w: np.ndarray            # sqrt(1 + |grad v|^2)
    nu_E: np.ndarray         # Euclidean outward unit normal
    nu_vertical: np.ndarray  # <nu_E, e>
    nu_dot_z: np.ndarray     # <nu_E, z> = 1/w
    cosh_r: np.ndarray       # |x|_E / x_{n+1} = 1/y
    support_e: np.ndarray    # <nu_E, x>_E = e^v / w
    support_h: np.ndarray    # <nu_H, x>_H = 1/(y w)
    g_E: np.ndarray          # induced Euclidean metric, (N, k, k)
    g_H: np.ndarray          # induced hyperbolic metric = g_E / height^2
    a_E: np.ndarray          # Euclidean second fundamental form
    a_H: np.ndarray          # hyperbolic second fundamental form
    kappa_E: np.ndarray      # (N, k) Euclidean principal curvatures
    kappa_H: np.ndarray      # (N, k) hyperbolic principal curvatures
    H_E: np.ndarray          # Euclidean mean curvature (sum convention)
    H: np.ndarray            # hyperbolic mean curvature (sum convention)
    H_trace: np.ndarray      # g_H^{ij} a_H,ij  (cross-check route)
    A2: np.ndarray           # |A|^2 = sum of kappa_H^2
    mask: DomainMask

    def __post_init__(self):
        for f in fields(self):
            val = getattr(self, f.name)
            if isinstance(val, np.ndarray):
                val.flags.writeable = False

    @property
    def min_support(self) -> float:
        """Smallest Euclidean support over the mask: the graph-condition monitor."""
        return float(np.min(self.support_e[self.mask.include]))


def embed(v: np.ndarray, grid: Grid) -> np.ndarray:
    """Embedding points x = e^v z, shape (N, n+1)."""
    v = np.asarray(v, dtype=float)
    if v.shape != (grid.num_nodes,):
        raise GeometryError("height field does not match the grid")
    if not np.all(np.isfinite(v)):
        raise GeometryError("height field has non-finite entries")
    return np.exp(v)[:, None] * grid.z


def slope_and_normal(
    v: np.ndarray, grid: Grid, mask: DomainMask | None = None
) -> tuple[np.ndarray, np.ndarray]:
    """Graph slope w = sqrt(1 + |grad v|^2) and Euclidean unit normal.

    The normal is (z - grad v)/w with grad v embedded tangentially, so
    <nu_E, z> = 1/w and the support <nu_E, x> = e^v/w is positive for any
    finite Lipschitz height field.
    """
    gv = grid.gradient(np.asarray(v, dtype=float), mask)
    w = np.sqrt(1.0 + np.einsum("nk,nk->n", gv, gv))
    tangential = np.einsum("nka,nk->na", grid.frame, gv)
    nu = (grid.z - tangential) / w[:, None]
    return w, nu


def cosh_radial(x: np.ndarray) -> np.ndarray:
    """cosh of the hyperbolic distance to the vertical axis, |x|_E / x_{n+1}."""
    x = np.asarray(x, dtype=float)
    height = x[..., -1]
    if np.any(height <= 0.0):
        raise GeometryError("points must have positive height")
    return np.linalg.norm(x, axis=-1) / height


def connection_correction(X: np.ndarray, Y: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Difference of the hyperbolic and Euclidean covariant derivatives.

    Returns (<X,Y>_E e - <X,e>_E Y - <Y,e>_E X) / x_{n+1}, the conformal
    correction that turns the flat connection into the half-space one.
    """
    x = np.asarray(x, dtype=float)
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    height = x[..., -1]
    if np.any(height <= 0.0):
        raise GeometryError("points must have positive height")
    e = np.zeros(x.shape[-1])
    e[-1] = 1.0
    dot_xy = np.sum(X * Y, axis=-1)[..., None]
    return (dot_xy * e - X[..., -1:] * Y - Y[..., -1:] * X) / height[..., None]


def reflect(x: np.ndarray) -> np.ndarray:
    """Inversion x -> x/|x|_E^2: the isometric reflection across the unit
    hemisphere.  Involutive; fixes |x| = 1 pointwise."""
    x = np.asarray(x, dtype=float)
    n2 = np.sum(x * x, axis=-1, keepdims=True)
    if np.any(n2 == 0.0):
        raise GeometryError("reflection is undefined at the origin")
    return x / n2


def _sym2_eigenvalues(a: np.ndarray, g: np.ndarray) -> np.ndarray:
    """Generalized eigenvalues of the symmetric pencil (a, g), ascending.

    a, g: (N, k, k) with k in {1, 2} and g positive definite.
    """
    k = a.shape[-1]
    if k == 1:
        return (a[:, 0, 0] / g[:, 0, 0])[:, None]
    det_g = g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] ** 2
    det_a = a[:, 0, 0] * a[:, 1, 1] - a[:, 0, 1] ** 2
    b = a[:, 0, 0] * g[:, 1, 1] + a[:, 1, 1] * g[:, 0, 0] - 2.0 * a[:, 0, 1] * g[:, 0, 1]
    disc = np.sqrt(np.maximum(b * b - 4.0 * det_a * det_g, 0.0))
    lo = (b - disc) / (2.0 * det_g)
    hi = (b + disc) / (2.0 * det_g)
    return np.stack([lo, hi], axis=1)


def _inv_sym2(g: np.ndarray) -> np.ndarray:
    k = g.shape[-1]
    if k == 1:
        return 1.0 / g
    det = g[:, 0, 0] * g[:, 1, 1] - g[:, 0, 1] ** 2
    out = np.empty_like(g)
    out[:, 0, 0] = g[:, 1, 1] / det
    out[:, 1, 1] = g[:, 0, 0] / det
    out[:, 0, 1] = out[:, 1, 0] = -g[:, 0, 1] / det
    return out


def curvature(v: np.ndarray, grid: Grid, mask: DomainMask | None = None) -> SurfaceState:
    """Full geometric state of the radial graph of ``v``.

    Builds g_E = e^{2v}(delta + dv dv), the Euclidean second fundamental
    form a_E = (e^v/w)(Hess v - dv dv - delta), solves the 2x2 generalized
    eigenproblem for the Euclidean principal curvatures and converts to the
    hyperbolic picture.  Raises GeometryError if the induced metric
    degenerates.
    """
    v = np.asarray(v, dtype=float)
    if mask is None:
        mask = DomainMask.full(grid)
    gv = grid.gradient(v, mask)
    hv = grid.hessian(v, mask)
    g2 = np.einsum("nk,nk->n", gv, gv)
    w = np.sqrt(1.0 + g2)
    ev = np.exp(v)
    x = ev[:, None] * grid.z
    height = ev * grid.y
    if not np.all(np.isfinite(w)):
        raise GeometryError("non-finite slope: graph condition violated")

    tangential = np.einsum("nka,nk->na", grid.frame, gv)
    nu_E = (grid.z - tangential) / w[:, None]
    e_dot_grad = np.einsum("nk,nk->n", grid.e_frame, gv)
    nu_vertical = (grid.y - e_dot_grad) / w

    eye = np.eye(grid.k)
    outer = gv[:, :, None] * gv[:, None, :]
    g_E = (ev * ev)[:, None, None] * (eye + outer)
    a_E = (ev / w)[:, None, None] * (hv - outer - eye)

    kappa_E = _sym2_eigenvalues(a_E, g_E)
    kappa_H = height[:, None] * kappa_E + nu_vertical[:, None]
    H_E = kappa_E.sum(axis=1)
    H = kappa_H.sum(axis=1)
    A2 = np.einsum("nk,nk->n", kappa_H, kappa_H)

    g_H = g_E / (height * height)[:, None, None]
    a_H = a_E / height[:, None, None] + nu_vertical[:, None, None] * g_H
    H_trace = np.einsum("nij,nij->n", _inv_sym2(g_H), a_H)

    support_e = ev / w
    # consistency of the two support routes is a SurfaceState invariant
    support_dot = np.einsum("na,na->n", nu_E, x)
    sel = mask.include
    if np.max(np.abs(support_dot[sel] - support_e[sel])) > 1e-8 * max(1.0, float(np.max(ev))):
        raise GeometryError("support-function routes disagree: degenerate data")

    return SurfaceState(
        v=v.copy(),
        grad_v=gv,
        x=x,
        height=height,
        w=w,
        nu_E=nu_E,
        nu_vertical=nu_vertical,
        nu_dot_z=1.0 / w,
        cosh_r=1.0 / grid.y,
        support_e=support_e,
        support_h=1.0 / (grid.y * w),
        g_E=g_E,
        g_H=g_H,
        a_E=a_E,
        a_H=a_H,
        kappa_E=kappa_E,
        kappa_H=kappa_H,
        H_E=H_E,
        H=H,
        H_trace=H_trace,
        A2=A2,
        mask=mask,
    )


def surface_laplace_beltrami(
    f: np.ndarray, state: SurfaceState, grid: Grid, mask: DomainMask | None = None
) -> np.ndarray:
    """Laplace-Beltrami operator of the induced hyperbolic metric.

    Conservative flux form: exact on constants, second order on smooth
    fields.  Values on mask-boundary nodes are left at zero; consumers
    evaluate on the interior.
    """
    f = np.asarray(f, dtype=float)
    if mask is None:
        mask = state.mask
    gH = state.g_H
    if grid.n == 1:
        a, b = grid._interval(mask)
        G1 = gH[:, 0, 0]
        if np.any(G1[a:b + 1] <= 0.0):
            raise GeometryError("degenerate induced metric")
        A = 1.0 / np.sqrt(G1)
        out = np.zeros_like(f)
        Ah = 0.5 * (A[a + 1:b + 1] + A[a:b])          # half-point coefficients
        flux = Ah * (f[a + 1:b + 1] - f[a:b])
        out[a + 1:b] = (flux[1:] - flux[:-1]) / (grid.h**2 * np.sqrt(G1[a + 1:b]))
        return out
    if grid.mode != FULL:
        a, b = grid._interval(mask)
        G1 = gH[:, 0, 0]
        G2h = gH[:, 1, 1]
        if np.any(G1[a:b + 1] <= 0.0) or np.any(G2h[a:b + 1] <= 0.0):
            raise GeometryError("degenerate induced metric")
        st = np.sin(grid.theta)
        A = st * np.sqrt(G2h / G1)
        P = st * np.sqrt(G1 * G2h)
        out = np.zeros_like(f)
        Ah = 0.5 * (A[1:b + 1] + A[:b])
        flux = Ah * (f[1:b + 1] - f[:b])
        out[1:b] = (flux[1:] - flux[:-1]) / (grid.h**2 * P[1:b])
        # finite-volume pole cell: area ~ sqrt(det gH)(0) h^2 / 8 per angle
        out[0] = 8.0 * Ah[0] * (f[1] - f[0]) / (grid.h**3 * np.sqrt(G1[0] * G2h[0]))
        return out
    # full n = 2 grid: flux divergence on the (theta, phi) product structure
    m = grid._ring_limit(mask)
    h, hp = grid.h, grid.h_phi
    pole_f, blk_f = grid.rings(f)
    nphi = grid.n_phi
    th = grid._theta_rings
    # frame metric blocks on extended rows 0..m (row 0 = pole)
    def ext_field(q):
        p, blk = grid.rings(q)
        out = np.empty((m + 1, nphi))
        out[0] = p
        out[1:] = blk[:m]
        return out
    g11 = ext_field(gH[:, 0, 0])
    g22 = ext_field(gH[:, 1, 1])
    g12 = ext_field(gH[:, 0, 1])
    det = g11 * g22 - g12 * g12
    if np.any(det[: m + 1] <= 0.0):
        raise GeometryError("degenerate induced metric")
    sdet = np.sqrt(det)
    iu11 = g22 / det
    iu22 = g11 / det
    iu12 = -g12 / det
    F = ext_field(f)
    st = np.sin(th[: m + 1])[:, None]
    # node coefficients for the two flux components
    A_tt = st * sdet * iu11
    A_tp = sdet * iu12                      # sin(theta) cancels in P g^{theta phi}
    A_pp = sdet * iu22 / np.where(st > 0, st, 1.0)
    A_pt = A_tp
    dF_ph = (np.roll(F, -1, axis=1) - np.roll(F, 1, axis=1)) / (2.0 * hp)
    dF_th = np.zeros_like(F)
    dF_th[1:m] = (F[2:m + 1] - F[0:m - 1]) / (2.0 * h)
    dF_th[m] = -(4.0 * (F[m - 1] - F[m]) - (F[m - 2] - F[m])) / (2.0 * h)
    # theta fluxes at half rows i+1/2, i = 0..m-1
    Fth = (0.5 * (A_tt[1:] + A_tt[:-1]) * (F[1:] - F[:-1]) / h
           + 0.5 * (A_tp[1:] + A_tp[:-1]) * 0.5 * (dF_ph[1:] + dF_ph[:-1]))
    # phi fluxes at half columns j+1/2 on rows 1..m
    A_pp_h = 0.5 * (A_pp[1:] + np.roll(A_pp[1:], -1, axis=1))
    A_pt_h = 0.5 * (A_pt[1:] + np.roll(A_pt[1:], -1, axis=1))
    dF_th_h = 0.5 * (dF_th[1:] + np.roll(dF_th[1:], -1, axis=1))
    Fph = A_pp_h * (np.roll(F[1:], -1, axis=1) - F[1:]) / hp + A_pt_h * dF_th_h
    P = st * sdet
    lap = np.zeros_like(F)
    lap[1:m] = ((Fth[1:m] - Fth[0:m - 1]) / h
                + (Fph[0:m - 1] - np.roll(Fph[0:m - 1], 1, axis=1)) / hp) / P[1:m]
    pole_lap = 8.0 * np.sum(Fth[0]) / (nphi * h**2 * sdet[0, 0])
    out = np.zeros_like(f)
    out[0] = pole_lap
    block = np.zeros((grid.n_theta - 1, nphi))
    block[: m - 1] = lap[1:m]
    out[1:] = block.ravel()
    return out

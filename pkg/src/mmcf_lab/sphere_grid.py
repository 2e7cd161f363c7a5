"""Finite-difference calculus on polar caps of the upper hemisphere.

Grids cover the part of S^n_+ (n = 1 or 2) within polar angle ``theta_max``
of the pole e = e_{n+1}, with ``theta_max < pi/2`` so that y = e.z stays
bounded away from zero.  Three discretizations are provided:

* n = 1            -- the arc s in [-theta_max, theta_max] of the half
                      circle, parameterized by arc length, z = (sin s, cos s).
* n = 2, axisym    -- the polar angle theta in [0, theta_max]; fields are
                      profiles of rotationally symmetric functions.
* n = 2, full      -- a polar product grid (theta_i, phi_j) plus the pole
                      as a single regular node.

All tensor components (gradients, Hessians, induced metrics downstream)
are carried in a per-node orthonormal frame for the round metric, so the
stored metric is the identity at every node and the polar-coordinate
singularity never enters the data.  The ambient directions of the frame
are stored in ``Grid.frame``; for n = 2 the rotation coefficient
cot(theta) of the frame is folded into the operator formulas, and at the
pole the one-ring Fourier projections give second-order accurate frame
components.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

FULL = "full"
AXISYMMETRIC = "axisymmetric"

_UNIT_TOL = 1e-12


class GridError(ValueError):
    """Invalid grid specification or ill-formed mask."""


@dataclass(frozen=True)
class GridSpec:
    """Discretization request for a polar cap of the upper hemisphere.

    ``resolution`` is the node count per coordinate: an int for n = 1 and
    axisymmetric grids, an (n_theta, n_phi) pair for the full n = 2 grid.
    """

    n: int
    resolution: int | tuple[int, int]
    theta_max: float
    mode: str = FULL

    def __post_init__(self):
        if self.n not in (1, 2):
            raise GridError(f"dimension n must be 1 or 2, got {self.n}")
        if self.mode not in (FULL, AXISYMMETRIC):
            raise GridError(f"unknown grid mode {self.mode!r}")
        if self.mode == AXISYMMETRIC and self.n != 2:
            raise GridError("axisymmetric mode is only defined for n = 2")
        if not (0.0 < self.theta_max < np.pi / 2):
            raise GridError(
                f"theta_max must lie in (0, pi/2), got {self.theta_max}; "
                "the equator y = 0 is excluded"
            )
        counts = self.resolution if isinstance(self.resolution, tuple) else (self.resolution,)
        if self.n == 2 and self.mode == FULL:
            if len(counts) != 2:
                raise GridError("full n = 2 grids need resolution = (n_theta, n_phi)")
        elif len(counts) != 1:
            raise GridError("1-coordinate grids take a single node count")
        for c in counts:
            if int(c) != c or c < 9:
                raise GridError(f"node counts must be integers >= 9, got {c}")


def _one_sided_d1(f, h, left: bool):
    # second-order 3-point one-sided first derivative, written in
    # difference form so constants give exact zeros
    if left:
        return (4.0 * (f[1] - f[0]) - (f[2] - f[0])) / (2.0 * h)
    return -(4.0 * (f[-2] - f[-1]) - (f[-3] - f[-1])) / (2.0 * h)


def _one_sided_d2(f, h, left: bool):
    # second-order 4-point one-sided second derivative (difference form)
    if left:
        return (-5.0 * (f[1] - f[0]) + 4.0 * (f[2] - f[0]) - (f[3] - f[0])) / h**2
    return (-5.0 * (f[-2] - f[-1]) + 4.0 * (f[-3] - f[-1]) - (f[-4] - f[-1])) / h**2


class Grid:
    """Immutable hemisphere grid with covariant difference operators.

    Attributes
    ----------
    spec : GridSpec
    n : ambient hemisphere dimension (1 or 2)
    k : number of frame components carried by tensors (equals n)
    num_nodes : total node count
    theta : polar angle from the pole, per node
    y : e.z per node
    z : unit node positions in R^{n+1}, shape (num_nodes, n+1)
    frame : orthonormal tangent frame in ambient coordinates,
            shape (num_nodes, k, n+1)
    e_frame : vertical components e.E_i of the frame, shape (num_nodes, k)
    gamma / gamma_inv : round-metric components in the frame (identity)
    h : polar-angle spacing; h_phi : azimuthal spacing (full mode only)
    boundary_nodes : indices of the grid's own Dirichlet boundary
    """

    def __init__(self, spec: GridSpec):
        self.spec = spec
        self.n = spec.n
        self.mode = spec.mode
        self.k = spec.n

        if spec.n == 1:
            m = int(spec.resolution)
            s = np.linspace(-spec.theta_max, spec.theta_max, m)
            self.coords = s
            self.h = float(s[1] - s[0])
            self.theta = np.abs(s)
            self.z = np.stack([np.sin(s), np.cos(s)], axis=1)
            self.y = np.cos(s)
            tau = np.stack([np.cos(s), -np.sin(s)], axis=1)
            self.frame = tau[:, None, :]
            self.boundary_nodes = np.array([0, m - 1])
            self.n_theta = m
            self.n_phi = 0
            self.h_phi = 0.0
        elif spec.mode == AXISYMMETRIC:
            m = int(spec.resolution)
            th = np.linspace(0.0, spec.theta_max, m)
            self.coords = th
            self.h = float(th[1] - th[0])
            self.theta = th
            self.z = np.stack([np.sin(th), np.zeros(m), np.cos(th)], axis=1)
            self.y = np.cos(th)
            e1 = np.stack([np.cos(th), np.zeros(m), -np.sin(th)], axis=1)
            e2 = np.tile(np.array([0.0, 1.0, 0.0]), (m, 1))
            self.frame = np.stack([e1, e2], axis=1)
            self.boundary_nodes = np.array([m - 1])
            self.n_theta = m
            self.n_phi = 0
            self.h_phi = 0.0
        else:
            n_theta, n_phi = (int(c) for c in spec.resolution)
            self.n_theta = n_theta
            self.n_phi = n_phi
            self.h = float(spec.theta_max / (n_theta - 1))
            self.h_phi = float(2.0 * np.pi / n_phi)
            th = np.linspace(0.0, spec.theta_max, n_theta)
            ph = self.h_phi * np.arange(n_phi)
            self._theta_rings = th
            self._phi = ph
            num = 1 + (n_theta - 1) * n_phi
            theta = np.empty(num)
            z = np.empty((num, 3))
            theta[0] = 0.0
            z[0] = (0.0, 0.0, 1.0)
            tt, pp = np.meshgrid(th[1:], ph, indexing="ij")
            z[1:, 0] = (np.sin(tt) * np.cos(pp)).ravel()
            z[1:, 1] = (np.sin(tt) * np.sin(pp)).ravel()
            z[1:, 2] = np.cos(tt).ravel()
            theta[1:] = tt.ravel()
            self.theta = theta
            self.z = z
            self.y = z[:, 2].copy()
            self.coords = np.stack(
                [theta, np.concatenate([[0.0], pp.ravel()])], axis=1
            )
            frame = np.empty((num, 2, 3))
            # pole frame: tangent directions of phi = 0 and phi = pi/2
            frame[0, 0] = (1.0, 0.0, 0.0)
            frame[0, 1] = (0.0, 1.0, 0.0)
            ct, st = np.cos(tt).ravel(), np.sin(tt).ravel()
            cp, sp = np.cos(pp).ravel(), np.sin(pp).ravel()
            frame[1:, 0, 0] = ct * cp
            frame[1:, 0, 1] = ct * sp
            frame[1:, 0, 2] = -st
            frame[1:, 1, 0] = -sp
            frame[1:, 1, 1] = cp
            frame[1:, 1, 2] = 0.0
            self.frame = frame
            last = np.arange(num - n_phi, num)
            self.boundary_nodes = last

        self.num_nodes = len(self.y)
        self.e_frame = self.frame[:, :, -1].copy()
        eye = np.eye(self.k)
        self.gamma = np.broadcast_to(eye, (self.num_nodes, self.k, self.k)).copy()
        self.gamma_inv = self.gamma.copy()
        # the single nonzero connection coefficient of the orthonormal frame
        # for n = 2: nabla_{E_2} E_1 = cot(theta) E_2 (zero for curves and at
        # the pole, where the frame is Cartesian)
        if self.k == 2:
            with np.errstate(divide="ignore"):
                rot = np.where(self.theta > 0.0, 1.0, 0.0) / np.where(
                    self.theta > 0.0, np.tan(self.theta), 1.0)
            self.rotation_coefficient = np.where(np.isfinite(rot), rot, 0.0)
        else:
            self.rotation_coefficient = np.zeros(self.num_nodes)
        for arr in (self.theta, self.y, self.z, self.frame, self.e_frame,
                    self.gamma, self.gamma_inv, self.rotation_coefficient):
            arr.flags.writeable = False

        if np.any(np.abs(np.linalg.norm(self.z, axis=1) - 1.0) > _UNIT_TOL):
            raise GridError("node positions failed the unit-sphere check")
        if np.any(self.y <= 0.0):
            raise GridError("grid reaches the equator: y must stay positive")

    # ------------------------------------------------------------------
    # mask plumbing

    def _interval(self, mask: "DomainMask | None") -> tuple[int, int]:
        """Included index range [a, b] for the 1-coordinate grids."""
        if mask is None:
            return 0, self.num_nodes - 1
        idx = np.flatnonzero(mask.include)
        if idx.size == 0:
            raise GridError("empty mask")
        a, b = int(idx[0]), int(idx[-1])
        if b - a + 1 != idx.size:
            raise GridError("mask on a 1-coordinate grid must be an interval")
        if self.mode == AXISYMMETRIC and a != 0:
            raise GridError("axisymmetric masks must contain the pole")
        return a, b

    def _ring_limit(self, mask: "DomainMask | None") -> int:
        """Last included ring index for full n = 2 grids (cap-shaped masks)."""
        if mask is None:
            return self.n_theta - 1
        if not mask.include[0]:
            raise GridError("full-grid masks must contain the pole")
        rings = mask.include[1:].reshape(self.n_theta - 1, self.n_phi)
        per_ring = rings.all(axis=1)
        partial = rings.any(axis=1)
        if np.any(per_ring != partial):
            raise GridError("full-grid masks must be unions of whole rings")
        m = int(np.flatnonzero(per_ring)[-1]) + 1 if per_ring.any() else 0
        if not per_ring[:m].all():
            raise GridError("full-grid masks must be polar caps")
        if m < 4:
            raise GridError("mask too thin for second-order stencils")
        return m

    # ------------------------------------------------------------------
    # 1-coordinate stencils

    def _d1_profile(self, f, a, b):
        """First derivative along the profile coordinate on [a, b]."""
        h = self.h
        out = np.zeros_like(f)
        if b - a < 3:
            raise GridError("mask too thin for second-order stencils")
        out[a + 1:b] = (f[a + 2:b + 1] - f[a:b - 1]) / (2.0 * h)
        if self.mode == AXISYMMETRIC and a == 0:
            out[0] = 0.0  # even reflection through the pole
        else:
            out[a] = _one_sided_d1(f[a:a + 3], h, left=True)
        out[b] = _one_sided_d1(f[b - 2:b + 1], h, left=False)
        return out

    def _d2_profile(self, f, a, b):
        h = self.h
        out = np.zeros_like(f)
        out[a + 1:b] = (f[a + 2:b + 1] + f[a:b - 1] - 2.0 * f[a + 1:b]) / h**2
        if self.mode == AXISYMMETRIC and a == 0:
            out[0] = 2.0 * (f[1] - f[0]) / h**2  # even reflection
        else:
            out[a] = _one_sided_d2(f[a:a + 4], h, left=True)
        out[b] = _one_sided_d2(f[b - 3:b + 1], h, left=False)
        return out

    # ------------------------------------------------------------------
    # full-grid helpers

    def rings(self, f) -> tuple[float, np.ndarray]:
        """Split a node field into (pole value, (n_theta-1, n_phi) ring block)."""
        return float(f[0]), f[1:].reshape(self.n_theta - 1, self.n_phi)

    def from_rings(self, pole: float, block: np.ndarray) -> np.ndarray:
        return np.concatenate([[pole], block.ravel()])

    def _pole_projections(self, ring1: np.ndarray, pole: float):
        """First/second Fourier moments of the innermost ring, taken on the
        differences from the pole value so constants project to exact zeros."""
        ph = self._phi
        diff = ring1 - pole
        m1c = 2.0 * np.mean(diff * np.cos(ph))
        m1s = 2.0 * np.mean(diff * np.sin(ph))
        m2c = 2.0 * np.mean(diff * np.cos(2.0 * ph))
        m2s = 2.0 * np.mean(diff * np.sin(2.0 * ph))
        return m1c, m1s, m2c, m2s

    def _full_partials(self, f, m):
        """theta/phi partials on rings 1..m of the extended (pole-padded) block."""
        pole, blk = self.rings(f)
        h, hp = self.h, self.h_phi
        ext = np.empty((m + 1, self.n_phi))
        ext[0] = pole
        ext[1:] = blk[:m]
        d_th = np.zeros_like(ext)
        d_th[1:m] = (ext[2:m + 1] - ext[0:m - 1]) / (2.0 * h)
        d_th[m] = -(4.0 * (ext[m - 1] - ext[m]) - (ext[m - 2] - ext[m])) / (2.0 * h)
        d2_th = np.zeros_like(ext)
        d2_th[1:m] = (ext[2:m + 1] + ext[0:m - 1] - 2.0 * ext[1:m]) / h**2
        d2_th[m] = (-5.0 * (ext[m - 1] - ext[m]) + 4.0 * (ext[m - 2] - ext[m])
                    - (ext[m - 3] - ext[m])) / h**2
        d_ph = (np.roll(ext, -1, axis=1) - np.roll(ext, 1, axis=1)) / (2.0 * hp)
        d2_ph = (np.roll(ext, -1, axis=1) + np.roll(ext, 1, axis=1) - 2.0 * ext) / hp**2
        return ext, d_th, d2_th, d_ph, d2_ph

    # ------------------------------------------------------------------
    # covariant operators (frame components)

    def gradient(self, f: np.ndarray, mask: "DomainMask | None" = None) -> np.ndarray:
        """Covariant gradient of a scalar field, frame components (N, k)."""
        f = np.asarray(f, dtype=float)
        if f.shape != (self.num_nodes,):
            raise GridError(
                f"field has {f.shape}, grid has {self.num_nodes} nodes")
        out = np.zeros((self.num_nodes, self.k))
        if self.mode == AXISYMMETRIC or self.n == 1:
            a, b = self._interval(mask)
            out[:, 0] = self._d1_profile(f, a, b)
            return out
        m = self._ring_limit(mask)
        ext, d_th, _, d_ph, _ = self._full_partials(f, m)
        st = np.sin(self._theta_rings[1:m + 1])[:, None]
        g1 = np.zeros((self.n_theta - 1, self.n_phi))
        g2 = np.zeros_like(g1)
        g1[:m] = d_th[1:]
        g2[:m] = d_ph[1:] / st
        pole, blk = self.rings(f)
        m1c, m1s, _, _ = self._pole_projections(blk[0], pole)
        out[0, 0] = m1c / self.h
        out[0, 1] = m1s / self.h
        out[1:, 0] = g1.ravel()
        out[1:, 1] = g2.ravel()
        return out

    def hessian(self, f: np.ndarray, mask: "DomainMask | None" = None) -> np.ndarray:
        """Covariant Hessian of a scalar field, frame components (N, k, k).

        Symmetric by construction; for n = 2 the frame rotation terms
        (the cot(theta) contributions of the round connection) are built in.
        """
        f = np.asarray(f, dtype=float)
        if f.shape != (self.num_nodes,):
            raise GridError(
                f"field has {f.shape}, grid has {self.num_nodes} nodes")
        out = np.zeros((self.num_nodes, self.k, self.k))
        if self.n == 1:
            a, b = self._interval(mask)
            out[:, 0, 0] = self._d2_profile(f, a, b)
            return out
        if self.mode == AXISYMMETRIC:
            a, b = self._interval(mask)
            d1 = self._d1_profile(f, a, b)
            d2 = self._d2_profile(f, a, b)
            out[:, 0, 0] = d2
            h22 = d1 * self.rotation_coefficient
            h22[0] = d2[0]  # isotropy of the Hessian at the pole
            out[:, 1, 1] = h22
            return out
        m = self._ring_limit(mask)
        ext, d_th, d2_th, d_ph, d2_ph = self._full_partials(f, m)
        th = self._theta_rings[: m + 1]
        st = np.sin(th)[:, None]
        ct = np.cos(th)[:, None]
        pole, blk = self.rings(f)
        m1c, m1s, m2c, m2s = self._pole_projections(blk[0], pole)
        g1p, g2p = m1c / self.h, m1s / self.h
        # extended G = f_phi / sin(theta); pole row from the gradient limit
        G = np.empty_like(ext)
        G[1:] = d_ph[1:] / st[1:]
        G[0] = -g1p * np.sin(self._phi) + g2p * np.cos(self._phi)
        dG_th = np.zeros_like(G)
        dG_th[1:m] = (G[2:m + 1] - G[0:m - 1]) / (2.0 * self.h)
        dG_th[m] = -(4.0 * (G[m - 1] - G[m]) - (G[m - 2] - G[m])) / (2.0 * self.h)
        h11 = np.zeros((self.n_theta - 1, self.n_phi))
        h22 = np.zeros_like(h11)
        h12 = np.zeros_like(h11)
        h11[:m] = d2_th[1:]
        h22[:m] = d2_ph[1:] / st[1:] ** 2 + (ct[1:] / st[1:]) * d_th[1:]
        h12[:m] = dG_th[1:]
        trace = 4.0 * np.mean(blk[0] - pole) / self.h**2
        diff = 4.0 * m2c / self.h**2
        cross = 2.0 * m2s / self.h**2
        out[0, 0, 0] = 0.5 * (trace + diff)
        out[0, 1, 1] = 0.5 * (trace - diff)
        out[0, 0, 1] = out[0, 1, 0] = cross
        out[1:, 0, 0] = h11.ravel()
        out[1:, 1, 1] = h22.ravel()
        out[1:, 0, 1] = out[1:, 1, 0] = h12.ravel()
        return out

    def intrinsic_laplacian(self, f, mask=None):
        """Round-metric Laplacian (trace of the covariant Hessian)."""
        hess = self.hessian(f, mask)
        return np.trace(hess, axis1=1, axis2=2)

    # ------------------------------------------------------------------
    # adjacency (used for mask connectivity checks)

    def neighbors(self, node: int) -> list[int]:
        if self.mode != FULL or self.n == 1:
            out = []
            if node > 0:
                out.append(node - 1)
            if node < self.num_nodes - 1:
                out.append(node + 1)
            return out
        if node == 0:
            return list(range(1, 1 + self.n_phi))
        i = (node - 1) // self.n_phi + 1
        j = (node - 1) % self.n_phi
        out = [1 + (i - 1) * self.n_phi + (j + 1) % self.n_phi,
               1 + (i - 1) * self.n_phi + (j - 1) % self.n_phi]
        if i == 1:
            out.append(0)
        else:
            out.append(1 + (i - 2) * self.n_phi + j)
        if i < self.n_theta - 1:
            out.append(1 + i * self.n_phi + j)
        return out


def build_grid(spec: GridSpec) -> Grid:
    """Construct the grid described by ``spec``.

    Raises GridError for invalid specifications (theta_max >= pi/2,
    too-coarse resolution, axisymmetric mode at n = 1).
    """
    return Grid(spec)


def covariant_gradient(f: np.ndarray, grid: Grid, mask: "DomainMask | None" = None) -> np.ndarray:
    """Frame components of the round-metric covariant gradient of ``f``."""
    return grid.gradient(f, mask)


def covariant_hessian(f: np.ndarray, grid: Grid, mask: "DomainMask | None" = None) -> np.ndarray:
    """Frame components of the round-metric covariant Hessian of ``f``."""
    return grid.hessian(f, mask)


# ----------------------------------------------------------------------
# domain masks


@dataclass(frozen=True)
class DomainMask:
    """Node inclusion with the induced interior/boundary split.

    ``boundary`` marks included nodes that carry Dirichlet data: nodes on
    the grid's own edge and nodes adjacent to excluded ones.
    """

    include: np.ndarray
    boundary: np.ndarray
    interior: np.ndarray = field(init=False)

    def __post_init__(self):
        object.__setattr__(self, "interior", self.include & ~self.boundary)
        for arr in (self.include, self.boundary, self.interior):
            arr.flags.writeable = False

    @property
    def num_included(self) -> int:
        return int(np.count_nonzero(self.include))

    @classmethod
    def full(cls, grid: Grid) -> "DomainMask":
        include = np.ones(grid.num_nodes, dtype=bool)
        boundary = np.zeros(grid.num_nodes, dtype=bool)
        boundary[grid.boundary_nodes] = True
        return cls(include, boundary)

    @classmethod
    def from_include(cls, grid: Grid, include: np.ndarray) -> "DomainMask":
        include = np.asarray(include, dtype=bool)
        boundary = np.zeros_like(include)
        for node in np.flatnonzero(include):
            if node in grid.boundary_nodes:
                boundary[node] = True
                continue
            if any(not include[nb] for nb in grid.neighbors(node)):
                boundary[node] = True
        edge = np.zeros_like(include)
        edge[grid.boundary_nodes] = True
        boundary |= include & edge
        return cls(include, boundary)


def mask_is_connected(grid: Grid, mask: DomainMask) -> bool:
    """Edge connectivity of the included node set (flood fill)."""
    seeds = np.flatnonzero(mask.include)
    if seeds.size == 0:
        return False
    seen = np.zeros(grid.num_nodes, dtype=bool)
    stack = [int(seeds[0])]
    seen[seeds[0]] = True
    while stack:
        node = stack.pop()
        for nb in grid.neighbors(node):
            if mask.include[nb] and not seen[nb]:
                seen[nb] = True
                stack.append(nb)
    return bool(np.all(seen[mask.include]))


def truncate_domain(v: np.ndarray, grid: Grid, eps: float) -> DomainMask:
    """Mask of nodes whose surface point lies in the solid cylinder
    cosh r <= 1/eps.

    For radial graphs cosh r = |x|_E / x_{n+1} = 1/y at every node, for
    every height field, so the mask depends on the grid alone; ``v`` is
    accepted to match the operation contract and for future-proofing.
    """
    if not (0.0 < eps < 1.0):
        raise GridError(
            f"truncation needs 0 < eps < 1 (cosh r >= 1 always); got {eps}")
    del v
    include = grid.y >= eps * (1.0 - 1e-12)
    if not include.any():
        raise GridError("empty truncation mask")
    mask = DomainMask.from_include(grid, include)
    if not mask.interior.any():
        raise GridError("degenerate truncation mask: no interior nodes")
    if grid.mode == AXISYMMETRIC or grid.n == 1:
        grid._interval(mask)  # validates interval shape
        a, b = grid._interval(mask)
        if b - a + 1 < 9:
            raise GridError("truncation mask too thin (fewer than 9 nodes)")
    else:
        grid._ring_limit(mask)
    return mask

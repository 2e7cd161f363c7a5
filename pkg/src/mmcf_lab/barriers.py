"""Exact and semi-exact surfaces: hemispheres, horospheres, constant-H caps.

These fields are generated analytically, never by simulation, so they can
serve as independent oracles and comparison fixtures:

* hemisphere  -- v = log(radius); geodesic hyperplane, H = 0.
* horosphere  -- v = log(c0) - log(y) + (n - sigma) t; the plane
  {x_{n+1} = c0 e^{(n - sigma) t}}, H = n, translating vertically.
* cap         -- the Euclidean sphere of radius r centered at height
  -sigma r / n; constant hyperbolic mean curvature sigma, stationary.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .sphere_grid import DomainMask, Grid


class BarrierError(ValueError):
    pass


@dataclass(frozen=True)
class BarrierSpec:
    """Barrier request: kind in {hemisphere, horosphere, cap}."""

    kind: str
    n: int
    sigma: float = 0.0
    c0: float | None = None   # horosphere/hemisphere scale
    r: float | None = None    # cap radius

    def __post_init__(self):
        if self.kind not in ("hemisphere", "horosphere", "cap"):
            raise BarrierError(f"unknown barrier kind {self.kind!r}")
        if abs(self.sigma) >= self.n:
            raise BarrierError(f"|sigma| < n required, got sigma={self.sigma}, n={self.n}")
        if self.kind in ("hemisphere", "horosphere"):
            c0 = 1.0 if self.c0 is None else self.c0
            if c0 <= 0.0:
                raise BarrierError("c0 must be positive")
        if self.kind == "cap":
            r = 1.0 if self.r is None else self.r
            if r <= 0.0:
                raise BarrierError("cap radius must be positive")


def hemisphere_field(grid: Grid, radius: float = 1.0) -> np.ndarray:
    """Constant height field v = log(radius): a geodesic hyperplane."""
    if radius <= 0.0:
        raise BarrierError("radius must be positive")
    return np.full(grid.num_nodes, np.log(radius))


def horosphere_field(c0: float, t: float, sigma: float, grid: Grid) -> np.ndarray:
    """Radial height of the horosphere {x_{n+1} = c0 e^{(n - sigma) t}}."""
    if c0 <= 0.0:
        raise BarrierError("c0 must be positive")
    n = grid.n
    return np.log(c0) - np.log(grid.y) + (n - sigma) * t


def cap_field(spec: BarrierSpec, grid: Grid) -> tuple[np.ndarray, DomainMask]:
    """Height field of the constant-mean-curvature cap, plus its mask.

    Along the ray through z the Euclidean radius rho = e^v solves
    rho^2 + 2 rho y (sigma r / n) = r^2 (1 - sigma^2/n^2).  For
    |sigma| < n the positive root exists on every ray, so the mask is the
    full grid; the positive branch is the only one giving a radial graph.
    """
    if spec.kind != "cap":
        raise BarrierError("cap_field needs a cap BarrierSpec")
    if spec.n != grid.n:
        raise BarrierError("BarrierSpec dimension does not match the grid")
    r = 1.0 if spec.r is None else spec.r
    sigma, n = spec.sigma, grid.n
    shift = sigma * r / n
    disc = (grid.y * shift) ** 2 + r * r * (1.0 - (sigma / n) ** 2)
    rho = -grid.y * shift + np.sqrt(disc)
    if np.any(rho <= 0.0):
        raise BarrierError("cap does not intersect the grid's radial cone")
    return np.log(rho), DomainMask.full(grid)


def cone_field(grid: Grid, slope: float = 1.0) -> np.ndarray:
    """Lipschitz test fixture v = slope * theta (polar distance to the pole)."""
    return slope * grid.theta


def barrier_field(spec: BarrierSpec, grid: Grid, t: float = 0.0) -> np.ndarray:
    """Evaluate any barrier kind as a height field at time t."""
    if spec.kind == "hemisphere":
        return hemisphere_field(grid, 1.0 if spec.c0 is None else spec.c0)
    if spec.kind == "horosphere":
        return horosphere_field(1.0 if spec.c0 is None else spec.c0, t, spec.sigma, grid)
    field, _ = cap_field(spec, grid)
    return field


def comparison_check(traj1, traj2):
    """Order preservation of two trajectories: min over time and nodes of
    v2 - v1.  Passes when the margin is >= -1e-8.

    Both trajectories must live on the same grid and mask, with ordered
    initial and boundary data; the returned MarginReport records the worst
    margin over all common snapshot times.
    """
    from .estimates import MarginReport  # local import to avoid cycles

    g1, g2 = traj1.grid, traj2.grid
    if g1.num_nodes != g2.num_nodes or g1.mode != g2.mode or g1.n != g2.n:
        raise BarrierError("comparison needs matching grids")
    if not np.array_equal(traj1.mask.include, traj2.mask.include):
        raise BarrierError("comparison needs matching masks")
    times1 = {round(t, 12) for t in traj1.times}
    common = [i for i, t in enumerate(traj2.times) if round(t, 12) in times1]
    if not common:
        raise BarrierError("trajectories share no snapshot times")
    index1 = {round(t, 12): i for i, t in enumerate(traj1.times)}
    sel = traj1.mask.include
    margins = []
    for i2 in common:
        i1 = index1[round(traj2.times[i2], 12)]
        diff = traj2.heights[i2][sel] - traj1.heights[i1][sel]
        margins.append(float(diff.min()))
    margin = min(margins)
    return MarginReport(
        name="comparison",
        margin=margin,
        worst_violation=max(0.0, -margin),
        per_time=margins,
        meta={"snapshots": len(common), "nodes": int(sel.sum())},
        tolerance=1e-8,
        passed=margin >= -1e-8,
    )

"""Numerical laboratory for the modified mean curvature flow (MMCF) of
entire radial graphs over the upper hemisphere in the half-space model of
hyperbolic space."""

__version__ = "0.1.0"

from .sphere_grid import (
    GridSpec,
    Grid,
    GridError,
    DomainMask,
    build_grid,
    covariant_gradient,
    covariant_hessian,
    truncate_domain,
)
from .geometry import (
    GeometryError,
    SurfaceState,
    embed,
    slope_and_normal,
    cosh_radial,
    connection_correction,
    curvature,
    surface_laplace_beltrami,
    reflect,
)
from .barriers import (
    BarrierError,
    BarrierSpec,
    barrier_field,
    cap_field,
    comparison_check,
    cone_field,
    hemisphere_field,
    horosphere_field,
)
from .flow_solver import (
    FlowConfig,
    FlowError,
    Trajectory,
    ExhaustionSchedule,
    evolve,
    exhaustion_run,
    mollify,
    rhs,
    rhs_comparison,
    schedule,
    stable_dt,
    step,
)
from .estimates import (
    BoundReport,
    CutoffParams,
    EstimateError,
    MarginReport,
    ResidualReport,
    check_identity,
    check_inequality,
    heat_operator_numeric,
    verify_curvature_bounds,
    verify_gradient_bound,
)

__all__ = [name for name in dir() if not name.startswith("_")]

"""Batch entry point: parse a flat key = value configuration, run one of
the simulate / verify / exhaust / barriers / convergence commands, and emit
CSV/JSON artifacts (gnuplot-friendly columns, atomic writes).

Exit codes: 0 all checks passed, 1 usage or configuration errors, 2 check
failures.  Identical configuration and seed give bit-identical outputs.
"""

from __future__ import annotations

import hashlib
import json
import os
import sys
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace

import numpy as np

from . import __version__
from .barriers import BarrierSpec, barrier_field, cap_field, cone_field, horosphere_field
from .estimates import (
    IDENTITY_NAMES,
    INEQUALITY_NAMES,
    CutoffParams,
    EstimateError,
    check_identity,
    check_inequality,
    verify_curvature_bounds,
    verify_gradient_bound,
)
from .flow_solver import (
    FlowConfig,
    FlowError,
    convergence_orders,
    evolve,
    exhaustion_run,
    horosphere_error,
    mollify,
    rhs_comparison,
    schedule,
)
from .geometry import GeometryError
from .sphere_grid import GridError, GridSpec, build_grid

COMMANDS = ("simulate", "verify", "exhaust", "barriers", "convergence")

_KEYS = {
    "command", "n", "mode", "resolution", "theta_max", "sigma", "rhs_mode",
    "normalization", "cfl", "T", "snapshot_dt", "epsilon", "schedule",
    "boundary_policy", "initial", "output_dir", "seed", "cosh_R", "theta",
}


class ConfigError(ValueError):
    pass


@dataclass
class RunConfig:
    command: str = ""
    n: int = 1
    mode: str = "full"
    resolution: int | tuple[int, int] = 257
    theta_max: float = 1.4
    sigma: float = 0.0
    rhs_mode: str = "parametric"
    normalization: str = "1"
    cfl: float = 0.8
    T: float = 0.5
    snapshot_dt: float | None = None
    epsilon: float | None = None
    schedule: tuple[float, ...] = ()
    boundary_policy: str = "frozen"
    initial: str = "hemisphere"
    output_dir: str = "out"
    seed: int = 0
    cosh_R: float | None = None
    theta: float = 0.5
    config_sha: str = ""

    def grid_spec(self) -> GridSpec:
        return GridSpec(n=self.n, resolution=self.resolution,
                        theta_max=self.theta_max, mode=self.mode)

    def flow_config(self) -> FlowConfig:
        boundary = "prescribed" if self.boundary_policy == "exact" else "frozen"
        return FlowConfig(
            sigma=self.sigma, T=self.T, rhs_mode=self.rhs_mode,
            normalization=self.normalization, c_cfl=self.cfl,
            snapshot_dt=self.snapshot_dt, epsilon=self.epsilon,
            boundary=boundary)


def parse_config(path: str) -> RunConfig:
    """Parse the flat key = value file; unknown keys are rejected with the
    offending line number."""
    try:
        with open(path, "r", encoding="utf-8") as fh:
            raw = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    cfg = RunConfig()
    cfg.config_sha = hashlib.sha256(raw.encode()).hexdigest()[:16]
    for lineno, line in enumerate(raw.splitlines(), start=1):
        text = line.split("#", 1)[0].strip()
        if not text:
            continue
        if "=" not in text:
            raise ConfigError(f"{path}:{lineno}: expected 'key = value'")
        key, _, value = text.partition("=")
        key, value = key.strip(), value.strip()
        if key not in _KEYS:
            raise ConfigError(f"{path}:{lineno}: unknown key {key!r}")
        try:
            _assign(cfg, key, value)
        except (ValueError, TypeError) as exc:
            raise ConfigError(f"{path}:{lineno}: bad value for {key}: {exc}") from exc
    _validate(cfg, path)
    return cfg


def _assign(cfg: RunConfig, key: str, value: str) -> None:
    if key == "n":
        cfg.n = int(value)
    elif key == "resolution":
        if "x" in value:
            a, b = value.split("x")
            cfg.resolution = (int(a), int(b))
        else:
            cfg.resolution = int(value)
    elif key in ("theta_max", "sigma", "cfl", "T", "theta"):
        setattr(cfg, key if key != "cfl" else "cfl", float(value))
    elif key in ("snapshot_dt", "epsilon", "cosh_R"):
        setattr(cfg, key, float(value))
    elif key == "schedule":
        cfg.schedule = tuple(float(tok) for tok in value.split(",") if tok.strip())
    elif key == "seed":
        cfg.seed = int(value)
    elif key in ("command", "mode", "rhs_mode", "normalization",
                 "boundary_policy", "initial", "output_dir"):
        setattr(cfg, key, value)
    else:  # pragma: no cover - guarded by _KEYS
        raise ConfigError(key)


def _validate(cfg: RunConfig, path: str) -> None:
    if cfg.command and cfg.command not in COMMANDS:
        raise ConfigError(f"{path}: unknown command {cfg.command!r}")
    if abs(cfg.sigma) >= cfg.n:
        raise ConfigError(
            f"{path}: sigma = {cfg.sigma} violates |sigma| < n = {cfg.n}")
    if cfg.boundary_policy not in ("frozen", "exact"):
        raise ConfigError(f"{path}: boundary_policy must be frozen or exact")
    try:
        cfg.grid_spec()
        cfg.flow_config()
    except (GridError, ValueError) as exc:
        raise ConfigError(f"{path}: {exc}") from exc


# ----------------------------------------------------------------------
# initial data


def make_initial(cfg: RunConfig, grid):
    """Resolve the ``initial`` key into a height field (and the exact
    boundary law when one exists)."""
    name, _, args = cfg.initial.partition(":")
    opts = {}
    for tok in args.split(","):
        if tok.strip():
            k, _, v = tok.partition("=")
            opts[k.strip()] = v.strip()
    if name == "hemisphere":
        radius = float(opts.get("radius", 1.0))
        return np.full(grid.num_nodes, np.log(radius)), None
    if name == "horosphere":
        c0 = float(opts.get("c0", 1.0))
        exact = lambda t: horosphere_field(c0, t, cfg.sigma, grid)  # noqa: E731
        return exact(0.0), exact
    if name == "cap":
        spec = BarrierSpec(kind="cap", n=grid.n, sigma=cfg.sigma,
                           r=float(opts.get("r", 1.0)))
        return cap_field(spec, grid)[0], None
    if name == "cone":
        slope = float(opts.get("slope", 1.0))
        scale = float(opts.get("scale", 4.0 * grid.h))
        return mollify(cone_field(grid, slope), scale, grid), None
    if name == "perturbed-cap":
        spec = BarrierSpec(kind="cap", n=grid.n, sigma=cfg.sigma,
                           r=float(opts.get("r", 1.0)))
        base, _ = cap_field(spec, grid)
        amp = float(opts.get("amp", 0.05))
        rng = np.random.default_rng(getattr(cfg, "seed", 0))
        coeff = rng.normal(size=4)
        wave = sum(c * np.cos((k + 1) * grid.theta)
                   for k, c in enumerate(coeff))
        wave = wave / max(1.0, float(np.max(np.abs(wave))))
        return base + amp * wave, None
    if name == "expr":
        namespace = {"np": np, "theta": grid.theta, "y": grid.y}
        return np.broadcast_to(
            np.asarray(eval(args, {"__builtins__": {}}, namespace), dtype=float),
            (grid.num_nodes,)).copy(), None
    if name == "file":
        arr = np.load(args) if args.endswith(".npy") else np.loadtxt(args)
        return np.asarray(arr, dtype=float).reshape(grid.num_nodes), None
    raise ConfigError(f"unknown initial field {cfg.initial!r}")


# ----------------------------------------------------------------------
# output helpers


def _atomic_write(path: str, text: str) -> None:
    directory = os.path.dirname(path) or "."
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def _fmt(x) -> str:
    if isinstance(x, (float, np.floating)):
        return f"{float(x):.17g}"
    return str(x)


def _json_text(cfg: RunConfig, payload: dict) -> str:
    doc = {"config_sha256": cfg.config_sha, "version": __version__}
    doc.update(payload)
    return json.dumps(doc, indent=2, sort_keys=True, default=_json_default) + "\n"


def _json_default(obj):
    if isinstance(obj, (np.floating, np.integer)):
        return obj.item()
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    raise TypeError(f"not serializable: {type(obj)!r}")


def _snapshot_csv(cfg: RunConfig, traj, exact_fn=None) -> str:
    grid = traj.grid
    two_coords = grid.coords.ndim == 2
    header = "t,node_id,coord1" + (",coord2" if two_coords else "") + \
        ",v,w,H,A2,coshr,support"
    if exact_fn is not None:
        header += ",error_vs_exact"
    lines = [f"# config_sha256={cfg.config_sha} version={__version__}", header]
    sel = np.flatnonzero(traj.mask.include)
    for ti, t in enumerate(traj.times):
        st = traj.states[ti]
        err = (np.abs(traj.heights[ti] - exact_fn(t)) if exact_fn is not None
               else None)
        for node in sel:
            coords = (grid.coords[node] if not two_coords
                      else grid.coords[node, :])
            row = [_fmt(t), str(int(node))]
            if two_coords:
                row += [_fmt(coords[0]), _fmt(coords[1])]
            else:
                row.append(_fmt(coords))
            row += [_fmt(st.v[node]), _fmt(st.w[node]), _fmt(st.H[node]),
                    _fmt(st.A2[node]), _fmt(st.cosh_r[node]),
                    _fmt(st.support_e[node])]
            if err is not None:
                row.append(_fmt(err[node]))
            lines.append(",".join(row))
    return "\n".join(lines) + "\n"


def _max_workers() -> int:
    env = os.environ.get("MMCF_THREADS")
    cap = min(4, os.cpu_count() or 1)
    if env:
        try:
            cap = max(1, min(cap, int(env)))
        except ValueError:
            pass
    return cap


# ----------------------------------------------------------------------
# commands


def _cmd_simulate(cfg: RunConfig, out_dir: str) -> int:
    grid = build_grid(cfg.grid_spec())
    v0, exact = make_initial(cfg, grid)
    fc = cfg.flow_config()
    boundary = exact if fc.boundary == "prescribed" else None
    if fc.boundary == "prescribed" and exact is None:
        raise ConfigError("boundary_policy = exact needs a horosphere initial")
    traj = evolve(v0, fc, grid, boundary_values=boundary)
    final_err = None
    if exact is not None:
        sel = traj.mask.include
        final_err = float(np.max(np.abs(
            traj.heights[-1][sel] - exact(traj.times[-1])[sel])))
    _atomic_write(os.path.join(out_dir, "snapshots.csv"),
                  _snapshot_csv(cfg, traj, exact))
    _atomic_write(os.path.join(out_dir, "run.json"), _json_text(cfg, {
        "command": "simulate",
        "times": traj.times,
        "steps": len(traj.dts),
        "events": traj.events,
        "terminated": traj.terminated,
        "reason": traj.reason,
        "stationarity": traj.stationarity,
        "final_error_vs_exact": final_err,
        "min_support": min(st.min_support for st in traj.states),
    }))
    return 0 if not traj.terminated else 2


def _fixture_trajectory(cfg: RunConfig, refine: int = 0):
    spec = cfg.grid_spec()
    if refine:
        factor = 2 ** refine
        if isinstance(spec.resolution, tuple):
            res = tuple((r - 1) * factor + 1 for r in spec.resolution)
        else:
            res = (spec.resolution - 1) * factor + 1
        spec = GridSpec(n=spec.n, resolution=res, theta_max=spec.theta_max,
                        mode=spec.mode)
    grid = build_grid(spec)
    v0, exact = make_initial(cfg, grid)
    fc = cfg.flow_config()
    if refine:
        snap = fc.snapshot_dt if fc.snapshot_dt else fc.T / 32.0
        fc = replace(fc, snapshot_dt=snap / 4.0 ** refine)
    boundary = exact if fc.boundary == "prescribed" else None
    return evolve(v0, fc, grid, boundary_values=boundary), grid


def _cmd_verify(cfg: RunConfig, out_dir: str) -> int:
    traj, grid = _fixture_trajectory(cfg)
    cosh_target = cfg.cosh_R if cfg.cosh_R else 0.8 / max(
        grid.y.min(), 1e-12)
    cosh_target = max(float(grid.n), cosh_target)
    params = CutoffParams.from_trajectory(traj, cosh_R=cosh_target,
                                          theta=cfg.theta, T=cfg.T)
    edge = 8.0 * grid.h

    reports = []
    tensor_ok = grid.mode == "axisymmetric" or grid.n == 1

    def run_identity(name):
        if name in ("simons", "A_evolution") and not tensor_ok:
            return None
        rep = check_identity(name, traj, params, edge_margin=edge)
        rep.tolerance = 1e-2
        rep.passed = rep.scaled_residual <= rep.tolerance
        if not rep.passed:
            fine, _ = _fixture_trajectory(cfg, refine=1)
            rep_f = check_identity(name, fine, params, edge_margin=edge)
            ratio = rep.max_residual / max(rep_f.max_residual, 1e-300)
            rep.refinement = {
                "fine_max_residual": rep_f.max_residual,
                "ratio": ratio,
                "systematic": bool(ratio < 2.0),
            }
        return rep

    identity_names = [n for n in IDENTITY_NAMES
                      if tensor_ok or n not in ("simons", "A_evolution")]
    with ThreadPoolExecutor(max_workers=_max_workers()) as pool:
        identity_reports = list(pool.map(run_identity, identity_names))
    identity_reports = [r for r in identity_reports if r is not None]
    reports.extend(identity_reports)
    tau = 10.0 * max(r.max_residual for r in identity_reports)

    for name in INEQUALITY_NAMES:
        rep = check_inequality(name, traj, params, edge_margin=edge)
        if not rep.skipped:
            rep.tolerance = tau
            rep.passed = rep.worst_violation <= tau
        reports.append(rep)

    try:
        params.validate_for_gradient_bound()
        reports.append(verify_gradient_bound(traj, params))
    except EstimateError as exc:
        reports.append(_skip_report("gradient_bound", str(exc)))
    try:
        reports.append(verify_curvature_bounds(traj, params, m=0))
    except EstimateError as exc:
        reports.append(_skip_report("curvature_bound_m0", str(exc)))

    comparison = rhs_comparison(traj.heights[0], grid, cfg.sigma, traj.mask)

    payload = {
        "command": "verify",
        "fixture": cfg.initial,
        "sigma": cfg.sigma,
        "tolerance_inequalities": tau,
        "checks": [r.to_dict() for r in reports],
        "rhs_comparison": comparison,
    }
    _atomic_write(os.path.join(out_dir, "reports.json"), _json_text(cfg, payload))
    _atomic_write(os.path.join(out_dir, "timeseries.csv"),
                  _reports_csv(cfg, reports))
    failed = [r.name for r in reports
              if getattr(r, "passed", True) is False
              and not getattr(r, "skipped", False)]
    return 2 if failed else 0


def _skip_report(name, note):
    from .estimates import MarginReport
    return MarginReport(name=name, margin=0.0, worst_violation=0.0,
                        per_time=[], meta={}, skipped=True, note=note)


def _reports_csv(cfg: RunConfig, reports) -> str:
    lines = [f"# config_sha256={cfg.config_sha} version={__version__}",
             "check,t,value"]
    for rep in reports:
        per_time = getattr(rep, "per_time", None) or []
        for entry in per_time:
            if isinstance(entry, dict):
                lines.append(f"{rep.name},{_fmt(entry['t'])},"
                             f"{_fmt(entry['max_residual'])}")
            else:
                lines.append(f"{rep.name},,{_fmt(entry)}")
        if hasattr(rep, "times"):
            for t, val in zip(rep.times, rep.rhs):
                if val is not None:
                    lines.append(f"{rep.name},{_fmt(t)},{_fmt(val)}")
    return "\n".join(lines) + "\n"


def _cmd_exhaust(cfg: RunConfig, out_dir: str) -> int:
    if not cfg.schedule:
        raise ConfigError("exhaust needs a schedule = d0,d1,... key")
    grid = build_grid(cfg.grid_spec())
    v0, _ = make_initial(cfg, grid)
    sched = schedule(cfg.schedule, grid.n, cfg.sigma)
    fc = cfg.flow_config()
    report = exhaustion_run(v0, sched, fc, grid)
    payload = {
        "command": "exhaust",
        "levels": report.levels,
        "consecutive_sup_differences": report.diffs,
        "innermost_compact_differences": report.innermost_diffs,
        "compare_theta": report.compare_theta,
        "region_nodes": report.region_nodes,
    }
    _atomic_write(os.path.join(out_dir, "exhaustion.json"),
                  _json_text(cfg, payload))
    return 0


def _cmd_barriers(cfg: RunConfig, out_dir: str) -> int:
    grid = build_grid(cfg.grid_spec())
    from .geometry import curvature

    rows = [f"# config_sha256={cfg.config_sha} version={__version__}",
            "kind,node_id,theta,v,H,A2,expected_H,abs_H_error"]
    worst = 0.0
    for kind, expected in (("hemisphere", 0.0), ("horosphere", float(grid.n)),
                           ("cap", cfg.sigma)):
        spec = BarrierSpec(kind=kind, n=grid.n, sigma=cfg.sigma, c0=1.0, r=1.0)
        v = barrier_field(spec, grid)
        st = curvature(v, grid)
        inner = st.mask.interior.copy()
        inner[np.abs(grid.theta - grid.theta.max()) < 4 * grid.h] = False
        err = np.abs(st.H - expected)
        worst = max(worst, float(err[inner].max()))
        for node in np.flatnonzero(inner):
            rows.append(",".join([
                kind, str(int(node)), _fmt(grid.theta[node]), _fmt(v[node]),
                _fmt(st.H[node]), _fmt(st.A2[node]), _fmt(expected),
                _fmt(err[node])]))
    _atomic_write(os.path.join(out_dir, "barriers.csv"), "\n".join(rows) + "\n")
    _atomic_write(os.path.join(out_dir, "barriers.json"), _json_text(cfg, {
        "command": "barriers", "worst_interior_H_error": worst,
        "tolerance": 100.0 * grid.h**2}))
    return 0 if worst <= 100.0 * grid.h**2 else 2


def _cmd_convergence(cfg: RunConfig, out_dir: str) -> int:
    if isinstance(cfg.resolution, tuple):
        raise ConfigError("convergence studies use 1-coordinate grids")
    base = cfg.resolution
    resolutions = [(base - 1) // 2 + 1, base, (base - 1) * 2 + 1]
    errors = [horosphere_error(cfg.n, r, cfg.theta_max, cfg.sigma, 1.0,
                               cfg.T, mode=cfg.mode, c_cfl=cfg.cfl)
              for r in resolutions]
    orders = convergence_orders(errors)
    payload = {
        "command": "convergence",
        "resolutions": resolutions,
        "errors": errors,
        "orders": orders,
        "pass_threshold": 1.8,
    }
    _atomic_write(os.path.join(out_dir, "convergence.json"),
                  _json_text(cfg, payload))
    _atomic_write(os.path.join(out_dir, "convergence.csv"), "\n".join(
        [f"# config_sha256={cfg.config_sha} version={__version__}",
         "resolution,error"] +
        [f"{r},{_fmt(e)}" for r, e in zip(resolutions, errors)]) + "\n")
    return 0 if min(orders) >= 1.8 else 2


# ----------------------------------------------------------------------
# driver


def execute(argv: list[str]) -> int:
    """Run one command; returns the process exit code."""
    args = list(argv)
    command = None
    config_path = None
    out_override = None
    refine = 0
    i = 0
    while i < len(args):
        tok = args[i]
        if tok == "--config":
            i += 1
            config_path = args[i] if i < len(args) else None
        elif tok == "--out":
            i += 1
            out_override = args[i] if i < len(args) else None
        elif tok == "--resolution-override":
            i += 1
            try:
                refine = int(args[i])
            except (IndexError, ValueError):
                print("error: --resolution-override needs an integer",
                      file=sys.stderr)
                return 1
        elif tok in COMMANDS:
            command = tok
        elif tok in ("-h", "--help"):
            print(_USAGE)
            return 0
        else:
            print(f"error: unknown argument {tok!r}", file=sys.stderr)
            return 1
        i += 1
    if config_path is None:
        print("error: --config <path> is required", file=sys.stderr)
        return 1
    try:
        cfg = parse_config(config_path)
        if command:
            cfg.command = command
        if not cfg.command:
            raise ConfigError("no command given (cli argument or config key)")
        if refine:
            factor = 2 ** refine
            if isinstance(cfg.resolution, tuple):
                cfg.resolution = tuple((r - 1) * factor + 1
                                       for r in cfg.resolution)
            else:
                cfg.resolution = (cfg.resolution - 1) * factor + 1
        out_dir = out_override or cfg.output_dir
        handler = {
            "simulate": _cmd_simulate,
            "verify": _cmd_verify,
            "exhaust": _cmd_exhaust,
            "barriers": _cmd_barriers,
            "convergence": _cmd_convergence,
        }[cfg.command]
        return handler(cfg, out_dir)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    except (GridError, GeometryError, FlowError, EstimateError, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


_USAGE = """usage: mmcf-lab <command> --config <path> [--out <dir>] \
[--resolution-override <k>]

commands: simulate | verify | exhaust | barriers | convergence
The configuration file holds flat key = value pairs; see the README for
the key list.  --resolution-override k doubles the node counts k times.
"""


def main() -> None:
    sys.exit(execute(sys.argv[1:]))


if __name__ == "__main__":
    main()

"""Configuration-driven experiment runner.

Presets expose the package's studies as one-shot commands with deterministic
CSV output (17 significant digits, no timing columns) plus a ``key = value``
summary on stdout.  Timings are reported on stdout only, so re-running a
preset with the same configuration reproduces the CSV byte for byte.

    cellforce <preset> [--config file] [--set section.key=value]...
                       [--dump-mesh] [--dump-matrix] [--dump-rhs]
"""
from __future__ import annotations

import argparse
import configparser
import sys
import time
from dataclasses import dataclass, fields, replace
from pathlib import Path

import numpy as np

from . import forces
from .analysis import (
    ConvergenceStudy,
    area_reduction,
    beta_consistency_sweep,
    cube_surface,
    estimate_order,
    l2_norm,
    midpoint_quadrature_order,
    momentum_balance,
    smoothing_consistency_sweep,
    square_polygon,
    write_solution_svg,
)
from .elasticity import MaterialParams, assemble
from .errors import CellforceError, ConfigurationError, SolverError
from .mesh import (
    CellSquare,
    cell_boundary_loop,
    export_mesh_text,
    generate_mesh,
    rectangle_boundary_loop,
    refine,
)
from .solver import solve
from .verify1d import Cell1D, exact_1d, solve_1d

__all__ = ["ExperimentConfig", "PRESETS", "run", "main"]


@dataclass(frozen=True)
class ExperimentConfig:
    """All experiment knobs; the defaults reproduce the reference parameter set."""

    # geometry
    x0: float = 20.0
    y0: float = 20.0
    wx: float = 10.0
    wy: float = 10.0
    R: float = 6.0
    center_x: float | None = None  # None: domain centre
    center_y: float | None = None
    # material
    E: float = 1.0
    nu: float = 0.48
    beta: float = 1e-5
    kappa: float = 1.0
    P: float = 1.0
    # model
    epsilon: float | None = None  # None: preset default
    n_segments: int | None = None  # None: one segment per cell-wall mesh edge
    quadrature_order: int = 4
    # discretization
    h_target: float | None = None  # None: preset default
    levels: int = 3
    # sweeps
    betas: tuple = (1e-2, 1e-3, 1e-4, 1e-5, 1e-6)
    dx_values: tuple = (1.6, 0.8, 0.4)
    eps_values: tuple = (0.4, 0.8, 1.6)
    fixed_dx: float = 1.6
    fixed_eps: float = 0.8
    # 1d verification
    length_1d: float = 20.0
    center_1d: float = 10.0
    size_1d: float = 6.0
    nodes_1d: int = 161
    # outputs
    out_dir: str = "."
    csv: str | None = None  # None: <preset>.csv inside out_dir
    svg: str | None = None  # None: no SVG
    # run
    seed: int = 42
    tol: float = 1e-10

    def cell(self) -> CellSquare:
        cx = self.center_x if self.center_x is not None else 0.5 * self.x0
        cy = self.center_y if self.center_y is not None else 0.5 * self.y0
        return CellSquare(center=(cx, cy), side=self.R)

    def material(self) -> MaterialParams:
        return MaterialParams(E=self.E, nu=self.nu, beta=self.beta, kappa=self.kappa, P=self.P)


def _parse_float_list(text: str) -> tuple:
    return tuple(float(part) for part in text.split(",") if part.strip())


def _optional_float(text: str):
    return None if text.strip().lower() in ("auto", "none", "") else float(text)


def _optional_int(text: str):
    return None if text.strip().lower() in ("auto", "none", "") else int(text)


def _optional_str(text: str):
    return None if text.strip() == "" else text.strip()


# (section, key) -> (config field, parser)
_FIELD_MAP = {
    ("geometry", "x0"): ("x0", float),
    ("geometry", "y0"): ("y0", float),
    ("geometry", "wx"): ("wx", float),
    ("geometry", "wy"): ("wy", float),
    ("geometry", "r"): ("R", float),
    ("geometry", "center_x"): ("center_x", _optional_float),
    ("geometry", "center_y"): ("center_y", _optional_float),
    ("material", "e"): ("E", float),
    ("material", "nu"): ("nu", float),
    ("material", "beta"): ("beta", float),
    ("material", "kappa"): ("kappa", float),
    ("material", "p"): ("P", float),
    ("model", "epsilon"): ("epsilon", _optional_float),
    ("model", "n_segments"): ("n_segments", _optional_int),
    ("model", "quadrature_order"): ("quadrature_order", int),
    ("discretization", "h_target"): ("h_target", _optional_float),
    ("discretization", "levels"): ("levels", int),
    ("sweep", "betas"): ("betas", _parse_float_list),
    ("sweep", "dx_values"): ("dx_values", _parse_float_list),
    ("sweep", "eps_values"): ("eps_values", _parse_float_list),
    ("sweep", "fixed_dx"): ("fixed_dx", float),
    ("sweep", "fixed_eps"): ("fixed_eps", float),
    ("verify1d", "length"): ("length_1d", float),
    ("verify1d", "center"): ("center_1d", float),
    ("verify1d", "size"): ("size_1d", float),
    ("verify1d", "nodes"): ("nodes_1d", int),
    ("outputs", "directory"): ("out_dir", str),
    ("outputs", "csv"): ("csv", _optional_str),
    ("outputs", "svg"): ("svg", _optional_str),
    ("run", "seed"): ("seed", int),
    ("run", "tol"): ("tol", float),
}


def _apply_entry(values: dict, section: str, key: str, raw: str) -> None:
    try:
        field_name, parser = _FIELD_MAP[(section.lower(), key.lower())]
    except KeyError:
        raise ConfigurationError(f"unknown configuration key [{section}] {key}") from None
    try:
        values[field_name] = parser(raw)
    except ValueError as exc:
        raise ConfigurationError(f"bad value for [{section}] {key}: {raw!r} ({exc})") from None


def load_config(path: str | None = None, overrides=()) -> ExperimentConfig:
    """Build a configuration from an INI file plus ``section.key=value`` overrides."""
    values: dict = {}
    if path is not None:
        parser = configparser.ConfigParser()
        read = parser.read(path)
        if not read:
            raise ConfigurationError(f"cannot read config file {path!r}")
        for section in parser.sections():
            for key, raw in parser.items(section):
                _apply_entry(values, section, key, raw)
    for item in overrides:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigurationError(f"--set expects section.key=value, got {item!r}")
        target, raw = item.split("=", 1)
        section, key = target.split(".", 1)
        _apply_entry(values, section.strip(), key.strip(), raw.strip())
    return ExperimentConfig(**values)


# -- output plumbing ----------------------------------------------------------


def _fmt(value) -> str:
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return f"{float(value):.17g}"
    return str(value)


def _write_csv(path: Path, header: list[str], rows: list[list]) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(v) for v in row) + "\n")


@dataclass(frozen=True)
class DumpFlags:
    mesh: bool = False
    matrix: bool = False
    rhs: bool = False


def _dump_artifacts(out_dir: Path, prefix: str, flags: DumpFlags, mesh=None, system=None, rhs=None):
    out_dir.mkdir(parents=True, exist_ok=True)
    if flags.mesh and mesh is not None:
        with open(out_dir / f"{prefix}_mesh.txt", "w") as fh:
            export_mesh_text(mesh, fh)
    if flags.matrix and system is not None:
        coo = system.operator.tocoo()
        order = np.lexsort((coo.col, coo.row))
        with open(out_dir / f"{prefix}_matrix.txt", "w") as fh:
            fh.write("# row col value\n")
            for k in order:
                fh.write(f"{coo.row[k]} {coo.col[k]} {coo.data[k]:.17g}\n")
    if flags.rhs and rhs is not None:
        with open(out_dir / f"{prefix}_rhs.csv", "w") as fh:
            fh.write("dof,value\n")
            for k, v in enumerate(rhs):
                fh.write(f"{k},{v:.17g}\n")


# -- presets ---------------------------------------------------------------------

# Approach names in the order the comparison tables use them.
_APPROACHES = ("immersed", "hole", "smoothed")


def _approach_setup(name: str, cfg: ExperimentConfig, full_mesh, hole_mesh):
    """Mesh, material and force model for one comparison approach."""
    params = cfg.material()
    if name == "immersed":
        return full_mesh, params, forces.PointForces(cfg.n_segments)
    if name == "hole":
        return hole_mesh, params, forces.HoleNeumann()
    if name == "smoothed":
        # Vanishing-cell gradient force at the cell centre, dx = cell side.
        eps = cfg.epsilon if cfg.epsilon is not None else 1.0
        return full_mesh, params, forces.SmoothedParticleGradient(epsilon=eps)
    raise ConfigurationError(f"unknown approach {name!r}")


def _solve_approach(mesh, params, model, cfg, bc="dirichlet"):
    system = assemble(mesh, params, bc=bc)
    rhs = forces.build_rhs(mesh, model, params.P)
    sol, report = solve(system, rhs, tol=cfg.tol)
    return system, rhs, sol, report


def preset_compare_approaches(cfg: ExperimentConfig, flags: DumpFlags, out_dir: Path):
    h = cfg.h_target if cfg.h_target is not None else cfg.R / 12.0
    cell = cfg.cell()
    full = generate_mesh((cfg.x0, cfg.y0), h, cell)
    hole = generate_mesh((cfg.x0, cfg.y0), h, cell, exclude_cell_interior=True)
    cx, cy = cell.center
    rows, summary = [], {}
    for name in _APPROACHES:
        mesh, params, model = _approach_setup(name, cfg, full, hole)
        start = time.perf_counter()
        system, rhs, sol, report = _solve_approach(mesh, params, model, cfg)
        elapsed = time.perf_counter() - start
        cell_loop = cell_boundary_loop(mesh)
        vicinity = rectangle_boundary_loop(
            mesh, cx - 0.5 * cfg.wx, cx + 0.5 * cfg.wx, cy - 0.5 * cfg.wy, cy + 0.5 * cfg.wy
        )
        cell_red = area_reduction(mesh, sol, cell_loop)
        vic_red = area_reduction(mesh, sol, vicinity)
        rows.append([name, h, cell_red, vic_red, l2_norm(sol)])
        summary[f"compare.{name}.cell_reduction_pct"] = cell_red
        summary[f"compare.{name}.vicinity_reduction_pct"] = vic_red
        summary[f"compare.{name}.l2_norm"] = l2_norm(sol)
        summary[f"compare.{name}.iterations"] = report.iterations
        summary[f"compare.{name}.wall_time_s"] = elapsed
        _dump_artifacts(out_dir, f"compare_{name}", flags, mesh=mesh, system=system, rhs=rhs)
        if cfg.svg:
            svg_path = out_dir / cfg.svg
            target = svg_path.with_name(f"{svg_path.stem}_{name}{svg_path.suffix or '.svg'}")
            write_solution_svg(target, sol)
    header = ["approach", "h", "cell_area_reduction_pct", "vicinity_area_reduction_pct", "l2_norm"]
    return header, rows, summary


def preset_convergence_table(cfg: ExperimentConfig, flags: DumpFlags, out_dir: Path):
    base_h = cfg.h_target if cfg.h_target is not None else 1.0
    if cfg.levels < 3:
        raise ConfigurationError("convergence table needs at least 3 levels")
    cell = cfg.cell()
    full = generate_mesh((cfg.x0, cfg.y0), base_h, cell)
    hole = generate_mesh((cfg.x0, cfg.y0), base_h, cell, exclude_cell_interior=True)
    meshes = {"full": [full], "hole": [hole]}
    for _ in range(cfg.levels - 1):
        meshes["full"].append(refine(meshes["full"][-1]))
        meshes["hole"].append(refine(meshes["hole"][-1]))

    norms = {name: [] for name in _APPROACHES}
    hs = [m.h_target for m in meshes["full"]]
    for level in range(cfg.levels):
        for name in _APPROACHES:
            mesh, params, model = _approach_setup(
                name, cfg, meshes["full"][level], meshes["hole"][level]
            )
            system, rhs, sol, _ = _solve_approach(mesh, params, model, cfg)
            norms[name].append(l2_norm(sol))
            _dump_artifacts(
                out_dir, f"convergence_{name}_L{level}", flags, mesh=mesh, system=system, rhs=rhs
            )
    rows, summary = [], {}
    for name in _APPROACHES:
        study = ConvergenceStudy(levels=tuple(zip(hs[-3:], norms[name][-3:])))
        rate = estimate_order(study)
        for level in range(cfg.levels):
            rows.append([name, level, hs[level], norms[name][level], rate])
        summary[f"convergence.{name}.rate"] = rate
    header = ["approach", "level", "h", "l2_norm", "estimated_order"]
    return header, rows, summary


def preset_beta_sweep(cfg: ExperimentConfig, flags: DumpFlags, out_dir: Path):
    h = cfg.h_target if cfg.h_target is not None else 0.5
    mesh = generate_mesh((cfg.x0, cfg.y0), h, cfg.cell())
    _dump_artifacts(out_dir, "beta_sweep", flags, mesh=mesh)
    study = beta_consistency_sweep(mesh, cfg.material(), cfg.betas, tol=cfg.tol)
    rows = [[beta, gap] for beta, gap in study.levels]
    gaps = [gap for _, gap in study.levels]
    monotone = all(a >= b for a, b in zip(gaps, gaps[1:]))
    summary = {
        "beta_sweep.slope": study.estimated_order,
        "beta_sweep.monotone_decreasing": int(monotone),
    }
    return ["beta", "h1_gap"], rows, summary


def preset_epsilon_sweep(cfg: ExperimentConfig, flags: DumpFlags, out_dir: Path):
    h = cfg.h_target if cfg.h_target is not None else 0.25
    mesh = generate_mesh((cfg.x0, cfg.y0), h, cfg.cell())
    _dump_artifacts(out_dir, "epsilon_sweep", flags, mesh=mesh)
    # The smoothing theory has no cell softening: uniform stiffness here.
    params = replace(cfg.material(), beta=1.0)
    pairs = []
    for eps in cfg.eps_values:
        pairs.append((cfg.fixed_dx, eps))
    for dx in cfg.dx_values:
        pairs.append((dx, cfg.fixed_eps))
    for dx in cfg.dx_values:
        pairs.append((dx, dx))
    seen, unique_pairs = set(), []
    for pair in pairs:
        if pair not in seen:
            seen.add(pair)
            unique_pairs.append(pair)
    report = smoothing_consistency_sweep(mesh, params, unique_pairs, tol=cfg.tol)
    rows = [
        [r.dx, r.eps, r.gap_point_gaussian, r.gap_gaussian_gradient_normalized, r.gap_point_gradient]
        for r in report.rows
    ]
    diag = report.diagonal()
    totals = [r.gap_point_gradient for r in diag]
    summary = {
        "epsilon_sweep.eps_exponent": report.eps_exponent(cfg.fixed_dx),
        "epsilon_sweep.dx_exponent": report.dx_exponent(cfg.fixed_eps),
        "epsilon_sweep.diagonal_monotone_decreasing": int(
            all(a > b for a, b in zip(totals, totals[1:]))
        ),
    }
    header = ["dx", "eps", "gap_point_gaussian", "gap_gaussian_gradient_normalized", "gap_point_gradient"]
    return header, rows, summary


def preset_quadrature_order(cfg: ExperimentConfig, flags: DumpFlags, out_dir: Path):
    square = square_polygon(cfg.R)
    cube = cube_surface(cfg.R)
    study2d = midpoint_quadrature_order(square, lambda p: np.exp(p[:, 0] + p[:, 1]), levels=4)
    study3d = midpoint_quadrature_order(
        cube, lambda p: np.exp((p[:, 0] + p[:, 1] + p[:, 2]) / 3.0), levels=4
    )
    rows = []
    for name, study in (("square_2d", study2d), ("cube_3d", study3d)):
        for size, err in study.levels:
            rows.append([name, size, err])
    summary = {
        "quadrature.order_2d": study2d.estimated_order,
        "quadrature.order_3d": study3d.estimated_order,
    }
    return ["surface", "element_size", "midpoint_error"], rows, summary


def preset_verify_1d(cfg: ExperimentConfig, flags: DumpFlags, out_dir: Path):
    cell = Cell1D(L=cfg.length_1d, c=cfg.center_1d, h=cfg.size_1d)
    x, u = solve_1d(cell, cfg.nodes_1d)
    exact = exact_1d(cell, x)
    rows = [[k, x[k], u[k], exact[k], abs(u[k] - exact[k])] for k in range(len(x))]
    summary = {"verify_1d.max_nodal_error": float(np.max(np.abs(u - exact)))}
    return ["node", "x", "u_h", "u_exact", "abs_error"], rows, summary


def preset_momentum_check(cfg: ExperimentConfig, flags: DumpFlags, out_dir: Path):
    if cfg.kappa <= 0:
        raise ConfigurationError("momentum check needs kappa > 0 (Robin boundary)")
    h = cfg.h_target if cfg.h_target is not None else 0.5
    cell = cfg.cell()
    full = generate_mesh((cfg.x0, cfg.y0), h, cell)
    hole = generate_mesh((cfg.x0, cfg.y0), h, cell, exclude_cell_interior=True)
    n_seg = cfg.n_segments if cfg.n_segments is not None else 4 * round(cfg.R / h)
    geom = forces.discretize_cell_boundary(cell, n_seg)
    rows, summary = [], {}
    for name in ("immersed", "hole"):
        mesh, params, model = _approach_setup(name, cfg, full, hole)
        if name == "smoothed":
            continue
        system, rhs, sol, _ = _solve_approach(mesh, params, model, cfg, bc="robin")
        balance = momentum_balance(sol, params, geom)
        bound = 1e-6 * params.kappa * 2.0 * (cfg.x0 + cfg.y0) * float(np.abs(sol.u).max())
        rows.append(
            [
                name,
                balance.boundary_spring_force[0],
                balance.boundary_spring_force[1],
                balance.cell_traction_force[0],
                balance.cell_traction_force[1],
                balance.gap,
                bound,
            ]
        )
        summary[f"momentum.{name}.gap"] = balance.gap
        summary[f"momentum.{name}.bound"] = bound
        summary[f"momentum.{name}.within_bound"] = int(balance.gap <= bound)
        _dump_artifacts(out_dir, f"momentum_{name}", flags, mesh=mesh, system=system, rhs=rhs)
    header = ["variant", "lhs_x", "lhs_y", "rhs_x", "rhs_y", "gap", "bound"]
    return header, rows, summary


PRESETS = {
    "compare-approaches": preset_compare_approaches,
    "convergence-table": preset_convergence_table,
    "beta-sweep": preset_beta_sweep,
    "epsilon-sweep": preset_epsilon_sweep,
    "quadrature-order": preset_quadrature_order,
    "verify-1d": preset_verify_1d,
    "momentum-check": preset_momentum_check,
}


def run(preset: str, cfg: ExperimentConfig, flags: DumpFlags = DumpFlags(), stream=None) -> int:
    """Run a preset: write its CSV, print the summary, return the exit status."""
    stream = stream if stream is not None else sys.stdout
    if preset not in PRESETS:
        raise ConfigurationError(f"unknown preset {preset!r}; choose from {sorted(PRESETS)}")
    out_dir = Path(cfg.out_dir)
    header, rows, summary = PRESETS[preset](cfg, flags, out_dir)
    csv_name = cfg.csv if cfg.csv is not None else f"{preset.replace('-', '_')}.csv"
    csv_path = out_dir / csv_name
    _write_csv(csv_path, header, rows)
    print(f"preset = {preset}", file=stream)
    print(f"csv = {csv_path}", file=stream)
    for key in summary:
        print(f"{key} = {_fmt(summary[key])}", file=stream)
    return 0


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="cellforce",
        description="Finite-element studies of cellular traction force models.",
    )
    parser.add_argument("preset", choices=sorted(PRESETS))
    parser.add_argument("--config", help="INI configuration file")
    parser.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="SECTION.KEY=VALUE",
        help="override one configuration entry (repeatable)",
    )
    parser.add_argument("--dump-mesh", action="store_true", help="write mesh tables")
    parser.add_argument("--dump-matrix", action="store_true", help="write the system matrix (coordinate text)")
    parser.add_argument("--dump-rhs", action="store_true", help="write load vectors as CSV")
    args = parser.parse_args(argv)

    try:
        cfg = load_config(args.config, args.overrides)
    except CellforceError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return 2
    flags = DumpFlags(mesh=args.dump_mesh, matrix=args.dump_matrix, rhs=args.dump_rhs)
    try:
        return run(args.preset, cfg, flags)
    except SolverError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return 1
    except CellforceError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())

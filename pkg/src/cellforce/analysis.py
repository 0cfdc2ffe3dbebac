"""Post-processing: norms, area change, convergence orders and consistency sweeps."""
from __future__ import annotations

import warnings
from dataclasses import dataclass, replace

import numpy as np

from . import forces
from .elasticity import MaterialParams, assemble
from .errors import ConfigurationError, GeometryError, UndefinedOrderError
from .mesh import CellGeometry, CellSquare, EdgeTag, Mesh, extract_hole
from .quadrature import gauss_on_interval, triangle_tensor_rule
from .solver import Solution, SolveReport, solve

__all__ = [
    "ConvergenceStudy",
    "MomentumBalance",
    "SmoothingRow",
    "SmoothingConsistencyReport",
    "Polygon2D",
    "TriSurface",
    "l2_norm",
    "h1_norm",
    "h1_diff_norm",
    "shoelace_area",
    "area_reduction",
    "estimate_order",
    "fit_loglog_slope",
    "solve_force_problem",
    "beta_consistency_sweep",
    "momentum_balance",
    "square_polygon",
    "cube_surface",
    "midpoint_quadrature_order",
    "smoothing_consistency_sweep",
    "write_solution_svg",
]


@dataclass(frozen=True)
class ConvergenceStudy:
    """Scalar quantity per refinement level plus an estimated order, once known."""

    levels: tuple[tuple[float, float], ...]
    estimated_order: float | None = None

    def with_order(self, order: float) -> "ConvergenceStudy":
        return replace(self, estimated_order=order)


# -- norms ---------------------------------------------------------------------


def _check_same_mesh(a: Solution, b: Solution) -> Mesh:
    ma, mb = a.mesh, b.mesh
    if ma is not mb and (
        ma.num_nodes != mb.num_nodes or not np.array_equal(ma.triangles, mb.triangles)
    ):
        raise ConfigurationError("solutions live on different meshes")
    return ma


def _l2_squared(mesh: Mesh, u: np.ndarray) -> float:
    # Exact P1 mass contraction: u^T M u = A/12 [(a+b+c)^2 + a^2+b^2+c^2] per component.
    vals = u[mesh.triangles]  # (T, 3, 2)
    s = vals.sum(axis=1)
    sq = (vals**2).sum(axis=1)
    per_tri = (s**2 + sq).sum(axis=1) * (mesh.tri_areas / 12.0)
    return float(per_tri.sum())


def _h1_semi_squared(mesh: Mesh, u: np.ndarray) -> float:
    p = mesh.nodes[mesh.triangles]
    x, y = p[..., 0], p[..., 1]
    two_a = 2.0 * mesh.tri_areas
    b = np.stack([y[:, 1] - y[:, 2], y[:, 2] - y[:, 0], y[:, 0] - y[:, 1]], axis=1) / two_a[:, None]
    c = np.stack([x[:, 2] - x[:, 1], x[:, 0] - x[:, 2], x[:, 1] - x[:, 0]], axis=1) / two_a[:, None]
    vals = u[mesh.triangles]  # (T, 3, 2)
    gx = np.einsum("ti,tic->tc", b, vals)  # d/dx of both components
    gy = np.einsum("ti,tic->tc", c, vals)
    frob = (gx**2 + gy**2).sum(axis=1)
    return float((frob * mesh.tri_areas).sum())


def l2_norm(sol: Solution) -> float:
    """L2 norm of the displacement field, integrated exactly over the mesh.

    On hole meshes this integrates over the punctured domain only.
    """
    return np.sqrt(_l2_squared(sol.mesh, sol.u))


def h1_norm(sol: Solution) -> float:
    """Full H1 norm: L2 part plus the broken-gradient part (constant per triangle)."""
    return np.sqrt(_l2_squared(sol.mesh, sol.u) + _h1_semi_squared(sol.mesh, sol.u))


def h1_diff_norm(a: Solution, b: Solution) -> float:
    """H1 norm of the difference of two solutions on the same mesh."""
    mesh = _check_same_mesh(a, b)
    d = a.u - b.u
    return np.sqrt(_l2_squared(mesh, d) + _h1_semi_squared(mesh, d))


# -- deformed areas --------------------------------------------------------------


def shoelace_area(points: np.ndarray) -> float:
    """Signed polygon area (positive for counterclockwise loops)."""
    p = np.asarray(points, dtype=float)
    x, y = p[:, 0], p[:, 1]
    return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


def _polygon_self_intersects(points: np.ndarray) -> bool:
    p = np.asarray(points, dtype=float)
    n = len(p)
    segs = [(p[i], p[(i + 1) % n]) for i in range(n)]

    def crosses(a, b, c, d):
        def orient(u, v, w):
            return np.cross(v - u, w - u)

        o1, o2 = orient(a, b, c), orient(a, b, d)
        o3, o4 = orient(c, d, a), orient(c, d, b)
        return (o1 * o2 < 0) and (o3 * o4 < 0)

    for i in range(n):
        for j in range(i + 2, n):
            if i == 0 and j == n - 1:
                continue  # adjacent around the loop
            if crosses(*segs[i], *segs[j]):
                return True
    return False


def area_reduction(mesh: Mesh, sol: Solution, polygon: np.ndarray) -> float:
    """Percent area lost by a tracked node loop under the displacement field.

    ``100 (A0 - A) / A0`` with ``A`` the shoelace area of the displaced loop.
    A self-intersecting deformed loop triggers a warning and the signed-area
    result is returned as-is.
    """
    loop = np.asarray(polygon, dtype=np.int64)
    if loop.min() < 0 or loop.max() >= mesh.num_nodes:
        raise GeometryError("polygon refers to nodes outside the mesh")
    before = mesh.nodes[loop]
    after = before + sol.u[loop]
    a0 = shoelace_area(before)
    a1 = shoelace_area(after)
    if a0 == 0.0:
        raise GeometryError("tracked polygon has zero area")
    if _polygon_self_intersects(after):
        warnings.warn("deformed polygon is self-intersecting; using its signed area")
    return 100.0 * (a0 - a1) / a0


# -- convergence orders ------------------------------------------------------------


def estimate_order(study: ConvergenceStudy) -> float:
    """Convergence order from three levels: log2 of successive differences."""
    if len(study.levels) != 3:
        raise ConfigurationError(f"order estimate needs exactly 3 levels, got {len(study.levels)}")
    (_, n1), (_, n2), (_, n3) = study.levels
    d1, d2 = abs(n1 - n2), abs(n2 - n3)
    if d2 == 0.0:
        raise UndefinedOrderError("consecutive levels coincide; order is undefined")
    return float(np.log2(d1 / d2))


def fit_loglog_slope(xs, ys) -> float:
    """Least-squares slope of log(y) against log(x)."""
    xs = np.asarray(xs, dtype=float)
    ys = np.asarray(ys, dtype=float)
    if len(xs) < 2:
        raise ConfigurationError("slope fit needs at least two points")
    if np.any(xs <= 0) or np.any(ys <= 0):
        raise UndefinedOrderError("log-log fit requires positive data")
    return float(np.polyfit(np.log(xs), np.log(ys), 1)[0])


# -- solve helper -------------------------------------------------------------------


def solve_force_problem(
    mesh: Mesh,
    params: MaterialParams,
    model,
    bc: str = "dirichlet",
    tol: float = 1e-10,
    cell: CellSquare | None = None,
) -> tuple[Solution, SolveReport]:
    """Assemble, build the model's load vector and solve in one step."""
    system = assemble(mesh, params, bc=bc)
    rhs = forces.build_rhs(mesh, model, params.P, cell=cell)
    return solve(system, rhs, tol=tol)


# -- beta consistency ----------------------------------------------------------------


def beta_consistency_sweep(
    base_mesh: Mesh,
    params: MaterialParams,
    betas,
    tol: float = 1e-10,
) -> ConvergenceStudy:
    """H1 gap between the soft-inclusion and hole solutions as beta shrinks.

    Both problems share the identical traction load on the cavity-wall nodes;
    the gap is measured in H1 over the punctured domain.  The attached order
    is the log-log slope of gap against beta.
    """
    if base_mesh.has_hole:
        raise ConfigurationError("beta sweep starts from a full (non-hole) mesh")
    hole, hole_to_full = extract_hole(base_mesh)
    rhs_hole = forces.rhs_hole_neumann(hole, params.P)
    hole_system = assemble(hole, params, bc="dirichlet")
    u_hole, _ = solve(hole_system, rhs_hole, tol=tol)

    rhs_full = np.zeros(base_mesh.num_dofs)
    rhs_full[2 * hole_to_full] = rhs_hole[0::2]
    rhs_full[2 * hole_to_full + 1] = rhs_hole[1::2]

    levels = []
    for beta in betas:
        system = assemble(base_mesh, replace(params, beta=float(beta)), bc="dirichlet")
        u_full, _ = solve(system, rhs_full, tol=tol)
        diff = u_full.u[hole_to_full] - u_hole.u
        gap = h1_norm(Solution(hole, diff, bc="dirichlet"))
        levels.append((float(beta), gap))
    slope = fit_loglog_slope([b for b, _ in levels], [g for _, g in levels])
    return ConvergenceStudy(levels=tuple(levels), estimated_order=slope)


# -- momentum balance -----------------------------------------------------------------


@dataclass(frozen=True)
class MomentumBalance:
    boundary_spring_force: np.ndarray  # integral of kappa * u over the outer boundary
    cell_traction_force: np.ndarray  # integral of P n over the cell wall
    gap: float


def momentum_balance(sol: Solution, params: MaterialParams, geom: CellGeometry) -> MomentumBalance:
    """Check global momentum balance for a Robin-BC solution.

    The outer-boundary integral of ``kappa u`` must equal the net traction on
    the cell wall; for constant traction on the closed square that is zero.
    """
    if sol.bc != "robin":
        raise ConfigurationError("momentum balance applies to Robin-BC solutions only")
    mesh = sol.mesh
    outer = mesh.boundary_edges[mesh.edge_tags == EdgeTag.OUTER_BOUNDARY]
    a, b = outer[:, 0], outer[:, 1]
    lengths = np.linalg.norm(mesh.nodes[a] - mesh.nodes[b], axis=1)
    # Exact edgewise P1 integration: |e| (u_a + u_b) / 2 per component.
    lhs = params.kappa * ((sol.u[a] + sol.u[b]) * 0.5 * lengths[:, None]).sum(axis=0)

    pressure = forces._as_pressure(params.P)
    magnitudes = pressure(geom.midpoints)
    rhs = ((magnitudes * geom.measures)[:, None] * geom.normals).sum(axis=0)
    return MomentumBalance(lhs, rhs, float(np.linalg.norm(lhs - rhs)))


# -- midpoint surface quadrature --------------------------------------------------------


@dataclass(frozen=True)
class Polygon2D:
    """Closed polygon given by its vertex loop (no repeated endpoint)."""

    vertices: np.ndarray

    def __post_init__(self):
        self.vertices.setflags(write=False)


@dataclass(frozen=True)
class TriSurface:
    """Triangulated surface embedded in 3D."""

    nodes: np.ndarray
    triangles: np.ndarray

    def __post_init__(self):
        self.nodes.setflags(write=False)
        self.triangles.setflags(write=False)


def square_polygon(side: float, center=(0.0, 0.0)) -> Polygon2D:
    cx, cy = center
    r = 0.5 * side
    return Polygon2D(
        np.array([[cx - r, cy - r], [cx + r, cy - r], [cx + r, cy + r], [cx - r, cy + r]])
    )


def cube_surface(side: float, center=(0.0, 0.0, 0.0)) -> TriSurface:
    """Cube surface as 12 triangles, two per face, outward orientation unused."""
    c = np.asarray(center, dtype=float)
    r = 0.5 * side
    corners = np.array(
        [[sx, sy, sz] for sz in (-r, r) for sy in (-r, r) for sx in (-r, r)]
    ) + c
    faces = [
        (0, 1, 3, 2),  # z = -r
        (4, 6, 7, 5),  # z = +r
        (0, 4, 5, 1),  # y = -r
        (2, 3, 7, 6),  # y = +r
        (0, 2, 6, 4),  # x = -r
        (1, 5, 7, 3),  # x = +r
    ]
    tris = []
    for a, b, cc, d in faces:
        tris.append((a, b, cc))
        tris.append((a, cc, d))
    return TriSurface(corners, np.array(tris, dtype=np.int64))


def _refine_surface(surface: TriSurface) -> TriSurface:
    tris = surface.triangles
    raw = np.sort(
        np.vstack([tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]), axis=1
    )
    edges, inverse = np.unique(raw, axis=0, return_inverse=True)
    mids = 0.5 * (surface.nodes[edges[:, 0]] + surface.nodes[edges[:, 1]])
    nodes = np.vstack([surface.nodes, mids])
    t = len(tris)
    n0 = len(surface.nodes)
    m01, m12, m20 = n0 + inverse[:t], n0 + inverse[t : 2 * t], n0 + inverse[2 * t :]
    v0, v1, v2 = tris[:, 0], tris[:, 1], tris[:, 2]
    children = np.vstack(
        [
            np.column_stack([v0, m01, m20]),
            np.column_stack([m01, v1, m12]),
            np.column_stack([m20, m12, v2]),
            np.column_stack([m01, m12, m20]),
        ]
    )
    return TriSurface(nodes, children)


def _surface_areas(surface: TriSurface) -> np.ndarray:
    p = surface.nodes[surface.triangles]
    return 0.5 * np.linalg.norm(np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0]), axis=1)


def midpoint_quadrature_order(surface, f, levels: int = 4) -> ConvergenceStudy:
    """Empirical order of the midpoint rule on a refining surface discretization.

    2D polygons are split into 2, 4, 8, ... segments per edge; 3D surfaces are
    refined 4-to-1.  The reference value comes from a high-order rule on the
    original facets, so errors measure the midpoint rule alone.  The attached
    order is the log-log slope of error against element size; it is ``None``
    when the rule is exact (already at round-off).
    """
    if levels < 2:
        raise ConfigurationError("need at least two refinement levels")
    records = []
    if isinstance(surface, Polygon2D):
        verts = surface.vertices
        n = len(verts)
        reference = 0.0
        for i in range(n):
            a, b = verts[i], verts[(i + 1) % n]
            length = np.linalg.norm(b - a)
            ts, ws = gauss_on_interval(0.0, 1.0, 64)
            pts = a + np.outer(ts, b - a)
            reference += length * float(np.sum(ws * f(pts)))
        for level in range(levels):
            per_edge = 2 ** (level + 2)
            total = 0.0
            ds_max = 0.0
            for i in range(n):
                a, b = verts[i], verts[(i + 1) % n]
                length = np.linalg.norm(b - a)
                ds = length / per_edge
                ds_max = max(ds_max, ds)
                ts = (np.arange(per_edge) + 0.5) / per_edge
                pts = a + np.outer(ts, b - a)
                total += ds * float(np.sum(f(pts)))
            records.append((ds_max, abs(total - reference)))
    elif isinstance(surface, TriSurface):
        bary, wq = triangle_tensor_rule(24)
        reference = 0.0
        p = surface.nodes[surface.triangles]
        areas = _surface_areas(surface)
        for t in range(len(areas)):
            pts = bary @ p[t]
            reference += areas[t] * float(np.sum(wq * f(pts)))
        current = surface
        for _ in range(levels):
            current = _refine_surface(current)
            p = current.nodes[current.triangles]
            areas = _surface_areas(current)
            centroids = p.mean(axis=1)
            total = float(np.sum(areas * f(centroids)))
            edge_lengths = np.linalg.norm(
                p[:, [1, 2, 0]] - p[:, [0, 1, 2]], axis=2
            )
            records.append((float(edge_lengths.max()), abs(total - reference)))
    else:
        raise ConfigurationError(f"unsupported surface {surface!r}")

    scale = max(abs(reference), 1.0)
    order = None
    if all(err > 1e-14 * scale for _, err in records):
        order = fit_loglog_slope([h for h, _ in records], [e for _, e in records])
    return ConvergenceStudy(levels=tuple(records), estimated_order=order)


# -- smoothing consistency ------------------------------------------------------------


@dataclass(frozen=True)
class SmoothingRow:
    dx: float
    eps: float
    gap_point_gaussian: float  # H1 distance: point forces vs Gaussian forces
    gap_gaussian_gradient: float  # H1 distance: Gaussian vs gradient force
    gap_point_gradient: float  # H1 distance: point forces vs gradient force

    @property
    def gap_gaussian_gradient_normalized(self) -> float:
        return self.gap_gaussian_gradient / self.dx**2


@dataclass(frozen=True)
class SmoothingConsistencyReport:
    rows: tuple[SmoothingRow, ...]

    def _rows_with(self, dx=None, eps=None):
        rows = self.rows
        if dx is not None:
            rows = [r for r in rows if r.dx == dx]
        if eps is not None:
            rows = [r for r in rows if r.eps == eps]
        return sorted(rows, key=lambda r: (r.dx, r.eps))

    def eps_exponent(self, dx: float) -> float:
        """Fitted exponent of the point-vs-Gaussian gap against eps at fixed dx."""
        rows = self._rows_with(dx=dx)
        return fit_loglog_slope([r.eps for r in rows], [r.gap_point_gaussian for r in rows])

    def dx_exponent(self, eps: float) -> float:
        """Fitted exponent of the normalized Gaussian-vs-gradient gap against dx."""
        rows = self._rows_with(eps=eps)
        return fit_loglog_slope(
            [r.dx for r in rows], [r.gap_gaussian_gradient_normalized for r in rows]
        )

    def diagonal(self) -> list[SmoothingRow]:
        """Rows with eps == dx, sorted by decreasing dx (the p = 1 coupling)."""
        return sorted((r for r in self.rows if r.eps == r.dx), key=lambda r: -r.dx)


def smoothing_consistency_sweep(
    mesh: Mesh,
    params: MaterialParams,
    pairs,
    bc: str = "dirichlet",
    tol: float = 1e-10,
) -> SmoothingConsistencyReport:
    """Solve the point, Gaussian and gradient force models for small square cells.

    Each pair ``(dx, eps)`` places a cell of side ``dx`` at the mesh's cell
    centre with one force per face (the hypercube-face form) and measures the
    H1 gaps between the three solutions.
    """
    center = mesh.cell.center
    system = assemble(mesh, params, bc=bc)
    point_solutions: dict[float, Solution] = {}
    gaussian_solutions: dict[tuple[float, float], Solution] = {}
    rows = []
    for dx, eps in pairs:
        dx, eps = float(dx), float(eps)
        little = CellSquare(center=center, side=dx)
        geom = forces.discretize_cell_boundary(little, 4)
        if dx not in point_solutions:
            rhs = forces.rhs_point_forces(mesh, geom, params.P)
            point_solutions[dx], _ = solve(system, rhs, tol=tol)
        if (dx, eps) not in gaussian_solutions:
            rhs = forces.rhs_smoothed_gaussian(mesh, geom, params.P, eps)
            gaussian_solutions[(dx, eps)], _ = solve(system, rhs, tol=tol)
        rhs = forces.rhs_smoothed_particle_gradient(mesh, center, params.P, eps, dx)
        u_grad, _ = solve(system, rhs, tol=tol)
        u_point = point_solutions[dx]
        u_gauss = gaussian_solutions[(dx, eps)]
        rows.append(
            SmoothingRow(
                dx=dx,
                eps=eps,
                gap_point_gaussian=h1_diff_norm(u_gauss, u_point),
                gap_gaussian_gradient=h1_diff_norm(u_grad, u_gauss),
                gap_point_gradient=h1_diff_norm(u_grad, u_point),
            )
        )
    return SmoothingConsistencyReport(rows=tuple(rows))


# -- SVG overlay ------------------------------------------------------------------------


def write_solution_svg(path, sol: Solution, scale: float = 1.0) -> None:
    """Deformed-mesh overlay: undeformed edges gray, deformed black, cell wall blue."""
    mesh = sol.mesh
    size = 1000.0
    x0, y0 = mesh.domain_size
    pad = 0.05 * max(x0, y0)
    span = max(x0, y0) + 2 * pad

    def to_view(p):
        sx = (p[:, 0] + pad) / span * size
        sy = size - (p[:, 1] + pad) / span * size
        return sx, sy

    edges = mesh.all_edges()
    deformed = mesh.nodes + scale * sol.u
    cell_mask = mesh.edge_tags == EdgeTag.CELL_BOUNDARY
    cell_edges = mesh.boundary_edges[cell_mask]

    def path_for(nodes, edge_list):
        sx, sy = to_view(nodes)
        parts = [
            f"M{sx[a]:.2f} {sy[a]:.2f}L{sx[b]:.2f} {sy[b]:.2f}"
            for a, b in edge_list
        ]
        return "".join(parts)

    with open(path, "w") as fh:
        fh.write(
            f'<svg xmlns="http://www.w3.org/2000/svg" viewBox="0 0 {size:.0f} {size:.0f}" '
            f'width="{size:.0f}" height="{size:.0f}">\n'
        )
        fh.write('<rect width="100%" height="100%" fill="white"/>\n')
        fh.write(
            f'<path d="{path_for(mesh.nodes, edges)}" stroke="#b9b9b9" '
            'stroke-width="0.6" fill="none"/>\n'
        )
        fh.write(
            f'<path d="{path_for(deformed, edges)}" stroke="black" '
            'stroke-width="0.8" fill="none"/>\n'
        )
        if len(cell_edges):
            fh.write(
                f'<path d="{path_for(deformed, cell_edges)}" stroke="#1f4fc8" '
                'stroke-width="2.0" fill="none"/>\n'
            )
        fh.write("</svg>\n")

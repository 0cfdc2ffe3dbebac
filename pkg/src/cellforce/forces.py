"""Load-vector builders for the cellular traction force models.

All models act on a shared description of the cell wall: the square boundary
split into equal segments with midpoints ``x_j``, inward unit normals ``n_j``
and measures ``dGamma_j``.  The five builders produce the Galerkin right-hand
side for

* point forces at the segment midpoints,
* the continuous line-traction limit (exact boundary integral),
* Gaussian-regularized point forces (volume density per segment),
* the vanishing-cell gradient force anchored at the cell centre,
* the traction as a natural boundary condition on a hole mesh.

With constant traction magnitude on the closed boundary every builder is
self-equilibrated: the loads sum to zero per displacement component.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, NumericsWarning
from .mesh import CellGeometry, CellSquare, EdgeTag, Mesh, locate_point
from .quadrature import gauss_on_interval, triangle_rule

__all__ = [
    "PointForces",
    "ContinuousImmersed",
    "SmoothedGaussian",
    "SmoothedParticleGradient",
    "HoleNeumann",
    "discretize_cell_boundary",
    "rhs_point_forces",
    "rhs_continuous_immersed",
    "rhs_smoothed_gaussian",
    "rhs_smoothed_particle_gradient",
    "rhs_hole_neumann",
    "gaussian_delta",
    "gaussian_delta_gradient",
    "build_rhs",
]

# Gaussian tails beyond this many standard deviations are dropped (< 1e-14).
_CUTOFF_SIGMAS = 8.0
_SMOOTH_QUAD_DEGREE = 7


def _as_pressure(P):
    """Normalize a constant or callable traction magnitude to a callable."""
    if callable(P):
        return P
    value = float(P)
    return lambda x: np.full(np.atleast_2d(x).shape[0], value)


# -- force model descriptors --------------------------------------------------


@dataclass(frozen=True)
class PointForces:
    """Dirac point loads at the segment midpoints; ``n_segments=None`` matches the mesh."""

    n_segments: int | None = None


@dataclass(frozen=True)
class ContinuousImmersed:
    """Exact line integral of the traction against the P1 basis."""

    quadrature_order: int = 4

    def __post_init__(self):
        if self.quadrature_order < 1:
            raise ConfigurationError("quadrature_order must be >= 1")


@dataclass(frozen=True)
class SmoothedGaussian:
    """Point loads mollified by an isotropic Gaussian of width ``epsilon``."""

    epsilon: float | None = None  # None: resolved to the mesh spacing
    n_segments: int | None = None

    def __post_init__(self):
        if self.epsilon is not None and self.epsilon <= 0:
            raise ConfigurationError("epsilon must be positive")


@dataclass(frozen=True)
class SmoothedParticleGradient:
    """Vanishing-cell limit: scaled Gaussian gradient at the cell centre."""

    epsilon: float | None = None

    def __post_init__(self):
        if self.epsilon is not None and self.epsilon <= 0:
            raise ConfigurationError("epsilon must be positive")


@dataclass(frozen=True)
class HoleNeumann:
    """Traction as a natural boundary condition on the cavity wall (hole mesh only)."""


# -- cell boundary -------------------------------------------------------------


def discretize_cell_boundary(cell: CellSquare, n_segments: int) -> CellGeometry:
    """Split the square boundary into ``n_segments`` equal segments.

    Walks counterclockwise (bottom, right, top, left); midpoints sit at the
    segment centres, normals are the inward unit vectors and every measure is
    ``perimeter / n_segments``.
    """
    if n_segments < 4 or n_segments % 4 != 0:
        raise ConfigurationError(
            f"n_segments must be a positive multiple of 4, got {n_segments}"
        )
    per_side = n_segments // 4
    R = cell.side
    d = R / per_side
    offsets = (np.arange(per_side) + 0.5) * d

    bottom = np.column_stack([cell.xmin + offsets, np.full(per_side, cell.ymin)])
    right = np.column_stack([np.full(per_side, cell.xmax), cell.ymin + offsets])
    top = np.column_stack([cell.xmax - offsets, np.full(per_side, cell.ymax)])
    left = np.column_stack([np.full(per_side, cell.xmin), cell.ymax - offsets])
    midpoints = np.vstack([bottom, right, top, left])

    normals = np.vstack(
        [
            np.tile([0.0, 1.0], (per_side, 1)),
            np.tile([-1.0, 0.0], (per_side, 1)),
            np.tile([0.0, -1.0], (per_side, 1)),
            np.tile([1.0, 0.0], (per_side, 1)),
        ]
    )
    measures = np.full(n_segments, cell.perimeter / n_segments)
    return CellGeometry(cell=cell, midpoints=midpoints, normals=normals, measures=measures)


# -- Gaussian kernel -----------------------------------------------------------


def gaussian_delta(x, center, epsilon: float, ndim: int | None = None):
    """Isotropic Gaussian approximation of the Dirac delta in 1, 2 or 3 dimensions.

    Peak value ``(2 pi epsilon^2)^(-n/2)`` at ``x == center``.
    """
    if epsilon <= 0:
        raise ConfigurationError(f"epsilon must be positive, got {epsilon}")
    x = np.asarray(x, dtype=float)
    center = np.asarray(center, dtype=float)
    if x.ndim <= 1 and center.ndim <= 1 and x.shape == center.shape:
        diff2 = float(np.sum((x - center) ** 2))
        n = ndim if ndim is not None else (x.size if x.ndim else 1)
    else:
        diff = np.atleast_2d(x) - center
        diff2 = np.sum(diff * diff, axis=-1)
        n = ndim if ndim is not None else diff.shape[-1]
    if n not in (1, 2, 3):
        raise ConfigurationError(f"dimension must be 1, 2 or 3, got {n}")
    norm = (2.0 * np.pi * epsilon**2) ** (-n / 2.0)
    return norm * np.exp(-diff2 / (2.0 * epsilon**2))


def gaussian_delta_gradient(x, center, epsilon: float):
    """Gradient of the 2D Gaussian delta with respect to ``x``; shape (..., 2)."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    center = np.asarray(center, dtype=float)
    diff = x - center
    vals = gaussian_delta(x, center, epsilon, ndim=2)
    return -diff * (vals / epsilon**2)[:, None]


# -- load vectors ---------------------------------------------------------------


def rhs_point_forces(mesh: Mesh, geom: CellGeometry, P) -> np.ndarray:
    """Point loads ``P(x_j) n_j dGamma_j`` spread by the P1 basis values at ``x_j``."""
    pressure = _as_pressure(P)
    magnitudes = pressure(geom.midpoints)
    rhs = np.zeros(mesh.num_dofs)
    for j in range(geom.n_segments):
        tri, lam = locate_point(mesh, geom.midpoints[j])
        load = magnitudes[j] * geom.measures[j] * geom.normals[j]
        for local, node in enumerate(mesh.triangles[tri]):
            rhs[2 * node] += lam[local] * load[0]
            rhs[2 * node + 1] += lam[local] * load[1]
    return rhs


def _segment_breakpoints(mesh: Mesh, a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Parameters in (0, L) where the segment a->b crosses mesh edges.

    The P1 basis restricted to the segment kinks exactly at such crossings;
    collinear overlaps contribute the projections of the edge endpoints.
    """
    d = b - a
    L = float(np.linalg.norm(d))
    dn = d / L
    edges = mesh.all_edges()
    p = mesh.nodes[edges[:, 0]]
    q = mesh.nodes[edges[:, 1]]
    tol = 1e-9 * max(mesh.domain_size)

    ts: list[float] = []
    r = q - p
    denom = np.cross(dn, r)
    cross_ap = np.cross(r, a - p)
    parallel = np.abs(denom) <= 1e-14
    # Transversal crossings: a + t*dn == p + s*r.
    with np.errstate(divide="ignore", invalid="ignore"):
        t = np.where(~parallel, cross_ap / denom, np.nan)
        s = np.where(~parallel, np.cross(dn, a - p) / denom, np.nan)
    ok = (~parallel) & (t > tol) & (t < L - tol) & (s >= -1e-12) & (s <= 1 + 1e-12)
    ts.extend(t[ok].tolist())
    # Collinear overlap: project the edge endpoints onto the segment.
    col = parallel & (np.abs(np.cross(dn, p - a)) <= tol)
    for end in (p[col], q[col]):
        proj = (end - a) @ dn
        keep = (proj > tol) & (proj < L - tol)
        ts.extend(proj[keep].tolist())
    if not ts:
        return np.array([0.0, L])
    ts = np.unique(np.concatenate([[0.0, L], np.round(np.asarray(ts) / tol) * tol]))
    return ts


def rhs_continuous_immersed(
    mesh: Mesh, cell: CellSquare, P, quadrature_order: int = 4
) -> np.ndarray:
    """Exact boundary integral of ``P n . phi`` along the square cell wall.

    Each side is split where it crosses mesh edges and integrated piecewise
    with Gauss-Legendre; exact for constant ``P`` once the order is >= 2.
    """
    if quadrature_order < 1:
        raise ConfigurationError("quadrature_order must be >= 1")
    pressure = _as_pressure(P)
    rhs = np.zeros(mesh.num_dofs)
    corners = cell.corners()
    inward = np.array([[0.0, 1.0], [-1.0, 0.0], [0.0, -1.0], [1.0, 0.0]])
    for side in range(4):
        a = corners[side]
        b = corners[(side + 1) % 4]
        direction = (b - a) / np.linalg.norm(b - a)
        normal = inward[side]
        breaks = _segment_breakpoints(mesh, a, b)
        for lo, hi in zip(breaks[:-1], breaks[1:]):
            ts, ws = gauss_on_interval(lo, hi, quadrature_order)
            points = a + np.outer(ts, direction)
            values = pressure(points)
            for point, w, mag in zip(points, ws, values):
                tri, lam = locate_point(mesh, point)
                load = w * mag * normal
                for local, node in enumerate(mesh.triangles[tri]):
                    rhs[2 * node] += lam[local] * load[0]
                    rhs[2 * node + 1] += lam[local] * load[1]
    return rhs


def _smoothed_volume_rhs(mesh: Mesh, centers: np.ndarray, weights: np.ndarray, epsilon: float):
    """Accumulate ``integral(sum_j w_j delta_eps(x - c_j) . phi)`` by triangle quadrature.

    ``weights`` holds one 2-vector per centre.  Triangles farther than the
    cutoff radius from a centre are skipped for that centre (tail < 1e-14).
    """
    if epsilon < 0.1 * mesh.h_target:
        warnings.warn(
            f"epsilon = {epsilon} is below 0.1 * h_target = {0.1 * mesh.h_target}; "
            "the Gaussian is under-resolved by the quadrature",
            NumericsWarning,
            stacklevel=3,
        )
    bary, wq = triangle_rule(_SMOOTH_QUAD_DEGREE)
    verts = mesh.nodes[mesh.triangles]  # (T, 3, 2)
    quad_pts = np.einsum("qi,tid->tqd", bary, verts)  # (T, Q, 2)
    areas = mesh.tri_areas
    centroids = mesh.centroids
    radii = np.linalg.norm(verts - centroids[:, None, :], axis=2).max(axis=1)
    cutoff = _CUTOFF_SIGMAS * epsilon

    rhs = np.zeros(mesh.num_dofs)
    inv_two_eps2 = 1.0 / (2.0 * epsilon**2)
    norm = (2.0 * np.pi * epsilon**2) ** -1.0
    for c, w in zip(centers, weights):
        near = np.nonzero(np.linalg.norm(centroids - c, axis=1) - radii <= cutoff)[0]
        if len(near) == 0:
            continue
        d2 = np.sum((quad_pts[near] - c) ** 2, axis=2)  # (M, Q)
        g = norm * np.exp(-d2 * inv_two_eps2)
        # Per-node factors: area * sum_q wq * g * lambda_node.
        contrib = np.einsum("mq,q,qi->mi", g, wq, bary) * areas[near, None]  # (M, 3)
        nodes = mesh.triangles[near]
        for comp in (0, 1):
            np.add.at(rhs, 2 * nodes + comp, contrib * w[comp])
    return rhs


def rhs_smoothed_gaussian(mesh: Mesh, geom: CellGeometry, P, epsilon: float) -> np.ndarray:
    """Volume load with density ``sum_j P(x_j) dGamma_j n_j delta_eps(x - x_j)``."""
    if epsilon <= 0:
        raise ConfigurationError(f"epsilon must be positive, got {epsilon}")
    pressure = _as_pressure(P)
    magnitudes = pressure(geom.midpoints)
    weights = (magnitudes * geom.measures)[:, None] * geom.normals
    return _smoothed_volume_rhs(mesh, geom.midpoints, weights, epsilon)


def rhs_smoothed_particle_gradient(
    mesh: Mesh, center, P: float, epsilon: float, dx: float
) -> np.ndarray:
    """Volume load ``P dx^2 grad(delta_eps)(x - center)`` against the P1 basis."""
    if epsilon <= 0:
        raise ConfigurationError(f"epsilon must be positive, got {epsilon}")
    if dx <= 0:
        raise ConfigurationError(f"dx must be positive, got {dx}")
    if epsilon < 0.1 * mesh.h_target:
        warnings.warn(
            f"epsilon = {epsilon} is below 0.1 * h_target = {0.1 * mesh.h_target}; "
            "the Gaussian is under-resolved by the quadrature",
            NumericsWarning,
            stacklevel=2,
        )
    center = np.asarray(center, dtype=float)
    scale = float(P) * dx**2

    bary, wq = triangle_rule(_SMOOTH_QUAD_DEGREE)
    verts = mesh.nodes[mesh.triangles]
    quad_pts = np.einsum("qi,tid->tqd", bary, verts)
    areas = mesh.tri_areas
    centroids = mesh.centroids
    radii = np.linalg.norm(verts - centroids[:, None, :], axis=2).max(axis=1)
    cutoff = _CUTOFF_SIGMAS * epsilon

    rhs = np.zeros(mesh.num_dofs)
    near = np.nonzero(np.linalg.norm(centroids - center, axis=1) - radii <= cutoff)[0]
    if len(near) == 0:
        return rhs
    diff = quad_pts[near] - center  # (M, Q, 2)
    d2 = np.sum(diff * diff, axis=2)
    g = (2.0 * np.pi * epsilon**2) ** -1.0 * np.exp(-d2 / (2.0 * epsilon**2))
    grad = -diff * (g / epsilon**2)[:, :, None]  # (M, Q, 2)
    nodes = mesh.triangles[near]
    for comp in (0, 1):
        contrib = np.einsum("mq,q,qi->mi", grad[:, :, comp], wq, bary) * areas[near, None]
        np.add.at(rhs, 2 * nodes + comp, scale * contrib)
    return rhs


def rhs_hole_neumann(mesh: Mesh, P) -> np.ndarray:
    """Exact traction integral over the cavity wall of a hole mesh.

    The traction direction is the inward-into-cell normal, i.e. opposite to
    the adjacent domain triangle; with constant ``P`` each edge endpoint
    receives ``P |e| / 2`` times that normal.
    """
    if not mesh.has_hole:
        raise ConfigurationError("hole-Neumann load requires a mesh without cell interior")
    pressure = _as_pressure(P)
    rhs = np.zeros(mesh.num_dofs)
    adjacency = mesh.boundary_edge_triangles()
    for edge, tag, tris in zip(mesh.boundary_edges, mesh.edge_tags, adjacency):
        if tag != EdgeTag.CELL_BOUNDARY:
            continue
        if len(tris) != 1:
            raise ConfigurationError(f"cavity edge {tuple(edge)} borders {len(tris)} triangles")
        a, b = mesh.nodes[edge[0]], mesh.nodes[edge[1]]
        t = b - a
        length = float(np.linalg.norm(t))
        normal = np.array([-t[1], t[0]]) / length
        midpoint = 0.5 * (a + b)
        to_domain = mesh.centroids[tris[0]] - midpoint
        if normal @ to_domain > 0:  # point away from the domain, into the cell
            normal = -normal
        # 3-point Gauss on the edge: exact for P up to quartic variation.
        ts, ws = gauss_on_interval(0.0, 1.0, 3)
        points = a + np.outer(ts, t)
        values = pressure(points)
        for node, shape in ((edge[0], 1.0 - ts), (edge[1], ts)):
            comp = length * np.sum(ws * values * shape)
            rhs[2 * node] += comp * normal[0]
            rhs[2 * node + 1] += comp * normal[1]
    return rhs


# -- dispatcher -----------------------------------------------------------------


def _auto_segments(mesh: Mesh, cell: CellSquare) -> int:
    n = 4 * round(cell.side / mesh.h_target)
    if n < 4:
        raise ConfigurationError(
            f"mesh spacing {mesh.h_target} too coarse for the cell side {cell.side}"
        )
    return n


def build_rhs(mesh: Mesh, model, P, cell: CellSquare | None = None) -> np.ndarray:
    """Build the load vector of a force model on ``mesh``.

    ``cell`` defaults to the mesh's own cell.  ``None`` segment counts resolve
    to one segment per cell-wall mesh edge; ``None`` widths to the mesh spacing.
    """
    cell = cell if cell is not None else mesh.cell
    if isinstance(model, PointForces):
        n = model.n_segments or _auto_segments(mesh, cell)
        return rhs_point_forces(mesh, discretize_cell_boundary(cell, n), P)
    if isinstance(model, ContinuousImmersed):
        return rhs_continuous_immersed(mesh, cell, P, model.quadrature_order)
    if isinstance(model, SmoothedGaussian):
        n = model.n_segments or _auto_segments(mesh, cell)
        eps = model.epsilon if model.epsilon is not None else mesh.h_target
        return rhs_smoothed_gaussian(mesh, discretize_cell_boundary(cell, n), P, eps)
    if isinstance(model, SmoothedParticleGradient):
        eps = model.epsilon if model.epsilon is not None else mesh.h_target
        return rhs_smoothed_particle_gradient(mesh, cell.center, P, eps, cell.side)
    if isinstance(model, HoleNeumann):
        return rhs_hole_neumann(mesh, P)
    raise ConfigurationError(f"unknown force model {model!r}")

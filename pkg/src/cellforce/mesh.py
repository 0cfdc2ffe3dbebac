"""Structured conforming triangulations of a rectangle with an embedded square cell.

The domain is the rectangle ``(0, x0) x (0, y0)``; the cell is an axis-aligned
square that must line up with the grid so that its boundary is a union of mesh
edges.  Each grid square is split along its bottom-left/top-right diagonal,
which keeps refinement self-similar and the minimum angle constant.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from enum import IntEnum

import numpy as np

from .errors import ConfigurationError, GeometryError, LocationError

__all__ = [
    "RegionTag",
    "EdgeTag",
    "CellSquare",
    "CellGeometry",
    "Mesh",
    "generate_mesh",
    "refine",
    "locate_point",
    "extract_hole",
    "cell_boundary_loop",
    "rectangle_boundary_loop",
    "export_mesh_text",
]

# Relative tolerance for grid-alignment checks and on-line classification.
_ALIGN_RTOL = 1e-9
# Barycentric slack when deciding point membership in a triangle.
_BARY_TOL = 1e-12


class RegionTag(IntEnum):
    EXTERIOR = 0
    CELL_INTERIOR = 1


class EdgeTag(IntEnum):
    OUTER_BOUNDARY = 0
    CELL_BOUNDARY = 1


@dataclass(frozen=True)
class CellSquare:
    """Axis-aligned square cell given by centre and side length."""

    center: tuple[float, float]
    side: float

    def __post_init__(self):
        if self.side <= 0:
            raise GeometryError(f"cell side must be positive, got {self.side}")

    @property
    def xmin(self) -> float:
        return self.center[0] - 0.5 * self.side

    @property
    def xmax(self) -> float:
        return self.center[0] + 0.5 * self.side

    @property
    def ymin(self) -> float:
        return self.center[1] - 0.5 * self.side

    @property
    def ymax(self) -> float:
        return self.center[1] + 0.5 * self.side

    @property
    def perimeter(self) -> float:
        return 4.0 * self.side

    def corners(self) -> np.ndarray:
        """Corner coordinates in counterclockwise order from the lower left."""
        return np.array(
            [
                [self.xmin, self.ymin],
                [self.xmax, self.ymin],
                [self.xmax, self.ymax],
                [self.xmin, self.ymax],
            ]
        )

    def contains(self, points: np.ndarray, tol: float = 0.0) -> np.ndarray:
        p = np.atleast_2d(points)
        inside = (
            (p[:, 0] > self.xmin + tol)
            & (p[:, 0] < self.xmax - tol)
            & (p[:, 1] > self.ymin + tol)
            & (p[:, 1] < self.ymax - tol)
        )
        return inside if points.ndim > 1 else bool(inside[0])


@dataclass(frozen=True)
class CellGeometry:
    """Discretised cell boundary: segment midpoints, inward normals, measures."""

    cell: CellSquare
    midpoints: np.ndarray  # (n_segments, 2)
    normals: np.ndarray  # (n_segments, 2), unit length, pointing into the cell
    measures: np.ndarray  # (n_segments,)

    def __post_init__(self):
        for name in ("midpoints", "normals", "measures"):
            getattr(self, name).setflags(write=False)

    @property
    def center(self) -> tuple[float, float]:
        return self.cell.center

    @property
    def side(self) -> float:
        return self.cell.side

    @property
    def n_segments(self) -> int:
        return len(self.measures)


@dataclass(eq=False)
class Mesh:
    """Immutable conforming triangulation with region and boundary tags.

    ``boundary_edges`` lists the classified edges: the outer rectangle edges
    and the cell-wall edges.  On a full mesh each cell-wall edge is shared by a
    cell-interior and an exterior triangle; on a hole mesh it borders exactly
    one (exterior) triangle.
    """

    nodes: np.ndarray  # (N, 2) float64
    triangles: np.ndarray  # (T, 3) int32, counterclockwise
    tri_regions: np.ndarray  # (T,) int8, RegionTag values
    boundary_edges: np.ndarray  # (B, 2) int32, canonical (min, max) pairs
    edge_tags: np.ndarray  # (B,) int8, EdgeTag values
    h_target: float
    domain_size: tuple[float, float]
    cell: CellSquare
    has_hole: bool = False
    _cache: dict = field(default_factory=dict, repr=False)

    def __post_init__(self):
        for name in ("nodes", "triangles", "tri_regions", "boundary_edges", "edge_tags"):
            arr = getattr(self, name)
            arr.setflags(write=False)

    # -- basic quantities ---------------------------------------------------

    @property
    def num_nodes(self) -> int:
        return len(self.nodes)

    @property
    def num_triangles(self) -> int:
        return len(self.triangles)

    @property
    def num_dofs(self) -> int:
        return 2 * len(self.nodes)

    @property
    def tri_areas(self) -> np.ndarray:
        if "areas" not in self._cache:
            p = self.nodes[self.triangles]
            self._cache["areas"] = 0.5 * np.cross(p[:, 1] - p[:, 0], p[:, 2] - p[:, 0])
        return self._cache["areas"]

    @property
    def centroids(self) -> np.ndarray:
        if "centroids" not in self._cache:
            self._cache["centroids"] = self.nodes[self.triangles].mean(axis=1)
        return self._cache["centroids"]

    def all_edges(self) -> np.ndarray:
        """Unique edges as canonical (min, max) node pairs, lexicographically sorted."""
        if "edges" not in self._cache:
            e = np.vstack(
                [self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]]
            )
            e.sort(axis=1)
            self._cache["edges"] = np.unique(e, axis=0)
        return self._cache["edges"]

    def edge_triangle_count(self) -> np.ndarray:
        """Number of triangles adjacent to each edge of :meth:`all_edges`."""
        edges, counts = self._edge_counts()
        return counts

    def _edge_counts(self):
        if "edge_counts" not in self._cache:
            e = np.vstack(
                [self.triangles[:, [0, 1]], self.triangles[:, [1, 2]], self.triangles[:, [2, 0]]]
            )
            e.sort(axis=1)
            edges, counts = np.unique(e, axis=0, return_counts=True)
            self._cache["edges"] = edges
            self._cache["edge_counts"] = counts
        return self._cache["edges"], self._cache["edge_counts"]

    def boundary_edge_triangles(self) -> list[np.ndarray]:
        """Adjacent triangle indices for each row of ``boundary_edges``."""
        if "bedge_tris" not in self._cache:
            lookup: dict[tuple[int, int], list[int]] = {}
            tris = self.triangles
            for t in range(len(tris)):
                for a, b in ((0, 1), (1, 2), (2, 0)):
                    key = (int(min(tris[t, a], tris[t, b])), int(max(tris[t, a], tris[t, b])))
                    lookup.setdefault(key, []).append(t)
            self._cache["bedge_tris"] = [
                np.array(lookup.get((int(e[0]), int(e[1])), []), dtype=np.int64)
                for e in self.boundary_edges
            ]
        return self._cache["bedge_tris"]

    def outer_boundary_nodes(self) -> np.ndarray:
        """Sorted node indices lying on the outer rectangle boundary."""
        outer = self.boundary_edges[self.edge_tags == EdgeTag.OUTER_BOUNDARY]
        return np.unique(outer)

    # -- invariants ----------------------------------------------------------

    def validate(self) -> None:
        """Check the structural mesh invariants; raise GeometryError on violation."""
        areas = self.tri_areas
        if not np.all(areas > 0):
            raise GeometryError("mesh has non-positive triangle areas")

        edges, counts = self._edge_counts()
        if np.any(counts > 2):
            raise GeometryError("edge shared by more than two triangles")

        tagged = {tuple(e): int(t) for e, t in zip(self.boundary_edges, self.edge_tags)}
        bexp_tris = {tuple(e): None for e in self.boundary_edges}
        # Edge ownership: untagged edges are interior (2 triangles); outer
        # edges have 1; cell edges have 2 on a full mesh and 1 on a hole mesh.
        for e, c in zip(edges, counts):
            tag = tagged.get(tuple(e))
            if tag is None:
                if c != 2:
                    raise GeometryError(f"untagged boundary edge {tuple(e)}")
            elif tag == EdgeTag.OUTER_BOUNDARY:
                if c != 1:
                    raise GeometryError(f"outer edge {tuple(e)} borders {c} triangles")
            else:
                expected = 1 if self.has_hole else 2
                if c != expected:
                    raise GeometryError(f"cell edge {tuple(e)} borders {c} triangles")

        known = {tuple(e) for e in edges}
        for e in self.boundary_edges:
            if tuple(e) not in known:
                raise GeometryError(f"tagged edge {tuple(e)} is not a mesh edge")

        if not self.has_hole:
            # Conformity: a cell edge separates a cell-interior and an exterior triangle.
            adjacency = self.boundary_edge_triangles()
            for e, tag, tris in zip(self.boundary_edges, self.edge_tags, adjacency):
                if tag == EdgeTag.CELL_BOUNDARY:
                    regions = sorted(self.tri_regions[tris])
                    if regions != [RegionTag.EXTERIOR, RegionTag.CELL_INTERIOR]:
                        raise GeometryError(f"cell edge {tuple(e)} does not separate regions")

        expected_area = self.domain_size[0] * self.domain_size[1]
        if self.has_hole:
            expected_area -= self.cell.side**2
        total = float(np.sum(areas))
        if abs(total - expected_area) > 1e-12 * expected_area:
            raise GeometryError(f"triangle areas sum to {total}, expected {expected_area}")

    # -- point location -------------------------------------------------------

    def _locator(self):
        if "locator" not in self._cache:
            self._cache["locator"] = _BinLocator(self)
        return self._cache["locator"]


class _BinLocator:
    """Uniform-grid spatial index over triangle bounding boxes.

    Candidates are scanned in ascending triangle index so that points on
    shared edges resolve deterministically to the lowest-index triangle.
    """

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        lo = mesh.nodes.min(axis=0)
        hi = mesh.nodes.max(axis=0)
        span = np.maximum(hi - lo, 1e-300)
        nbins = max(1, int(np.sqrt(mesh.num_triangles / 2.0)))
        self.lo, self.hi = lo, hi
        self.nbins = np.array([nbins, nbins])
        self.size = span / self.nbins
        self.bins: dict[tuple[int, int], list[int]] = {}
        p = mesh.nodes[mesh.triangles]
        bmin = self._index(p.min(axis=1))
        bmax = self._index(p.max(axis=1))
        for t in range(mesh.num_triangles):
            for ix in range(bmin[t, 0], bmax[t, 0] + 1):
                for iy in range(bmin[t, 1], bmax[t, 1] + 1):
                    self.bins.setdefault((ix, iy), []).append(t)

    def _index(self, pts):
        idx = np.floor((np.atleast_2d(pts) - self.lo) / self.size).astype(int)
        return np.clip(idx, 0, self.nbins - 1)

    def candidates(self, p) -> list[int]:
        ix, iy = self._index(p)[0]
        return self.bins.get((int(ix), int(iy)), [])


def _barycentric(mesh: Mesh, tri: int, p: np.ndarray) -> np.ndarray:
    a, b, c = mesh.nodes[mesh.triangles[tri]]
    denom = np.cross(b - a, c - a)
    lb = np.cross(p - a, c - a) / denom
    lc = np.cross(b - a, p - a) / denom
    return np.array([1.0 - lb - lc, lb, lc])


def locate_point(mesh: Mesh, p) -> tuple[int, np.ndarray]:
    """Find a triangle containing ``p`` and its barycentric coordinates.

    Points on shared edges or vertices resolve to the lowest containing
    triangle index.  Raises :class:`LocationError` if ``p`` lies outside every
    triangle (e.g. inside an excluded cell region).
    """
    p = np.asarray(p, dtype=float)
    locator = mesh._locator()
    candidates = sorted(locator.candidates(p))
    best = None
    for t in candidates:
        lam = _barycentric(mesh, t, p)
        if lam.min() >= -_BARY_TOL:
            best = (t, lam)
            break
    if best is None:
        # Tolerance fallback for points at bin borders: exhaustive scan.
        for t in range(mesh.num_triangles):
            lam = _barycentric(mesh, t, p)
            if lam.min() >= -_BARY_TOL:
                best = (t, lam)
                break
    if best is None:
        raise LocationError(f"point {tuple(p)} is not inside any triangle")
    t, lam = best
    lam = np.clip(lam, 0.0, None)
    return t, lam / lam.sum()


# -- construction -----------------------------------------------------------


def _near_integer(value: float, rtol: float = _ALIGN_RTOL) -> bool:
    return abs(value - round(value)) <= rtol * max(1.0, abs(value))


def generate_mesh(
    domain_size: tuple[float, float],
    h_target: float,
    cell: CellSquare,
    exclude_cell_interior: bool = False,
) -> Mesh:
    """Triangulate ``(0, x0) x (0, y0)`` on a uniform grid aligned with ``cell``.

    Every grid square is split along its bottom-left/top-right diagonal.  With
    ``exclude_cell_interior`` the triangles inside the cell are dropped and the
    cell wall becomes part of the mesh boundary (the 'hole' domain).

    Raises
    ------
    GeometryError
        if the cell does not lie strictly inside the domain.
    ConfigurationError
        if ``h_target`` is incompatible with the grid/cell alignment.
    """
    x0, y0 = float(domain_size[0]), float(domain_size[1])
    if x0 <= 0 or y0 <= 0:
        raise GeometryError(f"domain size must be positive, got {domain_size}")
    if h_target <= 0:
        raise ConfigurationError(f"h_target must be positive, got {h_target}")
    if not (0.0 < cell.xmin and cell.xmax < x0 and 0.0 < cell.ymin and cell.ymax < y0):
        raise GeometryError("cell square must lie strictly inside the domain")
    for name, value in (
        ("x0/h", x0 / h_target),
        ("y0/h", y0 / h_target),
        ("side/h", cell.side / h_target),
        ("cell xmin/h", cell.xmin / h_target),
        ("cell ymin/h", cell.ymin / h_target),
    ):
        if not _near_integer(value):
            raise ConfigurationError(
                f"h_target={h_target} does not align the grid with the cell ({name}={value})"
            )

    nx, ny = round(x0 / h_target), round(y0 / h_target)
    xs = np.arange(nx + 1) * h_target
    ys = np.arange(ny + 1) * h_target
    X, Y = np.meshgrid(xs, ys, indexing="xy")
    nodes = np.column_stack([X.ravel(), Y.ravel()])

    def nid(i, j):
        return j * (nx + 1) + i

    I, J = np.meshgrid(np.arange(nx), np.arange(ny), indexing="xy")
    i = I.ravel(order="C")
    j = J.ravel(order="C")
    n00, n10 = nid(i, j), nid(i + 1, j)
    n01, n11 = nid(i, j + 1), nid(i + 1, j + 1)
    lower = np.column_stack([n00, n10, n11])
    upper = np.column_stack([n00, n11, n01])
    triangles = np.empty((2 * len(i), 3), dtype=np.int32)
    triangles[0::2] = lower
    triangles[1::2] = upper

    centers_x = (i + 0.5) * h_target
    centers_y = (j + 0.5) * h_target
    tol = _ALIGN_RTOL * max(x0, y0)
    in_cell = (
        (centers_x > cell.xmin + tol)
        & (centers_x < cell.xmax - tol)
        & (centers_y > cell.ymin + tol)
        & (centers_y < cell.ymax - tol)
    )
    tri_regions = np.repeat(np.where(in_cell, RegionTag.CELL_INTERIOR, RegionTag.EXTERIOR), 2)
    tri_regions = tri_regions.astype(np.int8)

    boundary, tags = [], []
    for k in range(nx):  # bottom and top rows
        boundary.append((nid(k, 0), nid(k + 1, 0)))
        boundary.append((nid(k, ny), nid(k + 1, ny)))
        tags.extend([EdgeTag.OUTER_BOUNDARY, EdgeTag.OUTER_BOUNDARY])
    for k in range(ny):  # left and right columns
        boundary.append((nid(0, k), nid(0, k + 1)))
        boundary.append((nid(nx, k), nid(nx, k + 1)))
        tags.extend([EdgeTag.OUTER_BOUNDARY, EdgeTag.OUTER_BOUNDARY])

    imin, imax = round(cell.xmin / h_target), round(cell.xmax / h_target)
    jmin, jmax = round(cell.ymin / h_target), round(cell.ymax / h_target)
    for k in range(imin, imax):  # bottom and top cell walls
        boundary.append((nid(k, jmin), nid(k + 1, jmin)))
        boundary.append((nid(k, jmax), nid(k + 1, jmax)))
        tags.extend([EdgeTag.CELL_BOUNDARY, EdgeTag.CELL_BOUNDARY])
    for k in range(jmin, jmax):  # left and right cell walls
        boundary.append((nid(imin, k), nid(imin, k + 1)))
        boundary.append((nid(imax, k), nid(imax, k + 1)))
        tags.extend([EdgeTag.CELL_BOUNDARY, EdgeTag.CELL_BOUNDARY])

    boundary_edges = np.sort(np.array(boundary, dtype=np.int32), axis=1)
    edge_tags = np.array(tags, dtype=np.int8)

    mesh = Mesh(
        nodes=nodes,
        triangles=triangles,
        tri_regions=tri_regions,
        boundary_edges=boundary_edges,
        edge_tags=edge_tags,
        h_target=float(h_target),
        domain_size=(x0, y0),
        cell=cell,
        has_hole=False,
    )
    if exclude_cell_interior:
        mesh, _ = extract_hole(mesh)
    return mesh


def extract_hole(mesh: Mesh) -> tuple[Mesh, np.ndarray]:
    """Remove cell-interior triangles, renumbering nodes compactly.

    Returns the hole mesh and ``hole_to_full``: for each node of the hole mesh
    the index of the identical node in the source mesh.
    """
    if mesh.has_hole:
        raise ConfigurationError("mesh already excludes the cell interior")
    keep = mesh.tri_regions == RegionTag.EXTERIOR
    triangles = mesh.triangles[keep]
    hole_to_full = np.unique(triangles)
    full_to_hole = np.full(mesh.num_nodes, -1, dtype=np.int64)
    full_to_hole[hole_to_full] = np.arange(len(hole_to_full))
    new_tris = full_to_hole[triangles].astype(np.int32)
    new_edges = full_to_hole[mesh.boundary_edges].astype(np.int32)
    if np.any(new_edges < 0):
        raise GeometryError("boundary edge lost while extracting the hole mesh")
    hole = Mesh(
        nodes=mesh.nodes[hole_to_full].copy(),
        triangles=new_tris,
        tri_regions=mesh.tri_regions[keep].copy(),
        boundary_edges=np.sort(new_edges, axis=1),
        edge_tags=mesh.edge_tags.copy(),
        h_target=mesh.h_target,
        domain_size=mesh.domain_size,
        cell=mesh.cell,
        has_hole=True,
    )
    return hole, hole_to_full


def refine(mesh: Mesh) -> Mesh:
    """Uniform 4-to-1 refinement by edge midpoints; tags are inherited.

    Node count grows by the number of edges; parent boundary edges split into
    two children carrying the same tag.
    """
    tris = mesh.triangles
    pair_lists = [tris[:, [0, 1]], tris[:, [1, 2]], tris[:, [2, 0]]]
    raw = np.vstack(pair_lists)
    raw_sorted = np.sort(raw, axis=1)
    edges, inverse = np.unique(raw_sorted, axis=0, return_inverse=True)
    midpoints = 0.5 * (mesh.nodes[edges[:, 0]] + mesh.nodes[edges[:, 1]])
    nodes = np.vstack([mesh.nodes, midpoints])

    n_old = mesh.num_nodes
    t = mesh.num_triangles
    m01 = n_old + inverse[:t]
    m12 = n_old + inverse[t : 2 * t]
    m20 = n_old + inverse[2 * t :]
    v0, v1, v2 = tris[:, 0], tris[:, 1], tris[:, 2]
    children = np.empty((4 * t, 3), dtype=np.int32)
    children[0::4] = np.column_stack([v0, m01, m20])
    children[1::4] = np.column_stack([m01, v1, m12])
    children[2::4] = np.column_stack([m20, m12, v2])
    children[3::4] = np.column_stack([m01, m12, m20])
    regions = np.repeat(mesh.tri_regions, 4)

    # Boundary edges split at their midpoint node.
    key = edges[:, 0].astype(np.int64) * n_old + edges[:, 1]
    order = np.argsort(key)
    bkey = (
        mesh.boundary_edges[:, 0].astype(np.int64) * n_old + mesh.boundary_edges[:, 1]
    )
    pos = order[np.searchsorted(key[order], bkey)]
    mid = (n_old + pos).astype(np.int32)
    a, b = mesh.boundary_edges[:, 0], mesh.boundary_edges[:, 1]
    new_edges = np.vstack([np.column_stack([a, mid]), np.column_stack([mid, b])])
    new_tags = np.concatenate([mesh.edge_tags, mesh.edge_tags])

    return Mesh(
        nodes=nodes,
        triangles=children,
        tri_regions=regions.astype(np.int8),
        boundary_edges=np.sort(new_edges, axis=1).astype(np.int32),
        edge_tags=new_tags.astype(np.int8),
        h_target=mesh.h_target / 2.0,
        domain_size=mesh.domain_size,
        cell=mesh.cell,
        has_hole=mesh.has_hole,
    )


# -- boundary loops ---------------------------------------------------------


def rectangle_boundary_loop(
    mesh: Mesh, xmin: float, xmax: float, ymin: float, ymax: float
) -> np.ndarray:
    """Node indices tracing an axis-aligned rectangle boundary counterclockwise.

    All four rectangle sides must be resolved by mesh nodes (the rectangle has
    to conform to the grid); starts at the lower-left corner.
    """
    x, y = mesh.nodes[:, 0], mesh.nodes[:, 1]
    tol = _ALIGN_RTOL * max(mesh.domain_size)

    def on_segment(coord_fixed, fixed_value, coord_run, lo, hi):
        return (
            (np.abs(coord_fixed - fixed_value) <= tol)
            & (coord_run >= lo - tol)
            & (coord_run <= hi + tol)
        )

    bottom = np.nonzero(on_segment(y, ymin, x, xmin, xmax))[0]
    right = np.nonzero(on_segment(x, xmax, y, ymin, ymax))[0]
    top = np.nonzero(on_segment(y, ymax, x, xmin, xmax))[0]
    left = np.nonzero(on_segment(x, xmin, y, ymin, ymax))[0]
    if min(len(bottom), len(right), len(top), len(left)) < 2:
        raise GeometryError("rectangle boundary is not resolved by mesh nodes")

    bottom = bottom[np.argsort(x[bottom])]
    right = right[np.argsort(y[right])]
    top = top[np.argsort(-x[top])]
    left = left[np.argsort(-y[left])]
    loop = np.concatenate([bottom[:-1], right[:-1], top[:-1], left[:-1]])
    return loop.astype(np.int64)


def cell_boundary_loop(mesh: Mesh) -> np.ndarray:
    """Counterclockwise node loop tracing the cell wall."""
    c = mesh.cell
    return rectangle_boundary_loop(mesh, c.xmin, c.xmax, c.ymin, c.ymax)


# -- export -----------------------------------------------------------------


def export_mesh_text(mesh: Mesh, stream) -> None:
    """Write the node/triangle/edge tables as plain text."""
    write = stream.write
    write(f"# nodes {mesh.num_nodes}\n")
    write("# index x y\n")
    for k, (px, py) in enumerate(mesh.nodes):
        write(f"{k} {px:.17g} {py:.17g}\n")
    write(f"# triangles {mesh.num_triangles}\n")
    write("# index n0 n1 n2 region\n")
    for k, (t, r) in enumerate(zip(mesh.triangles, mesh.tri_regions)):
        write(f"{k} {t[0]} {t[1]} {t[2]} {RegionTag(r).name}\n")
    write(f"# boundary_edges {len(mesh.boundary_edges)}\n")
    write("# index n0 n1 tag\n")
    for k, (e, tag) in enumerate(zip(mesh.boundary_edges, mesh.edge_tags)):
        write(f"{k} {e[0]} {e[1]} {EdgeTag(tag).name}\n")

"""Mesh generation, refinement, point location and boundary loops."""
import io

import numpy as np
import pytest

from cellforce import (
    CellSquare,
    ConfigurationError,
    EdgeTag,
    GeometryError,
    LocationError,
    RegionTag,
    cell_boundary_loop,
    export_mesh_text,
    extract_hole,
    generate_mesh,
    locate_point,
    rectangle_boundary_loop,
    refine,
)


def brute_force_counts(domain, h, cell):
    """Independent grid enumeration: squares whose centres fall inside the cell."""
    nx, ny = round(domain[0] / h), round(domain[1] / h)
    inside = 0
    for i in range(nx):
        for j in range(ny):
            cx, cy = (i + 0.5) * h, (j + 0.5) * h
            if cell.xmin < cx < cell.xmax and cell.ymin < cy < cell.ymax:
                inside += 1
    return 2 * nx * ny, (nx + 1) * (ny + 1), 2 * inside


def test_reference_mesh_counts(mesh_h1, cell):
    tris, nodes, cell_tris = brute_force_counts((20.0, 20.0), 1.0, cell)
    assert (tris, nodes, cell_tris) == (800, 441, 72)
    assert mesh_h1.num_triangles == tris
    assert mesh_h1.num_nodes == nodes
    assert int((mesh_h1.tri_regions == RegionTag.CELL_INTERIOR).sum()) == cell_tris


def test_smallest_aligned_hole_case():
    # One grid square of cell: its two triangles are absent from the hole mesh.
    cell = CellSquare(center=(1.5, 1.5), side=1.0)
    full = generate_mesh((3.0, 3.0), 1.0, cell)
    hole = generate_mesh((3.0, 3.0), 1.0, cell, exclude_cell_interior=True)
    assert full.num_triangles == 18
    assert hole.num_triangles == 16
    assert int((full.tri_regions == RegionTag.CELL_INTERIOR).sum()) == 2
    hole.validate()


def test_cell_outside_domain_rejected():
    with pytest.raises(GeometryError):
        generate_mesh((2.0, 2.0), 1.0, CellSquare(center=(1.0, 1.0), side=3.0))


def test_misaligned_h_rejected(cell):
    with pytest.raises(ConfigurationError):
        generate_mesh((20.0, 20.0), 0.75, cell)  # 6 / 0.75 = 8 but 7 / 0.75 is fractional
    with pytest.raises(ConfigurationError):
        generate_mesh((20.0, 20.0), 2.0, cell)


def test_invariants_full_and_hole(mesh_h1, hole_h1):
    mesh_h1.validate()
    hole_h1.validate()
    assert np.sum(mesh_h1.tri_areas) == pytest.approx(400.0, rel=1e-13)
    assert np.sum(hole_h1.tri_areas) == pytest.approx(400.0 - 36.0, rel=1e-13)


def test_refine_counts_and_tags(mesh_h1):
    fine = refine(mesh_h1)
    fine.validate()
    assert fine.num_triangles == 4 * mesh_h1.num_triangles
    n_edges = len(mesh_h1.all_edges())
    assert fine.num_nodes == mesh_h1.num_nodes + n_edges
    assert int((fine.tri_regions == RegionTag.CELL_INTERIOR).sum()) == 4 * 72
    assert np.sum(fine.tri_areas) == pytest.approx(400.0, rel=1e-13)


def min_angle(mesh):
    p = mesh.nodes[mesh.triangles]
    angles = []
    for shift in range(3):
        a = p[:, shift]
        b = p[:, (shift + 1) % 3]
        c = p[:, (shift + 2) % 3]
        u, v = b - a, c - a
        cosang = np.sum(u * v, axis=1) / (np.linalg.norm(u, axis=1) * np.linalg.norm(v, axis=1))
        angles.append(np.arccos(np.clip(cosang, -1, 1)))
    return np.min(angles)


def test_refinement_preserves_min_angle(mesh_h1):
    fine = refine(mesh_h1)
    finer = refine(fine)
    a0, a1, a2 = min_angle(mesh_h1), min_angle(fine), min_angle(finer)
    assert a0 == pytest.approx(np.pi / 4, abs=1e-12)
    assert a1 == pytest.approx(a0, abs=1e-12)
    assert a2 == pytest.approx(a0, abs=1e-12)


def test_refined_hole_matches_directly_generated(cell, hole_h1):
    direct = generate_mesh((20.0, 20.0), 0.5, cell, exclude_cell_interior=True)
    refined = refine(hole_h1)
    refined.validate()
    assert refined.num_triangles == direct.num_triangles
    assert np.sum(refined.tri_areas) == pytest.approx(np.sum(direct.tri_areas), rel=1e-14)


def test_extract_hole_mapping(mesh_h1):
    hole, hole_to_full = extract_hole(mesh_h1)
    hole.validate()
    assert np.allclose(hole.nodes, mesh_h1.nodes[hole_to_full])
    # interior cell nodes (5x5 block strictly inside [7,13]^2) are dropped
    assert hole.num_nodes == mesh_h1.num_nodes - 25


def test_locate_centroid_and_vertices(mesh_h1):
    tri = 137
    centroid = mesh_h1.nodes[mesh_h1.triangles[tri]].mean(axis=0)
    found, lam = locate_point(mesh_h1, centroid)
    assert found == tri
    assert lam == pytest.approx([1 / 3, 1 / 3, 1 / 3], abs=1e-12)

    node = 57
    found, lam = locate_point(mesh_h1, mesh_h1.nodes[node])
    assert node in mesh_h1.triangles[found]
    local = list(mesh_h1.triangles[found]).index(node)
    expect = np.zeros(3)
    expect[local] = 1.0
    assert lam == pytest.approx(expect, abs=1e-12)


def test_locate_edge_point_lowest_index(mesh_h1):
    # midpoint of a diagonal edge lies in exactly two triangles
    p = np.array([3.5, 4.5])
    containing = []
    for t in range(mesh_h1.num_triangles):
        a, b, c = mesh_h1.nodes[mesh_h1.triangles[t]]
        den = np.cross(b - a, c - a)
        l1 = np.cross(p - a, c - a) / den
        l2 = np.cross(b - a, p - a) / den
        if min(1 - l1 - l2, l1, l2) >= -1e-12:
            containing.append(t)
    assert len(containing) == 2
    found, _ = locate_point(mesh_h1, p)
    assert found == min(containing)


def test_locate_inside_hole_raises(hole_h1):
    with pytest.raises(LocationError):
        locate_point(hole_h1, (10.0, 10.0))
    with pytest.raises(LocationError):
        locate_point(hole_h1, (25.0, 3.0))


def test_cell_boundary_loop_order(mesh_h1, cell):
    loop = cell_boundary_loop(mesh_h1)
    pts = mesh_h1.nodes[loop]
    assert len(loop) == 24  # 6 edges per side, 4 corners counted once
    assert tuple(pts[0]) == (cell.xmin, cell.ymin)
    # counterclockwise: positive shoelace area equal to the cell area
    x, y = pts[:, 0], pts[:, 1]
    area = 0.5 * np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y)
    assert area == pytest.approx(36.0, rel=1e-13)


def test_rectangle_loop_requires_grid_nodes(mesh_h1):
    with pytest.raises(GeometryError):
        rectangle_boundary_loop(mesh_h1, 5.25, 14.75, 5.0, 15.0)


def test_export_mesh_text_tables(mesh_h1):
    buf = io.StringIO()
    export_mesh_text(mesh_h1, buf)
    text = buf.getvalue()
    assert f"# nodes {mesh_h1.num_nodes}" in text
    assert f"# triangles {mesh_h1.num_triangles}" in text
    assert text.count("CELL_BOUNDARY") == 24
    # one line per node/triangle/edge plus headers
    n_lines = len(text.strip().splitlines())
    assert n_lines == 6 + mesh_h1.num_nodes + mesh_h1.num_triangles + len(mesh_h1.boundary_edges)


def test_boundary_edges_tagged_correctly(mesh_h1, hole_h1):
    outer = mesh_h1.edge_tags == EdgeTag.OUTER_BOUNDARY
    assert int(outer.sum()) == 80  # 4 sides x 20 edges
    adjacency = mesh_h1.boundary_edge_triangles()
    for tag, tris in zip(mesh_h1.edge_tags, adjacency):
        assert len(tris) == (1 if tag == EdgeTag.OUTER_BOUNDARY else 2)
    for tag, tris in zip(hole_h1.edge_tags, hole_h1.boundary_edge_triangles()):
        assert len(tris) == 1

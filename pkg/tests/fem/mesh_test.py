"""
Tests for meridian meshes and affine maps.
Tests counts, canonical ordering, boundary tags and triangle classes.
"""

import io

import numpy as np
import pytest

from src.fem.mesh import (
    Diagonal,
    EdgeTag,
    MeshError,
    TriangleClass,
    affine_from_coordinates,
    boundary_edges,
    build_mesh,
    build_unit_square_mesh,
    canonical_affine,
    canonical_order,
    dump_mesh,
)


@pytest.fixture(params=[Diagonal.NORTH_EAST, Diagonal.NORTH_WEST])
def diagonal(request):
    return request.param


def test_single_cell_counts():
    """Test the two-triangle mesh."""
    mesh = build_unit_square_mesh(1)

    assert mesh.n_triangles == 2
    assert mesh.n_edges == 5
    assert mesh.boundary_tags.count(EdgeTag.AXIS) == 1
    assert mesh.h == 1.0


@pytest.mark.parametrize("n", [1, 2, 4, 7])
def test_counts_scale_with_n(n, diagonal):
    """Test triangle, edge and boundary counts for any n."""
    mesh = build_unit_square_mesh(n, diagonal)

    assert mesh.n_triangles == 2 * n * n
    assert mesh.n_edges == 3 * n * n + 2 * n
    assert mesh.n_vertices == (n + 1) ** 2
    tags = [tag for _, tag in boundary_edges(mesh)]
    assert len(tags) == 4 * n
    assert tags.count(EdgeTag.AXIS) == n
    assert mesh.h == pytest.approx(1.0 / n)


def test_coarsest_study_mesh():
    mesh = build_unit_square_mesh(4)
    assert mesh.n_triangles == 32
    assert mesh.h == 0.25


def test_two_by_two_classes():
    """Test that exactly the two triangles with a full axis edge are TypeI."""
    mesh = build_unit_square_mesh(2)
    classes = [canonical_affine(t, mesh).triangle_class for t in range(mesh.n_triangles)]

    assert classes.count(TriangleClass.TYPE_I) == 2
    assert all(c in TriangleClass for c in classes)


def test_canonical_order_is_counter_clockwise_with_min_r_first(diagonal):
    """Test that every stored triangle has positive area and starts at its min-(r, z) vertex."""
    mesh = build_unit_square_mesh(3, diagonal)
    for t in range(mesh.n_triangles):
        coords = mesh.triangle_coordinates(t)
        area = 0.5 * np.linalg.det(np.column_stack([coords[1] - coords[0], coords[2] - coords[0]]))
        assert area > 0.0
        keys = [tuple(c) for c in coords]
        assert keys[0] == min(keys)


def test_canonical_order_reorients_clockwise_input():
    vertices = np.array([[0.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    assert canonical_order(vertices, (0, 1, 2)) == (0, 2, 1)


def test_reference_triangle_map():
    """Test that the reference triangle maps to itself."""
    amap = affine_from_coordinates(np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 1.0]]))

    np.testing.assert_allclose(amap.jacobian, np.eye(2))
    np.testing.assert_allclose(amap.offset, [0.0, 0.0])
    assert amap.det == 1.0
    assert amap.triangle_class is TriangleClass.TYPE_I


def test_off_axis_triangle_map():
    """Test r0, r_star, det and class of an interior triangle."""
    amap = affine_from_coordinates(np.array([[1.0, 0.0], [2.0, 0.0], [1.0, 1.0]]))

    assert amap.r0 == 1.0
    assert amap.r_star == (1.0, 0.0)
    assert amap.det == pytest.approx(1.0)
    assert amap.triangle_class is TriangleClass.TYPE_III


def test_affine_map_hits_vertices(diagonal):
    """Test that F_T sends the reference vertices to the stored vertices in order."""
    mesh = build_unit_square_mesh(3, diagonal)
    for t in range(mesh.n_triangles):
        amap = canonical_affine(t, mesh)
        r, z = amap.to_physical(np.array([0.0, 1.0, 0.0]), np.array([0.0, 0.0, 1.0]))
        np.testing.assert_allclose(np.column_stack([r, z]), mesh.triangle_coordinates(t), atol=1e-15)


def test_interior_edges_have_two_owners(diagonal):
    mesh = build_unit_square_mesh(3, diagonal)
    for e, tag in enumerate(mesh.boundary_tags):
        owners = mesh.edge_triangles[e]
        if tag is EdgeTag.INTERIOR:
            assert np.all(owners >= 0)
        else:
            assert owners[1] == -1


def test_shared_edge_orientations_disagree():
    """Test that the two owners of an interior edge traverse it in opposite directions."""
    mesh = build_unit_square_mesh(2)
    for e, tag in enumerate(mesh.boundary_tags):
        if tag is not EdgeTag.INTERIOR:
            continue
        (t0, t1), (l0, l1) = mesh.edge_triangles[e], mesh.edge_local[e]
        assert mesh.edge_orientation(t0, l0) == -mesh.edge_orientation(t1, l1)


def test_axis_tags_lie_on_axis():
    mesh = build_unit_square_mesh(3)
    for e, tag in boundary_edges(mesh):
        on_axis = np.all(mesh.vertices[mesh.edges[e], 0] == 0.0)
        assert (tag is EdgeTag.AXIS) == on_axis


def test_rejects_zero_cells():
    with pytest.raises(MeshError):
        build_unit_square_mesh(0)


def test_rejects_degenerate_triangle():
    vertices = np.array([[0.0, 0.0], [1.0, 0.0], [2.0, 0.0]])
    with pytest.raises(MeshError):
        build_mesh(vertices, [(0, 1, 2)])


def test_rejects_negative_radius():
    vertices = np.array([[-1.0, 0.0], [1.0, 0.0], [0.0, 1.0]])
    with pytest.raises(MeshError):
        build_mesh(vertices, [(0, 1, 2)])


def test_triangle_index_out_of_range():
    mesh = build_unit_square_mesh(1)
    with pytest.raises(MeshError):
        canonical_affine(2, mesh)


def test_dump_mesh_lines():
    """Test the plain-text mesh dump."""
    mesh = build_unit_square_mesh(1)
    stream = io.StringIO()
    dump_mesh(mesh, stream)
    lines = stream.getvalue().splitlines()

    assert sum(line.startswith("v ") for line in lines) == 4
    assert sum(line.startswith("t ") for line in lines) == 2
    assert sum(line.startswith("e ") for line in lines) == 5
    assert sum(line.endswith(" axis") for line in lines) == 1

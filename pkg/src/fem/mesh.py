"""
Triangulations of the meridian rectangle and affine reference maps.
Vertices are stored in the canonical order (counter-clockwise, r0 minimal).
"""

from dataclasses import dataclass
from enum import Enum
from typing import Dict, List, Tuple, TextIO

import numpy as np

from src.utils.logger import get_logger

logger = get_logger(logger_name=__name__)

AXIS_TOL = 1e-14


class MeshError(Exception):
    """Raised for invalid mesh parameters or degenerate triangles."""
    pass


class Diagonal(str, Enum):
    NORTH_EAST = "north-east"
    NORTH_WEST = "north-west"


class EdgeTag(str, Enum):
    AXIS = "axis"
    OUTER = "outer"
    INTERIOR = "interior"


class TriangleClass(str, Enum):
    TYPE_I = "TypeI"
    TYPE_II = "TypeII"
    TYPE_III = "TypeIII"


# Local edge j of a triangle is opposite local vertex j and runs
# counter-clockwise between the other two vertices.
LOCAL_EDGES = ((1, 2), (2, 0), (0, 1))


@dataclass(frozen=True)
class Mesh:
    """Triangulated meridian domain with edge topology and boundary tags."""

    vertices: np.ndarray  # (nv, 2) columns r, z
    triangles: np.ndarray  # (nt, 3) canonical vertex order
    edges: np.ndarray  # (ne, 2) lower index first
    edge_triangles: np.ndarray  # (ne, 2) owning triangles, -1 when absent
    edge_local: np.ndarray  # (ne, 2) local edge index inside each owner
    triangle_edges: np.ndarray  # (nt, 3) global edge of each local edge
    boundary_tags: Tuple[EdgeTag, ...]
    h: float = 0.0

    @property
    def n_vertices(self) -> int:
        return int(self.vertices.shape[0])

    @property
    def n_triangles(self) -> int:
        return int(self.triangles.shape[0])

    @property
    def n_edges(self) -> int:
        return int(self.edges.shape[0])

    def triangle_coordinates(self, tri: int) -> np.ndarray:
        """Return the (3, 2) vertex coordinates of a triangle."""
        return self.vertices[self.triangles[tri]]

    def edge_orientation(self, tri: int, local_edge: int) -> int:
        """+1 when the local counter-clockwise edge runs from lower to higher vertex index."""
        a, b = LOCAL_EDGES[local_edge]
        va, vb = self.triangles[tri, a], self.triangles[tri, b]
        return 1 if va < vb else -1


@dataclass(frozen=True)
class AffineMap:
    """Affine map F_T from the reference triangle onto a mesh triangle."""

    jacobian: np.ndarray
    offset: np.ndarray
    det: float
    r_star: Tuple[float, float]
    triangle_class: TriangleClass

    @property
    def r0(self) -> float:
        return float(self.offset[0])

    def to_physical(self, xi: np.ndarray, eta: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Map reference coordinates to (r, z)."""
        r = self.offset[0] + self.jacobian[0, 0] * xi + self.jacobian[0, 1] * eta
        z = self.offset[1] + self.jacobian[1, 0] * xi + self.jacobian[1, 1] * eta
        return r, z

    def r_hat(self, xi: np.ndarray, eta: np.ndarray) -> np.ndarray:
        return self.offset[0] + self.jacobian[0, 0] * xi + self.jacobian[0, 1] * eta


def _signed_area(coords: np.ndarray) -> float:
    (r0, z0), (r1, z1), (r2, z2) = coords
    return 0.5 * ((r1 - r0) * (z2 - z0) - (r2 - r0) * (z1 - z0))


def canonical_order(vertices: np.ndarray, tri: Tuple[int, int, int]) -> Tuple[int, int, int]:
    """
    Reorder a vertex triple counter-clockwise and rotate it so that the first
    vertex minimizes r, ties broken by smaller z.
    """
    tri = tuple(int(v) for v in tri)
    area = _signed_area(vertices[list(tri)])
    if area == 0.0:
        raise MeshError(f"Degenerate triangle {tri}")
    if area < 0.0:
        tri = (tri[0], tri[2], tri[1])
    keys = [(vertices[v, 0], vertices[v, 1]) for v in tri]
    start = min(range(3), key=lambda i: keys[i])
    return tri[start:] + tri[:start]


def build_mesh(vertices: np.ndarray, triangles: List[Tuple[int, int, int]], h: float = 0.0) -> Mesh:
    """Build topology and tags for an arbitrary triangle list on r >= 0."""
    vertices = np.asarray(vertices, dtype=float)
    if vertices.size == 0 or len(triangles) == 0:
        raise MeshError("Mesh must contain at least one triangle")
    if np.any(vertices[:, 0] < 0.0):
        raise MeshError("All vertices must satisfy r >= 0")

    ordered = np.array([canonical_order(vertices, t) for t in triangles], dtype=np.int64)

    edge_index: Dict[Tuple[int, int], int] = {}
    owners: List[List[int]] = []
    locals_: List[List[int]] = []
    triangle_edges = np.zeros((len(ordered), 3), dtype=np.int64)
    for t, tri in enumerate(ordered):
        for j, (a, b) in enumerate(LOCAL_EDGES):
            key = tuple(sorted((int(tri[a]), int(tri[b]))))
            if key not in edge_index:
                edge_index[key] = len(owners)
                owners.append([])
                locals_.append([])
            e = edge_index[key]
            if len(owners[e]) == 2:
                raise MeshError(f"Edge {key} shared by more than two triangles")
            owners[e].append(t)
            locals_[e].append(j)
            triangle_edges[t, j] = e

    edges = np.array(list(edge_index.keys()), dtype=np.int64)
    edge_triangles = np.full((len(owners), 2), -1, dtype=np.int64)
    edge_local = np.full((len(owners), 2), -1, dtype=np.int64)
    tags = []
    for e, (own, loc) in enumerate(zip(owners, locals_)):
        edge_triangles[e, : len(own)] = own
        edge_local[e, : len(loc)] = loc
        if len(own) == 2:
            tags.append(EdgeTag.INTERIOR)
        elif np.all(np.abs(vertices[edges[e], 0]) <= AXIS_TOL):
            tags.append(EdgeTag.AXIS)
        else:
            tags.append(EdgeTag.OUTER)

    return Mesh(
        vertices=vertices,
        triangles=ordered,
        edges=edges,
        edge_triangles=edge_triangles,
        edge_local=edge_local,
        triangle_edges=triangle_edges,
        boundary_tags=tuple(tags),
        h=h,
    )


def build_unit_square_mesh(n: int, diagonal: Diagonal = Diagonal.NORTH_EAST) -> Mesh:
    """
    Uniform n x n right-triangle grid on (0,1) x (0,1) with r along the first axis.

    Args:
        n: Number of cells per side (h = 1/n)
        diagonal: Split direction of every square

    Returns:
        Mesh with 2n^2 triangles, axis edges on r = 0
    """
    if n < 1:
        raise MeshError(f"n must be a positive integer, got {n}")
    diagonal = Diagonal(diagonal)

    coords = np.linspace(0.0, 1.0, n + 1)
    rr, zz = np.meshgrid(coords, coords)
    vertices = np.column_stack([rr.ravel(), zz.ravel()])

    def vid(i: int, j: int) -> int:
        return j * (n + 1) + i

    triangles = []
    for j in range(n):
        for i in range(n):
            a, b, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
            if diagonal is Diagonal.NORTH_EAST:
                triangles += [(a, b, c), (a, c, d)]
            else:
                triangles += [(a, b, d), (b, c, d)]

    mesh = build_mesh(vertices, triangles, h=1.0 / n)
    logger.debug(f"Built {diagonal.value} mesh n={n}: {mesh.n_triangles} triangles, {mesh.n_edges} edges")
    return mesh


def classify(coords: np.ndarray) -> TriangleClass:
    on_axis = int(np.sum(np.abs(coords[:, 0]) <= AXIS_TOL))
    if on_axis >= 2:
        return TriangleClass.TYPE_I
    if on_axis == 1:
        return TriangleClass.TYPE_II
    return TriangleClass.TYPE_III


def affine_from_coordinates(coords: np.ndarray) -> AffineMap:
    """Affine map for vertices already in canonical order."""
    coords = np.asarray(coords, dtype=float)
    offset = coords[0].copy()
    jacobian = np.column_stack([coords[1] - coords[0], coords[2] - coords[0]])
    det = float(np.linalg.det(jacobian))
    if not det > 0.0:
        raise MeshError(f"Degenerate or clockwise triangle, det = {det}")
    r0, r1, r2 = coords[:, 0]
    if r0 > AXIS_TOL:
        r_star = ((r1 - r0) / r0, (r2 - r0) / r0)
    else:
        r_star = (float(r1), float(r2))
    return AffineMap(
        jacobian=jacobian,
        offset=offset,
        det=det,
        r_star=(float(r_star[0]), float(r_star[1])),
        triangle_class=classify(coords),
    )


def canonical_affine(tri: int, mesh: Mesh) -> AffineMap:
    """Return F_T for a triangle of the mesh."""
    if not 0 <= tri < mesh.n_triangles:
        raise MeshError(f"Triangle index {tri} out of range")
    return affine_from_coordinates(mesh.triangle_coordinates(tri))


def boundary_edges(mesh: Mesh) -> List[Tuple[int, EdgeTag]]:
    """List (edge index, tag) for every edge owned by a single triangle."""
    return [(e, tag) for e, tag in enumerate(mesh.boundary_tags) if tag is not EdgeTag.INTERIOR]


def dump_mesh(mesh: Mesh, stream: TextIO) -> None:
    """Write the mesh as plain text: 'v r z', 't i0 i1 i2' and 'e i0 i1 tag' lines."""
    for r, z in mesh.vertices:
        stream.write(f"v {r!r} {z!r}\n")
    for i0, i1, i2 in mesh.triangles:
        stream.write(f"t {i0} {i1} {i2}\n")
    for (i0, i1), tag in zip(mesh.edges, mesh.boundary_tags):
        stream.write(f"e {i0} {i1} {tag.value}\n")

"""Structured triangulations of axis-aligned rectangles.

Meshes are conforming simplicial partitions obtained by splitting every
rectangle of a tensor grid along its lower-left/upper-right diagonal.  All
cells are stored counterclockwise.  Periodic identification is kept as
vertex-level master/slave maps (one period, one axis per hop); the mesh
itself always stores the full tensor grid so that cell connectivity stays
simple.
"""
from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Mapping, Union

import numpy as np


class BoundaryTag(Enum):
    NOSLIP = "noslip"
    NOPENETRATION = "nopenetration"
    PERIODIC = "periodic"


SIDES = ("left", "right", "bottom", "top")

#: Boundary specification: the string "periodic" or a per-side tag map.
BoundarySpec = Union[str, Mapping[str, BoundaryTag]]


@dataclass(frozen=True)
class Mesh:
    """Triangulation of a rectangle, possibly with periodic identification.

    Attributes
    ----------
    vertices : (nv, 2) float array of vertex coordinates.
    cells : (nc, 3) int array, counterclockwise vertex triples.
    boundary_edges : tuple of ((a, b), tag) pairs covering the grid boundary.
    periodic_map : slave vertex -> vertex one period away in exactly one
        axis, or None.  Corner slaves chain (right column first, then top
        row); use :meth:`master_vertices` for the resolved identification.
    axis_maps : per-axis slave->master vertex maps; the doubly periodic
        corner appears in both.
    h_max : maximal cell diameter.
    extents : ((x0, x1), (y0, y1)) rectangle bounds.
    subdivisions : (n_x, n_y) rectangles per axis at this refinement level.
    """

    dimension: int
    vertices: np.ndarray
    cells: np.ndarray
    boundary_edges: tuple
    periodic_map: dict | None
    h_max: float
    extents: tuple
    subdivisions: tuple
    axis_maps: tuple

    @property
    def num_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def num_cells(self) -> int:
        return self.cells.shape[0]

    @property
    def is_periodic(self) -> bool:
        return self.periodic_map is not None

    def master_vertices(self) -> np.ndarray:
        """Resolved periodic master for every vertex (identity if none)."""
        master = np.arange(self.num_vertices)
        if self.periodic_map is None:
            return master
        for axis_map in self.axis_maps:
            for slave, m in axis_map.items():
                master[slave] = m
        # chase chains (a corner slave resolves in two hops)
        for _ in range(2):
            master = master[master]
        return master

    def cell_areas(self) -> np.ndarray:
        v = self.vertices
        a, b, c = (v[self.cells[:, k]] for k in range(3))
        return 0.5 * ((b[:, 0] - a[:, 0]) * (c[:, 1] - a[:, 1])
                      - (b[:, 1] - a[:, 1]) * (c[:, 0] - a[:, 0]))

    def domain_area(self) -> float:
        (x0, x1), (y0, y1) = self.extents
        return (x1 - x0) * (y1 - y0)


def _compute_h_max(vertices: np.ndarray, cells: np.ndarray) -> float:
    h = 0.0
    for i, j in ((0, 1), (1, 2), (2, 0)):
        d = vertices[cells[:, i]] - vertices[cells[:, j]]
        h = max(h, float(np.sqrt((d * d).sum(axis=1)).max()))
    return h


def build_structured_mesh(extents, n_x: int, n_y: int, bc: BoundarySpec) -> Mesh:
    """Triangulate ``[x0,x1] x [y0,y1]`` with ``2*n_x*n_y`` cells.

    Every grid rectangle is split along its lower-left to upper-right
    diagonal.  ``bc`` is either ``"periodic"`` (both axes) or a mapping
    from side name (left/right/bottom/top) to a :class:`BoundaryTag`.
    """
    (x0, x1), (y0, y1) = extents
    if not (x1 > x0 and y1 > y0):
        raise ValueError(f"degenerate extents {extents}")
    if n_x < 1 or n_y < 1:
        raise ValueError(f"subdivision counts must be >= 1, got {(n_x, n_y)}")
    periodic = isinstance(bc, str)
    if periodic and bc != "periodic":
        raise ValueError(f"unknown boundary spec {bc!r}")
    if not periodic:
        missing = [s for s in SIDES if s not in bc]
        if missing:
            raise ValueError(f"boundary spec missing sides {missing}")

    xs = np.linspace(x0, x1, n_x + 1)
    ys = np.linspace(y0, y1, n_y + 1)
    xv, yv = np.meshgrid(xs, ys, indexing="xy")
    vertices = np.column_stack([xv.ravel(), yv.ravel()])

    def vid(i, j):
        return j * (n_x + 1) + i

    cells = np.empty((2 * n_x * n_y, 3), dtype=np.int64)
    k = 0
    for j in range(n_y):
        for i in range(n_x):
            v00, v10 = vid(i, j), vid(i + 1, j)
            v01, v11 = vid(i, j + 1), vid(i + 1, j + 1)
            cells[k] = (v00, v10, v11)      # lower triangle
            cells[k + 1] = (v00, v11, v01)  # upper triangle
            k += 2

    boundary_edges = []

    def side_tag(side):
        return BoundaryTag.PERIODIC if periodic else bc[side]

    for j in range(n_y):
        boundary_edges.append(((vid(0, j + 1), vid(0, j)), side_tag("left")))
        boundary_edges.append(((vid(n_x, j), vid(n_x, j + 1)), side_tag("right")))
    for i in range(n_x):
        boundary_edges.append(((vid(i, 0), vid(i + 1, 0)), side_tag("bottom")))
        boundary_edges.append(((vid(i + 1, n_y), vid(i, n_y)), side_tag("top")))

    if periodic:
        xmap = {vid(n_x, j): vid(0, j) for j in range(n_y + 1)}
        ymap = {vid(i, n_y): vid(i, 0) for i in range(n_x + 1)}
        periodic_map = dict(ymap)
        periodic_map.update(xmap)  # corner maps along x first
        axis_maps = (xmap, ymap)
    else:
        periodic_map = None
        axis_maps = ({}, {})

    return Mesh(
        dimension=2,
        vertices=vertices,
        cells=cells,
        boundary_edges=tuple(boundary_edges),
        periodic_map=periodic_map,
        h_max=_compute_h_max(vertices, cells),
        extents=((x0, x1), (y0, y1)),
        subdivisions=(n_x, n_y),
        axis_maps=axis_maps,
    )


def mesh_edges(mesh: Mesh):
    """Unique edges as sorted vertex pairs plus the cell-to-edge map.

    Local edges are ordered ``(0,1), (1,2), (2,0)`` within each cell.
    Returns ``(edges, cell_to_edge)`` with ``edges`` of shape (ne, 2).
    """
    cells = mesh.cells
    pairs = np.concatenate([
        cells[:, (0, 1)], cells[:, (1, 2)], cells[:, (2, 0)]
    ])
    pairs = np.sort(pairs, axis=1)
    edges, inverse = np.unique(pairs, axis=0, return_inverse=True)
    nc = cells.shape[0]
    cell_to_edge = np.column_stack([inverse[:nc], inverse[nc:2 * nc], inverse[2 * nc:]])
    return edges, cell_to_edge


def edge_master_map(mesh: Mesh, edges: np.ndarray) -> dict:
    """Periodic identification for edges lying inside a slave boundary face.

    An edge is a slave for axis ``a`` when both endpoints are in that
    axis' vertex map; its master is the edge between the mapped endpoints.
    Returns a dict edge_index -> master edge_index (chains resolved).
    """
    if not mesh.is_periodic:
        return {}
    lookup = {(int(a), int(b)): k for k, (a, b) in enumerate(edges)}
    emap = {}
    for axis_map in mesh.axis_maps:
        if not axis_map:
            continue
        for k, (a, b) in enumerate(edges):
            a, b = int(a), int(b)
            if a in axis_map and b in axis_map:
                ma, mb = axis_map[a], axis_map[b]
                key = (ma, mb) if ma < mb else (mb, ma)
                emap[k] = lookup[key]
    # resolve chains
    for k in list(emap):
        m = emap[k]
        while m in emap:
            m = emap[m]
        emap[k] = m
    return emap


def refine_uniform(mesh: Mesh) -> Mesh:
    """Split every triangle into four congruent children.

    Midpoints become new vertices; boundary tags and periodic
    identification are inherited (slave-face edge midpoints map to the
    corresponding master-edge midpoints).
    """
    edges, cell_to_edge = mesh_edges(mesh)
    nv = mesh.num_vertices
    midpoints = 0.5 * (mesh.vertices[edges[:, 0]] + mesh.vertices[edges[:, 1]])
    vertices = np.vstack([mesh.vertices, midpoints])

    def mid(eid):
        return nv + eid

    cells = np.empty((4 * mesh.num_cells, 3), dtype=np.int64)
    for c in range(mesh.num_cells):
        v0, v1, v2 = mesh.cells[c]
        m01, m12, m20 = (mid(e) for e in cell_to_edge[c])
        cells[4 * c + 0] = (v0, m01, m20)
        cells[4 * c + 1] = (v1, m12, m01)
        cells[4 * c + 2] = (v2, m20, m12)
        cells[4 * c + 3] = (m01, m12, m20)

    edge_lookup = {(int(a), int(b)): k for k, (a, b) in enumerate(edges)}
    boundary_edges = []
    for (a, b), tag in mesh.boundary_edges:
        key = (a, b) if a < b else (b, a)
        m = mid(edge_lookup[key])
        boundary_edges.append(((a, m), tag))
        boundary_edges.append(((m, b), tag))

    if mesh.is_periodic:
        new_axis_maps = []
        for axis_map in mesh.axis_maps:
            new_map = dict(axis_map)
            for k, (a, b) in enumerate(edges):
                a, b = int(a), int(b)
                if a in axis_map and b in axis_map:
                    ma, mb = axis_map[a], axis_map[b]
                    key = (ma, mb) if ma < mb else (mb, ma)
                    new_map[mid(k)] = mid(edge_lookup[key])
            new_axis_maps.append(new_map)
        xmap, ymap = new_axis_maps
        periodic_map = dict(ymap)
        periodic_map.update(xmap)
        axis_maps = (xmap, ymap)
    else:
        periodic_map = None
        axis_maps = ({}, {})

    n_x, n_y = mesh.subdivisions
    return Mesh(
        dimension=2,
        vertices=vertices,
        cells=cells,
        boundary_edges=tuple(boundary_edges),
        periodic_map=periodic_map,
        h_max=_compute_h_max(vertices, cells),
        extents=mesh.extents,
        subdivisions=(2 * n_x, 2 * n_y),
        axis_maps=axis_maps,
    )


def locate_cells(mesh: Mesh, points: np.ndarray) -> np.ndarray:
    """Cell index containing each point, using the structured layout.

    Points on cell interfaces are assigned to one of the adjacent cells;
    basis evaluation is continuous so either choice is equivalent.
    """
    (x0, x1), (y0, y1) = mesh.extents
    n_x, n_y = mesh.subdivisions
    hx = (x1 - x0) / n_x
    hy = (y1 - y0) / n_y
    pts = np.atleast_2d(points)
    i = np.clip(((pts[:, 0] - x0) / hx).astype(np.int64), 0, n_x - 1)
    j = np.clip(((pts[:, 1] - y0) / hy).astype(np.int64), 0, n_y - 1)
    xi = (pts[:, 0] - x0) / hx - i
    eta = (pts[:, 1] - y0) / hy - j
    lower = xi >= eta
    return 2 * (j * n_x + i) + np.where(lower, 0, 1)

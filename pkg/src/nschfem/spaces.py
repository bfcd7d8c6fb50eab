"""Lagrange finite element spaces: P1 scalars, P2 vectors, mean-free P1.

Degrees of freedom are always the periodically identified ("unique")
nodes; coefficient vectors never carry slave entries.  Essential velocity
constraints are recorded per Cartesian component and are homogeneous.
"""
from __future__ import annotations

from typing import Callable, NamedTuple

import numpy as np

from .mesh import BoundaryTag, Mesh, edge_master_map, locate_cells, mesh_edges
from .quadrature import DEFAULT_RULE, QuadratureRule


def p1_basis(points: np.ndarray):
    """P1 values and reference gradients at barycentric ``points``.

    Returns ``(values, grads)`` with shapes (nq, 3) and (3, 2); the
    gradients are constant in the reference coordinates (x, y) = (l1, l2).
    """
    pts = np.atleast_2d(points)
    values = pts.copy()
    grads = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])
    return values, grads


def p2_basis(points: np.ndarray):
    """P2 values and reference gradients at barycentric ``points``.

    Node order: three vertices, then midpoints of edges (0,1), (1,2), (2,0).
    Returns ``(values, grads)`` with shapes (nq, 6) and (nq, 6, 2).
    """
    pts = np.atleast_2d(points)
    l0, l1, l2 = pts[:, 0], pts[:, 1], pts[:, 2]
    values = np.column_stack([
        l0 * (2 * l0 - 1),
        l1 * (2 * l1 - 1),
        l2 * (2 * l2 - 1),
        4 * l0 * l1,
        4 * l1 * l2,
        4 * l2 * l0,
    ])
    # d/dx, d/dy with l0 = 1 - x - y, l1 = x, l2 = y
    nq = pts.shape[0]
    grads = np.empty((nq, 6, 2))
    grads[:, 0, 0] = 1 - 4 * l0
    grads[:, 0, 1] = 1 - 4 * l0
    grads[:, 1, 0] = 4 * l1 - 1
    grads[:, 1, 1] = 0.0
    grads[:, 2, 0] = 0.0
    grads[:, 2, 1] = 4 * l2 - 1
    grads[:, 3, 0] = 4 * (l0 - l1)
    grads[:, 3, 1] = -4 * l1
    grads[:, 4, 0] = 4 * l2
    grads[:, 4, 1] = 4 * l1
    grads[:, 5, 0] = -4 * l2
    grads[:, 5, 1] = 4 * (l0 - l2)
    return values, grads


def eval_basis(kind: str, points: np.ndarray):
    """Local basis values and reference gradients for ``kind`` in {p1, p2}.

    Physical gradients follow by the per-cell affine push-forward, see
    :func:`cell_geometry`.
    """
    if kind == "p1":
        return p1_basis(points)
    if kind == "p2":
        return p2_basis(points)
    raise ValueError(f"unknown basis kind {kind!r}")


class CellGeometry(NamedTuple):
    jac: np.ndarray        # (nc, 2, 2), columns are the cell edge vectors
    inv_jac_t: np.ndarray  # (nc, 2, 2), maps reference to physical gradients
    det: np.ndarray        # (nc,), 2 * cell area, positive


def cell_geometry(mesh: Mesh) -> CellGeometry:
    v = mesh.vertices
    a = v[mesh.cells[:, 0]]
    b = v[mesh.cells[:, 1]]
    c = v[mesh.cells[:, 2]]
    jac = np.empty((mesh.num_cells, 2, 2))
    jac[:, :, 0] = b - a
    jac[:, :, 1] = c - a
    det = jac[:, 0, 0] * jac[:, 1, 1] - jac[:, 0, 1] * jac[:, 1, 0]
    inv_jac_t = np.empty_like(jac)
    inv_jac_t[:, 0, 0] = jac[:, 1, 1]
    inv_jac_t[:, 0, 1] = -jac[:, 1, 0]
    inv_jac_t[:, 1, 0] = -jac[:, 0, 1]
    inv_jac_t[:, 1, 1] = jac[:, 0, 0]
    inv_jac_t /= det[:, None, None]
    return CellGeometry(jac=jac, inv_jac_t=inv_jac_t, det=det)


def quad_coords(mesh: Mesh, rule: QuadratureRule) -> np.ndarray:
    """Physical coordinates of all quadrature points, shape (nc, nq, 2)."""
    geom = cell_geometry(mesh)
    ref = rule.points[:, 1:]  # (nq, 2)
    a = mesh.vertices[mesh.cells[:, 0]]
    return a[:, None, :] + np.einsum("cxy,qy->cqx", geom.jac, ref)


class ScalarSpaceP1:
    """Continuous piecewise-linear scalars on the mesh vertices."""

    kind = "p1"
    degree = 1
    local_dofs = 3

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        master = mesh.master_vertices()
        unique, inverse = np.unique(master, return_inverse=True)
        self.dof_count = len(unique)
        self.vertex_to_dof = inverse.astype(np.int64)
        self.cell_to_dof = self.vertex_to_dof[mesh.cells]
        self.dof_coords = mesh.vertices[unique]


class PressureSpaceQ:
    """Mean-free P1 pressure: a P1 layout plus one Lagrange multiplier slot.

    ``mass_vector[i]`` is the exact integral of basis function i; the
    mean-zero constraint reads ``mass_vector @ coeffs == 0``.
    """

    kind = "p1"
    degree = 1
    local_dofs = 3

    def __init__(self, scalar: ScalarSpaceP1):
        self.scalar = scalar
        self.mesh = scalar.mesh
        self.dof_count = scalar.dof_count
        self.cell_to_dof = scalar.cell_to_dof
        self.dof_coords = scalar.dof_coords
        areas = scalar.mesh.cell_areas()
        self.mass_vector = np.bincount(
            self.cell_to_dof.ravel(),
            weights=np.repeat(areas / 3.0, 3),
            minlength=self.dof_count,
        )

    def mean(self, coeffs: np.ndarray) -> float:
        return float(self.mass_vector @ coeffs) / self.mesh.domain_area()


class VectorSpaceP2:
    """Continuous piecewise-quadratic vector fields (Taylor-Hood velocity).

    Nodes are the unique vertices followed by the unique edge midpoints;
    dof ``2*node + comp`` holds Cartesian component ``comp``.  Dirichlet
    data is homogeneous: no-slip walls constrain both components, while
    no-penetration walls constrain only the wall-normal component
    (axis-aligned walls, hence exactly one Cartesian component).
    """

    kind = "p2"
    degree = 2
    local_dofs = 12

    def __init__(self, mesh: Mesh):
        self.mesh = mesh
        master = mesh.master_vertices()
        vunique, vinv = np.unique(master, return_inverse=True)
        n_vert = len(vunique)

        edges, cell_to_edge = mesh_edges(mesh)
        emap = edge_master_map(mesh, edges)
        edge_master = np.arange(len(edges))
        for s, m in emap.items():
            edge_master[s] = m
        eunique, einv = np.unique(edge_master, return_inverse=True)
        n_edge = len(eunique)

        self.num_nodes = n_vert + n_edge
        self.dof_count = 2 * self.num_nodes
        self.vertex_to_node = vinv.astype(np.int64)
        edge_to_node = n_vert + einv.astype(np.int64)
        self._edge_node_map = edge_to_node
        self.cell_to_node = np.column_stack([
            self.vertex_to_node[mesh.cells],
            edge_to_node[cell_to_edge],
        ])
        self.node_coords = np.vstack([
            mesh.vertices[vunique],
            0.5 * (mesh.vertices[edges[eunique, 0]] + mesh.vertices[edges[eunique, 1]]),
        ])
        # interleaved (node, component) dofs per cell, shape (nc, 12)
        self.cell_to_dof = np.empty((mesh.num_cells, 12), dtype=np.int64)
        self.cell_to_dof[:, 0::2] = 2 * self.cell_to_node
        self.cell_to_dof[:, 1::2] = 2 * self.cell_to_node + 1

        self._build_constraints(edges)

    def _build_constraints(self, edges):
        edge_lookup = {(int(a), int(b)): k for k, (a, b) in enumerate(edges)}
        constrained = [set(), set()]  # nodes with component 0 / 1 fixed
        for (a, b), tag in self.mesh.boundary_edges:
            if tag is BoundaryTag.PERIODIC:
                continue
            key = (a, b) if a < b else (b, a)
            eid = edge_lookup[key]
            nodes = (self.vertex_to_node[a], self.vertex_to_node[b], self._edge_node(eid))
            if tag is BoundaryTag.NOSLIP:
                comps = (0, 1)
            elif tag is BoundaryTag.NOPENETRATION:
                pa, pb = self.mesh.vertices[a], self.mesh.vertices[b]
                # wall normal of an axis-aligned edge
                comps = (1,) if abs(pa[1] - pb[1]) <= abs(pa[0] - pb[0]) else (0,)
            else:  # pragma: no cover - enum is exhaustive
                raise ValueError(f"unhandled boundary tag {tag}")
            for n in nodes:
                for comp in comps:
                    constrained[comp].add(int(n))
        dofs = sorted({2 * n + c for c in (0, 1) for n in constrained[c]})
        self.constrained_dofs = np.array(dofs, dtype=np.int64)
        self.essential_bc = [(d, 0.0) for d in dofs]
        self.free_mask = np.ones(self.dof_count, dtype=bool)
        self.free_mask[self.constrained_dofs] = False

    def _edge_node(self, eid: int) -> int:
        return int(self._edge_node_map[eid])

    def apply_constraints(self, coeffs: np.ndarray) -> np.ndarray:
        out = coeffs.copy()
        out[self.constrained_dofs] = 0.0
        return out


def interpolate(space, f: Callable) -> np.ndarray:
    """Nodal interpolation of a callable field.

    Scalar spaces expect ``f(x, y) -> array``; the P2 vector space expects
    ``f(x, y) -> (fx, fy)``.  Periodic slave nodes do not exist as dofs,
    so they receive master values by construction.
    """
    if isinstance(space, VectorSpaceP2):
        x, y = space.node_coords[:, 0], space.node_coords[:, 1]
        fx, fy = f(x, y)
        out = np.empty(space.dof_count)
        out[0::2] = np.broadcast_to(fx, (space.num_nodes,))
        out[1::2] = np.broadcast_to(fy, (space.num_nodes,))
        return out
    coords = space.dof_coords
    vals = f(coords[:, 0], coords[:, 1])
    return np.broadcast_to(np.asarray(vals, dtype=float), (space.dof_count,)).copy()


def evaluate(space, coeffs: np.ndarray, points: np.ndarray) -> np.ndarray:
    """Point evaluation of a finite element function.

    Returns shape (npts,) for scalar spaces and (npts, 2) for the vector
    space.  Uses the structured point location of the underlying mesh.
    """
    mesh = space.mesh
    pts = np.atleast_2d(points)
    cid = locate_cells(mesh, pts)
    a = mesh.vertices[mesh.cells[cid, 0]]
    geom = cell_geometry(mesh)
    d = pts - a
    inv_t = geom.inv_jac_t[cid]
    # reference coordinates: jac^{-1} (p - a) = inv_jac_t^T (p - a)
    ref = np.einsum("pyx,py->px", inv_t, d)
    lam = np.column_stack([1 - ref[:, 0] - ref[:, 1], ref[:, 0], ref[:, 1]])
    if isinstance(space, VectorSpaceP2):
        vals, _ = p2_basis(lam)
        local = coeffs[space.cell_to_dof[cid]].reshape(-1, 6, 2)
        return np.einsum("pa,pak->pk", vals, local)
    vals, _ = p1_basis(lam)
    local = coeffs[space.cell_to_dof[cid]]
    return np.einsum("pa,pa->p", vals, local)


def vertex_values(space, coeffs: np.ndarray) -> np.ndarray:
    """Field values at every mesh vertex (slaves repeat master values)."""
    if isinstance(space, VectorSpaceP2):
        nodes = space.vertex_to_node
        return np.column_stack([coeffs[2 * nodes], coeffs[2 * nodes + 1]])
    return coeffs[space.vertex_to_dof]


class SpaceBundle(NamedTuple):
    """The Taylor-Hood + phase-field spaces built on one mesh."""

    mesh: Mesh
    p1: ScalarSpaceP1       # shared layout for phi and mu
    vel: VectorSpaceP2
    pressure: PressureSpaceQ


def make_spaces(mesh: Mesh) -> SpaceBundle:
    p1 = ScalarSpaceP1(mesh)
    return SpaceBundle(mesh=mesh, p1=p1, vel=VectorSpaceP2(mesh), pressure=PressureSpaceQ(p1))


class Norms(NamedTuple):
    l2: float
    h1: float


def norms(space, coeffs: np.ndarray, rule: QuadratureRule = DEFAULT_RULE) -> Norms:
    """L2 and full H1 norms by quadrature (exact for polynomial data)."""
    mesh = space.mesh
    geom = cell_geometry(mesh)
    wdet = rule.weights[None, :] * geom.det[:, None]
    if isinstance(space, VectorSpaceP2):
        vals, ref_grads = p2_basis(rule.points)
        grads = np.einsum("cxy,qay->cqax", geom.inv_jac_t, ref_grads)
        local = coeffs[space.cell_to_dof].reshape(mesh.num_cells, 6, 2)
        u = np.einsum("qa,cak->cqk", vals, local)
        gu = np.einsum("cqax,cak->cqkx", grads, local)
        l2sq = float(np.einsum("cq,cqk,cqk->", wdet, u, u))
        semisq = float(np.einsum("cq,cqkx,cqkx->", wdet, gu, gu))
    else:
        vals, ref_grads = p1_basis(rule.points)
        grads = np.einsum("cxy,ay->cax", geom.inv_jac_t, ref_grads)
        local = coeffs[space.cell_to_dof]
        u = np.einsum("qa,ca->cq", vals, local)
        gu = np.einsum("cax,ca->cx", grads, local)
        l2sq = float(np.einsum("cq,cq,cq->", wdet, u, u))
        semisq = float((wdet.sum(axis=1) * (gu**2).sum(axis=1)).sum())
    return Norms(l2=np.sqrt(l2sq), h1=np.sqrt(l2sq + semisq))

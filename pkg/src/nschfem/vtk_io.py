"""Legacy ASCII VTK output of fields on the triangulation.

Point data lives on the mesh vertices (periodic slaves repeat their
master values); the quadratic velocity is sampled at the vertices.  The
field ordering phi, mu, p, velocity is fixed so outputs are byte
reproducible.
"""
from __future__ import annotations

import numpy as np

from .mesh import Mesh
from .spaces import vertex_values
from .state import State

_FMT = "{:.12g}"


def _write_geometry(fh, mesh: Mesh, title: str):
    fh.write("# vtk DataFile Version 3.0\n")
    fh.write(f"{title}\n")
    fh.write("ASCII\n")
    fh.write("DATASET UNSTRUCTURED_GRID\n")
    fh.write(f"POINTS {mesh.num_vertices} double\n")
    for x, y in mesh.vertices:
        fh.write(f"{_FMT.format(x)} {_FMT.format(y)} 0\n")
    fh.write(f"CELLS {mesh.num_cells} {4 * mesh.num_cells}\n")
    for a, b, c in mesh.cells:
        fh.write(f"3 {a} {b} {c}\n")
    fh.write(f"CELL_TYPES {mesh.num_cells}\n")
    for _ in range(mesh.num_cells):
        fh.write("5\n")


def write_mesh_vtk(mesh: Mesh, path) -> None:
    """Geometry-only dump for visual mesh inspection."""
    try:
        with open(path, "w") as fh:
            _write_geometry(fh, mesh, "mesh")
    except OSError as exc:
        raise OSError(f"cannot write VTK file {path}: {exc}") from exc


def write_vtk(state: State, spaces, path) -> None:
    """Fields phi, mu, p (scalars) and velocity (vector) at the vertices."""
    mesh = spaces.mesh
    try:
        with open(path, "w") as fh:
            _write_geometry(fh, mesh, "fields")
            fh.write(f"POINT_DATA {mesh.num_vertices}\n")
            for name, coeffs in (("phi", state.phi), ("mu", state.mu),
                                 ("p", state.pressure)):
                values = vertex_values(spaces.p1, coeffs)
                fh.write(f"SCALARS {name} double 1\n")
                fh.write("LOOKUP_TABLE default\n")
                for v in values:
                    fh.write(f"{_FMT.format(v)}\n")
            vel = vertex_values(spaces.vel, state.vel)
            fh.write("VECTORS velocity double\n")
            for vx, vy in vel:
                fh.write(f"{_FMT.format(vx)} {_FMT.format(vy)} 0\n")
    except OSError as exc:
        raise OSError(f"cannot write VTK file {path}: {exc}") from exc


def write_segments_csv(segments: np.ndarray, path) -> None:
    """Zero-level-set polyline segments as x0,y0,x1,y1 rows."""
    try:
        with open(path, "w") as fh:
            fh.write("x0,y0,x1,y1\n")
            for (x0, y0), (x1, y1) in segments:
                fh.write(
                    f"{_FMT.format(x0)},{_FMT.format(y0)},"
                    f"{_FMT.format(x1)},{_FMT.format(y1)}\n"
                )
    except OSError as exc:
        raise OSError(f"cannot write segments file {path}: {exc}") from exc

"""Scalar observables, convergence tables and diagnostic output.

Bubble observables integrate over the sharp region {phi < 0}: the P1
phase field is cut exactly along its zero level set inside each triangle,
so the region integrals carry no smearing error beyond interpolation.
"""
from __future__ import annotations

import csv
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np
import scipy.sparse as sp

from .physics import (
    EnergyBreakdown,
    MixtureParams,
    density,
    density_clipped,
    discrete_energy,
    dissipation_rate,
)
from .quadrature import DEFAULT_RULE
from .spaces import cell_geometry, locate_cells, p1_basis, p2_basis, norms
from .state import State


class EmptyBubble(Exception):
    """Raised when the region {phi < 0} has (numerically) no area."""


@dataclass
class DiagnosticsRecord:
    t: float
    energy: EnergyBreakdown
    dissipation: float
    mass_phi: float
    mass_rho: float
    y_b: float
    v_b: float
    newton_iters: int


def make_record(disc, params: MixtureParams, state: State, newton_iters: int,
                compute_bubble: bool = False) -> DiagnosticsRecord:
    energy = discrete_energy(state, disc.spaces, params, disc.rule)
    diss = dissipation_rate(state, state.phi, disc.spaces, params, disc.rule)
    mass = disc.pressure.mass_vector
    mass_phi = float(mass @ state.phi)
    mass_rho = float(mass @ density(state.phi, params))
    if compute_bubble:
        y_b, v_b = bubble_metrics(state, disc.spaces)
    else:
        y_b = v_b = float("nan")
    return DiagnosticsRecord(
        t=state.time,
        energy=energy,
        dissipation=diss,
        mass_phi=mass_phi,
        mass_rho=mass_rho,
        y_b=y_b,
        v_b=v_b,
        newton_iters=newton_iters,
    )


def energy_identity_defect(disc, params: MixtureParams, state_old: State,
                           state_new: State, tau: float) -> float:
    """Signed defect of the per-step discrete energy identity.

    For an exactly solved step,
    E(new) - E(old) + tau*D + tau^2*(rho~_old/2)*||d_tau v||^2
                    + tau^2*(gamma/2)*||grad d_tau phi||^2 = 0
    up to solver tolerances; the returned value is the left-hand side.
    """
    e_new = discrete_energy(state_new, disc.spaces, params, disc.rule).total
    e_old = discrete_energy(state_old, disc.spaces, params, disc.rule).total
    diss = dissipation_rate(state_new, state_new.phi, disc.spaces, params, disc.rule)

    phin_q, _ = disc.scalar_at_quad(state_old.phi)
    rtldn = density_clipped(phin_q, params)
    dv_q, _ = disc.velocity_at_quad((state_new.vel - state_old.vel) / tau)
    kin_extra = 0.5 * float((disc.wdet * rtldn * (dv_q**2).sum(axis=2)).sum())
    _, gdphi = disc.scalar_at_quad((state_new.phi - state_old.phi) / tau)
    grad_extra = 0.5 * params.gamma * float(
        (disc.area_w * (gdphi**2).sum(axis=1)).sum()
    )
    return e_new - e_old + tau * diss + tau**2 * (kin_extra + grad_extra)


# ---------------------------------------------------------------------------
# sharp-region bubble observables
# ---------------------------------------------------------------------------

_CUT_RULE = DEFAULT_RULE


def _negative_region_polygons(phi_loc):
    """Corners (barycentric) of the {phi < 0} polygon in one triangle."""
    neg = phi_loc < 0.0
    corners = [np.eye(3)[i] for i in range(3)]

    def crossing(i, j):
        t = phi_loc[i] / (phi_loc[i] - phi_loc[j])
        return (1.0 - t) * corners[i] + t * corners[j]

    idx_neg = [i for i in range(3) if neg[i]]
    idx_pos = [i for i in range(3) if not neg[i]]
    if len(idx_neg) == 3:
        return [corners]
    if len(idx_neg) == 1:
        i = idx_neg[0]
        j, k = idx_pos
        return [[corners[i], crossing(i, j), crossing(i, k)]]
    if len(idx_neg) == 2:
        i, j = idx_neg
        k = idx_pos[0]
        quad = [corners[i], corners[j], crossing(j, k), crossing(i, k)]
        return [[quad[0], quad[1], quad[2]], [quad[0], quad[2], quad[3]]]
    return []


def bubble_metrics(state: State, spaces, rule=_CUT_RULE):
    """Center of mass and rise velocity of the region {phi < 0}.

    Sub-cell quadrature on the exact linear cut of the P1 interpolant;
    the vertical velocity is the P2 field evaluated on the sub-triangles.
    """
    mesh = spaces.mesh
    phi_cells = state.phi[spaces.p1.cell_to_dof]
    neg = phi_cells < 0
    full = neg.all(axis=1)
    cut = np.flatnonzero(neg.any(axis=1) & ~full)

    ref = rule.points  # (nq, 3) barycentric in the sub-triangle
    w = rule.weights / 0.5  # normalized to sub-triangle area fractions

    vel_cells = state.vel[spaces.vel.cell_to_dof].reshape(mesh.num_cells, 6, 2)
    verts = mesh.vertices[mesh.cells]
    cell_area = mesh.cell_areas()

    # fully submerged cells in one vectorized pass (y is linear per cell)
    area = float(cell_area[full].sum())
    moment_y = float((cell_area[full] * verts[full, :, 1].mean(axis=1)).sum())
    n2_full, _ = p2_basis(ref)
    v2_at_q = np.einsum("qa,ca->cq", n2_full, vel_cells[full][:, :, 1])
    moment_v = float((cell_area[full] * (v2_at_q @ w)).sum())

    for c in cut:
        for tri in _negative_region_polygons(phi_cells[c]):
            lam_corners = np.asarray(tri)  # (3, 3) barycentric corners
            b1 = lam_corners[1] - lam_corners[0]
            b2 = lam_corners[2] - lam_corners[0]
            factor = abs(b1[1] * b2[2] - b1[2] * b2[1])
            sub_area = factor * cell_area[c]
            if sub_area == 0.0:
                continue
            lam_q = ref @ lam_corners  # (nq, 3) barycentric in the parent
            y_q = lam_q @ verts[c][:, 1]
            n2, _ = p2_basis(lam_q)
            v2_q = n2 @ vel_cells[c][:, 1]
            area += sub_area * w.sum()
            moment_y += sub_area * float(w @ y_q)
            moment_v += sub_area * float(w @ v2_q)

    if area < 1e-12:
        raise EmptyBubble(f"region area {area:.3e} below threshold")
    return moment_y / area, moment_v / area


def zero_level_segments(state: State, spaces) -> np.ndarray:
    """Zero level set of the P1 phase field as line segments, shape (n,2,2)."""
    mesh = spaces.mesh
    phi_cells = state.phi[spaces.p1.cell_to_dof]
    verts = mesh.vertices[mesh.cells]
    segments = []
    for c in range(mesh.num_cells):
        f = phi_cells[c]
        pts = []
        for i, j in ((0, 1), (1, 2), (2, 0)):
            if f[i] * f[j] < 0.0:
                t = f[i] / (f[i] - f[j])
                pts.append((1 - t) * verts[c, i] + t * verts[c, j])
        if len(pts) == 2:
            segments.append(pts)
    return np.array(segments) if segments else np.empty((0, 2, 2))


def mass_error_series(records: Sequence[DiagnosticsRecord]) -> np.ndarray:
    """Signed drift of <phi, 1> relative to the first record."""
    if not records:
        raise ValueError("need at least one record")
    base = records[0].mass_phi
    return np.array([r.mass_phi - base for r in records])


# ---------------------------------------------------------------------------
# pairwise errors and experimental orders of convergence
# ---------------------------------------------------------------------------

@dataclass
class EocLevel:
    resolution: float
    error: float
    eoc: Optional[float]


@dataclass
class EocTable:
    variable: str
    norm: str
    levels: list

    def eocs_consistent(self, tol=1e-12) -> bool:
        """Stored eoc values agree with recomputation from stored errors."""
        for prev, cur in zip(self.levels, self.levels[1:]):
            if cur.eoc is None:
                return False
            recomputed = np.log2(prev.error / cur.error)
            if abs(recomputed - cur.eoc) > tol * max(1.0, abs(cur.eoc)):
                return False
        return True


def _eoc_table(variable, norm, resolutions, errors) -> EocTable:
    levels = []
    for k, (res, err) in enumerate(zip(resolutions, errors)):
        if k == 0 or errors[k - 1] == 0.0 or err == 0.0:
            eoc = None
        else:
            eoc = float(np.log2(errors[k - 1] / err))
        levels.append(EocLevel(resolution=res, error=float(err), eoc=eoc))
    return EocTable(variable=variable, norm=norm, levels=levels)


VARIABLES = ("phi", "vel", "mu_alpha_p", "grad_vel")


def _variable_diff_norm(variable, disc, a: State, b: State, alpha: float) -> float:
    """Squared norm of the difference of one error variable on one space."""
    if variable == "phi":
        return norms(disc.p1, a.phi - b.phi, disc.rule).h1 ** 2
    if variable == "vel":
        return norms(disc.vel, a.vel - b.vel, disc.rule).l2 ** 2
    if variable == "mu_alpha_p":
        da = (a.mu + alpha * a.pressure) - (b.mu + alpha * b.pressure)
        return norms(disc.p1, da, disc.rule).h1 ** 2
    if variable == "grad_vel":
        return norms(disc.vel, a.vel - b.vel, disc.rule).h1 ** 2
    raise ValueError(f"unknown error variable {variable!r}")


def prolongation_matrix(coarse_space, points: np.ndarray) -> sp.csr_matrix:
    """Sparse map from coarse coefficients to values at given points.

    Exact for nested refinements: each point lies inside one coarse cell
    where the field is a single polynomial.
    """
    mesh = coarse_space.mesh
    cid = locate_cells(mesh, points)
    geom = cell_geometry(mesh)
    a = mesh.vertices[mesh.cells[cid, 0]]
    ref = np.einsum("pyx,py->px", geom.inv_jac_t[cid], points - a)
    lam = np.column_stack([1 - ref.sum(axis=1), ref[:, 0], ref[:, 1]])
    if coarse_space.kind == "p2":
        vals, _ = p2_basis(lam)
        cols = coarse_space.cell_to_node[cid]
    else:
        vals, _ = p1_basis(lam)
        cols = coarse_space.cell_to_dof[cid]
    npts, nloc = vals.shape
    rows = np.repeat(np.arange(npts), nloc)
    ncols = coarse_space.num_nodes if coarse_space.kind == "p2" else coarse_space.dof_count
    return sp.csr_matrix((vals.ravel(), (rows, cols.ravel())), shape=(npts, ncols))


def _check_nested(coarse_disc, fine_disc):
    cs, fs = coarse_disc.mesh.subdivisions, fine_disc.mesh.subdivisions
    if fs != (2 * cs[0], 2 * cs[1]) or coarse_disc.mesh.extents != fine_disc.mesh.extents:
        raise ValueError(f"resolutions {cs} -> {fs} are not a nested refinement")


def spatial_error_table(trajectories, variable: str, alpha: float,
                        tau: float) -> EocTable:
    """Pairwise errors between successive nested spatial resolutions.

    ``trajectories`` is a list of (disc, states); states are per-step
    snapshots on identical time grids.  Max-type errors (phi, vel) run
    over all time levels; integral-type errors sum n >= 1 weighted by tau.
    """
    errors, resolutions = [], []
    for (cd, cs_states), (fd, fs_states) in zip(trajectories, trajectories[1:]):
        _check_nested(cd, fd)
        if len(cs_states) != len(fs_states):
            raise ValueError("time grids differ between resolutions")
        p1_map = prolongation_matrix(cd.p1, fd.p1.dof_coords)
        node_map = prolongation_matrix(cd.vel, fd.vel.node_coords)

        acc = 0.0
        for n, (coarse, fine) in enumerate(zip(cs_states, fs_states)):
            vel = np.empty(fd.vel.dof_count)
            vel[0::2] = node_map @ coarse.vel[0::2]
            vel[1::2] = node_map @ coarse.vel[1::2]
            lifted = State(phi=p1_map @ coarse.phi, mu=p1_map @ coarse.mu,
                           vel=vel, pressure=p1_map @ coarse.pressure)
            d = _variable_diff_norm(variable, fd, lifted, fine, alpha)
            if variable in ("phi", "vel"):
                acc = max(acc, d)
            elif n >= 1:
                acc += tau * d
        errors.append(acc)
        resolutions.append(cd.mesh.h_max)
    return _eoc_table(variable, "H1^2" if variable != "vel" else "L2^2",
                      resolutions, errors)


def temporal_error_table(trajectories, variable: str, alpha: float,
                         taus: Sequence[float]) -> EocTable:
    """Pairwise errors between successive halved time steps on one mesh.

    The finer run must have exactly twice the step count; for the
    integral-type errors the finer comparator is the average of its
    values at the matching and preceding half time level.
    """
    errors, resolutions = [], []
    for k in range(len(trajectories) - 1):
        disc, coarse_states = trajectories[k]
        fine_disc, fine_states = trajectories[k + 1]
        if fine_disc is not disc:
            raise ValueError("temporal study requires a single fixed mesh")
        if len(fine_states) != 2 * len(coarse_states) - 1:
            raise ValueError("finer run must halve the time step exactly")
        if abs(taus[k + 1] - 0.5 * taus[k]) > 1e-14 * taus[k]:
            raise ValueError("time steps must halve between levels")
        tau = taus[k]

        acc = 0.0
        for n, coarse in enumerate(coarse_states):
            fine = fine_states[2 * n]
            if variable in ("phi", "vel"):
                acc = max(acc, _variable_diff_norm(variable, disc, coarse, fine, alpha))
            elif n >= 1:
                half = fine_states[2 * n - 1]
                avg = State(
                    phi=0.5 * (fine.phi + half.phi),
                    mu=0.5 * (fine.mu + half.mu),
                    vel=0.5 * (fine.vel + half.vel),
                    pressure=0.5 * (fine.pressure + half.pressure),
                )
                acc += tau * _variable_diff_norm(variable, disc, coarse, avg, alpha)
        errors.append(acc)
        resolutions.append(tau)
    return _eoc_table(variable, "H1^2" if variable != "vel" else "L2^2",
                      resolutions, errors)


# ---------------------------------------------------------------------------
# CSV output
# ---------------------------------------------------------------------------

CSV_COLUMNS = ("t", "E_total", "E_free", "E_kin", "E_grav", "dissipation",
               "mass_phi", "mass_drift", "y_b", "v_b", "newton_iters")


def write_diagnostics_csv(path, records: Sequence[DiagnosticsRecord]):
    """Fixed-schema CSV, one row per record; drift is relative to row one."""
    base = records[0].mass_phi if records else 0.0
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
        for r in records:
            writer.writerow([
                f"{r.t:.17g}",
                f"{r.energy.total:.17g}",
                f"{r.energy.free_energy:.17g}",
                f"{r.energy.kinetic:.17g}",
                f"{r.energy.gravity:.17g}",
                f"{r.dissipation:.17g}",
                f"{r.mass_phi:.17g}",
                f"{r.mass_phi - base:.17g}",
                f"{r.y_b:.17g}",
                f"{r.v_b:.17g}",
                str(r.newton_iters),
            ])

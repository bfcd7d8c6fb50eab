"""Monolithic residual and Jacobian of one fully implicit time step.

Unknowns per step are (phi, mu, v, p) plus one scalar multiplier pinning
the pressure mean.  All nonlinear coefficients are evaluated at the new
time level; the Jacobian is the exact analytic derivative, including the
mobility, clipped-density, viscosity, convection and averaged-potential
couplings.

The global reduced ordering is [phi | mu | free velocity dofs | p | s].
Assembly is vectorized over cells; the sparse pattern is frozen once per
discretization and every Newton iteration only refills the value array,
which keeps the cell loop deterministic and reproducible.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .mesh import Mesh
from .physics import (
    MixtureParams,
    density,
    density_clipped,
    density_clipped_deriv,
    potential_time_avg,
    potential_time_avg_deriv,
    viscosity_clipped,
    viscosity_clipped_deriv,
)
from .quadrature import DEFAULT_RULE
from .spaces import cell_geometry, make_spaces, p1_basis, p2_basis
from .state import State


@dataclass
class SparseSystem:
    """Linear system J dx = rhs on the reduced dofs plus the multiplier.

    ``border_pin``, when set, tells the solver that the final row/column
    is the pressure-mean multiplier border and names a pressure dof whose
    pinning regularizes the leading block (used for bordered elimination;
    the assembled matrix itself is unchanged).
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    border_pin: int | None = None


class Discretization:
    """Spaces, quadrature tables and the frozen Jacobian pattern for a mesh."""

    def __init__(self, mesh: Mesh, rule=DEFAULT_RULE):
        self.mesh = mesh
        self.rule = rule
        bundle = make_spaces(mesh)
        self.spaces = bundle
        self.p1 = bundle.p1
        self.vel = bundle.vel
        self.pressure = bundle.pressure

        geom = cell_geometry(mesh)
        self.det = geom.det
        self.inv_jac_t = geom.inv_jac_t
        self.wdet = rule.weights[None, :] * geom.det[:, None]
        self.area_w = self.wdet.sum(axis=1)

        self.v1, g1ref = p1_basis(rule.points)
        self.v2, g2ref = p2_basis(rule.points)
        self.g1 = np.einsum("cxy,ay->cax", geom.inv_jac_t, g1ref)
        self.g2 = np.einsum("cxy,qay->cqax", geom.inv_jac_t, g2ref)
        self.mass_ref = np.einsum("q,qi,qj->ij", rule.weights, self.v1, self.v1)
        self.stiff1 = np.einsum("cix,cjx->cij", self.g1, self.g1)

        # global layout: [phi | mu | vel (full) | p | s]
        n1 = self.p1.dof_count
        nv = self.vel.dof_count
        self.n1 = n1
        self.off_mu = n1
        self.off_vel = 2 * n1
        self.off_p = 2 * n1 + nv
        self.off_s = 3 * n1 + nv
        self.full_size = self.off_s + 1

        self.d_phi = self.p1.cell_to_dof
        self.d_mu = self.p1.cell_to_dof + self.off_mu
        self.d_vel = self.vel.cell_to_dof + self.off_vel
        self.d_p = self.p1.cell_to_dof + self.off_p

        keep = np.ones(self.full_size, dtype=bool)
        keep[self.off_vel + self.vel.constrained_dofs] = False
        self.full_to_reduced = np.full(self.full_size, -1, dtype=np.int64)
        self.full_to_reduced[keep] = np.arange(keep.sum())
        self.reduced_indices = np.flatnonzero(keep)
        self.size = int(keep.sum())

        self._build_pattern()

    # ------------------------------------------------------------------
    # sparse pattern
    # ------------------------------------------------------------------
    def _block_order(self):
        d1, dm, dv, dp = self.d_phi, self.d_mu, self.d_vel, self.d_p
        return [
            ("phi_phi", d1, d1), ("phi_mu", d1, dm), ("phi_vel", d1, dv), ("phi_p", d1, dp),
            ("mu_phi", dm, d1), ("mu_mu", dm, dm), ("mu_vel", dm, dv), ("mu_p", dm, dp),
            ("vel_phi", dv, d1), ("vel_mu", dv, dm), ("vel_vel", dv, dv), ("vel_p", dv, dp),
            ("p_phi", dp, d1), ("p_mu", dp, dm), ("p_vel", dp, dv), ("p_p", dp, dp),
        ]

    def _build_pattern(self):
        rows, cols = [], []
        self._block_shapes = {}
        for name, dr, dc in self._block_order():
            nr, ncol = dr.shape[1], dc.shape[1]
            self._block_shapes[name] = (nr, ncol)
            rows.append(np.repeat(dr[:, :, None], ncol, axis=2).ravel())
            cols.append(np.repeat(dc[:, None, :], nr, axis=1).ravel())
        # pressure-mean multiplier column and row
        p_rows = np.arange(self.n1) + self.off_p
        rows.append(p_rows)
        cols.append(np.full(self.n1, self.off_s))
        rows.append(np.full(self.n1, self.off_s))
        cols.append(p_rows)

        rows = self.full_to_reduced[np.concatenate(rows)]
        cols = self.full_to_reduced[np.concatenate(cols)]
        self._entry_keep = (rows >= 0) & (cols >= 0)
        keys = rows[self._entry_keep] * self.size + cols[self._entry_keep]
        uniq, inv = np.unique(keys, return_inverse=True)
        self._entry_slot = inv
        self.nnz = len(uniq)
        self._csr_indices = (uniq % self.size).astype(np.int32)
        row_of = uniq // self.size
        self._csr_indptr = np.zeros(self.size + 1, dtype=np.int32)
        np.add.at(self._csr_indptr, row_of + 1, 1)
        self._csr_indptr = np.cumsum(self._csr_indptr, dtype=np.int32)

    def matrix_from_values(self, data: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix(
            (data, self._csr_indices, self._csr_indptr), shape=(self.size, self.size)
        )

    # ------------------------------------------------------------------
    # state helpers
    # ------------------------------------------------------------------
    def new_state(self, phi=None, mu=None, vel=None, pressure=None,
                  time=0.0, step_index=0) -> State:
        def pick(arr, n):
            return np.zeros(n) if arr is None else np.asarray(arr, dtype=float)

        return State(
            phi=pick(phi, self.n1),
            mu=pick(mu, self.n1),
            vel=pick(vel, self.vel.dof_count),
            pressure=pick(pressure, self.n1),
            time=time,
            step_index=step_index,
        )

    def check_state(self, state: State):
        if (
            state.phi.shape != (self.n1,)
            or state.mu.shape != (self.n1,)
            or state.vel.shape != (self.vel.dof_count,)
            or state.pressure.shape != (self.n1,)
        ):
            raise ValueError("state coefficient lengths do not match the spaces")

    def pack(self, state: State, multiplier: float = 0.0) -> np.ndarray:
        full = np.concatenate([state.phi, state.mu, state.vel, state.pressure,
                               [multiplier]])
        return full[self.reduced_indices]

    def unpack(self, reduced: np.ndarray):
        full = np.zeros(self.full_size)
        full[self.reduced_indices] = reduced
        state = State(
            phi=full[: self.n1],
            mu=full[self.off_mu: self.off_vel],
            vel=full[self.off_vel: self.off_p],
            pressure=full[self.off_p: self.off_s],
        )
        return state, float(full[self.off_s])

    # ------------------------------------------------------------------
    # quadrature-point evaluation
    # ------------------------------------------------------------------
    def scalar_at_quad(self, coeffs):
        local = coeffs[self.p1.cell_to_dof]
        return local @ self.v1.T, np.einsum("cax,ca->cx", self.g1, local)

    def velocity_at_quad(self, coeffs):
        local = coeffs[self.vel.cell_to_dof].reshape(self.mesh.num_cells, 6, 2)
        v_q = np.einsum("qa,cak->cqk", self.v2, local)
        gv = np.einsum("cqax,cak->cqkx", self.g2, local)
        return v_q, gv


def residual(state_old: State, state_new: State, params: MixtureParams,
             tau: float, disc: Discretization, multiplier: float = 0.0) -> np.ndarray:
    """Reduced residual vector of the fully implicit step (tau > 0)."""
    r, _ = _assemble(disc, state_old, state_new, params, tau, multiplier,
                     want_matrix=False)
    return r


def jacobian(state_old: State, state_new: State, params: MixtureParams,
             tau: float, disc: Discretization, multiplier: float = 0.0) -> SparseSystem:
    """Exact Jacobian and negated residual as a Newton linear system."""
    r, mat = _assemble(disc, state_old, state_new, params, tau, multiplier,
                       want_matrix=True)
    return SparseSystem(matrix=mat, rhs=-r,
                        border_pin=int(disc.full_to_reduced[disc.off_p]))


def c_skw_form(u_coeffs: np.ndarray, v_coeffs: np.ndarray, w_coeffs: np.ndarray,
               disc: Discretization) -> float:
    """Skew-symmetric convection form for three P2 coefficient fields.

    c(u, v, w) = 1/2 <(u.grad) v, w> - 1/2 <(u.grad) w, v>; antisymmetric
    in its last two arguments.
    """
    u_q, _ = disc.velocity_at_quad(u_coeffs)
    v_q, gv = disc.velocity_at_quad(v_coeffs)
    w_q, gw = disc.velocity_at_quad(w_coeffs)
    adv_v = np.einsum("cqx,cqkx->cqk", u_q, gv)
    adv_w = np.einsum("cqx,cqkx->cqk", u_q, gw)
    return 0.5 * float(
        np.einsum("cq,cqk,cqk->", disc.wdet, adv_v, w_q)
        - np.einsum("cq,cqk,cqk->", disc.wdet, adv_w, v_q)
    )


def _assemble(disc: Discretization, state_old: State, state_new: State,
              params: MixtureParams, tau: float, multiplier: float,
              want_matrix: bool):
    if tau <= 0:
        raise ValueError("time step tau must be positive")
    disc.check_state(state_old)
    disc.check_state(state_new)

    wdet = disc.wdet
    v1, v2, g1, g2 = disc.v1, disc.v2, disc.g1, disc.g2
    nc = disc.mesh.num_cells
    alpha = params.alpha
    lam = params.lam
    mob = params.mobility

    phi_q, gphi = disc.scalar_at_quad(state_new.phi)
    mu_q, gmu = disc.scalar_at_quad(state_new.mu)
    p_q, gp = disc.scalar_at_quad(state_new.pressure)
    flux = gmu + alpha * gp
    v_q, gv = disc.velocity_at_quad(state_new.vel)
    divv = gv[:, :, 0, 0] + gv[:, :, 1, 1]
    sym2 = gv + np.swapaxes(gv, 2, 3)

    phin_q, _ = disc.scalar_at_quad(state_old.phi)
    vn_q, _ = disc.velocity_at_quad(state_old.vel)

    m_q = mob(phi_q)
    rho_q = density(phi_q, params)
    rtld = density_clipped(phi_q, params)
    rtldn = density_clipped(phin_q, params)
    eta_q = viscosity_clipped(phi_q, params)
    favg = potential_time_avg(phi_q, phin_q, params.beta)
    u_q = rho_q[:, :, None] * v_q

    mw = (wdet * m_q).sum(axis=1)

    # --- residual blocks -------------------------------------------------
    r_phi = (
        np.einsum("cq,qi->ci", wdet * (phi_q - phin_q) / tau, v1)
        - np.einsum("cq,cqx,cix->ci", wdet * phi_q, v_q, g1, optimize=True)
        + np.einsum("c,cx,cix->ci", mw, flux, g1)
    )
    r_mu = (
        np.einsum("cq,qi->ci", wdet * mu_q, v1)
        - params.gamma * np.einsum("c,cx,cix->ci", disc.area_w, gphi, g1)
        - np.einsum("cq,qi->ci", wdet * favg, v1)
    )
    inertia = (
        v_q * ((rtld - rtldn) / (2.0 * tau))[:, :, None]
        + rtldn[:, :, None] * (v_q - vn_q) / tau
    )
    conv1 = 0.5 * np.einsum("cqx,cqkx->cqk", u_q, gv)
    capil = phi_q[:, :, None] * gmu[:, None, :]
    grav = np.zeros((nc, wdet.shape[1], 2))
    grav[:, :, 1] = params.g * rho_q
    r_vel = np.einsum("cq,cqk,qa->cak", wdet, inertia + conv1 + capil + grav, v2,
                      optimize=True)
    r_vel -= 0.5 * np.einsum("cq,cqx,cqax,cqk->cak", wdet, u_q, g2, v_q,
                             optimize=True)
    r_vel += np.einsum("cq,cqkx,cqax->cak", wdet * eta_q, sym2, g2, optimize=True)
    r_vel += lam * np.einsum("cq,cqak->cak", wdet * eta_q * divv, g2)
    r_vel -= np.einsum("cq,cqak->cak", wdet * p_q, g2)
    r_p = (
        np.einsum("cq,qi->ci", wdet * divv, v1)
        + alpha * np.einsum("c,cx,cix->ci", mw, flux, g1)
    )

    r_full = np.zeros(disc.full_size)
    for block, dofs in (
        (r_phi, disc.d_phi),
        (r_mu, disc.d_mu),
        (r_vel.reshape(nc, 12), disc.d_vel),
        (r_p, disc.d_p),
    ):
        r_full += np.bincount(dofs.ravel(), weights=block.ravel(),
                              minlength=disc.full_size)
    mass = disc.pressure.mass_vector
    r_full[disc.off_p: disc.off_s] += multiplier * mass
    r_full[disc.off_s] = mass @ state_new.pressure
    r_reduced = r_full[disc.reduced_indices]

    if not want_matrix:
        return r_reduced, None

    # --- Jacobian blocks --------------------------------------------------
    dm_q = mob.derivative(phi_q)
    drtld = density_clipped_deriv(phi_q, params)
    deta = viscosity_clipped_deriv(phi_q, params)
    dfavg = potential_time_avg_deriv(phi_q, phin_q, params.beta)
    rho_jump = params.rho_jump

    mass_loc = disc.det[:, None, None] * disc.mass_ref
    mw_stiff = mw[:, None, None] * disc.stiff1

    blocks = {}
    blocks["phi_phi"] = (
        mass_loc / tau
        - np.einsum("cq,cqx,cix,qj->cij", wdet, v_q, g1, v1, optimize=True)
        + np.einsum("cq,cx,cix,qj->cij", wdet * dm_q, flux, g1, v1, optimize=True)
    )
    blocks["phi_mu"] = mw_stiff
    blocks["phi_vel"] = -np.einsum("cq,qb,cil->cibl", wdet * phi_q, v2, g1,
                                   optimize=True).reshape(nc, 3, 12)
    blocks["phi_p"] = alpha * mw_stiff

    blocks["mu_phi"] = (
        -params.gamma * disc.area_w[:, None, None] * disc.stiff1
        - np.einsum("cq,qi,qj->cij", wdet * dfavg, v1, v1, optimize=True)
    )
    blocks["mu_mu"] = mass_loc
    blocks["mu_vel"] = np.zeros((nc, 3, 12))
    blocks["mu_p"] = np.zeros((nc, 3, 3))

    vdotgv = np.einsum("cqx,cqkx->cqk", v_q, gv)
    a_vphi = (
        np.einsum("cq,cqk,qa,qj->cakj", wdet * drtld / (2.0 * tau), v_q, v2, v1,
                  optimize=True)
        + 0.5 * rho_jump * np.einsum("cq,cqk,qa,qj->cakj", wdet, vdotgv, v2, v1,
                                     optimize=True)
        - 0.5 * rho_jump * np.einsum("cq,cqx,cqax,cqk,qj->cakj", wdet, v_q, g2,
                                     v_q, v1, optimize=True)
        + np.einsum("cq,cqkx,cqax,qj->cakj", wdet * deta, sym2, g2, v1,
                    optimize=True)
        + lam * np.einsum("cq,cqak,qj->cakj", wdet * deta * divv, g2, v1,
                          optimize=True)
        + np.einsum("cq,qa,qj,ck->cakj", wdet, v2, v1, gmu, optimize=True)
    )
    grav_block = params.g * rho_jump * np.einsum("cq,qa,qj->caj", wdet, v2, v1,
                                                 optimize=True)
    a_vphi[:, :, 1, :] += grav_block
    blocks["vel_phi"] = a_vphi.reshape(nc, 12, 3)

    blocks["vel_mu"] = np.einsum("cq,qa,cjk->cakj", wdet * phi_q, v2, g1,
                                 optimize=True).reshape(nc, 12, 3)

    coeff = (rtld - rtldn) / (2.0 * tau) + rtldn / tau
    vv_scal = np.einsum("cq,qa,qb->cab", wdet * coeff, v2, v2, optimize=True)
    udotg2 = np.einsum("cqx,cqbx->cqb", u_q, g2)
    vv_scal += 0.5 * np.einsum("cq,cqb,qa->cab", wdet, udotg2, v2, optimize=True)
    vv_scal -= 0.5 * np.einsum("cq,cqa,qb->cab", wdet, udotg2, v2, optimize=True)
    vv_scal += np.einsum("cq,cqax,cqbx->cab", wdet * eta_q, g2, g2, optimize=True)

    a_vv = np.zeros((nc, 6, 2, 6, 2))
    a_vv[:, :, 0, :, 0] = vv_scal
    a_vv[:, :, 1, :, 1] = vv_scal
    a_vv += 0.5 * np.einsum("cq,cqkl,qa,qb->cakbl", wdet * rho_q, gv, v2, v2,
                            optimize=True)
    a_vv -= 0.5 * np.einsum("cq,cqal,cqk,qb->cakbl", wdet * rho_q, g2, v_q, v2,
                            optimize=True)
    a_vv += np.einsum("cq,cqal,cqbk->cakbl", wdet * eta_q, g2, g2, optimize=True)
    a_vv += lam * np.einsum("cq,cqak,cqbl->cakbl", wdet * eta_q, g2, g2,
                            optimize=True)
    blocks["vel_vel"] = a_vv.reshape(nc, 12, 12)

    blocks["vel_p"] = -np.einsum("cq,cqak,qj->cakj", wdet, g2, v1,
                                 optimize=True).reshape(nc, 12, 3)

    blocks["p_phi"] = alpha * np.einsum("cq,cx,cix,qj->cij", wdet * dm_q, flux,
                                        g1, v1, optimize=True)
    blocks["p_mu"] = alpha * mw_stiff
    blocks["p_vel"] = np.einsum("cq,cqbl,qi->cibl", wdet, g2, v1,
                                optimize=True).reshape(nc, 3, 12)
    blocks["p_p"] = alpha * alpha * mw_stiff

    vals = [blocks[name].ravel() for name, _, _ in disc._block_order()]
    vals.append(mass)  # multiplier column at the pressure rows
    vals.append(mass)  # constraint row on the pressure dofs
    vals = np.concatenate(vals)
    data = np.bincount(disc._entry_slot, weights=vals[disc._entry_keep],
                       minlength=disc.nnz)
    return r_reduced, disc.matrix_from_values(data)

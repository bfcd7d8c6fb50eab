"""Constitutive laws and functionals of the two-phase mixture model.

The phase field is the volume-fraction difference: phi = 1 in fluid 1,
phi = -1 in fluid 2.  Density and viscosity interpolate affinely between
the constituent values; the kinetic energy uses the clipped (positively
extended) density so that stability survives phase-field overshoots.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .quadrature import DEFAULT_RULE
from .spaces import cell_geometry, p1_basis, p2_basis, quad_coords
from .state import State


@dataclass(frozen=True)
class Mobility:
    """Isotropic scalar mobility law m(phi) >= 0.

    kinds:
      constant           m(phi) = c
      degenerate_quartic m(phi) = c * (1 - phi^2)^2
      abs_degenerate     m(phi) = c * |1 - phi^2|
    """

    kind: str
    coefficient: float

    KINDS = ("constant", "degenerate_quartic", "abs_degenerate")

    def __post_init__(self):
        if self.kind not in self.KINDS:
            raise ValueError(f"unknown mobility kind {self.kind!r}")
        if self.coefficient < 0:
            raise ValueError("mobility coefficient must be nonnegative")

    @classmethod
    def constant(cls, c: float) -> "Mobility":
        return cls("constant", c)

    @classmethod
    def degenerate_quartic(cls, c: float) -> "Mobility":
        return cls("degenerate_quartic", c)

    @classmethod
    def abs_degenerate(cls, c: float) -> "Mobility":
        return cls("abs_degenerate", c)

    def __call__(self, phi):
        phi = np.asarray(phi, dtype=float)
        if self.kind == "constant":
            return np.full_like(phi, self.coefficient)
        if self.kind == "degenerate_quartic":
            return self.coefficient * (1.0 - phi**2) ** 2
        return self.coefficient * np.abs(1.0 - phi**2)

    def derivative(self, phi):
        phi = np.asarray(phi, dtype=float)
        if self.kind == "constant":
            return np.zeros_like(phi)
        if self.kind == "degenerate_quartic":
            return -4.0 * self.coefficient * phi * (1.0 - phi**2)
        return -2.0 * self.coefficient * phi * np.sign(1.0 - phi**2)


@dataclass(frozen=True)
class MixtureParams:
    """Physical constants of the mixture and the derived combinations."""

    rho1: float
    rho2: float
    eta1: float
    eta2: float
    gamma: float
    beta: float
    g: float
    mobility: Mobility
    dim: int = 2

    def __post_init__(self):
        for name in ("rho1", "rho2", "eta1", "eta2", "gamma", "beta"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")
        if self.g < 0:
            raise ValueError("g must be nonnegative")

    @property
    def lam(self) -> float:
        """Bulk viscosity ratio -2/d."""
        return -2.0 / self.dim

    @property
    def rho_mean(self) -> float:
        return 0.5 * (self.rho1 + self.rho2)

    @property
    def rho_jump(self) -> float:
        return 0.5 * (self.rho1 - self.rho2)

    @property
    def eta_jump(self) -> float:
        return 0.5 * (self.eta1 - self.eta2)

    @property
    def alpha(self) -> float:
        return (self.rho2 - self.rho1) / (self.rho1 + self.rho2)


def density(phi, params: MixtureParams):
    phi = np.asarray(phi, dtype=float)
    return params.rho1 * (1.0 + phi) / 2.0 + params.rho2 * (1.0 - phi) / 2.0


def viscosity(phi, params: MixtureParams):
    phi = np.asarray(phi, dtype=float)
    return params.eta1 * (1.0 + phi) / 2.0 + params.eta2 * (1.0 - phi) / 2.0


def density_clipped(phi, params: MixtureParams):
    """Positive extension: evaluate the affine law at clamp(phi, -1, 1)."""
    return density(np.clip(phi, -1.0, 1.0), params)


def viscosity_clipped(phi, params: MixtureParams):
    return viscosity(np.clip(phi, -1.0, 1.0), params)


def density_clipped_deriv(phi, params: MixtureParams):
    """Derivative of the clipped density; interior value kept at |phi|=1."""
    phi = np.asarray(phi, dtype=float)
    return np.where(np.abs(phi) <= 1.0, params.rho_jump, 0.0)


def viscosity_clipped_deriv(phi, params: MixtureParams):
    phi = np.asarray(phi, dtype=float)
    return np.where(np.abs(phi) <= 1.0, params.eta_jump, 0.0)


def potential_value(phi, beta: float):
    """Double-well potential (1 - phi^2)^2 / (4 beta)."""
    phi = np.asarray(phi, dtype=float)
    return (1.0 - phi**2) ** 2 / (4.0 * beta)


def potential_deriv(phi, beta: float):
    phi = np.asarray(phi, dtype=float)
    return (phi**3 - phi) / beta


def potential_second_deriv(phi, beta: float):
    phi = np.asarray(phi, dtype=float)
    return (3.0 * phi**2 - 1.0) / beta


def potential_time_avg(phi_new, phi_old, beta: float):
    """Average of f' along the straight path from phi_old to phi_new.

    Evaluated with the three-point Simpson formula, which is exact for the
    cubic f' and, unlike the secant quotient (f(a)-f(b))/(a-b), stays
    accurate when the two arguments nearly coincide.
    """
    mid = 0.5 * (np.asarray(phi_new, dtype=float) + np.asarray(phi_old, dtype=float))
    return (
        potential_deriv(phi_new, beta)
        + 4.0 * potential_deriv(mid, beta)
        + potential_deriv(phi_old, beta)
    ) / 6.0


def potential_time_avg_deriv(phi_new, phi_old, beta: float):
    """Derivative of the averaged f' with respect to its first argument."""
    mid = 0.5 * (np.asarray(phi_new, dtype=float) + np.asarray(phi_old, dtype=float))
    return (
        potential_second_deriv(phi_new, beta) + 2.0 * potential_second_deriv(mid, beta)
    ) / 6.0


def mobility(phi, law: Mobility):
    return law(phi)


class EnergyBreakdown(NamedTuple):
    free_energy: float
    kinetic: float
    gravity: float
    total: float


def discrete_energy(state: State, spaces, params: MixtureParams,
                    rule=DEFAULT_RULE) -> EnergyBreakdown:
    """Quadrature evaluation of the discrete energy of a state.

    Free part: gamma/2 |grad phi|^2 + f(phi); kinetic part uses the
    clipped density; the gravity part uses the unclipped density and the
    vertical coordinate measured from the bottom of the domain.  The same
    rule as the assembled forms keeps the step-to-step energy identity
    exact at the quadrature level.
    """
    mesh = spaces.mesh
    geom = cell_geometry(mesh)
    wdet = rule.weights[None, :] * geom.det[:, None]

    v1, g1ref = p1_basis(rule.points)
    g1 = np.einsum("cxy,ay->cax", geom.inv_jac_t, g1ref)
    phi_loc = state.phi[spaces.p1.cell_to_dof]
    phi_q = phi_loc @ v1.T
    gphi = np.einsum("cax,ca->cx", g1, phi_loc)

    free = float(
        (wdet * potential_value(phi_q, params.beta)).sum()
        + 0.5 * params.gamma * (wdet.sum(axis=1) * (gphi**2).sum(axis=1)).sum()
    )

    v2, _ = p2_basis(rule.points)
    vel_loc = state.vel[spaces.vel.cell_to_dof].reshape(mesh.num_cells, 6, 2)
    v_q = np.einsum("qa,cak->cqk", v2, vel_loc)
    kinetic = float(
        (wdet * 0.5 * density_clipped(phi_q, params) * (v_q**2).sum(axis=2)).sum()
    )

    y0 = mesh.extents[1][0]
    y_q = quad_coords(mesh, rule)[:, :, 1] - y0
    gravity = float((wdet * params.g * density(phi_q, params) * y_q).sum())

    return EnergyBreakdown(
        free_energy=free,
        kinetic=kinetic,
        gravity=gravity,
        total=free + kinetic + gravity,
    )


def dissipation_rate(state_new: State, phi_star: np.ndarray, spaces,
                     params: MixtureParams, rule=DEFAULT_RULE) -> float:
    """Instantaneous dissipation: mobility flux plus viscous work.

    D = int M(phi*) |grad(mu + alpha p)|^2
        + eta~(phi*) (2 |sym grad v|^2 + lam (div v)^2), nonnegative.
    """
    mesh = spaces.mesh
    geom = cell_geometry(mesh)
    wdet = rule.weights[None, :] * geom.det[:, None]

    v1, g1ref = p1_basis(rule.points)
    g1 = np.einsum("cxy,ay->cax", geom.inv_jac_t, g1ref)
    phi_loc = phi_star[spaces.p1.cell_to_dof]
    phi_q = phi_loc @ v1.T

    chem = state_new.mu + params.alpha * state_new.pressure
    gchem = np.einsum("cax,ca->cx", g1, chem[spaces.p1.cell_to_dof])
    mob = float(
        (wdet * params.mobility(phi_q) * (gchem**2).sum(axis=1)[:, None]).sum()
    )

    _, g2ref = p2_basis(rule.points)
    g2 = np.einsum("cxy,qay->cqax", geom.inv_jac_t, g2ref)
    vel_loc = state_new.vel[spaces.vel.cell_to_dof].reshape(mesh.num_cells, 6, 2)
    gv = np.einsum("cqax,cak->cqkx", g2, vel_loc)
    sym = 0.5 * (gv + np.swapaxes(gv, 2, 3))
    divv = gv[:, :, 0, 0] + gv[:, :, 1, 1]
    visc = float(
        (
            wdet
            * viscosity_clipped(phi_q, params)
            * (2.0 * (sym**2).sum(axis=(2, 3)) + params.lam * divv**2)
        ).sum()
    )
    return mob + visc

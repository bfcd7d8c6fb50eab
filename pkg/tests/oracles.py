"""Independent reference implementations used only by the test suite.

Everything here is written as plain per-cell/per-point loops with its own
basis formulas and quadrature tables, so that agreement with the
vectorized production code is a genuine cross-check of the math, not of
shared helpers.  Only mesh arrays and dof maps are reused (they define
the discretization being checked).
"""
import numpy as np

# Dunavant degree-6 rule, barycentric points and weights summing to 1/2.
_D6_A = [
    (0.873821971016996, 0.063089014491502, 0.063089014491502),
    (0.063089014491502, 0.873821971016996, 0.063089014491502),
    (0.063089014491502, 0.063089014491502, 0.873821971016996),
    (0.501426509658179, 0.249286745170910, 0.249286745170910),
    (0.249286745170910, 0.501426509658179, 0.249286745170910),
    (0.249286745170910, 0.249286745170910, 0.501426509658179),
]
_D6_B = []
for a, b in [(0.310352451033785, 0.053145049844816)]:
    c = 1.0 - a - b
    _D6_B += [(a, b, c), (a, c, b), (b, a, c), (b, c, a), (c, a, b), (c, b, a)]
DEG6_POINTS = np.array(_D6_A + _D6_B)
DEG6_WEIGHTS = 0.5 * np.array(
    [0.050844906370207] * 3 + [0.116786275726379] * 3 + [0.082851075618374] * 6
)

# Dunavant degree-4 rule (the production rule's defining constants, kept
# as an independent copy so the oracle does not import the package).
DEG4_POINTS = np.array(
    [
        (0.445948490915965, 0.445948490915965, 0.108103018168070),
        (0.445948490915965, 0.108103018168070, 0.445948490915965),
        (0.108103018168070, 0.445948490915965, 0.445948490915965),
        (0.091576213509771, 0.091576213509771, 0.816847572980459),
        (0.091576213509771, 0.816847572980459, 0.091576213509771),
        (0.816847572980459, 0.091576213509771, 0.091576213509771),
    ]
)
DEG4_WEIGHTS = 0.5 * np.array([0.223381589678011] * 3 + [0.109951743655322] * 3)


def p1_shape(lam):
    return np.array([lam[0], lam[1], lam[2]])


def p1_shape_grad():
    # gradients with respect to reference (x, y) = (lam1, lam2)
    return np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def p2_shape(lam):
    l0, l1, l2 = lam
    return np.array(
        [
            l0 * (2 * l0 - 1),
            l1 * (2 * l1 - 1),
            l2 * (2 * l2 - 1),
            4 * l0 * l1,
            4 * l1 * l2,
            4 * l2 * l0,
        ]
    )


def p2_shape_grad(lam):
    l0, l1, l2 = lam
    return np.array(
        [
            [1 - 4 * l0, 1 - 4 * l0],
            [4 * l1 - 1, 0.0],
            [0.0, 4 * l2 - 1],
            [4 * (l0 - l1), -4 * l1],
            [4 * l2, 4 * l1],
            [-4 * l2, 4 * (l0 - l2)],
        ]
    )


def cell_frame(mesh, c):
    """Affine map data for one cell: corner a, Jacobian B, det, B^{-T}."""
    va, vb, vc = (mesh.vertices[mesh.cells[c, k]] for k in range(3))
    B = np.column_stack([vb - va, vc - va])
    det = B[0, 0] * B[1, 1] - B[0, 1] * B[1, 0]
    Binvt = np.array([[B[1, 1], -B[1, 0]], [-B[0, 1], B[0, 0]]]) / det
    return va, B, det, Binvt


def _mix(phi, c1, c2):
    return c1 * (1.0 + phi) / 2.0 + c2 * (1.0 - phi) / 2.0


def _mobility_value(kind, coeff, phi):
    if kind == "constant":
        return coeff
    if kind == "degenerate_quartic":
        return coeff * (1.0 - phi**2) ** 2
    return coeff * abs(1.0 - phi**2)


def oracle_energy(spaces, phi, vel, params, points=DEG6_POINTS, weights=DEG6_WEIGHTS):
    """Loop-based evaluation of the discrete energy (free, kinetic, gravity)."""
    mesh = spaces.mesh
    free = kin = grav = 0.0
    g1 = p1_shape_grad()
    for c in range(mesh.num_cells):
        a, B, det, Binvt = cell_frame(mesh, c)
        phi_loc = phi[spaces.p1.cell_to_dof[c]]
        vel_loc = vel[spaces.vel.cell_to_dof[c]].reshape(6, 2)
        gphi = sum(phi_loc[i] * (Binvt @ g1[i]) for i in range(3))
        for q, lam in enumerate(points):
            w = weights[q] * det
            n1 = p1_shape(lam)
            n2 = p2_shape(lam)
            ph = float(n1 @ phi_loc)
            v = n2 @ vel_loc
            x = a + B @ lam[1:]
            rho_t = _mix(min(max(ph, -1.0), 1.0), params.rho1, params.rho2)
            f = (1.0 - ph**2) ** 2 / (4.0 * params.beta)
            free += w * (f + 0.5 * params.gamma * float(gphi @ gphi))
            kin += w * 0.5 * rho_t * float(v @ v)
            grav += w * params.g * _mix(ph, params.rho1, params.rho2) * (
                x[1] - mesh.extents[1][0]
            )
    return free, kin, grav


def oracle_residual(spaces, old, new, params, tau,
                    points=DEG4_POINTS, weights=DEG4_WEIGHTS):
    """Naive quadrature-loop residual of the fully implicit step.

    Returns the four full-length blocks (r_phi, r_mu, r_vel, r_p); the
    multiplier row and dof reduction are left to the caller.  All starred
    quantities are evaluated at the new time level.
    """
    mesh = spaces.mesh
    n1 = spaces.p1.dof_count
    r_phi = np.zeros(n1)
    r_mu = np.zeros(n1)
    r_vel = np.zeros(spaces.vel.dof_count)
    r_p = np.zeros(n1)
    alpha = (params.rho2 - params.rho1) / (params.rho1 + params.rho2)
    lam_visc = -2.0 / 2.0
    g1ref = p1_shape_grad()

    for c in range(mesh.num_cells):
        a, B, det, Binvt = cell_frame(mesh, c)
        dof1 = spaces.p1.cell_to_dof[c]
        dofv = spaces.vel.cell_to_dof[c]
        phi_loc, phin_loc = new.phi[dof1], old.phi[dof1]
        mu_loc, p_loc = new.mu[dof1], new.pressure[dof1]
        vel_loc = new.vel[dofv].reshape(6, 2)
        veln_loc = old.vel[dofv].reshape(6, 2)

        g1 = np.array([Binvt @ g1ref[i] for i in range(3)])
        gphi = g1.T @ phi_loc
        gmu = g1.T @ mu_loc
        gp = g1.T @ p_loc
        flux = gmu + alpha * gp

        for q, lam in enumerate(points):
            w = weights[q] * det
            s1 = p1_shape(lam)
            s2 = p2_shape(lam)
            g2 = np.array([Binvt @ row for row in p2_shape_grad(lam)])
            ph = float(s1 @ phi_loc)
            phn = float(s1 @ phin_loc)
            muv = float(s1 @ mu_loc)
            pv = float(s1 @ p_loc)
            v = s2 @ vel_loc
            vn = s2 @ veln_loc
            gradv = np.zeros((2, 2))
            for node in range(6):
                for k in range(2):
                    gradv[k] += vel_loc[node, k] * g2[node]
            divv = gradv[0, 0] + gradv[1, 1]

            mob = _mobility_value(params.mobility.kind, params.mobility.coefficient, ph)
            rho = _mix(ph, params.rho1, params.rho2)
            rho_t = _mix(min(max(ph, -1.0), 1.0), params.rho1, params.rho2)
            rho_tn = _mix(min(max(phn, -1.0), 1.0), params.rho1, params.rho2)
            eta_t = _mix(min(max(ph, -1.0), 1.0), params.eta1, params.eta2)
            mid = 0.5 * (ph + phn)
            favg = (
                (ph**3 - ph) + 4 * (mid**3 - mid) + (phn**3 - phn)
            ) / (6.0 * params.beta)

            for i in range(3):
                r_phi[dof1[i]] += w * (
                    (ph - phn) / tau * s1[i]
                    - ph * float(v @ g1[i])
                    + mob * float(flux @ g1[i])
                )
                r_mu[dof1[i]] += w * (
                    muv * s1[i] - params.gamma * float(gphi @ g1[i]) - favg * s1[i]
                )
                r_p[dof1[i]] += w * (divv * s1[i] + alpha * mob * float(flux @ g1[i]))

            u = rho * v  # convecting momentum density
            for node in range(6):
                for k in range(2):
                    dof = dofv[2 * node + k]
                    inertia = (
                        v[k] * (rho_t - rho_tn) / (2.0 * tau)
                        + rho_tn * (v[k] - vn[k]) / tau
                    ) * s2[node]
                    conv = 0.5 * float(u @ gradv[k]) * s2[node] - 0.5 * float(
                        u @ g2[node]
                    ) * v[k]
                    visc = eta_t * (
                        sum(
                            (gradv[k, m] + gradv[m, k]) * g2[node, m]
                            for m in range(2)
                        )
                        + lam_visc * divv * g2[node, k]
                    )
                    pres = -pv * g2[node, k]
                    capil = ph * gmu[k] * s2[node]
                    grav = params.g * rho * (1.0 if k == 1 else 0.0) * s2[node]
                    r_vel[dof] += w * (inertia + conv + visc + pres + capil + grav)
    return r_phi, r_mu, r_vel, r_p

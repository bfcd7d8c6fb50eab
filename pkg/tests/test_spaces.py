import math

import numpy as np
import pytest

from nschfem.mesh import BoundaryTag, build_structured_mesh
from nschfem.quadrature import triangle_rule
from nschfem.spaces import (
    PressureSpaceQ,
    ScalarSpaceP1,
    VectorSpaceP2,
    eval_basis,
    evaluate,
    interpolate,
    norms,
    p1_basis,
    p2_basis,
    vertex_values,
)

UNIT = ((0.0, 1.0), (0.0, 1.0))
NOSLIP_ALL = {s: BoundaryTag.NOSLIP for s in ("left", "right", "bottom", "top")}

P2_NODES = np.array([
    [1, 0, 0], [0, 1, 0], [0, 0, 1],
    [0.5, 0.5, 0], [0, 0.5, 0.5], [0.5, 0, 0.5],
])


def random_barycentric(n, seed=0):
    rng = np.random.default_rng(seed)
    r = rng.random((n, 2))
    flip = r.sum(axis=1) > 1
    r[flip] = 1 - r[flip]
    return np.column_stack([1 - r.sum(axis=1), r[:, 0], r[:, 1]])


def test_p1_lagrange_property():
    vals, _ = p1_basis(np.eye(3))
    assert np.allclose(vals, np.eye(3), atol=1e-15)


def test_p2_lagrange_property():
    # direct evaluation at all 6 nodes reproduces the identity
    vals, _ = p2_basis(P2_NODES)
    assert np.abs(vals - np.eye(6)).max() <= 1e-14


@pytest.mark.parametrize("kind,nloc", [("p1", 3), ("p2", 6)])
def test_partition_of_unity(kind, nloc):
    pts = random_barycentric(100, seed=3)
    vals, grads = eval_basis(kind, pts)
    assert vals.shape[1] == nloc
    assert np.abs(vals.sum(axis=1) - 1.0).max() <= 1e-13
    # gradients of the constant-1 combination vanish
    gsum = grads.sum(axis=0) if kind == "p1" else grads.sum(axis=1)
    assert np.abs(gsum).max() <= 1e-12


@pytest.mark.parametrize("degree", [1, 2, 4, 6])
def test_quadrature_exactness(degree):
    rule = triangle_rule(degree)
    assert rule.weights.sum() == pytest.approx(0.5, rel=1e-14)
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            x, y = rule.points[:, 1], rule.points[:, 2]
            got = (rule.weights * x**a * y**b).sum()
            exact = math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)
            assert got == pytest.approx(exact, rel=1e-13, abs=1e-15)


def test_scalar_space_dof_counts():
    periodic = ScalarSpaceP1(build_structured_mesh(UNIT, 4, 4, "periodic"))
    assert periodic.dof_count == 16
    walls = ScalarSpaceP1(build_structured_mesh(UNIT, 4, 4, NOSLIP_ALL))
    assert walls.dof_count == 25
    for space in (periodic, walls):
        assert set(space.cell_to_dof.ravel()) == set(range(space.dof_count))


def test_vector_space_nodes_and_dofs():
    mesh = build_structured_mesh(UNIT, 4, 4, "periodic")
    space = VectorSpaceP2(mesh)
    # torus: 16 vertices + 48 edges
    assert space.num_nodes == 64
    assert space.dof_count == 128
    assert space.constrained_dofs.size == 0
    assert set(space.cell_to_dof.ravel()) == set(range(space.dof_count))


def test_vector_space_constraints_mixed_walls():
    bc = {
        "left": BoundaryTag.NOPENETRATION,
        "right": BoundaryTag.NOPENETRATION,
        "bottom": BoundaryTag.NOSLIP,
        "top": BoundaryTag.NOSLIP,
    }
    n = 4
    space = VectorSpaceP2(build_structured_mesh(UNIT, n, n, bc))
    per_wall = 2 * n + 1  # vertices plus edge midpoints along one wall
    fixed = set(space.constrained_dofs.tolist())
    x = space.node_coords[:, 0]
    y = space.node_coords[:, 1]
    for node in range(space.num_nodes):
        on_lr = x[node] in (0.0, 1.0)
        on_tb = y[node] in (0.0, 1.0)
        assert ((2 * node) in fixed) == (on_lr or on_tb)      # v1 fixed on all walls
        assert ((2 * node + 1) in fixed) == on_tb             # v2 fixed only top/bottom
    assert sum(1 for d in fixed if d % 2 == 1) == 2 * per_wall


def test_interpolate_constant_and_sine():
    mesh = build_structured_mesh(UNIT, 8, 8, "periodic")
    space = ScalarSpaceP1(mesh)
    ones = interpolate(space, lambda x, y: np.ones_like(x))
    assert np.all(ones == 1.0)

    phi0 = lambda x, y: 0.2 * np.sin(4 * np.pi * x) * np.sin(4 * np.pi * y)
    coeffs = interpolate(space, phi0)
    x, y = space.dof_coords[:, 0], space.dof_coords[:, 1]
    assert np.abs(coeffs - phi0(x, y)).max() <= 1e-15


def test_p2_interpolation_exact_for_linear_fields():
    mesh = build_structured_mesh(UNIT, 3, 3, NOSLIP_ALL)
    space = VectorSpaceP2(mesh)
    coeffs = interpolate(space, lambda x, y: (2.0 * x - 0.5 * y, x + 3.0 * y))
    pts = np.random.default_rng(5).random((50, 2))
    got = evaluate(space, coeffs, pts)
    want = np.column_stack([2.0 * pts[:, 0] - 0.5 * pts[:, 1], pts[:, 0] + 3.0 * pts[:, 1]])
    assert np.abs(got - want).max() <= 1e-14


def test_norms_basic():
    mesh = build_structured_mesh(UNIT, 8, 8, "periodic")
    space = ScalarSpaceP1(mesh)
    zero = np.zeros(space.dof_count)
    assert norms(space, zero) == (0.0, 0.0)
    const = interpolate(space, lambda x, y: -3.0 * np.ones_like(x))
    n = norms(space, const)
    assert n.l2 == pytest.approx(3.0, rel=1e-13)
    assert n.h1 == pytest.approx(3.0, rel=1e-13)


def test_norm_of_interpolated_sine():
    mesh = build_structured_mesh(UNIT, 64, 64, "periodic")
    space = ScalarSpaceP1(mesh)
    coeffs = interpolate(space, lambda x, y: np.sin(2 * np.pi * x))
    n = norms(space, coeffs)
    assert abs(n.l2 - math.sqrt(0.5)) <= 1e-3


def test_affine_exactness_of_norms():
    # hand-computed values: u = x + 2y on the unit square
    # L2^2 = 1/3 + 1 + 4/3 = 8/3, |grad u|^2 = 5
    mesh = build_structured_mesh(UNIT, 5, 5, NOSLIP_ALL)
    p1 = ScalarSpaceP1(mesh)
    u = interpolate(p1, lambda x, y: x + 2 * y)
    n = norms(p1, u)
    assert n.l2 == pytest.approx(math.sqrt(8 / 3), rel=1e-12)
    assert n.h1 == pytest.approx(math.sqrt(8 / 3 + 5), rel=1e-12)

    # quadratic in P2: u = (x^2, 0): L2^2 = 1/5, |grad|^2 = 4/3
    p2 = VectorSpaceP2(mesh)
    v = interpolate(p2, lambda x, y: (x**2, np.zeros_like(x)))
    n2 = norms(p2, v)
    assert n2.l2 == pytest.approx(math.sqrt(1 / 5), rel=1e-12)
    assert n2.h1 == pytest.approx(math.sqrt(1 / 5 + 4 / 3), rel=1e-12)


def test_interspace_transfer_projection():
    mesh = build_structured_mesh(UNIT, 4, 4, "periodic")
    p1 = ScalarSpaceP1(mesh)
    p2 = VectorSpaceP2(mesh)

    def transfer(coeffs):
        # sample the P2 field at the vertices, then re-embed the P1 pair
        at_vertices = vertex_values(p2, coeffs)
        vx = np.zeros(p1.dof_count)
        vy = np.zeros(p1.dof_count)
        vx[p1.vertex_to_dof] = at_vertices[:, 0]
        vy[p1.vertex_to_dof] = at_vertices[:, 1]
        return interpolate(
            p2,
            lambda x, y: (
                evaluate(p1, vx, np.column_stack([x, y])),
                evaluate(p1, vy, np.column_stack([x, y])),
            ),
        )

    w = np.random.default_rng(11).normal(size=p2.dof_count)
    once = transfer(w)
    twice = transfer(once)
    assert np.abs(twice - once).max() <= 1e-13


def test_pressure_space_mass_vector():
    mesh = build_structured_mesh(UNIT, 6, 6, "periodic")
    q = PressureSpaceQ(ScalarSpaceP1(mesh))
    assert q.mass_vector.sum() == pytest.approx(1.0, rel=1e-13)
    assert q.mean(np.ones(q.dof_count)) == pytest.approx(1.0, rel=1e-13)

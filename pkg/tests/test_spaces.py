"""Quadrature exactness and finite element space layout."""

import math

import numpy as np
import pytest

from nsac import spaces
from nsac.meshing import build_uniform_mesh

BOUNDS = ((-1.0, 1.0), (-1.0, 1.0))


def reference_monomial_integral(a, b):
    """integral of x^a y^b over the unit reference triangle."""
    return math.factorial(a) * math.factorial(b) / math.factorial(a + b + 2)


@pytest.mark.parametrize("degree", range(1, 8))
def test_triangle_rule_exactness(degree):
    rule = spaces.triangle_rule(degree)
    assert rule.degree >= degree
    assert rule.weights.sum() == pytest.approx(1.0, abs=1e-14)
    assert np.all(rule.weights > 0)
    assert np.allclose(rule.points.sum(axis=1), 1.0, atol=1e-14)
    # Map to the reference triangle with corners (0,0), (1,0), (0,1).
    x = rule.points[:, 1]
    y = rule.points[:, 2]
    area = 0.5
    for a in range(degree + 1):
        for b in range(degree + 1 - a):
            got = area * float(rule.weights @ (x ** a * y ** b))
            assert got == pytest.approx(reference_monomial_integral(a, b),
                                        abs=1e-15, rel=1e-13), (a, b)


def test_triangle_rule_rejects_unsupported_degree():
    with pytest.raises(ValueError):
        spaces.triangle_rule(0)


def test_edge_rule_exactness():
    s, w = spaces.edge_rule(3)
    assert w.sum() == pytest.approx(1.0, abs=1e-15)
    for k in range(6):
        assert float(w @ s ** k) == pytest.approx(1.0 / (k + 1), rel=1e-14)


def test_p1_partition_of_unity(rng):
    lam = rng.dirichlet((1, 1, 1), size=20)
    vals = spaces.p1_basis(lam)
    assert np.allclose(vals.sum(axis=1), 1.0, atol=1e-14)
    assert np.allclose(spaces.p1_reference_gradients().sum(axis=0), 0.0)


def test_p2_partition_of_unity(rng):
    lam = rng.dirichlet((1, 1, 1), size=20)
    vals = spaces.p2_basis(lam)
    assert np.allclose(vals.sum(axis=1), 1.0, atol=1e-13)
    grads = spaces.p2_reference_gradients(lam)
    assert np.allclose(grads.sum(axis=1), 0.0, atol=1e-13)


def test_p2_nodal_property():
    # Nodes in barycentric coordinates: three vertices, then the midpoints
    # of edges (1,2), (2,0), (0,1).
    nodes = np.array([
        [1, 0, 0], [0, 1, 0], [0, 0, 1],
        [0, 0.5, 0.5], [0.5, 0, 0.5], [0.5, 0.5, 0],
    ], dtype=float)
    vals = spaces.p2_basis(nodes)
    assert np.allclose(vals, np.eye(6), atol=1e-14)


def test_p2_gradients_match_finite_differences(rng):
    lam = rng.dirichlet((2, 2, 2), size=10)
    grads = spaces.p2_reference_gradients(lam)
    h = 1e-6
    # Reference coordinates are (lam1, lam2); lam0 carries the dependence.
    for d, step in enumerate([(-1, 1, 0), (-1, 0, 1)]):
        shift = np.asarray(step, dtype=float) * h
        fd = (spaces.p2_basis(lam + shift) - spaces.p2_basis(lam - shift)) / (2 * h)
        assert np.abs(grads[:, :, d] - fd).max() < 1e-8


@pytest.mark.parametrize("n", [1, 2, 4])
def test_dof_counts(n):
    mesh = build_uniform_mesh(BOUNDS, n)
    p1 = spaces.scalar_p1(mesh)
    p2 = spaces.scalar_p2(mesh)
    v2 = spaces.vector_p2(mesh)
    assert p1.dof_count == (n + 1) ** 2
    assert p2.dof_count == (2 * n + 1) ** 2
    assert v2.dof_count == 2 * (2 * n + 1) ** 2
    assert v2.n_scalar == p2.dof_count
    assert v2.n_components == 2
    assert p1.dirichlet_mask.sum() == 4 * n
    assert p2.dirichlet_mask.sum() == 8 * n
    assert v2.dirichlet_mask.sum() == 16 * n


def test_p1_dof_coordinates_are_vertices():
    mesh = build_uniform_mesh(BOUNDS, 3)
    p1 = spaces.scalar_p1(mesh)
    assert np.allclose(p1.dof_coordinates, mesh.vertices)
    assert np.array_equal(p1.cell_dofs, mesh.triangles)


def test_p2_cell_dofs_follow_local_ordering():
    mesh = build_uniform_mesh(BOUNDS, 2)
    p2 = spaces.scalar_p2(mesh)
    coords = p2.dof_coordinates
    for t, tri in enumerate(mesh.triangles):
        verts = mesh.vertices[tri]
        expected = np.vstack([
            verts,
            0.5 * (verts[1] + verts[2]),
            0.5 * (verts[2] + verts[0]),
            0.5 * (verts[0] + verts[1]),
        ])
        assert np.allclose(coords[p2.cell_dofs[t]], expected, atol=1e-14)


def test_vector_dirichlet_dofs_cover_both_components():
    mesh = build_uniform_mesh(BOUNDS, 2)
    v2 = spaces.vector_p2(mesh)
    p2 = spaces.scalar_p2(mesh)
    scalar_boundary = np.flatnonzero(p2.dirichlet_mask)
    expected = np.concatenate([scalar_boundary, scalar_boundary + p2.dof_count])
    assert np.array_equal(np.sort(v2.dirichlet_dofs()), np.sort(expected))


def test_boundary_dofs_sit_on_boundary():
    mesh = build_uniform_mesh(BOUNDS, 3)
    p2 = spaces.scalar_p2(mesh)
    coords = p2.dof_coordinates[p2.dirichlet_mask[:p2.n_scalar]]
    on_edge = (np.isclose(np.abs(coords[:, 0]), 1.0)
               | np.isclose(np.abs(coords[:, 1]), 1.0))
    assert on_edge.all()
    interior = p2.dof_coordinates[~p2.dirichlet_mask[:p2.n_scalar]]
    assert np.all(np.abs(interior).max(axis=1) < 1.0)

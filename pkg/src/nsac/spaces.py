"""Finite element spaces and triangle quadrature.

Velocity is approximated with continuous piecewise quadratics per component,
pressure with continuous piecewise linears (the classical stable mixed pair),
and the phase field with the same quadratic space as the velocity components.

On the structured meshes of :mod:`nsac.meshing` the quadratic dofs are
exactly the points of the once-refined vertex grid: the ``(2n + 1)**2``
points with spacing ``h / 2``.  Local dof ordering on each triangle is the
three vertices followed by the midpoints of the edges opposite each vertex.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.special import roots_jacobi, roots_legendre

from .meshing import Mesh

SCALAR_LINEAR = "scalar-linear"
SCALAR_QUADRATIC = "scalar-quadratic"
VECTOR_QUADRATIC = "vector-quadratic"


@dataclass(frozen=True)
class QuadratureRule:
    """Quadrature rule on the reference triangle.

    Points are stored as barycentric coordinates and weights sum to one, so
    that ``integral = area * sum(w_q * f(x_q))`` on any affine triangle.

    Attributes
    ----------
    points : ndarray, shape (n_points, 3)
        Barycentric coordinates of the quadrature points.
    weights : ndarray, shape (n_points,)
        Weights summing to 1.
    degree : int
        Largest polynomial degree integrated exactly.
    """

    points: np.ndarray
    weights: np.ndarray
    degree: int

    @property
    def n_points(self) -> int:
        return self.weights.shape[0]


def triangle_rule(degree: int) -> QuadratureRule:
    """Return a rule exact for polynomials up to ``degree``.

    Degrees 1 and 2 use the classical symmetric rules.  Higher degrees use a
    conical-product rule (tensor Gauss-Jacobi x Gauss-Legendre collapsed onto
    the triangle), whose nodes and weights are computed to machine precision.

    Raises
    ------
    ValueError
        If ``degree < 1``.
    """
    if degree < 1:
        raise ValueError(f"quadrature degree must be positive, got {degree}")
    if degree == 1:
        points = np.array([[1 / 3, 1 / 3, 1 / 3]])
        weights = np.array([1.0])
    elif degree == 2:
        a, b = 2 / 3, 1 / 6
        points = np.array([[a, b, b], [b, a, b], [b, b, a]])
        weights = np.full(3, 1 / 3)
    else:
        points, weights = _conical_rule(degree)
    return QuadratureRule(points=points, weights=weights, degree=degree)


def _conical_rule(degree: int):
    """Conical-product rule on the reference triangle, exact to ``degree``.

    The triangle {x >= 0, y >= 0, x + y <= 1} is parameterized by
    x = s, y = t (1 - s); the Jacobian (1 - s) is absorbed into a
    Gauss-Jacobi rule in s so that an n-point tensor grid is exact for
    total degree 2n - 1.
    """
    n = (degree + 2) // 2
    # Gauss-Jacobi with weight (1 - x) on [-1, 1], mapped to [0, 1].
    sj, wj = roots_jacobi(n, 1.0, 0.0)
    s = 0.5 * (sj + 1.0)
    # Weight function on [0,1] is (1 - s); total mass 1/2. The scipy weights
    # carry the [-1,1] normalization with mass 2, so rescale by 1/4.
    ws = 0.25 * wj
    tl, wl = roots_legendre(n)
    t = 0.5 * (tl + 1.0)
    wt = 0.5 * wl

    ss, tt = np.meshgrid(s, t, indexing="ij")
    x = ss.ravel()
    y = (tt * (1.0 - ss)).ravel()
    w = np.outer(ws, wt).ravel()
    # Normalize so the weights sum to 1 over the unit triangle (area 1/2).
    w = w / 0.5
    points = np.column_stack([1.0 - x - y, x, y])
    return points, w


def edge_rule(n_points: int = 3):
    """Gauss-Legendre points and weights on [0, 1], weights summing to 1."""
    t, w = roots_legendre(n_points)
    return 0.5 * (t + 1.0), 0.5 * w


def p1_basis(points: np.ndarray) -> np.ndarray:
    """Linear shape functions at barycentric ``points``, shape (nq, 3)."""
    return np.asarray(points, dtype=float).copy()

def p1_reference_gradients() -> np.ndarray:
    """Gradients of the linear basis on the reference triangle, shape (3, 2)."""
    return np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def p2_basis(points: np.ndarray) -> np.ndarray:
    """Quadratic shape functions at barycentric ``points``, shape (nq, 6).

    Ordering: vertex functions 0..2, then the midpoint functions of the
    edges (1,2), (2,0), (0,1).
    """
    lam = np.asarray(points, dtype=float)
    l0, l1, l2 = lam[:, 0], lam[:, 1], lam[:, 2]
    return np.column_stack([
        l0 * (2 * l0 - 1),
        l1 * (2 * l1 - 1),
        l2 * (2 * l2 - 1),
        4 * l1 * l2,
        4 * l2 * l0,
        4 * l0 * l1,
    ])


def p2_reference_gradients(points: np.ndarray) -> np.ndarray:
    """Reference gradients of the quadratic basis, shape (nq, 6, 2)."""
    lam = np.asarray(points, dtype=float)
    nq = lam.shape[0]
    dlam = p1_reference_gradients()
    grads = np.empty((nq, 6, 2))
    for k in range(3):
        grads[:, k, :] = (4 * lam[:, k, None] - 1) * dlam[k]
    pairs = [(1, 2), (2, 0), (0, 1)]
    for m, (a, b) in enumerate(pairs):
        grads[:, 3 + m, :] = 4 * (lam[:, a, None] * dlam[b] + lam[:, b, None] * dlam[a])
    return grads


@dataclass(frozen=True)
class DofMap:
    """Degree-of-freedom layout of a finite element space on a mesh.

    Attributes
    ----------
    space_kind : str
        One of ``scalar-linear``, ``scalar-quadratic``, ``vector-quadratic``.
    dof_coordinates : ndarray, shape (dof_count, 2)
        Coordinates of each dof (repeated per component for vector spaces).
    dof_count : int
        Total number of dofs including components.
    dirichlet_mask : ndarray of bool, shape (dof_count,)
        True for dofs located on the domain boundary.
    cell_dofs : ndarray, shape (n_triangles, n_local)
        Scalar dof indices per triangle; vector spaces share the scalar
        connectivity, with component c occupying ``[c * n_scalar, (c + 1) * n_scalar)``.
    n_components : int
    n_scalar : int
        Number of scalar dofs per component.
    """

    space_kind: str
    dof_coordinates: np.ndarray
    dof_count: int
    dirichlet_mask: np.ndarray
    cell_dofs: np.ndarray
    n_components: int
    n_scalar: int

    @property
    def n_local(self) -> int:
        return self.cell_dofs.shape[1]

    def dirichlet_dofs(self) -> np.ndarray:
        return np.flatnonzero(self.dirichlet_mask)


def scalar_p1(mesh: Mesh) -> DofMap:
    """Continuous piecewise-linear scalar space; dofs at mesh vertices."""
    n = mesh.n_subdivisions
    coords = mesh.vertices
    mask = _grid_boundary_mask(n + 1)
    return DofMap(
        space_kind=SCALAR_LINEAR,
        dof_coordinates=coords,
        dof_count=coords.shape[0],
        dirichlet_mask=mask,
        cell_dofs=mesh.triangles.copy(),
        n_components=1,
        n_scalar=coords.shape[0],
    )


def scalar_p2(mesh: Mesh) -> DofMap:
    """Continuous piecewise-quadratic scalar space.

    Dofs live on the refined grid with spacing h/2; vertex v at fine index
    (2i, 2j) and the midpoint of an edge at the (integer) mean of its
    endpoint fine indices.
    """
    n = mesh.n_subdivisions
    m = 2 * n + 1
    (x0, x1), (y0, y1) = mesh.bounds
    xs = np.linspace(x0, x1, m)
    ys = np.linspace(y0, y1, m)
    gx, gy = np.meshgrid(xs, ys)
    coords = np.column_stack([gx.ravel(), gy.ravel()])

    # Fine-grid (i, j) indices of the coarse vertices, per triangle corner.
    vi = mesh.triangles % (n + 1)
    vj = mesh.triangles // (n + 1)
    fi = 2 * vi
    fj = 2 * vj
    cell = np.empty((mesh.n_triangles, 6), dtype=np.int64)
    cell[:, :3] = fj * m + fi
    pairs = [(1, 2), (2, 0), (0, 1)]
    for k, (a, b) in enumerate(pairs):
        mi = (fi[:, a] + fi[:, b]) // 2
        mj = (fj[:, a] + fj[:, b]) // 2
        cell[:, 3 + k] = mj * m + mi

    mask = _grid_boundary_mask(m)
    return DofMap(
        space_kind=SCALAR_QUADRATIC,
        dof_coordinates=coords,
        dof_count=coords.shape[0],
        dirichlet_mask=mask,
        cell_dofs=cell,
        n_components=1,
        n_scalar=coords.shape[0],
    )


def vector_p2(mesh: Mesh) -> DofMap:
    """Two-component quadratic space with component-blocked dof layout.

    Component 0 occupies dofs ``[0, n_scalar)`` and component 1 occupies
    ``[n_scalar, 2 n_scalar)``.
    """
    base = scalar_p2(mesh)
    return DofMap(
        space_kind=VECTOR_QUADRATIC,
        dof_coordinates=np.vstack([base.dof_coordinates, base.dof_coordinates]),
        dof_count=2 * base.n_scalar,
        dirichlet_mask=np.tile(base.dirichlet_mask, 2),
        cell_dofs=base.cell_dofs,
        n_components=2,
        n_scalar=base.n_scalar,
    )


def _grid_boundary_mask(m: int) -> np.ndarray:
    mask = np.zeros((m, m), dtype=bool)
    mask[0, :] = mask[-1, :] = True
    mask[:, 0] = mask[:, -1] = True
    return mask.ravel()

"""Structured triangular meshes on axis-aligned rectangles.

The solver runs on uniform n-by-n subdivisions of a rectangle where every
grid cell is split along the diagonal from its lower-left to its upper-right
corner.  Vertices are numbered row by row from the lower-left corner, which
makes the quadratic dof grid of the finite element spaces a plain refinement
of the vertex grid (see :mod:`nsac.spaces`).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Boundary tags, counterclockwise starting from the bottom side.
BOTTOM, RIGHT, TOP, LEFT = 1, 2, 3, 4


@dataclass(frozen=True)
class Mesh:
    """Triangulation of a rectangle.

    Attributes
    ----------
    vertices : ndarray, shape (n_vertices, 2)
        Vertex coordinates.
    triangles : ndarray, shape (n_triangles, 3)
        Vertex indices per triangle, counterclockwise.
    boundary_edges : ndarray, shape (n_edges, 3)
        Rows ``(v0, v1, tag)`` with ``tag`` one of BOTTOM, RIGHT, TOP, LEFT.
    n_subdivisions : int
        Number of cells per side.
    bounds : tuple
        ``((x0, x1), (y0, y1))`` of the rectangle.
    """

    vertices: np.ndarray
    triangles: np.ndarray
    boundary_edges: np.ndarray
    n_subdivisions: int
    bounds: tuple

    @property
    def n_vertices(self) -> int:
        return self.vertices.shape[0]

    @property
    def n_triangles(self) -> int:
        return self.triangles.shape[0]

    @property
    def area(self) -> float:
        (x0, x1), (y0, y1) = self.bounds
        return (x1 - x0) * (y1 - y0)

    def triangle_areas(self) -> np.ndarray:
        """Signed areas; positive for counterclockwise triangles."""
        p = self.vertices[self.triangles]
        d1 = p[:, 1] - p[:, 0]
        d2 = p[:, 2] - p[:, 0]
        return 0.5 * (d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0])


def build_uniform_mesh(bounds, n: int) -> Mesh:
    """Build a uniform n-by-n triangulation of a rectangle.

    Each of the ``n * n`` grid cells is split into two triangles along the
    lower-left-to-upper-right diagonal, giving ``2 n**2`` triangles and
    ``(n + 1)**2`` vertices.

    Parameters
    ----------
    bounds : tuple
        ``((x0, x1), (y0, y1))`` with ``x1 > x0`` and ``y1 > y0``.
    n : int
        Subdivisions per side, at least 1.

    Returns
    -------
    Mesh

    Raises
    ------
    ValueError
        If ``n < 1`` or the rectangle is degenerate.
    """
    (x0, x1), (y0, y1) = bounds
    if n < 1:
        raise ValueError(f"need at least one subdivision per side, got n={n}")
    if x1 <= x0 or y1 <= y0:
        raise ValueError(f"degenerate rectangle bounds {bounds}")

    xs = np.linspace(x0, x1, n + 1)
    ys = np.linspace(y0, y1, n + 1)
    gx, gy = np.meshgrid(xs, ys)
    vertices = np.column_stack([gx.ravel(), gy.ravel()])

    # Cell (i, j) has corners v00 (lower left), v10, v01, v11; the diagonal
    # v00-v11 splits it into the lower triangle (v00, v10, v11) and the upper
    # triangle (v00, v11, v01), both counterclockwise.
    ii, jj = np.meshgrid(np.arange(n), np.arange(n))
    ii = ii.ravel()
    jj = jj.ravel()
    v00 = jj * (n + 1) + ii
    v10 = v00 + 1
    v01 = v00 + (n + 1)
    v11 = v01 + 1
    lower = np.column_stack([v00, v10, v11])
    upper = np.column_stack([v00, v11, v01])
    triangles = np.empty((2 * n * n, 3), dtype=np.int64)
    triangles[0::2] = lower
    triangles[1::2] = upper

    k = np.arange(n)
    bottom = np.column_stack([k, k + 1, np.full(n, BOTTOM)])
    right = np.column_stack([n + k * (n + 1), n + (k + 1) * (n + 1), np.full(n, RIGHT)])
    top = np.column_stack([n * (n + 1) + k, n * (n + 1) + k + 1, np.full(n, TOP)])
    left = np.column_stack([k * (n + 1), (k + 1) * (n + 1), np.full(n, LEFT)])
    boundary_edges = np.vstack([bottom, right, top, left]).astype(np.int64)

    return Mesh(
        vertices=vertices,
        triangles=triangles,
        boundary_edges=boundary_edges,
        n_subdivisions=n,
        bounds=((float(x0), float(x1)), (float(y0), float(y1))),
    )

"""Sparse assembly of bilinear and linear forms, and direct linear solves.

Local element contributions are computed vectorized over all triangles from
precomputed basis tables and scattered into CSR matrices through a single
coordinate-format accumulation.  Triangles are always visited in mesh order
and quadrature points in rule order, so repeated assembly of the same form
is bit-identical; there is no worker-dependent reduction order.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import splu

from .meshing import Mesh
from . import spaces
from .spaces import DofMap, QuadratureRule


class FactorizationError(RuntimeError):
    """Sparse LU factorization failed.

    Attributes
    ----------
    pivot_index : int or None
        Index of the offending pivot when the backend or a structural scan
        identifies one, else None.
    """

    def __init__(self, message: str, pivot_index=None):
        super().__init__(message)
        self.pivot_index = pivot_index


class SolveError(RuntimeError):
    """Direct solve produced a residual above the acceptance tolerance."""


@dataclass
class SparseSystem:
    """A linear system ``matrix @ solution = rhs``.

    ``solution`` is None until :func:`solve_direct` succeeds; afterwards the
    residual bound ``norm(A x - b) <= tol * norm(b)`` has been verified.
    """

    matrix: sp.csr_matrix
    rhs: np.ndarray
    solution: np.ndarray | None = None


class Discretization:
    """Mesh plus function spaces plus precomputed assembly tables.

    Holds the quadrature rule, basis values and physical gradients at the
    quadrature points of every triangle, and cached constant matrices (mass,
    stiffness) used for norms and for the constant blocks of the flow system.

    Parameters
    ----------
    mesh : Mesh
    quad_degree : int
        Polynomial degree integrated exactly by the volume rule.  The default
        handles products of two quadratic basis functions with a quadratic
        coefficient field exactly.
    """

    def __init__(self, mesh: Mesh, quad_degree: int = 7):
        self.mesh = mesh
        self.quad = spaces.triangle_rule(quad_degree)
        self.p1 = spaces.scalar_p1(mesh)
        self.p2 = spaces.scalar_p2(mesh)
        self.v2 = spaces.vector_p2(mesh)

        areas = mesh.triangle_areas()
        if np.any(areas <= 0):
            raise ValueError("mesh contains non-positively oriented triangles")
        self.areas = areas

        pts = self.quad.points
        self.w = self.quad.weights
        # Physical quadrature coordinates: (n_tri, nq, 2).
        corners = mesh.vertices[mesh.triangles]
        self.qp = np.einsum("qk,tkd->tqd", pts, corners)
        # Combined weight * area factor: (n_tri, nq).
        self.wj = areas[:, None] * self.w[None, :]

        self.p1_vals = spaces.p1_basis(pts)
        self.p2_vals = spaces.p2_basis(pts)

        # Jacobian of the affine map (constant per triangle) and physical
        # basis gradients.
        d1 = corners[:, 1] - corners[:, 0]
        d2 = corners[:, 2] - corners[:, 0]
        det = d1[:, 0] * d2[:, 1] - d1[:, 1] * d2[:, 0]
        inv = np.empty((mesh.n_triangles, 2, 2))
        inv[:, 0, 0] = d2[:, 1] / det
        inv[:, 0, 1] = -d2[:, 0] / det
        inv[:, 1, 0] = -d1[:, 1] / det
        inv[:, 1, 1] = d1[:, 0] / det
        # grad_x = J^{-T} grad_ref; inv holds J^{-1} with rows (dxi/dx, dxi/dy).
        ref1 = spaces.p1_reference_gradients()
        self.p1_grads = np.einsum("ik,tkd->tid", ref1, inv)
        ref2 = spaces.p2_reference_gradients(pts)
        self.p2_grads = np.einsum("qik,tkd->tqid", ref2, inv)

        self._cache: dict = {}

    # -- coefficient field evaluation ------------------------------------

    def p2_at_qp(self, coeffs: np.ndarray) -> np.ndarray:
        """Values of a quadratic scalar field at quadrature points, (n_tri, nq)."""
        local = coeffs[self.p2.cell_dofs]
        return np.einsum("ti,qi->tq", local, self.p2_vals)

    def p2_grad_at_qp(self, coeffs: np.ndarray) -> np.ndarray:
        """Gradients of a quadratic scalar field at quadrature points, (n_tri, nq, 2)."""
        local = coeffs[self.p2.cell_dofs]
        return np.einsum("ti,tqid->tqd", local, self.p2_grads)

    def p1_at_qp(self, coeffs: np.ndarray) -> np.ndarray:
        local = coeffs[self.p1.cell_dofs]
        return np.einsum("ti,qi->tq", local, self.p1_vals)

    def vector_at_qp(self, coeffs: np.ndarray):
        """Both components of a quadratic vector field at quadrature points."""
        n = self.p2.n_scalar
        return self.p2_at_qp(coeffs[:n]), self.p2_at_qp(coeffs[n:])

    def vector_grad_at_qp(self, coeffs: np.ndarray):
        n = self.p2.n_scalar
        return self.p2_grad_at_qp(coeffs[:n]), self.p2_grad_at_qp(coeffs[n:])

    # -- scatter ----------------------------------------------------------

    def scatter(self, local: np.ndarray, rows: np.ndarray, cols: np.ndarray,
                shape) -> sp.csr_matrix:
        """Accumulate local element matrices into a CSR matrix.

        ``local`` has shape (n_tri, n_test, n_trial); ``rows`` and ``cols``
        map local to global indices with shapes (n_tri, n_test) and
        (n_tri, n_trial).
        """
        nt, ni, nj = local.shape
        r = np.repeat(rows[:, :, None], nj, axis=2)
        c = np.repeat(cols[:, None, :], ni, axis=1)
        mat = sp.coo_matrix((local.ravel(), (r.ravel(), c.ravel())), shape=shape)
        return mat.tocsr()

    def scatter_vector(self, local: np.ndarray, rows: np.ndarray) -> np.ndarray:
        """Accumulate local load vectors (n_tri, n_test) into a dense vector."""
        out = np.zeros(int(rows.max()) + 1 if rows.size else 0)
        np.add.at(out, rows.ravel(), local.ravel())
        return out

    # -- weighted blocks on the quadratic space ---------------------------

    def weighted_mass_p2(self, weight_qp: np.ndarray) -> sp.csr_matrix:
        """Matrix of ``integral(w * trial * test)`` on the scalar quadratic space."""
        cw = weight_qp * self.wj
        local = np.einsum("tq,qi,qj->tij", cw, self.p2_vals, self.p2_vals,
                          optimize=True)
        n = self.p2.n_scalar
        cd = self.p2.cell_dofs
        return self.scatter(local, cd, cd, (n, n))

    def weighted_stiffness_p2(self, weight_qp: np.ndarray) -> sp.csr_matrix:
        """Matrix of ``integral(w * grad trial . grad test)`` on the quadratic space."""
        cw = weight_qp * self.wj
        g = self.p2_grads
        local = np.einsum("tq,tqia,tqja->tij", cw, g, g, optimize=True)
        n = self.p2.n_scalar
        cd = self.p2.cell_dofs
        return self.scatter(local, cd, cd, (n, n))

    def advection_p2(self, ax_qp: np.ndarray, ay_qp: np.ndarray,
                     weight_qp=None) -> sp.csr_matrix:
        """Matrix of ``integral(w * (a . grad trial) * test)`` on the quadratic space."""
        cw = self.wj if weight_qp is None else weight_qp * self.wj
        g = self.p2_grads
        conv = ax_qp[:, :, None] * g[:, :, :, 0] + ay_qp[:, :, None] * g[:, :, :, 1]
        local = np.einsum("tq,qi,tqj->tij", cw, self.p2_vals, conv, optimize=True)
        n = self.p2.n_scalar
        cd = self.p2.cell_dofs
        return self.scatter(local, cd, cd, (n, n))

    def directional_stiffness_p2(self, a: int, b: int,
                                 weight_qp: np.ndarray) -> sp.csr_matrix:
        """Matrix of ``integral(w * d_a(trial) * d_b(test))`` on the quadratic space.

        Note the index order: ``a`` differentiates the trial function and
        ``b`` the test function.
        """
        cw = weight_qp * self.wj
        g = self.p2_grads
        local = np.einsum("tq,tqi,tqj->tij", cw, g[:, :, :, b], g[:, :, :, a],
                          optimize=True)
        n = self.p2.n_scalar
        cd = self.p2.cell_dofs
        return self.scatter(local, cd, cd, (n, n))

    def divergence_block(self, component: int) -> sp.csr_matrix:
        """Matrix of ``-integral(test_p1 * d_c(trial_p2))``, shape (n_p1, n_p2)."""
        key = ("div", component)
        if key not in self._cache:
            g = self.p2_grads[:, :, :, component]
            local = -np.einsum("tq,qi,tqj->tij", self.wj, self.p1_vals, g,
                               optimize=True)
            self._cache[key] = self.scatter(local, self.p1.cell_dofs,
                                            self.p2.cell_dofs,
                                            (self.p1.n_scalar, self.p2.n_scalar))
        return self._cache[key]

    def load_p2(self, values_qp: np.ndarray) -> np.ndarray:
        """Vector of ``integral(f * test)`` on the scalar quadratic space."""
        fw = values_qp * self.wj
        local = np.einsum("tq,qi->ti", fw, self.p2_vals, optimize=True)
        out = np.zeros(self.p2.n_scalar)
        np.add.at(out, self.p2.cell_dofs.ravel(), local.ravel())
        return out

    # -- cached constant matrices -----------------------------------------

    def _cached(self, key, make):
        if key not in self._cache:
            self._cache[key] = make()
        return self._cache[key]

    @property
    def mass_p2(self) -> sp.csr_matrix:
        return self._cached("mass_p2", lambda: self.weighted_mass_p2(
            np.ones_like(self.wj)))

    @property
    def stiffness_p2(self) -> sp.csr_matrix:
        return self._cached("stiff_p2", lambda: self.weighted_stiffness_p2(
            np.ones_like(self.wj)))

    @property
    def mass_p1(self) -> sp.csr_matrix:
        def make():
            local = np.einsum("tq,qi,qj->tij", self.wj, self.p1_vals,
                              self.p1_vals, optimize=True)
            n = self.p1.n_scalar
            return self.scatter(local, self.p1.cell_dofs, self.p1.cell_dofs,
                                (n, n))
        return self._cached("mass_p1", make)

    @property
    def deformation_gram(self) -> sp.csr_matrix:
        """Gram matrix of the symmetric gradient on the vector space.

        ``u @ deformation_gram @ u`` equals the squared L2 norm of
        ``0.5 (grad u + grad u^T)``.
        """
        def make():
            one = np.ones_like(self.wj)
            half = 0.5 * one
            a11 = (self.directional_stiffness_p2(0, 0, one)
                   + self.directional_stiffness_p2(1, 1, half))
            a12 = self.directional_stiffness_p2(1, 0, half)
            a22 = (self.directional_stiffness_p2(1, 1, one)
                   + self.directional_stiffness_p2(0, 0, half))
            return sp.bmat([[a11, a12.T], [a12, a22]], format="csr")
        return self._cached("def_gram", make)

    # -- norms -------------------------------------------------------------

    def norm_p2(self, coeffs: np.ndarray) -> float:
        """L2 norm of a scalar quadratic field."""
        return float(np.sqrt(max(coeffs @ (self.mass_p2 @ coeffs), 0.0)))

    def seminorm_p2(self, coeffs: np.ndarray) -> float:
        """L2 norm of the gradient of a scalar quadratic field."""
        return float(np.sqrt(max(coeffs @ (self.stiffness_p2 @ coeffs), 0.0)))

    def norm_vector(self, coeffs: np.ndarray) -> float:
        n = self.p2.n_scalar
        sq = (coeffs[:n] @ (self.mass_p2 @ coeffs[:n])
              + coeffs[n:] @ (self.mass_p2 @ coeffs[n:]))
        return float(np.sqrt(max(sq, 0.0)))

    def seminorm_vector(self, coeffs: np.ndarray) -> float:
        n = self.p2.n_scalar
        sq = (coeffs[:n] @ (self.stiffness_p2 @ coeffs[:n])
              + coeffs[n:] @ (self.stiffness_p2 @ coeffs[n:]))
        return float(np.sqrt(max(sq, 0.0)))

    def norm_p1(self, coeffs: np.ndarray) -> float:
        return float(np.sqrt(max(coeffs @ (self.mass_p1 @ coeffs), 0.0)))

    def deformation_norm(self, coeffs: np.ndarray) -> float:
        """L2 norm of the symmetric gradient of a vector field."""
        return float(np.sqrt(max(coeffs @ (self.deformation_gram @ coeffs), 0.0)))

    def quadrature_integral(self, values_qp: np.ndarray) -> float:
        """Integral over the domain of values sampled at quadrature points."""
        return float(np.sum(values_qp * self.wj))

    # -- boundary integrals ------------------------------------------------

    def boundary_load_p2(self, flux, n_points: int = 3) -> np.ndarray:
        """Vector of ``integral_boundary(flux * test)`` on the quadratic space.

        Parameters
        ----------
        flux : callable
            ``flux(x, y, nx, ny) -> values`` vectorized over points, where
            ``(nx, ny)`` is the outward unit normal.
        n_points : int
            Gauss points per boundary edge.
        """
        mesh = self.mesh
        n = mesh.n_subdivisions
        m = 2 * n + 1
        s, w = spaces.edge_rule(n_points)
        # Quadratic trace shapes on an edge parameterized by s in [0, 1]:
        # endpoint 0, endpoint 1, midpoint.
        shapes = np.column_stack([
            (1 - s) * (1 - 2 * s),
            s * (2 * s - 1),
            4 * s * (1 - s),
        ])
        out = np.zeros(self.p2.n_scalar)
        verts = mesh.vertices
        normals = {1: (0.0, -1.0), 2: (1.0, 0.0), 3: (0.0, 1.0), 4: (-1.0, 0.0)}
        (x0, x1), (y0, y1) = mesh.bounds
        hx = (x1 - x0) / n
        hy = (y1 - y0) / n
        for v0, v1, tag in mesh.boundary_edges:
            p0 = verts[v0]
            p1v = verts[v1]
            length = float(np.hypot(*(p1v - p0)))
            xs = p0[0] + s * (p1v[0] - p0[0])
            ys = p0[1] + s * (p1v[1] - p0[1])
            nx, ny = normals[int(tag)]
            vals = flux(xs, ys, nx, ny)
            # Global quadratic dof indices of the two endpoints and midpoint.
            i0 = int(round((p0[0] - x0) / hx * 2))
            j0 = int(round((p0[1] - y0) / hy * 2))
            i1 = int(round((p1v[0] - x0) / hx * 2))
            j1 = int(round((p1v[1] - y0) / hy * 2))
            dofs = (j0 * m + i0, j1 * m + i1, ((j0 + j1) // 2) * m + (i0 + i1) // 2)
            contrib = length * (shapes * (w * vals)[:, None]).sum(axis=0)
            for d, c in zip(dofs, contrib):
                out[d] += c
        return out


# -- generic assembly ------------------------------------------------------


@dataclass
class KernelContext:
    """Data handed to an assembly kernel at one quadrature point.

    Attributes
    ----------
    x, y : ndarray, shape (n_tri,)
        Physical coordinates of the quadrature point in each triangle.
    test_vals, trial_vals : ndarray
        Reference basis values, shapes (n_test,) and (n_trial,).
    test_grads, trial_grads : ndarray
        Physical basis gradients, shapes (n_tri, n_test, 2) and
        (n_tri, n_trial, 2).
    """

    x: np.ndarray
    y: np.ndarray
    test_vals: np.ndarray
    trial_vals: np.ndarray
    test_grads: np.ndarray
    trial_grads: np.ndarray


def assemble_bilinear(disc: Discretization, trial: DofMap, test: DofMap,
                      kernel) -> sp.csr_matrix:
    """Assemble the matrix of a bilinear form from a pointwise kernel.

    The kernel is called once per quadrature point with a
    :class:`KernelContext` and must return the integrand density as an array
    broadcastable to ``(n_tri, n_test, n_trial)``; the quadrature weight and
    element area are applied here.  Scalar spaces only; the flow system
    builds its vector blocks from scalar pieces.

    Raises
    ------
    ValueError
        If a dof map does not belong to this discretization's mesh or is a
        vector space.
    """
    for dm in (trial, test):
        if dm.n_components != 1:
            raise ValueError("assemble_bilinear expects scalar spaces")
        if dm.cell_dofs.shape[0] != disc.mesh.n_triangles:
            raise ValueError("dof map does not match the discretization mesh")
    tv, tg = _basis_tables(disc, test)
    uv, ug = _basis_tables(disc, trial)
    nt = disc.mesh.n_triangles
    local = np.zeros((nt, test.n_local, trial.n_local))
    for q in range(disc.quad.n_points):
        ctx = KernelContext(
            x=disc.qp[:, q, 0], y=disc.qp[:, q, 1],
            test_vals=tv[q], trial_vals=uv[q],
            test_grads=tg[:, q], trial_grads=ug[:, q],
        )
        dens = np.asarray(kernel(ctx))
        local += disc.wj[:, q][:, None, None] * np.broadcast_to(
            dens, local.shape)
    return disc.scatter(local, test.cell_dofs, trial.cell_dofs,
                        (test.n_scalar, trial.n_scalar))


def assemble_functional(disc: Discretization, test: DofMap, func) -> np.ndarray:
    """Assemble the vector of a linear functional ``integral(f * test)``.

    ``func(x, y)`` is evaluated at the physical quadrature points and must
    broadcast to ``(n_tri, nq)``.
    """
    if test.n_components != 1:
        raise ValueError("assemble_functional expects a scalar space")
    vals = np.broadcast_to(np.asarray(func(disc.qp[:, :, 0], disc.qp[:, :, 1])),
                           disc.wj.shape)
    if test.space_kind == spaces.SCALAR_QUADRATIC:
        return disc.load_p2(vals)
    fw = vals * disc.wj
    local = np.einsum("tq,qi->ti", fw, disc.p1_vals, optimize=True)
    out = np.zeros(test.n_scalar)
    np.add.at(out, test.cell_dofs.ravel(), local.ravel())
    return out


def _basis_tables(disc: Discretization, dm: DofMap):
    if dm.space_kind == spaces.SCALAR_QUADRATIC:
        return disc.p2_vals, disc.p2_grads
    if dm.space_kind == spaces.SCALAR_LINEAR:
        # Linear gradients are constant per triangle; expand along q.
        g = np.repeat(disc.p1_grads[:, None, :, :], disc.quad.n_points, axis=1)
        return disc.p1_vals, g
    raise ValueError(f"unsupported space kind {dm.space_kind}")


# -- Dirichlet conditions and direct solve ---------------------------------


def apply_dirichlet(system: SparseSystem, dofmap: DofMap, values) -> SparseSystem:
    """Impose Dirichlet values by row replacement.

    Rows of constrained dofs are zeroed, a unit diagonal is inserted and the
    right-hand side takes the boundary value.  The system loses symmetry;
    the direct solver does not rely on it.  For vector spaces ``values`` is
    called as ``values(x, y) -> (n_points, 2)`` on the scalar boundary
    coordinates; for scalar spaces as ``values(x, y) -> (n_points,)``.
    Constant arrays are accepted too.

    The system may be larger than the dof map (trailing multiplier blocks);
    the constrained dofs must occupy the leading block.
    """
    a = system.matrix.tocsr()
    nrows = a.shape[0]
    if dofmap.dof_count > nrows:
        raise ValueError("dof map larger than system")
    rows = dofmap.dirichlet_dofs()
    if rows.size == 0:
        return system

    scalar_idx = np.flatnonzero(dofmap.dirichlet_mask[:dofmap.n_scalar])
    xb = dofmap.dof_coordinates[scalar_idx, 0]
    yb = dofmap.dof_coordinates[scalar_idx, 1]
    if callable(values):
        vals = np.asarray(values(xb, yb), dtype=float)
    else:
        vals = np.broadcast_to(np.asarray(values, dtype=float),
                               (scalar_idx.size, dofmap.n_components)
                               if dofmap.n_components == 2 else scalar_idx.shape)
    if dofmap.n_components == 2:
        vals = vals.reshape(scalar_idx.size, 2)
        g = np.concatenate([vals[:, 0], vals[:, 1]])
    else:
        g = np.asarray(vals, dtype=float).ravel()

    keep = np.ones(nrows)
    keep[rows] = 0.0
    cleared = sp.diags(keep) @ a
    ident = sp.coo_matrix((np.ones(rows.size), (rows, rows)), shape=a.shape)
    matrix = (cleared + ident).tocsr()
    rhs = system.rhs.copy()
    rhs[rows] = g
    return SparseSystem(matrix=matrix, rhs=rhs)


def solve_direct(system: SparseSystem, residual_tol: float = 1e-10) -> np.ndarray:
    """Solve the system with a sparse LU factorization.

    Stores and returns the solution.  Verifies ``norm(A x - b) <=
    residual_tol * norm(b)`` (or ``x = 0`` exactly for ``b = 0``).

    Raises
    ------
    FactorizationError
        If the matrix is singular.
    SolveError
        If the verified residual exceeds the tolerance.
    """
    a = system.matrix.tocsc()
    try:
        lu = splu(a)
        x = lu.solve(system.rhs)
    except RuntimeError as exc:  # SuperLU signals singularity this way
        raise FactorizationError(
            f"sparse LU factorization failed: {exc}",
            pivot_index=_find_structural_zero(a),
        ) from exc
    if not np.all(np.isfinite(x)):
        raise FactorizationError(
            "sparse LU produced non-finite entries",
            pivot_index=_find_structural_zero(a),
        )
    bnorm = float(np.linalg.norm(system.rhs))
    rnorm = float(np.linalg.norm(a @ x - system.rhs))
    if bnorm == 0.0:
        if rnorm != 0.0:
            raise SolveError(f"zero rhs produced residual {rnorm:.3e}")
    elif rnorm > residual_tol * bnorm:
        raise SolveError(
            f"direct solve residual {rnorm:.3e} exceeds "
            f"{residual_tol:.1e} * {bnorm:.3e}")
    system.solution = x
    return x


def _find_structural_zero(a: sp.csc_matrix):
    """Index of an empty row or column if one exists, else None."""
    csr = a.tocsr()
    row_counts = np.diff(csr.indptr)
    empty = np.flatnonzero(row_counts == 0)
    if empty.size:
        return int(empty[0])
    col_counts = np.diff(a.tocsc().indptr)
    empty = np.flatnonzero(col_counts == 0)
    if empty.size:
        return int(empty[0])
    return None

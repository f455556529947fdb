"""Dense reference assemblies used to cross-check the sparse fast path.

Everything here is deliberately written the slow way: python loops over
triangles and quadrature nodes, cartesian shape functions, a collapsed
Gauss-Legendre product rule, and the weak forms restated from scratch.
None of it shares code with the package assembly beyond the dof numbering,
which is validated separately against dof coordinates.
"""

import numpy as np


def gauss_triangle(n=8):
    """Product Gauss rule on the reference triangle {xi, zeta >= 0, xi + zeta <= 1}.

    Returns reference points (m, 2) and weights summing to 1/2.  The
    collapse map xi = s, zeta = t (1 - s) costs one polynomial order in s,
    so the rule is exact up to total degree 2 n - 2.
    """
    x, w = np.polynomial.legendre.leggauss(n)
    s = 0.5 * (x + 1.0)
    ws = 0.5 * w
    pts = []
    wts = []
    for i in range(n):
        for j in range(n):
            pts.append((s[i], s[j] * (1.0 - s[i])))
            wts.append(ws[i] * ws[j] * (1.0 - s[i]))
    return np.array(pts), np.array(wts)


def gauss_edge(n=4):
    """Gauss rule on [0, 1], weights summing to 1."""
    x, w = np.polynomial.legendre.leggauss(n)
    return 0.5 * (x + 1.0), 0.5 * w


def p1_shapes(xi, zeta):
    return np.array([1.0 - xi - zeta, xi, zeta])


def p2_shapes(xi, zeta):
    lam0 = 1.0 - xi - zeta
    return np.array([
        lam0 * (2.0 * lam0 - 1.0),
        xi * (2.0 * xi - 1.0),
        zeta * (2.0 * zeta - 1.0),
        4.0 * xi * zeta,
        4.0 * zeta * lam0,
        4.0 * lam0 * xi,
    ])


def p2_shape_grads(xi, zeta):
    """Reference gradients of the six quadratic shapes, shape (6, 2)."""
    lam0 = 1.0 - xi - zeta
    return np.array([
        [1.0 - 4.0 * lam0, 1.0 - 4.0 * lam0],
        [4.0 * xi - 1.0, 0.0],
        [0.0, 4.0 * zeta - 1.0],
        [4.0 * zeta, 4.0 * xi],
        [-4.0 * zeta, 4.0 * (lam0 - zeta)],
        [4.0 * (lam0 - xi), -4.0 * xi],
    ])


P1_REF_GRADS = np.array([[-1.0, -1.0], [1.0, 0.0], [0.0, 1.0]])


def element(mesh, t):
    """Geometry of triangle ``t``: corners, jacobian, det, gradient map.

    Physical gradients are ``grad_map @ grad_ref`` per shape row.
    """
    v = mesh.vertices[mesh.triangles[t]]
    jac = np.array([[v[1, 0] - v[0, 0], v[2, 0] - v[0, 0]],
                    [v[1, 1] - v[0, 1], v[2, 1] - v[0, 1]]])
    det = jac[0, 0] * jac[1, 1] - jac[0, 1] * jac[1, 0]
    grad_map = np.linalg.inv(jac).T
    return v, jac, det, grad_map


def _iter_points(disc, n_gauss=8):
    """Yield (t, x, y, scale, p2 vals, p2 phys grads, p1 vals, p1 grads)."""
    pts, wts = gauss_triangle(n_gauss)
    mesh = disc.mesh
    for t in range(mesh.n_triangles):
        v, jac, det, grad_map = element(mesh, t)
        g1 = P1_REF_GRADS @ grad_map.T
        for (xi, zeta), w in zip(pts, wts):
            x, y = v[0] + jac @ np.array([xi, zeta])
            shp = p2_shapes(xi, zeta)
            g2 = p2_shape_grads(xi, zeta) @ grad_map.T
            yield t, x, y, w * abs(det), shp, g2, p1_shapes(xi, zeta), g1


def _as_velocity(disc, velocity):
    """Normalize a velocity spec to a per-element evaluator.

    Accepts a callable ``(x, y) -> (ax, ay)`` or component-blocked vector
    coefficients on the quadratic space.
    """
    if callable(velocity):
        return lambda t, shp, x, y: np.asarray(velocity(x, y), dtype=float)
    coeffs = np.asarray(velocity, dtype=float)
    n2 = disc.p2.n_scalar
    cells = disc.p2.cell_dofs

    def at(t, shp, x, y):
        loc = cells[t]
        return np.array([shp @ coeffs[:n2][loc], shp @ coeffs[n2:][loc]])
    return at


def dense_weighted_mass_p2(disc, weight=None):
    n2 = disc.p2.n_scalar
    cells = disc.p2.cell_dofs
    out = np.zeros((n2, n2))
    for t, x, y, scale, shp, _g2, _p1, _g1 in _iter_points(disc):
        w = 1.0 if weight is None else float(weight(x, y))
        out[np.ix_(cells[t], cells[t])] += scale * w * np.outer(shp, shp)
    return out


def dense_weighted_stiffness_p2(disc, weight=None):
    n2 = disc.p2.n_scalar
    cells = disc.p2.cell_dofs
    out = np.zeros((n2, n2))
    for t, x, y, scale, _shp, g2, _p1, _g1 in _iter_points(disc):
        w = 1.0 if weight is None else float(weight(x, y))
        out[np.ix_(cells[t], cells[t])] += scale * w * (g2 @ g2.T)
    return out


def dense_advection_p2(disc, velocity, weight=None):
    """Matrix of ``integral(w (a . grad trial) test)`` on the quadratic space."""
    n2 = disc.p2.n_scalar
    cells = disc.p2.cell_dofs
    vel = _as_velocity(disc, velocity)
    out = np.zeros((n2, n2))
    for t, x, y, scale, shp, g2, _p1, _g1 in _iter_points(disc):
        w = 1.0 if weight is None else float(weight(x, y))
        a = vel(t, shp, x, y)
        out[np.ix_(cells[t], cells[t])] += scale * w * np.outer(shp, g2 @ a)
    return out


def dense_directional_stiffness_p2(disc, a, b, weight=None):
    """Matrix of ``integral(w d_a(trial) d_b(test))`` on the quadratic space."""
    n2 = disc.p2.n_scalar
    cells = disc.p2.cell_dofs
    out = np.zeros((n2, n2))
    for t, x, y, scale, _shp, g2, _p1, _g1 in _iter_points(disc):
        w = 1.0 if weight is None else float(weight(x, y))
        out[np.ix_(cells[t], cells[t])] += scale * w * np.outer(g2[:, b], g2[:, a])
    return out


def dense_divergence_block(disc, component):
    """Matrix of ``-integral(test_p1 d_c(trial_p2))``, shape (n_p1, n_p2)."""
    n1, n2 = disc.p1.n_scalar, disc.p2.n_scalar
    out = np.zeros((n1, n2))
    for t, x, y, scale, _shp, g2, p1v, _g1 in _iter_points(disc):
        out[np.ix_(disc.p1.cell_dofs[t], disc.p2.cell_dofs[t])] += \
            -scale * np.outer(p1v, g2[:, component])
    return out


def dense_mass_p1(disc):
    n1 = disc.p1.n_scalar
    cells = disc.p1.cell_dofs
    out = np.zeros((n1, n1))
    for t, x, y, scale, _shp, _g2, p1v, _g1 in _iter_points(disc):
        out[np.ix_(cells[t], cells[t])] += scale * np.outer(p1v, p1v)
    return out


def dense_load_p2(disc, f):
    n2 = disc.p2.n_scalar
    cells = disc.p2.cell_dofs
    out = np.zeros(n2)
    for t, x, y, scale, shp, _g2, _p1, _g1 in _iter_points(disc):
        out[cells[t]] += scale * float(f(x, y)) * shp
    return out


def _p2_coord_index(disc):
    return {(round(float(x), 9), round(float(y), 9)): i
            for i, (x, y) in enumerate(disc.p2.dof_coordinates)}


def dense_boundary_load_p2(disc, flux, n_gauss=4):
    """Vector of ``integral_boundary(flux * test)`` on the quadratic space.

    Normals are recomputed from the edge geometry by orienting away from
    the domain center, independent of the mesh edge tags.
    """
    mesh = disc.mesh
    (x0, x1), (y0, y1) = mesh.bounds
    center = np.array([0.5 * (x0 + x1), 0.5 * (y0 + y1)])
    index = _p2_coord_index(disc)
    s, w = gauss_edge(n_gauss)
    # 1d quadratic trace shapes: endpoint 0, endpoint 1, midpoint.
    trace = np.column_stack([
        (1.0 - s) * (1.0 - 2.0 * s),
        s * (2.0 * s - 1.0),
        4.0 * s * (1.0 - s),
    ])
    out = np.zeros(disc.p2.n_scalar)
    for v0, v1, _tag in mesh.boundary_edges:
        p0 = mesh.vertices[v0]
        p1 = mesh.vertices[v1]
        edge = p1 - p0
        length = float(np.hypot(*edge))
        normal = np.array([edge[1], -edge[0]]) / length
        mid = 0.5 * (p0 + p1)
        if np.dot(normal, mid - center) < 0:
            normal = -normal
        dofs = [
            index[(round(float(p0[0]), 9), round(float(p0[1]), 9))],
            index[(round(float(p1[0]), 9), round(float(p1[1]), 9))],
            index[(round(float(mid[0]), 9), round(float(mid[1]), 9))],
        ]
        for k in range(len(s)):
            x = p0[0] + s[k] * edge[0]
            y = p0[1] + s[k] * edge[1]
            val = float(flux(x, y, normal[0], normal[1]))
            out[dofs] += w[k] * length * val * trace[k]
    return out


def dense_ac_system(disc, inp):
    """Dense restatement of one linearized phase solve.

    The linearization formulas are written out inline rather than imported
    so the comparison does not share them with the package.
    """
    p = inp.params
    a = p.gamma * p.dt / p.eta ** 2
    beta = p.beta
    n2 = disc.p2.n_scalar
    cells = disc.p2.cell_dofs
    phi_k = np.asarray(inp.phi_k, dtype=float)
    phi_n = np.asarray(inp.phi_n, dtype=float)
    uk = np.asarray(inp.u_k, dtype=float)
    matrix = np.zeros((n2, n2))
    rhs = np.zeros(n2)
    for t, x, y, scale, shp, g2, _p1, _g1 in _iter_points(disc):
        loc = cells[t]
        pk = float(shp @ phi_k[loc])
        pn = float(shp @ phi_n[loc])
        if inp.method == "newton":
            reaction = 1.0 + a * (beta - 1.0 + 3.0 * pk ** 2)
            src = pn + a * pk * (beta + 2.0 * pk ** 2)
        elif inp.method == "picard":
            reaction = 1.0 + a * (beta + pk ** 2 - 1.0)
            src = pn + a * beta * pk
        elif inp.method == "explicit":
            reaction = 1.0
            src = pn + a * (1.0 - pn ** 2) * pn
        else:
            raise ValueError(inp.method)
        vel = np.array([shp @ uk[:n2][loc], shp @ uk[n2:][loc]])
        matrix[np.ix_(loc, loc)] += scale * (
            reaction * np.outer(shp, shp)
            + p.dt * np.outer(shp, g2 @ vel)
            + p.gamma * p.dt * (g2 @ g2.T))
        if inp.source is not None:
            src = src + p.dt * float(inp.source(x, y))
        rhs[loc] += scale * src * shp
    if inp.neumann_flux is not None:
        rhs = rhs + p.gamma * p.dt * dense_boundary_load_p2(disc, inp.neumann_flux)
    return matrix, rhs


def _deformation(grad, comp):
    """Symmetric gradient of ``shape e_comp`` from its physical gradient."""
    d = np.zeros((2, 2))
    d[comp, :] += 0.5 * grad
    d[:, comp] += 0.5 * grad
    return d


def dense_ns_system(disc, inp):
    """Dense restatement of one penalized flow solve.

    Unknowns ordered as the package does: both velocity component blocks,
    then pressure.  The viscous pairing is contracted through explicit
    symmetric-gradient tensors instead of the directional-stiffness
    shortcut.
    """
    p = inp.params
    n2 = disc.p2.n_scalar
    n1 = disc.p1.n_scalar
    c2 = disc.p2.cell_dofs
    c1 = disc.p1.cell_dofs
    phi = np.asarray(inp.phi_k1, dtype=float)
    phi_n = np.asarray(inp.phi_n, dtype=float)
    rho_n = np.asarray(inp.rho_n, dtype=float)
    u_k = np.asarray(inp.u_k, dtype=float)
    u_n = np.asarray(inp.u_n, dtype=float)

    ntot = 2 * n2 + n1
    matrix = np.zeros((ntot, ntot))
    rhs = np.zeros(ntot)
    offsets = (0, n2)

    for t, x, y, scale, shp, g2, p1v, _g1 in _iter_points(disc):
        loc = c2[t]
        locp = c1[t] + 2 * n2
        pk = float(shp @ phi[loc])
        pn = float(shp @ phi_n[loc])
        rho = p.rho_bar + 0.5 * p.delta_rho * pk
        mu = p.mu_bar + 0.5 * p.delta_mu * pk
        rho_old = float(shp @ rho_n[loc])
        gp = g2.T @ phi[loc]
        ukx = float(shp @ u_k[:n2][loc])
        uky = float(shp @ u_k[n2:][loc])
        guk = np.column_stack([g2.T @ u_k[:n2][loc], g2.T @ u_k[n2:][loc]])
        div_mass_flux = (rho * (guk[0, 0] + guk[1, 1])
                         + 0.5 * p.delta_rho * (gp[0] * ukx + gp[1] * uky))

        mass = np.outer(shp, shp)
        adv = np.outer(shp, g2 @ np.array([ukx, uky]))
        scalar = (rho / p.dt) * mass + rho * adv + 0.5 * div_mass_flux * mass

        defs = [[_deformation(g2[i], c) for c in range(2)] for i in range(6)]
        for r in range(2):
            rs = offsets[r]
            for c in range(2):
                cs = offsets[c]
                block = np.zeros((6, 6))
                if r == c:
                    block += scalar
                for i in range(6):
                    for j in range(6):
                        block[i, j] += mu * np.tensordot(defs[i][r], defs[j][c])
                block += (p.sigma / p.gamma) * gp[c] * gp[r] * mass
                matrix[np.ix_(rs + loc, cs + loc)] += scale * block
        # Pressure coupling: -(q, div u) rows and their transpose column.
        for c in range(2):
            cs = offsets[c]
            div = -scale * np.outer(p1v, g2[:, c])
            matrix[np.ix_(locp, cs + loc)] += div
            matrix[np.ix_(cs + loc, locp)] += div.T
        matrix[np.ix_(locp, locp)] += -p.eps_pressure * scale * np.outer(p1v, p1v)

        rc = rho if rho > 0 else p.rho_min
        rc_old = rho_old if rho_old > 0 else p.rho_min
        sq = np.sqrt(rc * rc_old)
        unx = float(shp @ u_n[:n2][loc])
        uny = float(shp @ u_n[n2:][loc])
        lag = p.sigma / (p.gamma * p.dt) * (pk - pn)
        f1 = sq * unx / p.dt - lag * gp[0]
        f2 = sq * uny / p.dt - lag * gp[1]
        if inp.body_force is not None:
            g1v, g2v = inp.body_force(np.array(pk))
            f1 += float(g1v)
            f2 += float(g2v)
        if inp.forcing is not None:
            g1v, g2v = inp.forcing(x, y)
            f1 += float(g1v)
            f2 += float(g2v)
        rhs[loc] += scale * f1 * shp
        rhs[n2 + loc] += scale * f2 * shp
    return matrix, rhs


def entrywise_gap(dense_ref, sparse_actual):
    """Max entry difference scaled by the reference magnitude."""
    a = np.asarray(dense_ref)
    b = sparse_actual.toarray() if hasattr(sparse_actual, "toarray") \
        else np.asarray(sparse_actual)
    scale = max(1.0, float(np.abs(a).max()))
    return float(np.abs(a - b).max()) / scale

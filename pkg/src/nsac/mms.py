"""Manufactured solution fields, forcing terms and error norms.

The verification harness drives the coupled solver with analytic fields:
a phase profile quadratic in space and linear in time, a divergence-free
trigonometric velocity that vanishes on the boundary of the square, and a
zero-mean trigonometric pressure.  Forcing terms are the residuals of the
continuous equations at these fields, hand-coded from the analytic
derivatives; :func:`fd_forcing_ac` and :func:`fd_forcing_ns` recompute them
by central finite differences of the base closures alone, as an independent
check on the hand-coded algebra.

The phase profile leaves [-1, 1] near the end of the time window, so
max-principle style monitors do not apply to forced runs (the run driver
disables them).  The body force of the flow model is taken as zero here;
anything it would contribute is absorbed into the forcing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mixture import MixtureParams, mixture_density, mixture_viscosity, \
    potential_derivative


@dataclass(frozen=True)
class ManufacturedSolution:
    """Analytic reference fields on the square (-1, 1)^2.

    ``t_ref`` is the time-window length used by the reference runs; the
    phase profile is scaled so it crosses zero at ``x = 0`` exactly at
    ``t = t_ref``.
    """

    eta: float = 0.1
    gamma: float = 1.0

    @property
    def t_ref(self) -> float:
        return 10.0 * self.eta ** 2 / (13.0 * self.gamma)

    # -- base closures ----------------------------------------------------

    def phi(self, t, x, y):
        return t * (x + 2.0) ** 2 / (2.0 * self.t_ref) - 1.0

    def u(self, t, x, y):
        pi = np.pi
        u1 = pi * np.sin(2 * pi * y) * np.sin(pi * x) ** 2 * np.sin(t)
        u2 = -pi * np.sin(2 * pi * x) * np.sin(pi * y) ** 2 * np.sin(t)
        return u1, u2

    def p(self, t, x, y):
        return np.cos(np.pi * x) * np.sin(np.pi * y) * np.sin(t)

    # -- hand-coded derivatives ------------------------------------------

    def phi_t(self, t, x, y):
        return (x + 2.0) ** 2 / (2.0 * self.t_ref) + 0.0 * t

    def phi_grad(self, t, x, y):
        gx = t * (x + 2.0) / self.t_ref
        gy = np.zeros(np.broadcast(t, x, y).shape)
        return gx, gy

    def phi_lap(self, t, x, y):
        return t / self.t_ref + 0.0 * x

    def u_t(self, t, x, y):
        pi = np.pi
        u1 = pi * np.sin(2 * pi * y) * np.sin(pi * x) ** 2 * np.cos(t)
        u2 = -pi * np.sin(2 * pi * x) * np.sin(pi * y) ** 2 * np.cos(t)
        return u1, u2

    def u_grad(self, t, x, y):
        """Jacobian entries (u1_x, u1_y, u2_x, u2_y)."""
        pi = np.pi
        st = np.sin(t)
        u1_x = pi ** 2 * np.sin(2 * pi * y) * np.sin(2 * pi * x) * st
        u1_y = 2 * pi ** 2 * np.cos(2 * pi * y) * np.sin(pi * x) ** 2 * st
        u2_x = -2 * pi ** 2 * np.cos(2 * pi * x) * np.sin(pi * y) ** 2 * st
        u2_y = -pi ** 2 * np.sin(2 * pi * x) * np.sin(2 * pi * y) * st
        return u1_x, u1_y, u2_x, u2_y

    def u_second(self, t, x, y):
        """Second derivatives (u1_xx, u1_yy, u1_xy, u2_xx, u2_yy, u2_xy)."""
        pi = np.pi
        st = np.sin(t)
        u1_xx = 2 * pi ** 3 * np.sin(2 * pi * y) * np.cos(2 * pi * x) * st
        u1_yy = -4 * pi ** 3 * np.sin(2 * pi * y) * np.sin(pi * x) ** 2 * st
        u1_xy = 2 * pi ** 3 * np.cos(2 * pi * y) * np.sin(2 * pi * x) * st
        u2_xx = 4 * pi ** 3 * np.sin(2 * pi * x) * np.sin(pi * y) ** 2 * st
        u2_yy = -2 * pi ** 3 * np.sin(2 * pi * x) * np.cos(2 * pi * y) * st
        u2_xy = -2 * pi ** 3 * np.cos(2 * pi * x) * np.sin(2 * pi * y) * st
        return u1_xx, u1_yy, u1_xy, u2_xx, u2_yy, u2_xy

    def p_grad(self, t, x, y):
        pi = np.pi
        st = np.sin(t)
        px = -pi * np.sin(pi * x) * np.sin(pi * y) * st
        py = pi * np.cos(pi * x) * np.cos(pi * y) * st
        return px, py


def mms_eval(mms: ManufacturedSolution, t, x, y):
    """Evaluate the reference fields; returns ``(u1, u2, p, phi)``."""
    u1, u2 = mms.u(t, x, y)
    return u1, u2, mms.p(t, x, y), mms.phi(t, x, y)


def mms_forcing_ac(mms: ManufacturedSolution, params: MixtureParams, t, x, y):
    """Source of the phase equation at the reference fields.

    Residual of the continuous phase equation:
    ``phi_t + u . grad(phi) - gamma (lap(phi) - f(phi))``.
    """
    u1, u2 = mms.u(t, x, y)
    gx, gy = mms.phi_grad(t, x, y)
    fprime = potential_derivative(mms.phi(t, x, y), params.eta)
    return (mms.phi_t(t, x, y) + u1 * gx + u2 * gy
            - params.gamma * (mms.phi_lap(t, x, y) - fprime))


def mms_neumann_flux_ac(mms: ManufacturedSolution, t, x, y, nx, ny):
    """Outward normal derivative of the reference phase on the boundary.

    The phase equation is assembled with a natural (zero-flux) boundary
    term; the reference phase has a nonzero normal derivative on the
    vertical sides, so forced runs add this flux back on the right-hand
    side.
    """
    gx, gy = mms.phi_grad(t, x, y)
    return gx * nx + gy * ny


def mms_forcing_ns_terms(mms: ManufacturedSolution, params: MixtureParams,
                         t, x, y):
    """Named contributions to the momentum forcing; each a component pair.

    Keys: ``time`` (density-weighted time derivative written in square-root
    form), ``convection``, ``stabilization`` (half the mass-flux divergence
    times velocity), ``viscous`` (minus the divergence of the viscous
    stress), ``pressure``, ``capillary``.
    """
    u1, u2 = mms.u(t, x, y)
    phi = mms.phi(t, x, y)
    rho = mixture_density(params, phi)
    mu = mixture_viscosity(params, phi)
    gx, gy = mms.phi_grad(t, x, y)
    phi_t = mms.phi_t(t, x, y)
    u1_t, u2_t = mms.u_t(t, x, y)
    u1_x, u1_y, u2_x, u2_y = mms.u_grad(t, x, y)
    u1_xx, u1_yy, u1_xy, u2_xx, u2_yy, u2_xy = mms.u_second(t, x, y)
    px, py = mms.p_grad(t, x, y)

    rho_t = 0.5 * params.delta_rho * phi_t
    rho_gx = 0.5 * params.delta_rho * gx
    rho_gy = 0.5 * params.delta_rho * gy
    mu_gx = 0.5 * params.delta_mu * gx
    mu_gy = 0.5 * params.delta_mu * gy

    # sqrt(rho) d_t(sqrt(rho) u) = rho u_t + rho_t u / 2
    time = (rho * u1_t + 0.5 * rho_t * u1, rho * u2_t + 0.5 * rho_t * u2)
    convection = (rho * (u1 * u1_x + u2 * u1_y), rho * (u1 * u2_x + u2 * u2_y))
    div_u = u1_x + u2_y
    mass_div = rho * div_u + rho_gx * u1 + rho_gy * u2
    stabilization = (0.5 * mass_div * u1, 0.5 * mass_div * u2)

    # -div(mu D(u)) with D the symmetric gradient:
    # (div D)_1 = u1_xx + (u1_yy + u2_xy) / 2, and D . grad(mu) rows.
    d11 = u1_x
    d12 = 0.5 * (u1_y + u2_x)
    d22 = u2_y
    div_d1 = u1_xx + 0.5 * (u1_yy + u2_xy)
    div_d2 = 0.5 * (u1_xy + u2_xx) + u2_yy
    viscous = (-(mu * div_d1 + d11 * mu_gx + d12 * mu_gy),
               -(mu * div_d2 + d12 * mu_gx + d22 * mu_gy))

    pressure = (px, py)
    transport = phi_t + u1 * gx + u2 * gy
    coef = params.sigma / params.gamma
    capillary = (coef * transport * gx, coef * transport * gy)

    return {
        "time": time,
        "convection": convection,
        "stabilization": stabilization,
        "viscous": viscous,
        "pressure": pressure,
        "capillary": capillary,
    }


def mms_forcing_ns(mms: ManufacturedSolution, params: MixtureParams, t, x, y):
    """Momentum forcing at the reference fields; returns ``(f1, f2)``.

    Residual of the continuous momentum equation with zero body force.
    """
    terms = mms_forcing_ns_terms(mms, params, t, x, y)
    f1 = sum(pair[0] for pair in terms.values())
    f2 = sum(pair[1] for pair in terms.values())
    return f1, f2


def mms_forcing_ns_step(mms: ManufacturedSolution, params: MixtureParams,
                        t, dt, x, y):
    """Momentum forcing matched to the backward-difference time update.

    The coupled step advances the density-weighted velocity by a backward
    difference of ``sqrt(rho) u`` between time levels.  Building the source
    from that same difference makes the reference fields satisfy the update
    exactly in time, so run errors measure spatial resolution alone.
    :func:`mms_forcing_ns` sources the instantaneous derivative instead,
    which leaves a first-order-in-``dt`` residue; the reference density ramp
    is steep enough that the residue swamps spatial error on all but very
    coarse meshes.
    """
    terms = mms_forcing_ns_terms(mms, params, t, x, y)
    u1, u2 = mms.u(t, x, y)
    u1p, u2p = mms.u(t - dt, x, y)
    sr = np.sqrt(mixture_density(params, mms.phi(t, x, y)))
    sr_p = np.sqrt(mixture_density(params, mms.phi(t - dt, x, y)))
    time = (sr * (sr * u1 - sr_p * u1p) / dt,
            sr * (sr * u2 - sr_p * u2p) / dt)
    f1 = time[0] + sum(v[0] for k, v in terms.items() if k != "time")
    f2 = time[1] + sum(v[1] for k, v in terms.items() if k != "time")
    return f1, f2


# -- finite-difference oracle ----------------------------------------------


def fd_forcing_ac(mms: ManufacturedSolution, params: MixtureParams, t, x, y,
                  h: float = 1e-5):
    """Phase forcing recomputed by central differences of the base closures."""
    phi = mms.phi
    phi_t = (phi(t + h, x, y) - phi(t - h, x, y)) / (2 * h)
    gx = (phi(t, x + h, y) - phi(t, x - h, y)) / (2 * h)
    gy = (phi(t, x, y + h) - phi(t, x, y - h)) / (2 * h)
    lap = ((phi(t, x + h, y) - 2 * phi(t, x, y) + phi(t, x - h, y)) / h ** 2
           + (phi(t, x, y + h) - 2 * phi(t, x, y) + phi(t, x, y - h)) / h ** 2)
    u1, u2 = mms.u(t, x, y)
    fprime = potential_derivative(phi(t, x, y), params.eta)
    return phi_t + u1 * gx + u2 * gy - params.gamma * (lap - fprime)


def fd_forcing_ns(mms: ManufacturedSolution, params: MixtureParams, t, x, y,
                  h: float = 1e-5, h_outer: float = 1e-4):
    """Momentum forcing recomputed by central differences of the base closures.

    First derivatives use step ``h``.  The viscous term needs a derivative
    of a derivative; the outer difference uses the wider step ``h_outer`` to
    keep the amplified roundoff of nested differencing below the comparison
    tolerance.
    """
    def rho_at(tt, xx, yy):
        return mixture_density(params, mms.phi(tt, xx, yy))

    def mu_at(tt, xx, yy):
        return mixture_viscosity(params, mms.phi(tt, xx, yy))

    def sqrt_rho_u(tt, xx, yy):
        r = np.sqrt(rho_at(tt, xx, yy))
        u1, u2 = mms.u(tt, xx, yy)
        return r * u1, r * u2

    u1, u2 = mms.u(t, x, y)
    rho = rho_at(t, x, y)

    # Time term in square-root form.
    s_p = sqrt_rho_u(t + h, x, y)
    s_m = sqrt_rho_u(t - h, x, y)
    srt = np.sqrt(rho)
    time = (srt * (s_p[0] - s_m[0]) / (2 * h), srt * (s_p[1] - s_m[1]) / (2 * h))

    def ddx(f, tt, xx, yy):
        return (f(tt, xx + h, yy) - f(tt, xx - h, yy)) / (2 * h)

    def ddy(f, tt, xx, yy):
        return (f(tt, xx, yy + h) - f(tt, xx, yy - h)) / (2 * h)

    u1f = lambda tt, xx, yy: mms.u(tt, xx, yy)[0]
    u2f = lambda tt, xx, yy: mms.u(tt, xx, yy)[1]
    u1_x, u1_y = ddx(u1f, t, x, y), ddy(u1f, t, x, y)
    u2_x, u2_y = ddx(u2f, t, x, y), ddy(u2f, t, x, y)
    convection = (rho * (u1 * u1_x + u2 * u1_y), rho * (u1 * u2_x + u2 * u2_y))

    def rho_u1(tt, xx, yy):
        return rho_at(tt, xx, yy) * mms.u(tt, xx, yy)[0]

    def rho_u2(tt, xx, yy):
        return rho_at(tt, xx, yy) * mms.u(tt, xx, yy)[1]

    mass_div = ddx(rho_u1, t, x, y) + ddy(rho_u2, t, x, y)
    stabilization = (0.5 * mass_div * u1, 0.5 * mass_div * u2)

    # Viscous stress rows mu*D(u) as functions, then their divergence.
    def s11(tt, xx, yy):
        return mu_at(tt, xx, yy) * ddx(u1f, tt, xx, yy)

    def s12(tt, xx, yy):
        return mu_at(tt, xx, yy) * 0.5 * (ddy(u1f, tt, xx, yy)
                                          + ddx(u2f, tt, xx, yy))

    def s22(tt, xx, yy):
        return mu_at(tt, xx, yy) * ddy(u2f, tt, xx, yy)

    H = h_outer
    div_s1 = ((s11(t, x + H, y) - s11(t, x - H, y)) / (2 * H)
              + (s12(t, x, y + H) - s12(t, x, y - H)) / (2 * H))
    div_s2 = ((s12(t, x + H, y) - s12(t, x - H, y)) / (2 * H)
              + (s22(t, x, y + H) - s22(t, x, y - H)) / (2 * H))
    viscous = (-div_s1, -div_s2)

    pf = mms.p
    pressure = ((pf(t, x + h, y) - pf(t, x - h, y)) / (2 * h),
                (pf(t, x, y + h) - pf(t, x, y - h)) / (2 * h))

    phif = mms.phi
    phi_t = (phif(t + h, x, y) - phif(t - h, x, y)) / (2 * h)
    gx = (phif(t, x + h, y) - phif(t, x - h, y)) / (2 * h)
    gy = (phif(t, x, y + h) - phif(t, x, y - h)) / (2 * h)
    transport = phi_t + u1 * gx + u2 * gy
    coef = params.sigma / params.gamma
    capillary = (coef * transport * gx, coef * transport * gy)

    f1 = time[0] + convection[0] + stabilization[0] + viscous[0] \
        + pressure[0] + capillary[0]
    f2 = time[1] + convection[1] + stabilization[1] + viscous[1] \
        + pressure[1] + capillary[1]
    return f1, f2


# -- interpolation and error norms -----------------------------------------


def interpolate_state(disc, mms: ManufacturedSolution, params: MixtureParams,
                      t: float):
    """Nodal interpolant of the reference fields as a solver state."""
    from .mixture import State

    c2 = disc.p2.dof_coordinates
    c1 = disc.p1.dof_coordinates
    u1, u2 = mms.u(t, c2[:, 0], c2[:, 1])
    phi = mms.phi(t, c2[:, 0], c2[:, 1])
    p = mms.p(t, c1[:, 0], c1[:, 1])
    rho = mixture_density(params, phi)
    return State(u=np.concatenate([u1, u2]), p=p.copy(), phi=phi,
                 rho_prev=rho, t=t)


def step_errors(disc, mms: ManufacturedSolution, state) -> tuple:
    """L2 errors of velocity and phase against the reference at ``state.t``.

    Both are quadrature evaluations of the difference between the discrete
    field and the analytic field (not its interpolant).
    """
    xq = disc.qp[:, :, 0]
    yq = disc.qp[:, :, 1]
    u1h, u2h = disc.vector_at_qp(state.u)
    u1, u2 = mms.u(state.t, xq, yq)
    e_u = np.sqrt(disc.quadrature_integral((u1h - u1) ** 2 + (u2h - u2) ** 2))
    phih = disc.p2_at_qp(state.phi)
    phi = mms.phi(state.t, xq, yq)
    e_phi = np.sqrt(disc.quadrature_integral((phih - phi) ** 2))
    return float(e_u), float(e_phi)


def step_error_h1_phi(disc, mms: ManufacturedSolution, state) -> float:
    """H1 error of the phase against the reference at ``state.t``."""
    xq = disc.qp[:, :, 0]
    yq = disc.qp[:, :, 1]
    phih = disc.p2_at_qp(state.phi)
    phi = mms.phi(state.t, xq, yq)
    gh = disc.p2_grad_at_qp(state.phi)
    gx, gy = mms.phi_grad(state.t, xq, yq)
    sq = disc.quadrature_integral((phih - phi) ** 2
                                  + (gh[:, :, 0] - gx) ** 2
                                  + (gh[:, :, 1] - gy) ** 2)
    return float(np.sqrt(sq))


def error_norms(disc, mms: ManufacturedSolution, states) -> tuple:
    """Worst-over-time L2 errors ``(E_u, E_phi)`` for a state history."""
    e_u = 0.0
    e_phi = 0.0
    for state in states:
        eu, ep = step_errors(disc, mms, state)
        e_u = max(e_u, eu)
        e_phi = max(e_phi, ep)
    return e_u, e_phi

"""Linearized momentum and continuity solve inside the fixed-point loop.

Given the freshly updated phase, one pass solves a linear saddle-point
problem for velocity and pressure: variable-density mass and convection
terms use the mixture density of the new phase, convection is frozen at the
current velocity iterate and stabilized by half the mass-flux divergence,
the viscous term uses the mixture viscosity and the symmetric gradient, and
the capillary force is split into a part linear in the new velocity (kept
in the matrix, symmetric positive semidefinite) and a phase-lag part moved
to the right-hand side.  The coupling of the new density to the previous
one in the time term goes through the pointwise geometric mean of the two
density fields.

The continuity equation carries a small pressure penalization so the system
factorizes without a null space; the resulting divergence residual scales
with the penalization and is recorded by the solver.  Velocity boundary
conditions are imposed by row replacement.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .assembly import Discretization, SparseSystem, apply_dirichlet, solve_direct
from .mixture import MixtureParams, mixture_density, mixture_viscosity

log = logging.getLogger(__name__)


class AssemblyError(ValueError):
    """A coefficient field took an inadmissible value during assembly."""


@dataclass
class NsStepInput:
    """Inputs of one linearized flow solve.

    Attributes
    ----------
    u_n : ndarray
        Velocity at the previous time level.
    rho_n : ndarray
        Density coefficients at the previous time level (quadratic field).
    u_k : ndarray
        Current velocity iterate, used for the frozen convection field.
    phi_k1 : ndarray
        Freshly updated phase iterate.
    phi_n : ndarray
        Phase at the previous time level.
    params : MixtureParams
    body_force : callable or None
        ``body_force(phi_qp) -> (f1, f2)`` evaluated at quadrature points;
        None means zero.
    forcing : callable or None
        Momentum source ``forcing(x, y) -> (f1, f2)`` at the target time,
        used by forced verification runs.
    dirichlet_values : callable or None
        Velocity trace ``g(x, y) -> (n, 2)`` on the boundary; None means
        homogeneous no-slip.
    """

    u_n: np.ndarray
    rho_n: np.ndarray
    u_k: np.ndarray
    phi_k1: np.ndarray
    phi_n: np.ndarray
    params: MixtureParams
    body_force: object = None
    forcing: object = None
    dirichlet_values: object = None


@dataclass
class NsStepResult:
    u: np.ndarray
    p: np.ndarray
    div_residual: float
    clamped_qp: int


def assemble_ns(disc: Discretization, inp: NsStepInput) -> SparseSystem:
    """Assemble the penalized saddle-point system of one flow update.

    Unknown layout: the two velocity component blocks first, then pressure.
    The matrix is ``[[A, Bt], [B, -eps Mp]]`` where ``B`` is the negative
    divergence coupling; Dirichlet rows are applied by the caller via
    :func:`solve_ns_step`.

    Raises
    ------
    AssemblyError
        If the mixture viscosity is nonpositive at any quadrature point
        (possible when the phase overshoots [-1, 1] and the two fluids have
        different viscosities).
    """
    p = inp.params
    nt, nq = disc.wj.shape
    n2 = disc.p2.n_scalar
    n1 = disc.p1.n_scalar

    phi_q = disc.p2_at_qp(inp.phi_k1)
    phi_n_q = disc.p2_at_qp(inp.phi_n)
    rho_q = mixture_density(p, phi_q)
    mu_q = mixture_viscosity(p, phi_q)
    if np.any(mu_q <= 0.0):
        t_idx, q_idx = np.unravel_index(int(np.argmin(mu_q)), mu_q.shape)
        xq, yq = disc.qp[t_idx, q_idx]
        raise AssemblyError(
            f"nonpositive viscosity {mu_q[t_idx, q_idx]:.3e} at quadrature "
            f"point ({xq:.4f}, {yq:.4f}) in triangle {t_idx}; the phase is "
            f"far outside [-1, 1]")

    rho_n_q = disc.p2_at_qp(inp.rho_n)
    # Geometric mean of old and new density; overshoot can push a value
    # negative, in which case it is clamped at the smaller pure-fluid
    # density before the square root.
    clamped = int(np.count_nonzero(rho_q <= 0.0)
                  + np.count_nonzero(rho_n_q <= 0.0))
    if clamped:
        log.warning("clamped %d negative density quadrature values at rho_min",
                    clamped)
    rho_clamped = np.where(rho_q <= 0.0, p.rho_min, rho_q)
    rho_n_clamped = np.where(rho_n_q <= 0.0, p.rho_min, rho_n_q)
    sqrt_mean = np.sqrt(rho_clamped * rho_n_clamped)

    ukx, uky = disc.vector_at_qp(inp.u_k)
    gkx, gky = disc.vector_grad_at_qp(inp.u_k)
    grad_phi = disc.p2_grad_at_qp(inp.phi_k1)
    gpx = grad_phi[:, :, 0]
    gpy = grad_phi[:, :, 1]

    # Scalar blocks shared by both velocity components.
    mass_rho = disc.weighted_mass_p2(rho_q / p.dt)
    conv = disc.advection_p2(ukx, uky, weight_qp=rho_q)
    div_mass_flux = (rho_q * (gkx[:, :, 0] + gky[:, :, 1])
                     + 0.5 * p.delta_rho * (gpx * ukx + gpy * uky))
    temam = disc.weighted_mass_p2(0.5 * div_mass_flux)
    common = mass_rho + conv + temam

    # Viscous blocks from the symmetric gradient pairing.
    one = mu_q
    half = 0.5 * mu_q
    a11 = common + disc.directional_stiffness_p2(0, 0, one) \
        + disc.directional_stiffness_p2(1, 1, half)
    a22 = common + disc.directional_stiffness_p2(1, 1, one) \
        + disc.directional_stiffness_p2(0, 0, half)
    # Cross block (test component r, trial component c): 0.5 mu d_r(trial) d_c(test).
    a12 = disc.directional_stiffness_p2(0, 1, half)
    a21 = disc.directional_stiffness_p2(1, 0, half)

    # Capillary coupling, linear in the new velocity: (sigma/gamma)
    # (u . grad phi)(grad phi . v), a weighted rank-one pairing of the
    # phase gradient components.
    cc = p.sigma / p.gamma
    a11 = a11 + disc.weighted_mass_p2(cc * gpx * gpx)
    a12 = a12 + disc.weighted_mass_p2(cc * gpx * gpy)
    a21 = a21 + disc.weighted_mass_p2(cc * gpy * gpx)
    a22 = a22 + disc.weighted_mass_p2(cc * gpy * gpy)

    bx = disc.divergence_block(0)
    by = disc.divergence_block(1)
    penalty = (-p.eps_pressure) * disc.mass_p1

    matrix = sp.bmat([
        [a11, a12, bx.T],
        [a21, a22, by.T],
        [bx, by, penalty],
    ], format="csr")

    # Right-hand side: body force, forcing, time coupling, phase-lag part
    # of the capillary force.
    unx, uny = disc.vector_at_qp(inp.u_n)
    f1 = sqrt_mean * unx / p.dt
    f2 = sqrt_mean * uny / p.dt
    lag = (p.sigma / (p.gamma * p.dt)) * (phi_q - phi_n_q)
    f1 = f1 - lag * gpx
    f2 = f2 - lag * gpy
    if inp.body_force is not None:
        g1, g2 = inp.body_force(phi_q)
        f1 = f1 + g1
        f2 = f2 + g2
    if inp.forcing is not None:
        g1, g2 = inp.forcing(disc.qp[:, :, 0], disc.qp[:, :, 1])
        f1 = f1 + g1
        f2 = f2 + g2
    rhs = np.concatenate([disc.load_p2(f1), disc.load_p2(f2), np.zeros(n1)])
    system = SparseSystem(matrix=matrix, rhs=rhs)
    system.clamped_qp = clamped  # type: ignore[attr-defined]
    return system


def solve_ns_step(disc: Discretization, inp: NsStepInput) -> NsStepResult:
    """Assemble, constrain and solve one flow update.

    Applies the velocity Dirichlet rows, solves the penalized system with
    the direct factorization, shifts the pressure to zero mean, and records
    the algebraic divergence residual ``norm(B u)`` (which the penalization
    ties to ``eps * norm(Mp p)``).
    """
    p = inp.params
    system = assemble_ns(disc, inp)
    clamped = getattr(system, "clamped_qp", 0)
    values = inp.dirichlet_values
    if values is None:
        values = np.zeros(2)
    system = apply_dirichlet(system, disc.v2, values)
    sol = solve_direct(system)

    n2 = disc.p2.n_scalar
    u = sol[:2 * n2]
    press = sol[2 * n2:]
    # Orthogonality shift: remove the mean so pressure is unique.
    area = disc.mesh.area
    mean = float((disc.mass_p1 @ press).sum()) / area
    press = press - mean

    div = disc.divergence_block(0) @ u[:n2] + disc.divergence_block(1) @ u[n2:]
    return NsStepResult(u=u, p=press, div_residual=float(np.linalg.norm(div)),
                        clamped_qp=clamped)

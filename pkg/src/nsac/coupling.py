"""Strongly coupled fixed-point time stepping.

Each time step freezes the previous state and iterates: solve the
linearized phase update at the current iterates, rebuild density and
viscosity from the new phase, then solve the linearized flow update.  The
loop stops when the sum of the L2 norms of the phase and velocity
variations between consecutive iterates falls below the tolerance; every
pass costs exactly one phase solve and one flow solve, so the iteration
count equals the flow-solve count.

The iteration is started from the previous time level.  A hard cap on the
iteration count turns stagnation into an error that carries the variation
history for post-mortem inspection.
"""

from __future__ import annotations

import dataclasses
import math
from dataclasses import dataclass, field

import numpy as np

from . import diagnostics
from .allen_cahn import AcStepInput, solve_ac_step
from .assembly import Discretization
from .diagnostics import (BoundMonitor, ContractionEstimate,
                          check_max_principle, check_phase_bounds,
                          check_velocity_bounds, enforce, estimate_contraction)
from .mixture import (EXPLICIT, NEWTON, PICARD, MixtureParams, State,
                      mixture_density)
from .navier_stokes import NsStepInput, solve_ns_step

#: Solver-level method names and the potential linearization each uses.
METHOD_LINEARIZATION = {"fin": NEWTON, "fip": PICARD, "sce": EXPLICIT}

#: Stabilization threshold above which the max principle is guaranteed for
#: each method (the explicit variant has no such guarantee).
BETA_THRESHOLDS = {"fin": 9.0 / 8.0, "fip": 2.0}


class NonConvergenceError(RuntimeError):
    """The fixed-point iteration hit its cap without converging.

    Attributes
    ----------
    variation_history : list of float
        Stopping-criterion values of every iteration performed.
    step_index : int
    reports : list
        Reports of the completed steps, attached by the run driver.
    """

    def __init__(self, message, variation_history, step_index):
        super().__init__(message)
        self.variation_history = list(variation_history)
        self.step_index = step_index
        self.reports = []


@dataclass(frozen=True)
class SolverConfig:
    """Driver settings for a coupled run.

    ``method`` picks the potential linearization: ``fin`` (Newton),
    ``fip`` (Picard) or ``sce`` (explicit potential, still iterated in the
    same strongly coupled loop).  ``monitors_enabled`` toggles individual
    monitor groups; ``strict_monitors`` turns violations into errors.
    ``mms_enabled`` switches on the manufactured forcing, which also
    disables the bound monitors that presuppose an unforced run.
    """

    method: str = "fin"
    tol_fixed_point: float = 1e-9
    max_fixed_point_iters: int = 100
    t_final: float = 10.0 / 1300.0
    mms_enabled: bool = False
    strict_monitors: bool = False
    monitors_enabled: dict = field(default_factory=lambda: {
        "max_principle": True,
        "phase_bounds": True,
        "velocity_bounds": True,
        "divergence": True,
    })

    def __post_init__(self):
        if self.method not in METHOD_LINEARIZATION:
            raise ValueError(f"unknown method {self.method!r}; expected one "
                             f"of {sorted(METHOD_LINEARIZATION)}")
        if self.tol_fixed_point <= 0:
            raise ValueError("tol_fixed_point must be positive")
        if self.max_fixed_point_iters < 1:
            raise ValueError("max_fixed_point_iters must be at least 1")
        if self.t_final < 0:
            raise ValueError("t_final must be nonnegative")


@dataclass(frozen=True)
class AdmissibilityReport:
    """Outcome of the parameter admissibility check.

    The check reports and warns but never refuses a run: the time-step
    condition and the stabilization thresholds are sufficient conditions of
    the theory, not prerequisites of the algorithm.
    """

    dt_ok: bool
    dt_limit: float
    beta_max_principle_ok: bool
    beta_threshold: float | None
    warnings: tuple


def admissibility_check(params: MixtureParams, method: str) -> AdmissibilityReport:
    """Check the explicit sufficient conditions of the convergence theory.

    ``dt_ok`` requires the time step to lie strictly below
    ``eta**2 / (13 gamma)``; the stabilization check requires ``beta`` at
    or above the method's max-principle threshold (vacuously true for the
    explicit method).  Only the explicitly computable conditions are
    checked; the fully sharp ones involve non-explicit constants.
    """
    if method not in METHOD_LINEARIZATION:
        raise ValueError(f"unknown method {method!r}")
    warnings = []
    dt_ok = params.dt < params.dt_limit
    if not dt_ok:
        warnings.append(
            f"dt={params.dt:.6e} is not below the contraction limit "
            f"{params.dt_limit:.6e}; convergence of the iteration is not "
            f"guaranteed")
    threshold = BETA_THRESHOLDS.get(method)
    if threshold is None:
        beta_ok = True
    else:
        beta_ok = params.beta >= threshold
        if not beta_ok:
            warnings.append(
                f"beta={params.beta:g} is below the max-principle threshold "
                f"{threshold:g} for method {method!r}; the phase may leave "
                f"[-1, 1] (the threshold is sufficient, not necessary)")
    return AdmissibilityReport(dt_ok=dt_ok, dt_limit=params.dt_limit,
                               beta_max_principle_ok=beta_ok,
                               beta_threshold=threshold,
                               warnings=tuple(warnings))


@dataclass
class StepReport:
    """Everything recorded about one time step.

    ``variation_norms`` holds the stopping-criterion value of each
    iteration (L2 phase variation plus L2 velocity variation);
    ``contraction`` is estimated from the companion history that measures
    the velocity variation in the gradient seminorm.  ``error_norms`` is
    ``(E_u, E_phi)`` against the manufactured reference when forcing is
    active, else None.
    """

    step_index: int
    time: float
    fixed_point_iterations: int
    ns_solves: int
    ac_solves: int
    variation_norms: list
    contraction: ContractionEstimate
    max_abs_phi: float
    bound_monitors: list
    monitors_passed: bool
    div_residual: float
    stabilization_residual: float
    error_norms: tuple | None = None
    error_h1_phi: float | None = None
    clamped_qp: int = 0


@dataclass
class ForcingContext:
    """Time-dependent sources and boundary data for forced runs.

    Each attribute is a callable of the target time returning the spatial
    callable the assemblers expect; ``ns_source`` also receives the step
    size, because the momentum source is matched to the backward-difference
    time term (see :func:`nsac.mms.mms_forcing_ns_step`).
    """

    ac_source: object
    ac_neumann: object
    ns_source: object
    dirichlet: object

    @classmethod
    def from_mms(cls, mms, params: MixtureParams) -> "ForcingContext":
        from . import mms as mmsmod

        def ac_source(t):
            return lambda x, y: mmsmod.mms_forcing_ac(mms, params, t, x, y)

        def ac_neumann(t):
            return lambda x, y, nx, ny: mmsmod.mms_neumann_flux_ac(
                mms, t, x, y, nx, ny)

        def ns_source(t, dt):
            return lambda x, y: mmsmod.mms_forcing_ns_step(
                mms, params, t, dt, x, y)

        def dirichlet(t):
            def trace(x, y):
                u1, u2 = mms.u(t, x, y)
                return np.column_stack([np.broadcast_to(u1, x.shape),
                                        np.broadcast_to(u2, x.shape)])
            return trace

        return cls(ac_source=ac_source, ac_neumann=ac_neumann,
                   ns_source=ns_source, dirichlet=dirichlet)


@dataclass
class SimulationResult:
    reports: list
    state: State


def fixed_point_step(disc: Discretization, params: MixtureParams,
                     config: SolverConfig, state_n: State,
                     forcing: ForcingContext | None = None,
                     body_force=None, step_index: int = 0) -> tuple:
    """Advance one time step with the strongly coupled iteration.

    Returns ``(state, report)``.

    Raises
    ------
    NonConvergenceError
        If the variation has not dropped below the tolerance within the
        iteration cap.
    """
    linearization = METHOD_LINEARIZATION[config.method]
    t_new = state_n.t + params.dt

    ac_source = ac_neumann = ns_source = dirichlet = None
    if forcing is not None:
        ac_source = forcing.ac_source(t_new)
        ac_neumann = forcing.ac_neumann(t_new)
        ns_source = forcing.ns_source(t_new, params.dt)
        dirichlet = forcing.dirichlet(t_new)

    forced = forcing is not None
    mon = config.monitors_enabled
    use_max_principle = mon.get("max_principle", True) and not forced
    use_phase_bounds = mon.get("phase_bounds", True) and not forced
    use_velocity_bounds = mon.get("velocity_bounds", True) and not forced
    use_divergence = mon.get("divergence", True)

    phi_k = state_n.phi
    u_k = state_n.u
    p_k = state_n.p
    last_dphi = 0.0
    variations = []
    grad_variations = []
    monitors_worst: dict = {}
    monitors_ok = True
    max_abs_phi = 0.0
    div_residual = 0.0
    clamped = 0

    def record(monitors):
        nonlocal monitors_ok
        for m in monitors:
            worst = monitors_worst.get(m.name)
            if worst is None or m.margin < worst.margin:
                monitors_worst[m.name] = m
            if not m.passed:
                monitors_ok = False
        enforce(monitors, config.strict_monitors)

    converged = False
    iters = 0
    for k in range(config.max_fixed_point_iters):
        ac_res = solve_ac_step(disc, AcStepInput(
            phi_n=state_n.phi, phi_k=phi_k, u_k=u_k,
            method=linearization, params=params,
            source=ac_source, neumann_flux=ac_neumann))
        phi_new = ac_res.phi
        max_abs_phi = max(max_abs_phi, ac_res.max_abs_phi)

        iter_monitors = []
        if use_max_principle:
            iter_monitors.append(check_max_principle(phi_new))
        if use_phase_bounds:
            iter_monitors.extend(check_phase_bounds(disc, phi_new, params))

        ns_res = solve_ns_step(disc, NsStepInput(
            u_n=state_n.u, rho_n=state_n.rho_prev, u_k=u_k,
            phi_k1=phi_new, phi_n=state_n.phi, params=params,
            body_force=body_force, forcing=ns_source,
            dirichlet_values=dirichlet))
        u_new = ns_res.u
        div_residual = max(div_residual, ns_res.div_residual)
        clamped += ns_res.clamped_qp

        if use_velocity_bounds:
            iter_monitors.extend(check_velocity_bounds(
                disc, u_new, phi_new, state_n.u, params))
        if use_divergence:
            p_norm = float(np.linalg.norm(ns_res.p))
            iter_monitors.append(BoundMonitor(
                "divergence", 10.0 * params.eps_pressure * p_norm,
                ns_res.div_residual))
        record(iter_monitors)

        dphi = disc.norm_p2(phi_new - phi_k)
        du = disc.norm_vector(u_new - u_k)
        variations.append(dphi + du)
        grad_variations.append(dphi + disc.seminorm_vector(u_new - u_k))
        last_dphi = dphi

        phi_k = phi_new
        u_k = u_new
        p_k = ns_res.p
        iters = k + 1
        if variations[-1] < config.tol_fixed_point:
            converged = True
            break

    if not converged:
        raise NonConvergenceError(
            f"fixed-point iteration did not reach {config.tol_fixed_point:.1e} "
            f"within {config.max_fixed_point_iters} iterations "
            f"(last variation {variations[-1]:.3e})",
            variation_history=variations, step_index=step_index)

    # At exit the stabilization term is proportional to the last phase
    # variation, hence tolerance-consistent by construction; record it.
    stab = params.gamma * params.beta / params.eta ** 2 * last_dphi

    state = State(u=u_k, p=p_k, phi=phi_k,
                  rho_prev=mixture_density(params, phi_k), t=t_new)
    report = StepReport(
        step_index=step_index,
        time=t_new,
        fixed_point_iterations=iters,
        ns_solves=iters,
        ac_solves=iters,
        variation_norms=variations,
        contraction=estimate_contraction(grad_variations),
        max_abs_phi=max_abs_phi,
        bound_monitors=sorted(monitors_worst.values(), key=lambda m: m.name),
        monitors_passed=monitors_ok,
        div_residual=div_residual,
        stabilization_residual=stab,
        clamped_qp=clamped,
    )
    return state, report


def run_simulation(disc: Discretization, params: MixtureParams,
                   config: SolverConfig, initial: State, sink=None,
                   mms=None, body_force=None) -> SimulationResult:
    """Step from the initial state to the final time.

    The step size is ``params.dt`` except for a possibly truncated final
    step that lands exactly on ``t_final``.  Completed steps stream to
    ``sink`` as ``sink(report, state)``; when the forcing is active,
    per-step reference errors are attached to each report.  On
    non-convergence the partial reports are preserved on the raised error.
    """
    from . import mms as mmsmod

    forcing = None
    if config.mms_enabled:
        if mms is None:
            mms = mmsmod.ManufacturedSolution(eta=params.eta,
                                              gamma=params.gamma)
        forcing = ForcingContext.from_mms(mms, params)

    reports = []
    state = initial.copy()
    t_end = initial.t + config.t_final
    step_index = 0
    rel = max(abs(t_end), 1.0)
    while state.t < t_end - 1e-12 * rel:
        dt = min(params.dt, t_end - state.t)
        step_params = params if dt == params.dt \
            else dataclasses.replace(params, dt=dt)
        try:
            state, report = fixed_point_step(
                disc, step_params, config, state, forcing=forcing,
                body_force=body_force, step_index=step_index)
        except NonConvergenceError as exc:
            exc.reports = reports
            raise
        if config.mms_enabled:
            report.error_norms = mmsmod.step_errors(disc, mms, state)
            report.error_h1_phi = mmsmod.step_error_h1_phi(disc, mms, state)
        reports.append(report)
        if sink is not None:
            sink(report, state)
        step_index += 1
    return SimulationResult(reports=reports, state=state)

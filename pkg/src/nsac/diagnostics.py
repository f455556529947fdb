"""Runtime monitors for the a priori bounds and contraction estimation.

Every quantity the scheme's stability theory controls has a computable
bound built from the physical parameters and the previous time level alone:
the phase stays at or below the measure of the domain in the L2 norm, its
gradient is controlled by a mesh-independent constant, and the velocity,
its symmetric gradient and the capillary transport term are controlled by
constants assembled from the density contrast and the phase-gradient bound.
The monitors evaluate each observed norm after a solve and compare it with
the matching constant; by default they only record pass/fail, and a strict
mode turns violations into errors.

These bounds presuppose an unforced run whose previous phase stays inside
[-1, 1]; the run driver therefore disables them (and the max-principle
check) when verification forcing is active.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .mixture import MixtureParams

#: Multiplicative headroom applied to the constants in strict mode before a
#: violation raises; the default monitors compare against the bare constant
#: up to roundoff.
STRICT_SLACK = 1.0 + 1e-8
_ROUNDOFF = 1.0 + 1e-12


class MonitorViolation(RuntimeError):
    """A strict-mode monitor observed a value above its bound."""


@dataclass(frozen=True)
class BoundMonitor:
    """Result of checking one observed norm against its bound.

    ``passed`` is ``observed <= constant * slack`` up to roundoff.
    """

    name: str
    constant_value: float
    observed_value: float
    slack: float = 1.0

    @property
    def passed(self) -> bool:
        return self.observed_value <= self.constant_value * self.slack * _ROUNDOFF

    @property
    def margin(self) -> float:
        """Remaining headroom; negative when violated."""
        return self.constant_value * self.slack - self.observed_value


# -- bound constants -------------------------------------------------------


def phase_norm_bound(domain_area: float) -> float:
    """L2 bound on the phase: the square root of the domain measure."""
    return math.sqrt(domain_area)


def phase_gradient_bound(params: MixtureParams, domain_area: float) -> float:
    """Mesh-independent L2 bound on the phase gradient after one update."""
    gdt = params.gamma * params.dt
    return math.sqrt(domain_area / gdt) * math.sqrt(
        1.0 + params.alpha * (params.beta + 2.0))


def velocity_norm_bound(params: MixtureParams, domain_area: float,
                        u_n_norm: float) -> float:
    """L2 bound on the velocity after one update.

    Built from (i) the body-force contribution over one step, (ii) the
    previous velocity amplified by the density ratio, and (iii) the
    capillary contribution through the phase-gradient bound.
    """
    c_grad = phase_gradient_bound(params, domain_area)
    return (params.dt * math.sqrt(domain_area) / params.rho_min
            + (params.rho_max / params.rho_min) * u_n_norm
            + params.sigma * c_grad / (params.rho_min * params.gamma))


def deformation_bound(params: MixtureParams, domain_area: float,
                      u_n_norm: float) -> float:
    """L2 bound on the symmetric velocity gradient after one update."""
    c_u = velocity_norm_bound(params, domain_area, u_n_norm)
    return math.sqrt(params.rho_min / params.mu_min) * c_u / math.sqrt(params.dt)


def transport_bound(params: MixtureParams, domain_area: float,
                    u_n_norm: float) -> float:
    """L2 bound on the capillary transport term ``u . grad(phi)``."""
    c_u = velocity_norm_bound(params, domain_area, u_n_norm)
    return math.sqrt(params.gamma * params.rho_min / params.sigma) \
        * c_u / math.sqrt(params.dt)


# -- monitor evaluation ----------------------------------------------------


def check_phase_bounds(disc, phi: np.ndarray, params: MixtureParams,
                       slack: float = 1.0):
    """Monitors for the phase L2 norm and phase gradient norm."""
    area = disc.mesh.area
    return (
        BoundMonitor("phase_l2", phase_norm_bound(area),
                     disc.norm_p2(phi), slack),
        BoundMonitor("phase_grad_l2", phase_gradient_bound(params, area),
                     disc.seminorm_p2(phi), slack),
    )


def check_velocity_bounds(disc, u: np.ndarray, phi: np.ndarray,
                          u_n: np.ndarray, params: MixtureParams,
                          slack: float = 1.0):
    """Monitors for the velocity, symmetric gradient and transport norms."""
    area = disc.mesh.area
    u_n_norm = disc.norm_vector(u_n)
    grad_phi = disc.p2_grad_at_qp(phi)
    ux, uy = disc.vector_at_qp(u)
    transport = ux * grad_phi[:, :, 0] + uy * grad_phi[:, :, 1]
    transport_norm = math.sqrt(max(disc.quadrature_integral(transport ** 2), 0.0))
    return (
        BoundMonitor("velocity_l2", velocity_norm_bound(params, area, u_n_norm),
                     disc.norm_vector(u), slack),
        BoundMonitor("deformation_l2", deformation_bound(params, area, u_n_norm),
                     disc.deformation_norm(u), slack),
        BoundMonitor("transport_l2", transport_bound(params, area, u_n_norm),
                     transport_norm, slack),
    )


def check_max_principle(phi: np.ndarray, tol: float = 1e-6) -> BoundMonitor:
    """Sup-norm monitor on the phase dof values against 1."""
    return BoundMonitor("phase_sup", 1.0, float(np.abs(phi).max()),
                        slack=1.0 + tol)


def enforce(monitors, strict: bool):
    """Raise on the first violated monitor when ``strict`` is set."""
    if not strict:
        return
    for mon in monitors:
        widened = BoundMonitor(mon.name, mon.constant_value,
                               mon.observed_value, mon.slack * STRICT_SLACK)
        if not widened.passed:
            raise MonitorViolation(
                f"monitor {mon.name}: observed {mon.observed_value:.6e} "
                f"exceeds bound {mon.constant_value:.6e}")


# -- contraction estimation ------------------------------------------------


@dataclass(frozen=True)
class ContractionEstimate:
    """Empirical contraction behavior of one fixed-point solve.

    ``ratios`` holds successive quotients of the iterate-difference norms;
    ``geometric_fit`` is the least-squares geometric decay factor of the
    difference history (NaN when degenerate).  ``degenerate`` marks
    histories too short or too small to estimate from; ``stagnating`` marks
    fits at or above one.
    """

    ratios: tuple
    geometric_fit: float
    degenerate: bool
    stagnating: bool


#: Differences below this are indistinguishable from roundoff and end the
#: usable part of a history.
_FLOOR = 1e-15


def estimate_contraction(history) -> ContractionEstimate:
    """Estimate the geometric decay of an iterate-difference history.

    Parameters
    ----------
    history : sequence of float
        Norms of successive iterate differences, one per iteration.

    Returns
    -------
    ContractionEstimate
        Ratios ``d[k+1] / d[k]`` and the slope fit ``exp(lsq slope of
        log d)``.  Histories with fewer than two usable entries produce an
        empty, degenerate estimate.
    """
    d = [float(v) for v in history]
    usable = []
    for v in d:
        if v < _FLOOR:
            break
        usable.append(v)
    if len(usable) < 2:
        return ContractionEstimate(ratios=(), geometric_fit=float("nan"),
                                   degenerate=True, stagnating=False)
    ratios = tuple(usable[k + 1] / usable[k] for k in range(len(usable) - 1))
    logs = np.log(usable)
    k = np.arange(len(usable))
    slope = np.polyfit(k, logs, 1)[0]
    fit = float(np.exp(slope))
    return ContractionEstimate(ratios=ratios, geometric_fit=fit,
                               degenerate=False, stagnating=fit >= 1.0)

"""Initial states for the built-in run scenarios.

Two scenarios cover the verification and diagnostics needs: the forced
run starting from the interpolated reference fields, and an unforced
quiescent state with a circular diffuse interface at rest, used to exercise
the bound monitors and the contraction estimator on physical dynamics.
"""

from __future__ import annotations

import numpy as np

from .assembly import Discretization
from .mixture import MixtureParams, State, mixture_density
from .mms import ManufacturedSolution, interpolate_state

MMS, QUIESCENT = "mms", "quiescent"
SCENARIOS = (MMS, QUIESCENT)


def mms_initial_state(disc: Discretization, params: MixtureParams,
                      mms: ManufacturedSolution | None = None) -> State:
    """Interpolant of the reference fields at time zero."""
    if mms is None:
        mms = ManufacturedSolution(eta=params.eta, gamma=params.gamma)
    return interpolate_state(disc, mms, params, 0.0)


def quiescent_interface_state(disc: Discretization, params: MixtureParams,
                              radius: float = 0.5) -> State:
    """Fluid at rest with a circular diffuse interface around the origin.

    The phase carries the equilibrium tangent-hyperbolic profile across the
    interface, strictly inside (-1, 1), so the max-principle monitor applies
    from the first step.
    """
    c2 = disc.p2.dof_coordinates
    r = np.hypot(c2[:, 0], c2[:, 1])
    phi = np.tanh((radius - r) / (np.sqrt(2.0) * params.eta))
    return State(
        u=np.zeros(disc.v2.dof_count),
        p=np.zeros(disc.p1.n_scalar),
        phi=phi,
        rho_prev=mixture_density(params, phi),
        t=0.0,
    )


def initial_state(disc: Discretization, params: MixtureParams,
                  scenario: str) -> State:
    """Build the initial state of a named scenario.

    Raises
    ------
    ValueError
        For an unknown scenario name.
    """
    if scenario == MMS:
        return mms_initial_state(disc, params)
    if scenario == QUIESCENT:
        return quiescent_interface_state(disc, params)
    raise ValueError(f"unknown scenario {scenario!r}; expected one of "
                     f"{SCENARIOS}")

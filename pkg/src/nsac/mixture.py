"""Physical parameters, mixture constitutive laws and potential linearizations.

The two fluids are blended through the phase variable: density and viscosity
are affine in the phase, interpolating between the pure-fluid values at
phase -1 and +1.  The double-well potential drives the phase toward those
two values; its derivative appears in the phase equation and is linearized
in one of three ways (see :func:`ac_linearization`), each stabilized by a
shift proportional to ``beta``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

#: Linearization identifiers: full Newton expansion, frozen-coefficient
#: Picard form, and the explicit treatment of the potential term.
NEWTON, PICARD, EXPLICIT = "newton", "picard", "explicit"
LINEARIZATIONS = (NEWTON, PICARD, EXPLICIT)


@dataclass(frozen=True)
class MixtureParams:
    """Physical and scheme parameters.

    Attributes
    ----------
    rho_a, rho_b : float
        Densities of the two pure fluids (phase +1 and -1 respectively).
    mu_a, mu_b : float
        Viscosities of the two pure fluids.
    gamma : float
        Phase relaxation mobility.
    eta : float
        Interface thickness.
    sigma : float
        Surface tension coefficient.
    beta : float
        Stabilization shift of the potential linearization, >= 0.
    dt : float
        Time step.
    eps_pressure : float
        Pressure penalization used to make the saddle system invertible.
    """

    rho_a: float = 3.0
    rho_b: float = 1.0
    mu_a: float = 1.0
    mu_b: float = 1.0
    gamma: float = 1.0
    eta: float = 0.1
    sigma: float = 1.0
    beta: float = 0.0
    dt: float = 1.0 / 1300.0
    eps_pressure: float = 1e-8

    def __post_init__(self):
        for name in ("rho_a", "rho_b", "mu_a", "mu_b", "gamma", "eta",
                     "sigma", "dt"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive, got "
                                 f"{getattr(self, name)}")
        if self.beta < 0:
            raise ValueError(f"beta must be nonnegative, got {self.beta}")
        if self.eps_pressure <= 0:
            raise ValueError("eps_pressure must be positive")

    # Derived constants of the affine mixture laws.

    @property
    def rho_bar(self) -> float:
        return 0.5 * (self.rho_a + self.rho_b)

    @property
    def delta_rho(self) -> float:
        return self.rho_a - self.rho_b

    @property
    def rho_min(self) -> float:
        return min(self.rho_a, self.rho_b)

    @property
    def rho_max(self) -> float:
        return max(self.rho_a, self.rho_b)

    @property
    def mu_bar(self) -> float:
        return 0.5 * (self.mu_a + self.mu_b)

    @property
    def delta_mu(self) -> float:
        return self.mu_a - self.mu_b

    @property
    def mu_min(self) -> float:
        return min(self.mu_a, self.mu_b)

    @property
    def mu_max(self) -> float:
        return max(self.mu_a, self.mu_b)

    @property
    def alpha(self) -> float:
        """Combined coefficient ``gamma * dt / eta**2`` of the potential terms."""
        return self.gamma * self.dt / self.eta ** 2

    @property
    def dt_limit(self) -> float:
        """Upper time-step bound ``eta**2 / (13 gamma)`` of the convergence theory."""
        return self.eta ** 2 / (13.0 * self.gamma)


def mixture_density(params: MixtureParams, phi):
    """Density of the mixture at phase value(s) ``phi``.

    Affine law: mean density plus half the density contrast times the phase.
    No clamping is applied; callers that require positivity must check it.
    """
    return params.rho_bar + 0.5 * params.delta_rho * np.asarray(phi, dtype=float)


def mixture_viscosity(params: MixtureParams, phi):
    """Viscosity of the mixture at phase value(s) ``phi`` (affine, unclamped)."""
    return params.mu_bar + 0.5 * params.delta_mu * np.asarray(phi, dtype=float)


def potential_derivative(phi, eta: float):
    """Derivative of the double-well potential: ``phi (phi**2 - 1) / eta**2``."""
    phi = np.asarray(phi, dtype=float)
    return phi * (phi ** 2 - 1.0) / eta ** 2


def ac_linearization(method: str, phi_k, phi_n, params: MixtureParams):
    """Reaction coefficient and right-hand side of the linearized phase update.

    The implicit phase update reads, with ``a = gamma dt / eta**2``::

        reaction * phi_new + dt u.grad(phi_new) - gamma dt lap(phi_new) = rhs

    and the three linearizations of the stabilized potential term give

    - ``newton``:   reaction = 1 + a (beta - 1 + 3 phi_k**2),
                    rhs = phi_old + a phi_k (beta + 2 phi_k**2)
    - ``picard``:   reaction = 1 + a (beta + phi_k**2 - 1),
                    rhs = phi_old + a beta phi_k
    - ``explicit``: reaction = 1,
                    rhs = phi_old + a (1 - phi_old**2) phi_old

    Parameters
    ----------
    method : str
        One of ``newton``, ``picard``, ``explicit``.
    phi_k : array_like
        Current fixed-point iterate of the phase (pointwise values).
    phi_n : array_like
        Phase at the previous time level.
    params : MixtureParams

    Returns
    -------
    (reaction, rhs) : pair of ndarrays broadcast to the input shape.

    Raises
    ------
    ValueError
        For an unknown method name.
    """
    phi_k = np.asarray(phi_k, dtype=float)
    phi_n = np.asarray(phi_n, dtype=float)
    a = params.alpha
    beta = params.beta
    if method == NEWTON:
        reaction = 1.0 + a * (beta - 1.0 + 3.0 * phi_k ** 2)
        rhs = phi_n + a * phi_k * (beta + 2.0 * phi_k ** 2)
    elif method == PICARD:
        reaction = 1.0 + a * (beta + phi_k ** 2 - 1.0)
        rhs = phi_n + a * beta * phi_k
    elif method == EXPLICIT:
        reaction = np.ones_like(phi_k * phi_n)
        rhs = phi_n + a * (1.0 - phi_n ** 2) * phi_n
    else:
        raise ValueError(f"unknown linearization {method!r}; expected one of "
                         f"{LINEARIZATIONS}")
    reaction = np.broadcast_to(reaction, np.broadcast(phi_k, phi_n).shape).copy()
    rhs = np.broadcast_to(rhs, np.broadcast(phi_k, phi_n).shape).copy()
    return reaction, rhs


@dataclass
class State:
    """Discrete solution at one time level.

    Attributes
    ----------
    u : ndarray
        Velocity coefficients (component-blocked quadratic vector field).
    p : ndarray
        Pressure coefficients (linear field, zero mean after each solve).
    phi : ndarray
        Phase coefficients (quadratic field).
    rho_prev : ndarray
        Density coefficients evaluated from ``phi`` (quadratic field); kept
        alongside the state because the momentum update couples the new
        density to the old one through a geometric mean.
    t : float
        Time level.
    """

    u: np.ndarray
    p: np.ndarray
    phi: np.ndarray
    rho_prev: np.ndarray
    t: float

    def copy(self) -> "State":
        return State(u=self.u.copy(), p=self.p.copy(), phi=self.phi.copy(),
                     rho_prev=self.rho_prev.copy(), t=self.t)

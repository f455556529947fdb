"""Mixture laws, potential derivative, and the three phase linearizations."""

import numpy as np
import pytest

from nsac.mixture import (LINEARIZATIONS, MixtureParams, State,
                          ac_linearization, mixture_density,
                          mixture_viscosity, potential_derivative)


def test_density_endpoints_and_midpoint():
    p = MixtureParams(rho_a=3.0, rho_b=1.0)
    assert mixture_density(p, 1.0) == pytest.approx(3.0)
    assert mixture_density(p, -1.0) == pytest.approx(1.0)
    assert mixture_density(p, 0.0) == pytest.approx(2.0)
    assert p.rho_bar == pytest.approx(2.0)
    assert p.delta_rho == pytest.approx(2.0)
    assert p.rho_min == 1.0 and p.rho_max == 3.0


def test_viscosity_endpoints():
    p = MixtureParams(mu_a=10.0, mu_b=2.0)
    assert mixture_viscosity(p, 1.0) == pytest.approx(10.0)
    assert mixture_viscosity(p, -1.0) == pytest.approx(2.0)
    assert p.mu_min == 2.0 and p.mu_max == 10.0


def test_density_is_affine(rng):
    p = MixtureParams(rho_a=5.0, rho_b=2.0)
    phi = rng.uniform(-1.5, 1.5, size=50)
    expect = p.rho_bar + 0.5 * p.delta_rho * phi
    assert np.allclose(mixture_density(p, phi), expect, atol=1e-15)


def test_potential_derivative_values():
    # Double well f(phi) = phi (phi^2 - 1) / eta^2: zeros at the wells and
    # the hump, hand value at phi = 1/2.
    assert potential_derivative(0.0, 0.1) == 0.0
    assert potential_derivative(1.0, 0.1) == 0.0
    assert potential_derivative(-1.0, 0.1) == 0.0
    assert potential_derivative(0.5, 0.1) == pytest.approx(-37.5)
    vals = potential_derivative(np.array([0.5, -0.5]), 0.1)
    assert np.allclose(vals, [-37.5, 37.5])


def test_derived_scheme_constants():
    p = MixtureParams()  # gamma=1, eta=0.1, dt=1/1300
    assert p.alpha == pytest.approx(1.0 / 13.0, rel=1e-14)
    assert p.dt_limit == pytest.approx(0.01 / 13.0, rel=1e-14)


@pytest.mark.parametrize("field,value", [
    ("rho_a", -1.0), ("rho_b", 0.0), ("mu_a", -2.0), ("gamma", 0.0),
    ("eta", -0.1), ("sigma", 0.0), ("dt", 0.0), ("beta", -0.5),
    ("eps_pressure", 0.0),
])
def test_parameter_validation(field, value):
    with pytest.raises(ValueError):
        MixtureParams(**{field: value})


def test_newton_linearization_at_zero():
    p = MixtureParams(beta=9.0 / 8.0)
    reaction, rhs = ac_linearization("newton", 0.0, 0.25, p)
    # alpha = 1/13 at the defaults, so the reaction is 1 + (1/13)(9/8 - 1).
    assert reaction == pytest.approx(1.0 + 1.0 / 104.0, rel=1e-14)
    assert rhs == pytest.approx(0.25, rel=1e-14)


def test_picard_linearization_at_wells():
    p = MixtureParams(beta=2.0)
    a = p.alpha
    for sign in (1.0, -1.0):
        reaction, rhs = ac_linearization("picard", sign, sign, p)
        assert reaction == pytest.approx(1.0 + 2.0 * a, rel=1e-14)
        assert rhs == pytest.approx(sign * (1.0 + 2.0 * a), rel=1e-14)


def test_explicit_linearization():
    p = MixtureParams(beta=0.0)
    a = p.alpha
    reaction, rhs = ac_linearization("explicit", 0.3, 0.5, p)
    assert reaction == pytest.approx(1.0)
    assert rhs == pytest.approx(0.5 + a * (1.0 - 0.25) * 0.5, rel=1e-14)
    # The wells are fixed points of the explicit update too.
    for sign in (1.0, -1.0):
        _, rhs = ac_linearization("explicit", sign, sign, p)
        assert rhs == pytest.approx(sign, rel=1e-14)


@pytest.mark.parametrize("method", ["newton", "picard"])
def test_linearizations_share_the_nonlinear_residual(method, rng):
    # At any linearization point, reaction * phi_k - rhs must reduce to the
    # residual of the underlying implicit update,
    # (phi_k - phi_n) + gamma dt f(phi_k); the stabilization shift cancels.
    p = MixtureParams(beta=1.7, dt=3e-4, eta=0.2, gamma=2.0)
    phi_k = rng.uniform(-2.0, 2.0, size=40)
    phi_n = rng.uniform(-2.0, 2.0, size=40)
    reaction, rhs = ac_linearization(method, phi_k, phi_n, p)
    lhs = reaction * phi_k - rhs
    target = (phi_k - phi_n) + p.gamma * p.dt * potential_derivative(phi_k, p.eta)
    assert np.abs(lhs - target).max() < 1e-13


def test_explicit_matches_picard_residual_at_previous_level(rng):
    # With beta = 0 and the iterate frozen at the previous level, the
    # explicit and Picard forms leave the same pointwise residual.
    p = MixtureParams(beta=0.0)
    phi_n = rng.uniform(-1.0, 1.0, size=30)
    r_p, b_p = ac_linearization("picard", phi_n, phi_n, p)
    r_e, b_e = ac_linearization("explicit", phi_n, phi_n, p)
    assert np.abs((r_p * phi_n - b_p) - (r_e * phi_n - b_e)).max() < 1e-15


def test_linearization_broadcasts(rng):
    p = MixtureParams()
    phi_k = rng.uniform(-1, 1, size=(4, 5))
    reaction, rhs = ac_linearization("newton", phi_k, 0.0, p)
    assert reaction.shape == (4, 5)
    assert rhs.shape == (4, 5)


def test_unknown_linearization():
    with pytest.raises(ValueError):
        ac_linearization("midpoint", 0.0, 0.0, MixtureParams())
    assert set(LINEARIZATIONS) == {"newton", "picard", "explicit"}


def test_state_copy_is_deep():
    s = State(u=np.zeros(4), p=np.zeros(2), phi=np.ones(3),
              rho_prev=np.ones(3), t=0.5)
    c = s.copy()
    c.u[0] = 7.0
    c.phi[1] = -3.0
    assert s.u[0] == 0.0
    assert s.phi[1] == 1.0
    assert c.t == s.t

"""Initial states for the two run scenarios."""

import numpy as np
import pytest

from nsac.mixture import MixtureParams, mixture_density
from nsac.scenarios import SCENARIOS, initial_state


def test_scenario_names():
    assert set(SCENARIOS) == {"mms", "quiescent"}


def test_mms_initial_state(disc4, params_default):
    state = initial_state(disc4, params_default, "mms")
    assert state.t == 0.0
    assert np.abs(state.u).max() == 0.0
    assert np.abs(state.p).max() == 0.0
    assert np.allclose(state.phi, -1.0)
    assert np.allclose(state.rho_prev, params_default.rho_b)


def test_quiescent_interface_state(disc8, params_default):
    state = initial_state(disc8, params_default, "quiescent")
    assert np.abs(state.u).max() == 0.0
    assert np.abs(state.p).max() == 0.0
    assert np.abs(state.phi).max() < 1.0  # tanh never reaches the wells
    co = disc8.p2.dof_coordinates
    r = np.hypot(co[:, 0], co[:, 1])
    # Heavy fluid inside a radius-1/2 disk, light fluid outside.
    assert state.phi[np.argmin(r)] > 0.99
    corner = np.argmax(r)
    assert state.phi[corner] < -0.99
    # Interface width follows eta through the tanh profile.
    mid = np.argmin(np.abs(r - 0.5))
    assert abs(state.phi[mid]) < 0.3
    assert np.allclose(state.rho_prev,
                       mixture_density(params_default, state.phi), atol=1e-14)


def test_quiescent_tracks_eta(disc8):
    wide = initial_state(disc8, MixtureParams(eta=0.3), "quiescent")
    sharp = initial_state(disc8, MixtureParams(eta=0.05), "quiescent")
    # A sharper interface pushes more dofs toward the wells.
    assert (np.abs(sharp.phi) > 0.9).sum() > (np.abs(wide.phi) > 0.9).sum()


def test_unknown_scenario(disc4, params_default):
    with pytest.raises(ValueError):
        initial_state(disc4, params_default, "vortex")

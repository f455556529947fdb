"""Shared fixtures and the acceptance summary hook."""

import numpy as np
import pytest

from nsac.assembly import Discretization
from nsac.meshing import build_uniform_mesh
from nsac.mixture import MixtureParams

BOUNDS = ((-1.0, 1.0), (-1.0, 1.0))

# Pass/fail lines recorded by the acceptance tests, printed at the end of
# the run so they survive output capture.
ACCEPTANCE_LINES = []


def record_criterion(ok: bool, label: str, detail: str) -> bool:
    verdict = "PASS" if ok else "FAIL"
    ACCEPTANCE_LINES.append(f"[{verdict}] {label}: {detail}")
    return ok


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in ACCEPTANCE_LINES:
        terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def disc2():
    return Discretization(build_uniform_mesh(BOUNDS, 2))


@pytest.fixture(scope="session")
def disc3():
    return Discretization(build_uniform_mesh(BOUNDS, 3))


@pytest.fixture(scope="session")
def disc4():
    return Discretization(build_uniform_mesh(BOUNDS, 4))


@pytest.fixture(scope="session")
def disc8():
    return Discretization(build_uniform_mesh(BOUNDS, 8))


@pytest.fixture()
def params_default():
    return MixtureParams()


@pytest.fixture()
def rng():
    return np.random.default_rng(20260824)

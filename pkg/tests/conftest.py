"""Shared fixtures: lattices reused across test modules."""

import sys
import warnings

import pytest

from netelast.lattice import DomainBox, LatticeConfig, build_cubic_lattice


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance verdict lines past output capture."""
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "VERDICT_LINES", None) if mod else None
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)


def quiet_lattice(eps, side=1.0, origin=(0.0, 0.0, 0.0)):
    """Build a lattice, silencing the thin-interior warning for toy sizes."""
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        cfg = LatticeConfig(eps=eps, box=DomainBox(side, origin))
        return build_cubic_lattice(cfg)


@pytest.fixture(scope="session")
def lat4():
    """Unit box at eps = 1/4: 125 particles, 27 free."""
    return quiet_lattice(0.25)


@pytest.fixture(scope="session")
def lat8():
    """Unit box at eps = 1/8: 729 particles, 343 free."""
    return quiet_lattice(0.125)


@pytest.fixture(scope="session")
def lat16():
    """Unit box at eps = 1/16."""
    return quiet_lattice(0.0625)

"""Shared fixtures: CHSH and Mermin functionals with explicit optimal witnesses."""

from __future__ import annotations

import numpy as np
import pytest

from bellviol.bounds_lab import ghz_state
from bellviol.functionals import chsh, mermin
from bellviol.tensor_core import PAULI_X, PAULI_Y, PAULI_Z, ObservableSet, QuantumState


def tsirelson_witness() -> tuple[QuantumState, ObservableSet]:
    """Maximally entangled pair with A = (Z, X), B = ((Z+X)/sqrt2, (Z-X)/sqrt2)."""
    phi = np.array([1, 0, 0, 1], dtype=complex) / np.sqrt(2)
    s = 1 / np.sqrt(2)
    obs = ObservableSet((
        np.stack([PAULI_Z, PAULI_X]),
        np.stack([s * (PAULI_Z + PAULI_X), s * (PAULI_Z - PAULI_X)]),
    ))
    return QuantumState.pure(phi, (2, 2)), obs


def mermin_witness() -> tuple[QuantumState, ObservableSet]:
    """GHZ_2 with (setting 0, setting 1) = (Y, X) on every party, party 0's pair negated."""
    pair = np.stack([PAULI_Y, PAULI_X])
    return ghz_state(2, 3), ObservableSet((-pair, pair, pair))


@pytest.fixture
def chsh_T():
    return chsh()


@pytest.fixture
def mermin_T():
    return mermin(3)


@pytest.fixture
def tsirelson():
    return tsirelson_witness()


@pytest.fixture
def mermin_opt():
    return mermin_witness()


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)

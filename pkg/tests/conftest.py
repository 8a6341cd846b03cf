from pathlib import Path

import numpy as np
import pytest

from qpac import core, oracle


@pytest.fixture
def fixtures_dir() -> Path:
    """Return the path to the test fixtures directory."""
    return Path(__file__).parent / "fixtures"


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def bell_circuit() -> core.Circuit:
    """(|00> + |11>) / sqrt(2)"""
    return core.Circuit(2, (core.gate1("H", 0), core.cnot(0, 1)))


@pytest.fixture
def ghz3() -> oracle.DenseState:
    return oracle.dense_from_circuit(oracle.ghz_circuit(3))


@pytest.fixture
def bell(bell_circuit: core.Circuit) -> oracle.DenseState:
    return oracle.dense_from_circuit(bell_circuit)

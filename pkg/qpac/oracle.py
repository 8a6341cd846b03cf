"""Dense brute-force oracle. Exact statevectors for small n, used as ground truth
for every other simulator."""

import logging
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np
from numpy.typing import NDArray

from . import core, types
from .core import CircuitMeasurement, Measurement, PauliMeasurement

LOG = logging.getLogger(__name__)

ZERO_KET = np.array([1, 0], dtype=complex)


@dataclass(frozen=True)
class DenseState:
    """2^n amplitudes, qubit 0 is the most significant bit of the index"""

    n: int
    amplitudes: NDArray[np.complex128]

    def __post_init__(self) -> None:
        amps = np.asarray(self.amplitudes, dtype=complex)
        if amps.shape != (2**self.n,):
            raise ValueError(f"Expected {2**self.n} amplitudes for n={self.n}, got {amps.shape}")
        norm = float(np.vdot(amps, amps).real)
        if abs(norm - 1.0) > types.NORM_TOLERANCE:
            raise ValueError(f"State is not normalized: |psi|^2 = {norm}")
        amps.setflags(write=False)
        object.__setattr__(self, "amplitudes", amps)

    def tensor(self) -> NDArray[np.complex128]:
        """Amplitudes as an n-axis (2, 2, ..., 2) array"""
        return self.amplitudes.reshape((2,) * self.n)


def _check_cap(n: int, cap: int) -> None:
    if n > cap:
        raise types.CapExceeded(f"Dense oracle limited to n <= {cap}, got n={n}")


def product_state(
    inputs: Sequence[NDArray[np.complex128]], *, cap: int = types.DEFAULT_ORACLE_CAP
) -> DenseState:
    _check_cap(len(inputs), cap)
    out = np.array([1.0 + 0j])
    for i, v in enumerate(inputs):
        v = np.asarray(v, dtype=complex)
        if v.shape != (2,):
            raise ValueError(f"Input {i} is not a single qubit state: shape {v.shape}")
        if abs(np.vdot(v, v).real - 1.0) > types.NORM_TOLERANCE:
            raise ValueError(f"Input {i} is not normalized")
        out = np.kron(out, v)
    return DenseState(len(inputs), out)


def _apply(psi: NDArray[np.complex128], gate: core.Gate) -> NDArray[np.complex128]:
    # psi is the (2,)*n tensor; contract the gate into its target axes then restore order
    k = len(gate.targets)
    u = gate.matrix().reshape((2,) * (2 * k))
    psi = np.tensordot(u, psi, axes=(list(range(k, 2 * k)), list(gate.targets)))
    return np.moveaxis(psi, list(range(k)), list(gate.targets))


def apply_circuit(state: DenseState, circuit: core.Circuit) -> DenseState:
    if circuit.n != state.n:
        raise ValueError(f"Circuit on {circuit.n} lines applied to {state.n} qubit state")
    psi = state.tensor()
    for g in circuit.gates:
        psi = _apply(psi, g)
    return DenseState(state.n, psi.reshape(-1))


def dense_from_circuit(
    circuit: core.Circuit,
    inputs: Sequence[NDArray[np.complex128]] | None = None,
    *,
    cap: int = types.DEFAULT_ORACLE_CAP,
) -> DenseState:
    """Statevector after applying circuit to the product of inputs (default |0...0>)"""
    _check_cap(circuit.n, cap)
    if inputs is None:
        inputs = [ZERO_KET] * circuit.n
    if len(inputs) != circuit.n:
        raise ValueError(f"Need {circuit.n} input states, got {len(inputs)}")
    return apply_circuit(product_state(inputs, cap=cap), circuit)


def pauli_expectation(state: DenseState, pauli: core.PauliString) -> float:
    """Re <psi|P|psi> including the sign of P"""
    psi = state.tensor()
    phi = psi
    for q, m in enumerate(pauli.site_matrices()):
        if pauli.x_bits[q] or pauli.z_bits[q]:
            phi = np.moveaxis(np.tensordot(m, phi, axes=([1], [q])), 0, q)
    return pauli.sign * float(np.vdot(psi, phi).real)


def zero_probability(state: DenseState, line: int) -> float:
    """Pr[outcome 0 when line is measured in the Z basis]"""
    psi = state.tensor()
    return float(np.sum(np.abs(np.take(psi, 0, axis=line)) ** 2))


def dense_expectation(state: DenseState, m: Measurement) -> float:
    """Tr(E rho): (1 + <P>)/2 for Pauli measurements, Pr[line reads 0 after U]
    for circuit-induced ones"""
    if m.n != state.n:
        raise ValueError(f"Measurement on {m.n} qubits applied to {state.n} qubit state")
    match m:
        case PauliMeasurement(pauli=p):
            value = 0.5 * (1.0 + pauli_expectation(state, p))
        case CircuitMeasurement(circuit=c, line=line):
            value = zero_probability(apply_circuit(state, c), line)
        case _:
            raise TypeError(f"Not a measurement: {m!r}")
    return core.clamp_value(value)


def dense_oracle(state: DenseState) -> Callable[[Measurement], float]:
    """Expectation function suitable for core.make_training_set"""
    return lambda m: dense_expectation(state, m)


def ghz_circuit(n: int) -> core.Circuit:
    """H on line 0 then a CNOT ladder: (|0..0> + |1..1>)/sqrt(2) from |0..0>"""
    gates = [core.gate1(types.GateKind.H, 0)]
    gates.extend(core.cnot(i, i + 1) for i in range(n - 1))
    return core.Circuit(n, tuple(gates))

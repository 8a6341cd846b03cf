import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpac import core, oracle, types
from qpac.core import Gate, PauliString, TrainingSet
from qpac.types import GateKind


def test_pauli_label_round_trip() -> None:
    p = PauliString.from_label("-XZIY")
    assert p.n == 4
    assert p.sign == -1
    assert p.x_bits == (1, 0, 0, 1)
    assert p.z_bits == (0, 1, 0, 1)
    assert p.label == "-XZIY"
    assert p.weight == 3
    assert PauliString.from_label("XZ").label == "+XZ"


def test_pauli_invalid() -> None:
    with pytest.raises(ValueError):
        PauliString.from_label("XQ")
    with pytest.raises(ValueError):
        PauliString(2, (1,), (0, 0))
    with pytest.raises(ValueError):
        PauliString(1, (1,), (0,), sign=2)


def test_pauli_commutation() -> None:
    xx = PauliString.from_label("XX")
    zz = PauliString.from_label("ZZ")
    zi = PauliString.from_label("ZI")
    assert xx.commutes_with(zz)
    assert not xx.commutes_with(zi)
    assert PauliString.single(3, 1, "Z").label == "+IZI"


def test_pauli_matrix_is_signed_kron() -> None:
    m = PauliString.from_label("-XZ").to_matrix()
    x = np.array([[0, 1], [1, 0]])
    z = np.diag([1, -1])
    assert np.allclose(m, -np.kron(x, z))


def test_gate_invariants() -> None:
    with pytest.raises(ValueError):
        core.cnot(1, 1)
    with pytest.raises(ValueError):
        Gate(GateKind.H, (0, 1))
    with pytest.raises(ValueError):
        Gate.generic(np.array([[1, 1], [0, 1]]), 0)
    with pytest.raises(ValueError):
        core.Circuit(2, (core.cnot(0, 2),))


def test_gate_inverse(rng: np.random.Generator) -> None:
    s = core.gate1("S", 0)
    prod = np.eye(2, dtype=complex)
    for g in s.inverse():
        prod = g.matrix() @ prod
    assert np.allclose(prod @ s.matrix(), np.eye(2))
    u = Gate.generic(core.random_unitary(4, rng), 0, 1)
    (inv,) = u.inverse()
    assert np.allclose(inv.matrix() @ u.matrix(), np.eye(4))


def test_circuit_inverse_undoes_circuit(rng: np.random.Generator) -> None:
    circuit = core.random_circuit(4, 20, rng, d_budget=3)
    state = oracle.dense_from_circuit(circuit)
    back = oracle.apply_circuit(state, circuit.inverse())
    assert abs(back.amplitudes[0]) == pytest.approx(1.0, abs=1e-9)


##
# circuit_schmidt_bound


def test_schmidt_bound_examples() -> None:
    assert core.circuit_schmidt_bound(core.Circuit(3)) == 0
    assert core.circuit_schmidt_bound(core.Circuit(2, (core.cnot(0, 1),))) == 1
    c = core.Circuit(3, (core.cnot(0, 1), core.cnot(1, 2), core.cnot(0, 2)))
    assert core.cut_crossings(c) == [2, 2]
    assert core.circuit_schmidt_bound(c) == 2


def test_single_qubit_gates_never_cross() -> None:
    c = core.Circuit(3, tuple(core.gate1("H", q) for q in range(3)))
    assert core.circuit_schmidt_bound(c) == 0


def test_schmidt_bound_never_decreases(rng: np.random.Generator) -> None:
    c = core.Circuit(5)
    last = 0
    for _ in range(30):
        a, b = rng.choice(5, size=2, replace=False)
        c = c.appended(core.cnot(int(a), int(b)))
        d = core.circuit_schmidt_bound(c)
        assert d >= last
        last = d


##
# Sampling


def test_sample_measurements_reproducible() -> None:
    dist = core.MeasurementDistribution.uniform_pauli()
    a = core.sample_measurements(dist, 4, 3, 99)
    b = core.sample_measurements(dist, 4, 3, 99)
    assert [core.measurement_key(m) for m in a] == [core.measurement_key(m) for m in b]


def test_sample_measurements_respects_weight() -> None:
    dist = core.MeasurementDistribution.uniform_pauli(max_weight=2)
    for m in core.sample_measurements(dist, 6, 200, 5):
        assert isinstance(m, core.PauliMeasurement)
        assert 1 <= m.pauli.weight <= 2


def test_sample_measurements_respects_d_budget() -> None:
    dist = core.MeasurementDistribution.circuit_family(gate_count=30, d_budget=4, max_range=3)
    for m in core.sample_measurements(dist, 6, 50, 11):
        assert isinstance(m, core.CircuitMeasurement)
        assert core.circuit_schmidt_bound(m.circuit) <= 4


def test_sample_single_qubit_frequencies() -> None:
    dist = core.MeasurementDistribution.uniform_pauli()
    draws = core.sample_measurements(dist, 1, 10_000, 3)
    letters = [m.pauli.letters for m in draws if isinstance(m, core.PauliMeasurement)]
    for letter in "XYZ":
        assert letters.count(letter) / len(letters) == pytest.approx(1 / 3, abs=0.05)


def test_sample_measurements_infeasible() -> None:
    with pytest.raises(ValueError):
        core.sample_measurements(core.MeasurementDistribution.uniform_pauli(max_weight=0), 3, 1, 0)
    with pytest.raises(ValueError):
        core.sample_measurements(core.MeasurementDistribution.uniform_pauli(max_weight=4), 3, 1, 0)
    with pytest.raises(ValueError):
        core.sample_measurements(core.MeasurementDistribution.uniform_pauli(), 3, 0, 0)


##
# Training sets


def test_make_training_set_ghz(ghz3: oracle.DenseState) -> None:
    t = core.make_training_set(oracle.dense_oracle(ghz3), [core.pauli_measurement("XXX")])
    assert t.n == 3
    assert len(t) == 1
    assert t.examples[0].value == pytest.approx(1.0, abs=1e-12)


def test_make_training_set_empty() -> None:
    t = core.make_training_set(lambda m: 0.0, [], n=2)
    assert len(t) == 0
    assert t.n == 2
    with pytest.raises(ValueError):
        core.make_training_set(lambda m: 0.0, [])


def test_training_set_needs_a_qubit() -> None:
    with pytest.raises(ValueError):
        TrainingSet(0)
    with pytest.raises(ValueError):
        TrainingSet(-1)


def test_make_training_set_zero_state() -> None:
    zero = oracle.dense_from_circuit(core.Circuit(1))
    t = core.make_training_set(
        oracle.dense_oracle(zero), [core.pauli_measurement("Z"), core.pauli_measurement("X")]
    )
    assert list(t.values()) == pytest.approx([1.0, 0.5], abs=1e-12)


def test_training_value_range() -> None:
    with pytest.raises(ValueError):
        core.TrainingExample(core.pauli_measurement("Z"), 1.5)
    with pytest.raises(ValueError):
        core.make_training_set(lambda m: 1.0 + 1e-6, [core.pauli_measurement("Z")])
    t = core.make_training_set(lambda m: 1.0 + 1e-13, [core.pauli_measurement("Z")])
    assert t.examples[0].value == 1.0


def test_training_arity_mismatch() -> None:
    with pytest.raises(ValueError):
        core.TrainingSet(2, (core.TrainingExample(core.pauli_measurement("Z"), 1.0),))


def test_shot_noise_reproducible(ghz3: oracle.DenseState) -> None:
    meas = core.sample_measurements(core.MeasurementDistribution.uniform_pauli(), 3, 20, 1)
    t = core.make_training_set(oracle.dense_oracle(ghz3), meas)
    a = core.add_shot_noise(t, 100, 7)
    b = core.add_shot_noise(t, 100, 7)
    assert list(a.values()) == list(b.values())
    for exact, noisy in zip(t.values(), a.values()):
        if abs(exact - 1.0) < 1e-12:
            assert noisy == 1.0


def test_measurement_key_distinguishes() -> None:
    c = core.Circuit(2, (core.gate1("H", 0),))
    keys = {
        core.measurement_key(core.pauli_measurement("XZ")),
        core.measurement_key(core.pauli_measurement("-XZ")),
        core.measurement_key(core.CircuitMeasurement(c, 0)),
        core.measurement_key(core.CircuitMeasurement(c, 1)),
    }
    assert len(keys) == 4


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(min_value=0, max_value=2**32), m=st.integers(min_value=1, max_value=20))
def test_random_clifford_circuit_is_clifford(seed: int, m: int) -> None:
    c = core.random_clifford_circuit(3, m, np.random.default_rng(seed))
    assert len(c) == m
    assert c.is_clifford()


def test_random_circuit_clifford_mode(rng: np.random.Generator) -> None:
    c = core.random_circuit(4, 40, rng, d_budget=2, clifford=True)
    assert c.is_clifford()
    assert core.circuit_schmidt_bound(c) <= 2


def test_random_unitary_is_unitary(rng: np.random.Generator) -> None:
    u = core.random_unitary(4, rng)
    assert np.allclose(u.conj().T @ u, np.eye(4), atol=types.UNITARY_TOLERANCE)

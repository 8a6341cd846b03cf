"""Shared domain types: Paulis, gates, circuits, measurements, training data,
measurement distributions and the learner contract every family implements."""

import logging
import math
from dataclasses import dataclass, field, replace
from typing import Callable, Final, Iterable, Protocol, Sequence, TypeAlias, TypeVar

import numpy as np
from numpy.typing import NDArray

from . import types, util
from .types import DistributionKind, GateKind

LOG = logging.getLogger(__name__)

# Per-qubit letters indexed by (x, z): 00 -> I, 10 -> X, 01 -> Z, 11 -> Y
_PAULI_LETTERS: Final[dict[tuple[int, int], str]] = {
    (0, 0): "I",
    (1, 0): "X",
    (0, 1): "Z",
    (1, 1): "Y",
}
_LETTER_BITS: Final[dict[str, tuple[int, int]]] = {
    v: k for k, v in _PAULI_LETTERS.items()
}

_I2 = np.eye(2, dtype=complex)
_X2 = np.array([[0, 1], [1, 0]], dtype=complex)
_Y2 = np.array([[0, -1j], [1j, 0]], dtype=complex)
_Z2 = np.array([[1, 0], [0, -1]], dtype=complex)
PAULI_MATRICES: Final[dict[tuple[int, int], NDArray[np.complex128]]] = {
    (0, 0): _I2,
    (1, 0): _X2,
    (0, 1): _Z2,
    (1, 1): _Y2,
}


##
# Paulis


@dataclass(frozen=True)
class PauliString:
    """Signed n-qubit Pauli. Qubit 0 is the leftmost letter of the label and the
    most significant bit of a dense amplitude index."""

    n: int
    x_bits: tuple[int, ...]
    z_bits: tuple[int, ...]
    sign: int = 1

    def __post_init__(self) -> None:
        if len(self.x_bits) != self.n or len(self.z_bits) != self.n:
            raise ValueError(
                f"Pauli bit vectors must have length n={self.n}: "
                f"x={len(self.x_bits)} z={len(self.z_bits)}"
            )
        if self.sign not in (1, -1):
            raise ValueError(f"Pauli sign must be +1 or -1, got {self.sign}")
        if any(b not in (0, 1) for b in self.x_bits + self.z_bits):
            raise ValueError("Pauli bits must be 0 or 1")

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        """Parse "+XZI", "-YY" or "XZ" (sign defaults to +)"""
        sign = 1
        if label[:1] in ("+", "-"):
            sign = -1 if label[0] == "-" else 1
            label = label[1:]
        try:
            bits = [_LETTER_BITS[ch] for ch in label.upper()]
        except KeyError as e:
            raise ValueError(f"Invalid Pauli label: {label!r}") from e
        return cls(
            n=len(bits),
            x_bits=tuple(b[0] for b in bits),
            z_bits=tuple(b[1] for b in bits),
            sign=sign,
        )

    @classmethod
    def from_arrays(
        cls, x: Sequence[int] | NDArray[np.uint8], z: Sequence[int] | NDArray[np.uint8], sign: int = 1
    ) -> "PauliString":
        return cls(
            n=len(x),
            x_bits=tuple(int(b) for b in x),
            z_bits=tuple(int(b) for b in z),
            sign=sign,
        )

    @classmethod
    def single(cls, n: int, qubit: int, letter: str, sign: int = 1) -> "PauliString":
        """Weight one Pauli, e.g. single(3, 1, "Z") == +IZI"""
        letters = ["I"] * n
        letters[qubit] = letter
        return cls.from_label(("+" if sign == 1 else "-") + "".join(letters))

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n=n, x_bits=(0,) * n, z_bits=(0,) * n)

    @property
    def letters(self) -> str:
        return "".join(_PAULI_LETTERS[xz] for xz in zip(self.x_bits, self.z_bits))

    @property
    def label(self) -> str:
        return ("+" if self.sign == 1 else "-") + self.letters

    @property
    def weight(self) -> int:
        return sum(1 for x, z in zip(self.x_bits, self.z_bits) if x or z)

    def is_identity(self) -> bool:
        return self.weight == 0

    def x_array(self) -> NDArray[np.uint8]:
        return np.array(self.x_bits, dtype=np.uint8)

    def z_array(self) -> NDArray[np.uint8]:
        return np.array(self.z_bits, dtype=np.uint8)

    def commutes_with(self, other: "PauliString") -> bool:
        """Symplectic inner product over GF(2) is zero"""
        if other.n != self.n:
            raise ValueError(f"Arity mismatch: {self.n} vs {other.n}")
        s = sum(
            a * d + b * c
            for a, b, c, d in zip(self.x_bits, self.z_bits, other.x_bits, other.z_bits)
        )
        return s % 2 == 0

    def unsigned(self) -> "PauliString":
        return replace(self, sign=1)

    def negated(self) -> "PauliString":
        return replace(self, sign=-self.sign)

    def site_matrices(self) -> list[NDArray[np.complex128]]:
        """Unsigned 2x2 factor per qubit"""
        return [PAULI_MATRICES[xz] for xz in zip(self.x_bits, self.z_bits)]

    def to_matrix(self) -> NDArray[np.complex128]:
        """Dense 2^n x 2^n signed matrix. Only for small n."""
        out = np.array([[1.0 + 0j]])
        for m in self.site_matrices():
            out = np.kron(out, m)
        return self.sign * out

    def __str__(self) -> str:
        return self.label


##
# Gates and circuits

_SQRT2_INV = 1 / math.sqrt(2)
_FIXED_MATRICES: Final[dict[GateKind, NDArray[np.complex128]]] = {
    GateKind.H: np.array([[1, 1], [1, -1]], dtype=complex) * _SQRT2_INV,
    GateKind.S: np.array([[1, 0], [0, 1j]], dtype=complex),
    GateKind.X: _X2,
    GateKind.Y: _Y2,
    GateKind.Z: _Z2,
    # Two qubit gates: basis |t0 t1>, targets[0] is the more significant bit
    GateKind.CNOT: np.array(
        [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
    ),
    GateKind.CZ: np.diag([1, 1, 1, -1]).astype(complex),
    GateKind.SWAP: np.array(
        [[1, 0, 0, 0], [0, 0, 1, 0], [0, 1, 0, 0], [0, 0, 0, 1]], dtype=complex
    ),
}


@dataclass(frozen=True)
class Gate:
    """A 1 or 2 qubit gate. For CNOT, targets[0] is the control.
    U1/U2 carry their unitary as a flat row-major tuple of complex entries."""

    kind: GateKind
    targets: tuple[int, ...]
    unitary: tuple[complex, ...] | None = field(default=None, repr=False)

    def __post_init__(self) -> None:
        arity = self.kind.arity
        if len(self.targets) != arity:
            raise ValueError(f"{self.kind} takes {arity} target(s), got {self.targets}")
        if arity == 2 and self.targets[0] == self.targets[1]:
            raise ValueError(f"Two qubit gate needs distinct targets: {self.targets}")
        if any(t < 0 for t in self.targets):
            raise ValueError(f"Negative target: {self.targets}")
        if self.kind in (GateKind.U1, GateKind.U2):
            dim = 2**arity
            if self.unitary is None or len(self.unitary) != dim * dim:
                raise ValueError(f"{self.kind} needs a {dim}x{dim} unitary")
            u = np.array(self.unitary, dtype=complex).reshape(dim, dim)
            if not np.allclose(u.conj().T @ u, np.eye(dim), rtol=0, atol=types.UNITARY_TOLERANCE):
                raise ValueError(f"{self.kind} matrix is not unitary")
        elif self.unitary is not None:
            raise ValueError(f"{self.kind} has a fixed matrix; unitary must be None")

    @classmethod
    def generic(cls, matrix: NDArray[np.complex128], *targets: int) -> "Gate":
        kind = GateKind.U1 if len(targets) == 1 else GateKind.U2
        return cls(kind, tuple(targets), tuple(complex(v) for v in np.asarray(matrix).ravel()))

    def matrix(self) -> NDArray[np.complex128]:
        if self.unitary is not None:
            dim = 2 ** self.kind.arity
            return np.array(self.unitary, dtype=complex).reshape(dim, dim)
        return _FIXED_MATRICES[self.kind]

    def inverse(self) -> tuple["Gate", ...]:
        """Gates whose product is this gate's inverse (S^-1 = S^3 keeps it Clifford)"""
        if self.kind == GateKind.S:
            return (self, self, self)
        if self.unitary is not None:
            return (Gate.generic(self.matrix().conj().T, *self.targets),)
        return (self,)


def cnot(control: int, target: int) -> Gate:
    return Gate(GateKind.CNOT, (control, target))


def gate1(kind: GateKind | str, target: int) -> Gate:
    return Gate(GateKind(kind), (target,))


@dataclass(frozen=True)
class Circuit:
    n: int
    gates: tuple[Gate, ...] = ()

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"Circuit needs at least one line, n={self.n}")
        for g in self.gates:
            if max(g.targets) >= self.n:
                raise ValueError(f"Gate {g} targets a line >= n={self.n}")

    def appended(self, *gates: Gate) -> "Circuit":
        return Circuit(self.n, self.gates + tuple(gates))

    def inverse(self) -> "Circuit":
        inv: list[Gate] = []
        for g in reversed(self.gates):
            inv.extend(g.inverse())
        return Circuit(self.n, tuple(inv))

    def is_clifford(self) -> bool:
        return all(g.kind.is_clifford for g in self.gates)

    def __len__(self) -> int:
        return len(self.gates)


def cut_crossings(circuit: Circuit) -> list[int]:
    """Number of two qubit gates crossing each cut. Cut i separates lines <= i from
    lines > i. Single qubit gates never cross a cut."""
    counts = [0] * max(circuit.n - 1, 0)
    for g in circuit.gates:
        if len(g.targets) == 2:
            lo, hi = sorted(g.targets)
            for c in range(lo, hi):
                counts[c] += 1
    return counts


def circuit_schmidt_bound(circuit: Circuit) -> int:
    """D = max over cuts of the gates acting across that cut. 0 for gate-free circuits."""
    return max(cut_crossings(circuit), default=0)


def random_unitary(dim: int, rng: np.random.Generator) -> NDArray[np.complex128]:
    """Haar random unitary: QR of a complex Gaussian with the phases of R's diagonal fixed"""
    z = (rng.standard_normal((dim, dim)) + 1j * rng.standard_normal((dim, dim))) / math.sqrt(2)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r)
    return q * (d / np.abs(d))


def random_clifford_circuit(n: int, gate_count: int, rng: np.random.Generator) -> Circuit:
    """gate_count gates drawn uniformly from {H, S, CNOT} over valid targets"""
    kinds = [GateKind.H, GateKind.S] + ([GateKind.CNOT] if n >= 2 else [])
    gates: list[Gate] = []
    for _ in range(gate_count):
        kind = kinds[int(rng.integers(len(kinds)))]
        if kind == GateKind.CNOT:
            a, b = rng.choice(n, size=2, replace=False)
            gates.append(cnot(int(a), int(b)))
        else:
            gates.append(gate1(kind, int(rng.integers(n))))
    return Circuit(n, tuple(gates))


def random_circuit(
    n: int,
    gate_count: int,
    rng: np.random.Generator,
    *,
    d_budget: int | None = None,
    clifford: bool = False,
    two_qubit_kinds: Sequence[GateKind] = (GateKind.CNOT, GateKind.CZ),
    max_range: int = 1,
    two_qubit_fraction: float = 0.5,
) -> Circuit:
    """Random circuit whose circuit_schmidt_bound never exceeds d_budget. A two qubit
    draw that would overshoot the budget is replaced by a single qubit gate.
    Two qubit gates act on lines at most max_range apart."""
    crossings = [0] * max(n - 1, 0)
    gates: list[Gate] = []
    for _ in range(gate_count):
        gate: Gate | None = None
        if n >= 2 and rng.random() < two_qubit_fraction:
            a = int(rng.integers(n))
            offsets = [d for d in range(-max_range, max_range + 1) if d != 0 and 0 <= a + d < n]
            b = a + int(offsets[int(rng.integers(len(offsets)))])
            lo, hi = min(a, b), max(a, b)
            if d_budget is None or all(crossings[c] < d_budget for c in range(lo, hi)):
                for c in range(lo, hi):
                    crossings[c] += 1
                kind = GateKind.CNOT if clifford else two_qubit_kinds[int(rng.integers(len(two_qubit_kinds)))]
                if kind == GateKind.U2:
                    gate = Gate.generic(random_unitary(4, rng), a, b)
                else:
                    gate = Gate(kind, (a, b))
        if gate is None:
            q = int(rng.integers(n))
            if clifford:
                gate = gate1([GateKind.H, GateKind.S][int(rng.integers(2))], q)
            else:
                gate = Gate.generic(random_unitary(2, rng), q)
        gates.append(gate)
    return Circuit(n, tuple(gates))


##
# Measurements


@dataclass(frozen=True)
class PauliMeasurement:
    """POVM element E = (I + P) / 2"""

    pauli: PauliString

    @property
    def n(self) -> int:
        return self.pauli.n


@dataclass(frozen=True)
class CircuitMeasurement:
    """POVM element E = U^dag ((I + Z_line) / 2) U: outcome 0 on line after U"""

    circuit: Circuit
    line: int

    def __post_init__(self) -> None:
        if not 0 <= self.line < self.circuit.n:
            raise ValueError(f"Measured line {self.line} outside circuit of n={self.circuit.n}")

    @property
    def n(self) -> int:
        return self.circuit.n


Measurement: TypeAlias = PauliMeasurement | CircuitMeasurement


def pauli_measurement(label: str) -> PauliMeasurement:
    return PauliMeasurement(PauliString.from_label(label))


def measurement_key(m: Measurement) -> str:
    """Canonical poly(n) string id of a measurement"""
    match m:
        case PauliMeasurement(pauli=p):
            return p.label
        case CircuitMeasurement(circuit=c, line=line):
            parts = []
            for g in c.gates:
                t = ",".join(str(t) for t in g.targets)
                if g.unitary is not None:
                    vals = ",".join(f"{v.real!r}:{v.imag!r}" for v in g.unitary)
                    parts.append(f"{g.kind}({t})[{vals}]")
                else:
                    parts.append(f"{g.kind}({t})")
            return f"U{c.n}:{';'.join(parts)}@{line}"
    raise TypeError(f"Not a measurement: {m!r}")


##
# Measurement distributions


@dataclass
class MeasurementDistribution:
    """D_n over M_n. UNIFORM_PAULI draws uniformly among non-identity Paulis of weight
    <= max_weight (None means n). CIRCUIT_FAMILY draws random circuits of gate_count
    gates with D <= d_budget and a uniformly random measured line."""

    kind: DistributionKind = DistributionKind.UNIFORM_PAULI
    max_weight: int | None = None
    signed: bool = False
    gate_count: int = 0
    d_budget: int = 0
    clifford: bool = False
    max_range: int = 1

    @classmethod
    def uniform_pauli(cls, max_weight: int | None = None, signed: bool = False) -> "MeasurementDistribution":
        return cls(DistributionKind.UNIFORM_PAULI, max_weight=max_weight, signed=signed)

    @classmethod
    def circuit_family(
        cls, gate_count: int, d_budget: int, clifford: bool = False, max_range: int = 1
    ) -> "MeasurementDistribution":
        return cls(
            DistributionKind.CIRCUIT_FAMILY,
            gate_count=gate_count,
            d_budget=d_budget,
            clifford=clifford,
            max_range=max_range,
        )

    def validate(self, n: int) -> None:
        if n < 1:
            raise ValueError(f"Need at least one qubit, n={n}")
        if self.kind == DistributionKind.UNIFORM_PAULI:
            w = n if self.max_weight is None else self.max_weight
            if w < 1:
                raise ValueError(f"Infeasible distribution: max_weight={w} leaves only the identity")
            if w > n:
                raise ValueError(f"max_weight={w} exceeds n={n}")
        else:
            if self.gate_count < 0 or self.d_budget < 0:
                raise ValueError("Circuit family budgets must be >= 0")
            if self.max_range < 1:
                raise ValueError(f"max_range must be >= 1, got {self.max_range}")


def _sample_pauli(n: int, max_weight: int, signed: bool, rng: np.random.Generator) -> PauliString:
    # Weight k has C(n,k) 3^k members; pick k proportionally, then support and letters
    counts = np.array([math.comb(n, k) * 3**k for k in range(1, max_weight + 1)], dtype=float)
    k = 1 + int(rng.choice(len(counts), p=counts / counts.sum()))
    support = rng.choice(n, size=k, replace=False)
    letters = ["I"] * n
    for q in support:
        letters[int(q)] = "XZY"[int(rng.integers(3))]
    sign = -1 if signed and rng.random() < 0.5 else 1
    return PauliString.from_label(("+" if sign == 1 else "-") + "".join(letters))


def sample_measurements(
    dist: MeasurementDistribution, n: int, m: int, seed: int | np.random.Generator
) -> list[Measurement]:
    """m i.i.d. draws from dist on n qubits, deterministic given seed"""
    if m < 1:
        raise ValueError(f"Need m >= 1 draws, got {m}")
    dist.validate(n)
    rng = util.make_rng(seed)
    out: list[Measurement] = []
    for _ in range(m):
        if dist.kind == DistributionKind.UNIFORM_PAULI:
            w = n if dist.max_weight is None else dist.max_weight
            out.append(PauliMeasurement(_sample_pauli(n, w, dist.signed, rng)))
        else:
            circ = random_circuit(
                n,
                dist.gate_count,
                rng,
                d_budget=dist.d_budget,
                clifford=dist.clifford,
                max_range=dist.max_range,
            )
            out.append(CircuitMeasurement(circ, int(rng.integers(n))))
    return out


##
# Training data


@dataclass(frozen=True)
class TrainingExample:
    measurement: Measurement
    value: float

    def __post_init__(self) -> None:
        if not 0.0 <= self.value <= 1.0:
            raise ValueError(f"Training value {self.value} outside [0, 1]")


@dataclass(frozen=True)
class Provenance:
    true_state: str = ""  # Opaque descriptor of the source state
    distribution: MeasurementDistribution | None = None
    seed: int | None = None


@dataclass(frozen=True)
class TrainingSet:
    n: int
    examples: tuple[TrainingExample, ...] = ()
    provenance: Provenance = field(default_factory=Provenance)

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"Training set needs n >= 1, got {self.n}")
        for ex in self.examples:
            if ex.measurement.n != self.n:
                raise ValueError(
                    f"Measurement arity {ex.measurement.n} does not match training set n={self.n}"
                )

    def __len__(self) -> int:
        return len(self.examples)

    def measurements(self) -> list[Measurement]:
        return [ex.measurement for ex in self.examples]

    def values(self) -> NDArray[np.float64]:
        return np.array([ex.value for ex in self.examples], dtype=float)


def clamp_value(value: float) -> float:
    """Clamp an exact expectation into [0, 1], tolerating only numerical slack"""
    if value < -types.VALUE_SLACK or value > 1 + types.VALUE_SLACK:
        raise ValueError(f"Expectation {value} outside [0, 1] beyond numerical slack")
    return min(max(value, 0.0), 1.0)


def make_training_set(
    state_oracle: Callable[[Measurement], float],
    measurements: Iterable[Measurement],
    provenance: Provenance | None = None,
    *,
    n: int | None = None,
) -> TrainingSet:
    """One example per measurement with value = state_oracle(measurement).
    n is taken from the measurements; pass it explicitly for an empty list."""
    examples: list[TrainingExample] = []
    for m in measurements:
        examples.append(TrainingExample(m, clamp_value(float(state_oracle(m)))))
    if n is None:
        if not examples:
            raise ValueError("An empty measurement list needs an explicit n")
        n = examples[0].measurement.n
    return TrainingSet(n=n, examples=tuple(examples), provenance=provenance or Provenance())


def add_shot_noise(
    training: TrainingSet, shots: int, seed: int | np.random.Generator
) -> TrainingSet:
    """Replace every exact value by a binomial estimate from shots samples"""
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    rng = util.make_rng(seed)
    noisy = tuple(
        TrainingExample(ex.measurement, float(rng.binomial(shots, ex.value)) / shots)
        for ex in training.examples
    )
    return replace(training, examples=noisy)


##
# Learner contract: L1 (fit) finds a hypothesis with |predict(h, E_i) - value_i| <= eta
# for every training example; L2 (predict) simulates the hypothesis on any measurement.

H = TypeVar("H")


class Learner(Protocol[H]):
    def fit(self, training: TrainingSet, eta: float) -> H: ...

    def predict(self, hypothesis: H, measurement: Measurement) -> float: ...

    def residuals(self, hypothesis: H, training: TrainingSet) -> NDArray[np.float64]:
        """predict - value for every training example"""
        preds = np.array([self.predict(hypothesis, m) for m in training.measurements()])
        return preds - training.values()

    def max_residual(self, hypothesis: H, training: TrainingSet) -> float:
        if len(training) == 0:
            return 0.0
        return float(np.max(np.abs(self.residuals(hypothesis, training))))

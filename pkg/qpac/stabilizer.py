"""Stabilizer tableau simulation and the stabilizer state learner.

Conjugation rules (P -> g P g^dag) applied to every generator row, with r the
sign bit (1 means -1) and (x, z) the bits on the target line(s):

    H        r ^= x & z            swap x and z
    S        r ^= x & z            z ^= x
    X        r ^= z
    Y        r ^= x ^ z
    Z        r ^= x
    CNOT a b r ^= x_a & z_b & (x_b ^ z_a ^ 1)
                                   x_b ^= x_a    z_a ^= z_b
    CZ a b   H on b, CNOT a b, H on b
    SWAP a b swap columns a and b

Learning works in three steps: every training value is turned into a constraint
(deterministic +P / -P, or unbiased P), the deterministic constraints are
reduced to independent generators with their signs, and the group is then
completed with the lexicographically smallest commuting Paulis that keep every
unbiased constraint outside the group.
"""

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Final, Iterable, Iterator

import numpy as np
from numpy.typing import NDArray

from . import core, gf2, types
from .core import (
    Circuit,
    CircuitMeasurement,
    Gate,
    Measurement,
    PauliMeasurement,
    PauliString,
    TrainingExample,
    TrainingSet,
)
from .types import GateKind

LOG = logging.getLogger(__name__)

Bits = NDArray[np.uint8]

_ALPHABET: Final[tuple[float, ...]] = (0.0, 0.5, 1.0)


##
# Row updates shared by the tableau and single Pauli conjugation


def _conjugate_rows(x: Bits, z: Bits, r: Bits, gate: Gate) -> None:
    """In place P -> g P g^dag on every row of (x, z, r)"""
    t = gate.targets
    match gate.kind:
        case GateKind.H:
            a = t[0]
            r ^= x[:, a] & z[:, a]
            x[:, a], z[:, a] = z[:, a].copy(), x[:, a].copy()
        case GateKind.S:
            a = t[0]
            r ^= x[:, a] & z[:, a]
            z[:, a] ^= x[:, a]
        case GateKind.X:
            r ^= z[:, t[0]]
        case GateKind.Y:
            r ^= x[:, t[0]] ^ z[:, t[0]]
        case GateKind.Z:
            r ^= x[:, t[0]]
        case GateKind.CNOT:
            a, b = t
            r ^= x[:, a] & z[:, b] & (x[:, b] ^ z[:, a] ^ 1)
            x[:, b] ^= x[:, a]
            z[:, a] ^= z[:, b]
        case GateKind.CZ:
            a, b = t
            h = Gate(GateKind.H, (b,))
            _conjugate_rows(x, z, r, h)
            _conjugate_rows(x, z, r, Gate(GateKind.CNOT, (a, b)))
            _conjugate_rows(x, z, r, h)
        case GateKind.SWAP:
            a, b = t
            x[:, [a, b]] = x[:, [b, a]]
            z[:, [a, b]] = z[:, [b, a]]
        case _:
            raise ValueError(f"Not a Clifford gate: {gate.kind}")


def _phase_exponent(x1: Bits, z1: Bits, x2: Bits, z2: Bits) -> int:
    """Power of i picked up by the letter products P1 * P2, summed over qubits"""
    x1 = x1.astype(np.int64)
    z1 = z1.astype(np.int64)
    x2 = x2.astype(np.int64)
    z2 = z2.astype(np.int64)
    g = np.where(
        (x1 == 1) & (z1 == 1),
        z2 - x2,
        np.where(x1 == 1, z2 * (2 * x2 - 1), np.where(z1 == 1, x2 * (1 - 2 * z2), 0)),
    )
    return int(np.sum(g))


def _multiply(
    a: tuple[Bits, Bits, int], b: tuple[Bits, Bits, int]
) -> tuple[Bits, Bits, int]:
    """Product of two commuting signed Paulis given as (x, z, sign bit)"""
    xa, za, ra = a
    xb, zb, rb = b
    e = (2 * ra + 2 * rb + _phase_exponent(xa, za, xb, zb)) % 4
    if e % 2:
        raise ValueError("Product of anticommuting Paulis is not Hermitian")
    return xa ^ xb, za ^ zb, e // 2


def _product(rows: Iterable[tuple[Bits, Bits, int]], n: int) -> tuple[Bits, Bits, int]:
    acc: tuple[Bits, Bits, int] = (np.zeros(n, np.uint8), np.zeros(n, np.uint8), 0)
    for row in rows:
        acc = _multiply(acc, row)
    return acc


def _sign_bit(p: PauliString) -> int:
    return 0 if p.sign == 1 else 1


def _to_pauli(x: Bits, z: Bits, r: int) -> PauliString:
    return PauliString.from_arrays(x, z, sign=-1 if r else 1)


def _symplectic(p: PauliString) -> Bits:
    """Interleaved (z0, x0, z1, x1, ...) vector. Per qubit I < X < Z < Y, qubit 0
    most significant, so integer order of the vector is the Pauli label order."""
    v = np.zeros(2 * p.n, dtype=np.uint8)
    v[0::2] = p.z_bits
    v[1::2] = p.x_bits
    return v


def _from_symplectic(v: Bits, sign: int = 1) -> PauliString:
    return PauliString.from_arrays(v[1::2], v[0::2], sign=sign)


def _twisted(v: Bits) -> Bits:
    """Swap z and x within each qubit so that twisted(u) @ v is the symplectic form"""
    w = v.copy()
    w[..., 0::2] = v[..., 1::2]
    w[..., 1::2] = v[..., 0::2]
    return w


##
# Tableau


@dataclass(frozen=True)
class StabilizerTableau:
    """n generators as rows of x and z bit matrices with sign bits r (1 means -1)"""

    n: int
    x: Bits
    z: Bits
    r: Bits

    def __post_init__(self) -> None:
        for name in ("x", "z"):
            arr = gf2.as_bits(getattr(self, name))
            if arr.shape != (self.n, self.n):
                raise ValueError(f"Tableau {name} must be {self.n}x{self.n}, got {arr.shape}")
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        r = gf2.as_bits(self.r)
        if r.shape != (self.n,):
            raise ValueError(f"Tableau signs must have length {self.n}, got {r.shape}")
        r.setflags(write=False)
        object.__setattr__(self, "r", r)

    @classmethod
    def from_generators(cls, generators: Iterable[PauliString]) -> "StabilizerTableau":
        gens = list(generators)
        if not gens:
            raise ValueError("A tableau needs at least one generator")
        n = gens[0].n
        t = cls(
            n=n,
            x=np.array([g.x_bits for g in gens], dtype=np.uint8).reshape(len(gens), n),
            z=np.array([g.z_bits for g in gens], dtype=np.uint8).reshape(len(gens), n),
            r=np.array([_sign_bit(g) for g in gens], dtype=np.uint8),
        )
        t.validate()
        return t

    @property
    def generators(self) -> list[PauliString]:
        return [_to_pauli(self.x[i], self.z[i], int(self.r[i])) for i in range(self.n)]

    def validate(self) -> None:
        """Generators commute pairwise and are independent"""
        sym = (self.x.astype(np.int64) @ self.z.T + self.z.astype(np.int64) @ self.x.T) % 2
        if np.any(sym):
            raise ValueError("Tableau generators do not commute")
        if gf2.rank(np.hstack([self.x, self.z])) != self.n:
            raise ValueError("Tableau generators are not independent")

    def canonical(self) -> "StabilizerTableau":
        """Same stabilizer group with generators in reduced row echelon form, so two
        tableaux describe the same state iff their canonical forms are equal"""
        x = self.x.copy()
        z = self.z.copy()
        r = [int(v) for v in self.r]
        mat = np.hstack([x, z])
        row = 0
        for c in range(2 * self.n):
            hits = [i for i in range(row, self.n) if mat[i, c]]
            if not hits:
                continue
            p = hits[0]
            if p != row:
                mat[[row, p]] = mat[[p, row]]
                r[row], r[p] = r[p], r[row]
            for i in range(self.n):
                if i != row and mat[i, c]:
                    xi, zi, ri = _multiply(
                        (mat[i, : self.n], mat[i, self.n :], r[i]),
                        (mat[row, : self.n], mat[row, self.n :], r[row]),
                    )
                    mat[i, : self.n] = xi
                    mat[i, self.n :] = zi
                    r[i] = ri
            row += 1
        return StabilizerTableau(self.n, mat[:, : self.n], mat[:, self.n :], np.array(r, np.uint8))

    def key(self) -> bytes:
        c = self.canonical()
        return c.x.tobytes() + c.z.tobytes() + c.r.tobytes()


def tableau_zero(n: int) -> StabilizerTableau:
    """|0...0>: generators +Z on every qubit"""
    if n < 1:
        raise ValueError(f"Need at least one qubit, n={n}")
    return StabilizerTableau(
        n=n,
        x=np.zeros((n, n), dtype=np.uint8),
        z=np.eye(n, dtype=np.uint8),
        r=np.zeros(n, dtype=np.uint8),
    )


def apply_clifford(t: StabilizerTableau, g: Gate) -> StabilizerTableau:
    if not g.kind.is_clifford:
        raise ValueError(f"Not a Clifford gate: {g.kind}")
    if max(g.targets) >= t.n:
        raise ValueError(f"Gate targets {g.targets} outside tableau of n={t.n}")
    x, z, r = t.x.copy(), t.z.copy(), t.r.copy()
    _conjugate_rows(x, z, r, g)
    return StabilizerTableau(t.n, x, z, r)


def tableau_from_circuit(circuit: Circuit) -> StabilizerTableau:
    """Tableau of U|0...0> for a Clifford circuit U"""
    t = tableau_zero(circuit.n)
    for g in circuit.gates:
        t = apply_clifford(t, g)
    return t


def conjugate(p: PauliString, circuit: Circuit) -> PauliString:
    """U P U^dag where U applies circuit.gates in order"""
    if p.n != circuit.n:
        raise ValueError(f"Pauli on {p.n} qubits, circuit on {circuit.n} lines")
    x = p.x_array().reshape(1, -1)
    z = p.z_array().reshape(1, -1)
    r = np.array([_sign_bit(p)], dtype=np.uint8)
    for g in circuit.gates:
        _conjugate_rows(x, z, r, g)
    return _to_pauli(x[0], z[0], int(r[0]))


def heisenberg_z(circuit: Circuit, line: int) -> PauliString:
    """U^dag Z_line U for a Clifford circuit U, the Pauli image of a circuit-induced
    measurement"""
    if not circuit.is_clifford():
        raise ValueError("Circuit-induced measurement is not Clifford")
    return conjugate(PauliString.single(circuit.n, line, "Z"), circuit.inverse())


def measurement_pauli(m: Measurement) -> PauliString:
    match m:
        case PauliMeasurement(pauli=p):
            return p
        case CircuitMeasurement(circuit=c, line=line):
            return heisenberg_z(c, line)
    raise TypeError(f"Not a measurement: {m!r}")


def _anticommutes_with(t: StabilizerTableau, p: PauliString) -> bool:
    px = p.x_array().astype(np.int64)
    pz = p.z_array().astype(np.int64)
    sym = (t.x.astype(np.int64) @ pz + t.z.astype(np.int64) @ px) % 2
    return bool(np.any(sym))


def pauli_value(t: StabilizerTableau, p: PauliString) -> float:
    """Tr((I + P)/2 |s><s|): 0.5 if P anticommutes with a generator, otherwise P is
    +-(a product of generators) and the value is 1 or 0 by the relative sign"""
    if p.n != t.n:
        raise ValueError(f"Pauli on {p.n} qubits, tableau on {t.n}")
    if _anticommutes_with(t, p):
        return 0.5
    target = np.concatenate([p.x_array(), p.z_array()])
    coeffs = gf2.solve(np.hstack([t.x, t.z]).T, target)
    if coeffs is None:
        raise ValueError("Tableau is not maximal: commuting Pauli outside the group")
    rows = [(t.x[i], t.z[i], int(t.r[i])) for i in np.nonzero(coeffs)[0]]
    _, _, s = _product(rows, t.n)
    return 1.0 if s == _sign_bit(p) else 0.0


def stabilizer_value(t: StabilizerTableau, m: Measurement) -> float:
    return pauli_value(t, measurement_pauli(m))


def stabilizer_states(n: int, *, cap: int = 3) -> list[StabilizerTableau]:
    """Every n-qubit stabilizer state, reached breadth first from |0...0> with H, S
    and CNOT. Canonical tableaux in discovery order."""
    if n > cap:
        raise types.CapExceeded(f"Stabilizer enumeration limited to n <= {cap}, got n={n}")
    gates = [Gate(GateKind.H, (q,)) for q in range(n)]
    gates += [Gate(GateKind.S, (q,)) for q in range(n)]
    gates += [core.cnot(a, b) for a in range(n) for b in range(n) if a != b]
    start = tableau_zero(n).canonical()
    seen = {start.key(): start}
    queue = deque([start])
    while queue:
        t = queue.popleft()
        for g in gates:
            nxt = apply_clifford(t, g).canonical()
            k = nxt.key()
            if k not in seen:
                seen[k] = nxt
                queue.append(nxt)
    LOG.debug(f"Enumerated {len(seen)} stabilizer states on n={n}")
    return list(seen.values())


##
# Constraints


@dataclass(frozen=True)
class ConstraintSet:
    """deterministic: signed Paulis forced to value 1. unbiased: Paulis at value 1/2."""

    n: int
    deterministic: tuple[PauliString, ...] = ()
    unbiased: tuple[PauliString, ...] = ()

    def __post_init__(self) -> None:
        for p in self.deterministic + self.unbiased:
            if p.n != self.n:
                raise ValueError(f"Constraint {p} is not on n={self.n} qubits")
        letters = [p.letters for p in self.deterministic]
        if len(set(letters)) != len(letters):
            raise ValueError("Duplicate deterministic constraint")

    def merged(self, other: "ConstraintSet") -> "ConstraintSet":
        """Union. A Pauli forced with both signs raises InconsistentData."""
        if other.n != self.n:
            raise ValueError(f"Constraint sets on {self.n} and {other.n} qubits")
        det = {p.letters: p for p in self.deterministic}
        for p in other.deterministic:
            prev = det.get(p.letters)
            if prev is not None and prev.sign != p.sign:
                raise types.InconsistentData(f"{p.letters} is forced to both signs")
            det.setdefault(p.letters, p)
        unb = {p.letters: p.unsigned() for p in self.unbiased}
        for p in other.unbiased:
            unb.setdefault(p.letters, p.unsigned())
        return ConstraintSet(self.n, tuple(det.values()), tuple(unb.values()))


def snap_value(value: float, tolerance: float) -> float | None:
    """Nearest of 0, 1/2, 1 when it lies within tolerance, else None"""
    nearest = min(_ALPHABET, key=lambda a: abs(value - a))
    return nearest if abs(value - nearest) <= tolerance else None


def invert_constraint(
    example: TrainingExample, *, tolerance: float = types.DEFAULT_VALUE_TOLERANCE
) -> ConstraintSet:
    """Set of stabilizer states consistent with one training example, as a constraint"""
    p = measurement_pauli(example.measurement)
    snapped = snap_value(example.value, tolerance)
    if snapped is None:
        raise types.RejectedData(
            f"Value {example.value} for {p} is not within {tolerance} of 0, 1/2 or 1"
        )
    if snapped == 1.0:
        return ConstraintSet(p.n, deterministic=(p,))
    if snapped == 0.0:
        return ConstraintSet(p.n, deterministic=(p.negated(),))
    return ConstraintSet(p.n, unbiased=(p.unsigned(),))


def snap_training_set(
    training: TrainingSet, threshold: float = types.DEFAULT_SHOT_SNAP_THRESHOLD
) -> TrainingSet:
    """Map noisy values to the nearest of {0, 1/2, 1}. Any value farther than
    threshold from all three raises RejectedData."""
    out = []
    for ex in training.examples:
        snapped = min(_ALPHABET, key=lambda a: abs(ex.value - a))
        if abs(snapped - ex.value) > threshold:
            LOG.warning(f"Rejecting value {ex.value}: farther than {threshold} from 0, 1/2, 1")
            raise types.RejectedData(f"Value {ex.value} cannot be snapped within {threshold}")
        out.append(TrainingExample(ex.measurement, snapped))
    return TrainingSet(training.n, tuple(out), training.provenance)


##
# Learning


@dataclass
class _Generators:
    """Independent commuting signed generators, grown one at a time"""

    n: int
    rows: list[tuple[Bits, Bits, int]] = field(default_factory=list)

    def matrix(self) -> Bits:
        if not self.rows:
            return np.zeros((0, 2 * self.n), dtype=np.uint8)
        return np.array([np.concatenate([x, z]) for x, z, _ in self.rows], dtype=np.uint8)

    def symplectic(self) -> Bits:
        if not self.rows:
            return np.zeros((0, 2 * self.n), dtype=np.uint8)
        return np.array([_symplectic(_to_pauli(x, z, 0)) for x, z, _ in self.rows])

    def implied_sign(self, p: PauliString) -> int | None:
        """Sign bit of +-p in the group, or None when p is outside it"""
        if not self.rows:
            return 0 if p.is_identity() else None
        target = np.concatenate([p.x_array(), p.z_array()])
        coeffs = gf2.solve(self.matrix().T, target)
        if coeffs is None:
            return None
        _, _, s = _product([self.rows[i] for i in np.nonzero(coeffs)[0]], self.n)
        return s

    def add(self, p: PauliString) -> None:
        self.rows.append((p.x_array(), p.z_array(), _sign_bit(p)))


def _reduce_deterministic(cs: ConstraintSet) -> _Generators:
    gens = _Generators(cs.n)
    det = list(cs.deterministic)
    for i, p in enumerate(det):
        for q in det[:i]:
            if not p.commutes_with(q):
                raise types.InconsistentData(f"Deterministic constraints {q} and {p} anticommute")
    for p in det:
        s = gens.implied_sign(p)
        if s is None:
            gens.add(p)
        elif s != _sign_bit(p):
            raise types.InconsistentData(f"{p} contradicts the product of earlier constraints")
    return gens


def _coset_representatives(span: Bits, commutant: Bits) -> Iterator[Bits]:
    """Nonzero lexicographically smallest members of each coset of span inside
    commutant, in increasing order"""
    s_basis, s_pivots = gf2.rref(span) if span.shape[0] else (span, [])
    reduced = np.array([gf2.reduce(v, s_basis, s_pivots) for v in commutant], dtype=np.uint8)
    q_basis, _ = gf2.rref(reduced) if reduced.shape[0] else (reduced, [])
    d = q_basis.shape[0]
    # Coefficient integers with the first (most significant pivot) row as MSB are
    # in the same order as the vectors they produce.
    for k in range(1, 2**d):
        v = np.zeros(span.shape[1], dtype=np.uint8)
        for i in range(d):
            if (k >> (d - 1 - i)) & 1:
                v ^= q_basis[i]
        yield v


class _Completion:
    def __init__(self, n: int, live: list[PauliString], max_backtracks: int) -> None:
        self.n = n
        self.live = live
        self.live_vecs = [_symplectic(u) for u in live]
        self.max_backtracks = max_backtracks
        self.backtracks = 0
        self.blocking: list[PauliString] = []

    def _blocked_by(self, span: Bits) -> list[PauliString]:
        basis, pivots = gf2.rref(span)
        return [
            u
            for u, v in zip(self.live, self.live_vecs)
            if not np.any(gf2.reduce(v, basis, pivots))
        ]

    def run(self, span: Bits) -> list[Bits] | None:
        """Completion of span to n generators as a list of added vectors, or None"""
        if span.shape[0] == self.n:
            return []
        commutant = gf2.nullspace(_twisted(span)) if span.shape[0] else np.eye(2 * self.n, dtype=np.uint8)
        for cand in _coset_representatives(span, commutant):
            extended = np.vstack([span, cand])
            blocked = self._blocked_by(extended)
            if blocked:
                self.blocking = blocked
                continue
            rest = self.run(extended)
            if rest is not None:
                return [cand] + rest
            self.backtracks += 1
            if self.backtracks > self.max_backtracks:
                return None
        return None


def learn_stabilizer(
    training: TrainingSet,
    *,
    tolerance: float = types.DEFAULT_VALUE_TOLERANCE,
    max_backtracks: int | None = None,
) -> StabilizerTableau:
    """Stabilizer state reproducing every training value exactly"""
    n = training.n
    if n < 1:
        raise ValueError(f"Need at least one qubit, n={n}")
    cs = ConstraintSet(n)
    for ex in training.examples:
        cs = cs.merged(invert_constraint(ex, tolerance=tolerance))

    gens = _reduce_deterministic(cs)
    live: list[PauliString] = []
    for u in cs.unbiased:
        if gens.implied_sign(u) is not None:
            raise types.InconsistentData(f"{u.letters} is unbiased but fixed by the deterministic data")
        if all(u.commutes_with(_to_pauli(x, z, 0)) for x, z, _ in gens.rows):
            live.append(u)

    completion = _Completion(n, live, 2 * n if max_backtracks is None else max_backtracks)
    added = completion.run(gens.symplectic())
    if added is None:
        names = ", ".join(u.letters for u in completion.blocking) or "none"
        LOG.warning(f"Completion failed after {completion.backtracks} backtracks")
        raise types.CompletionFailed(
            f"No completion keeps every unbiased constraint unbiased (violated: {names})"
        )
    for v in added:
        gens.add(_from_symplectic(v))
    LOG.debug(
        f"Learned tableau from {len(cs.deterministic)} deterministic and {len(cs.unbiased)} "
        f"unbiased constraints, {len(added)} completed, {completion.backtracks} backtracks"
    )
    return StabilizerTableau.from_generators(_to_pauli(x, z, s) for x, z, s in gens.rows)


class StabilizerLearner(core.Learner[StabilizerTableau]):
    """Learner contract for stabilizer states. eta is accepted for the common
    interface; the fit is always exact."""

    def __init__(
        self,
        *,
        tolerance: float = types.DEFAULT_VALUE_TOLERANCE,
        max_backtracks: int | None = None,
    ) -> None:
        self.tolerance = tolerance
        self.max_backtracks = max_backtracks  # None means 2n

    def fit(self, training: TrainingSet, eta: float = 0.0) -> StabilizerTableau:
        if eta < 0:
            raise ValueError(f"eta must be >= 0, got {eta}")
        return learn_stabilizer(
            training, tolerance=max(self.tolerance, eta), max_backtracks=self.max_backtracks
        )

    def predict(self, hypothesis: StabilizerTableau, measurement: Measurement) -> float:
        return stabilizer_value(hypothesis, measurement)


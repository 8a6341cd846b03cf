"""Chain (matrix product) states with a bond cap L.

Site k is a tensor of shape (r_{k-1}, 2, r_k) with r_{-1} = r_{n-1} = 1, so the
state is sum_{j,k,...} |a_j>|b_jk>|c_kl>... with at most 2nL^2 complex entries.
States are kept right canonical: for every site and every fixed left bond index
the (physical, right bond) entries form a unit vector, and rows for different
left indices are orthogonal. Bond k is the cut between lines <= k and > k.
"""

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from numpy.typing import NDArray

from . import core, oracle, types, util
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

LOG = logging.getLogger(__name__)

Tensor = NDArray[np.complex128]

# Singular values below this (relative) are exact zeros of a gate split
_SPLIT_CUTOFF = 1e-14
_PROJ0 = np.array([[1, 0], [0, 0]], dtype=complex)
_SWAP = core.Gate(types.GateKind.SWAP, (0, 1)).matrix()


@dataclass(frozen=True)
class ChainState:
    n: int
    bond_cap: int
    sites: tuple[Tensor, ...]

    def __post_init__(self) -> None:
        if self.n < 1 or len(self.sites) != self.n:
            raise ValueError(f"Need {self.n} site tensors, got {len(self.sites)}")
        if self.bond_cap < 1:
            raise ValueError(f"Bond cap must be >= 1, got {self.bond_cap}")
        frozen = []
        left = 1
        for k, a in enumerate(self.sites):
            a = np.array(a, dtype=complex)
            if a.ndim != 3 or a.shape[0] != left or a.shape[1] != 2:
                raise ValueError(f"Site {k} has shape {a.shape}, expected ({left}, 2, r)")
            left = a.shape[2]
            if k < self.n - 1 and left > self.bond_cap:
                raise types.RankOverflow(k, left, self.bond_cap)
            a.setflags(write=False)
            frozen.append(a)
        if left != 1:
            raise ValueError(f"Last site must close the chain, right bond is {left}")
        object.__setattr__(self, "sites", tuple(frozen))
        norm = _norm_squared(self.sites)
        if abs(norm - 1.0) > 1e-8:
            raise ValueError(f"Chain state is not normalized: |psi|^2 = {norm}")

    @property
    def ranks(self) -> tuple[int, ...]:
        return tuple(a.shape[2] for a in self.sites[:-1])

    @property
    def parameter_count(self) -> int:
        """Complex entries stored, at most 2nL^2"""
        return sum(a.size for a in self.sites)


##
# Tensor helpers on raw site lists


def _norm_squared(sites: Sequence[Tensor]) -> float:
    env = np.ones((1, 1), dtype=complex)
    for a in sites:
        env = np.einsum("xy,xiu,yiv->uv", env, a.conj(), a)
    return float(env[0, 0].real)


def _overlap(bra: Sequence[Tensor], ket: Sequence[Tensor]) -> complex:
    env = np.ones((1, 1), dtype=complex)
    for a, b in zip(bra, ket):
        env = np.einsum("xy,xiu,yiv->uv", env, a.conj(), b)
    return complex(env[0, 0])


def _svd_split(
    theta: Tensor, cutoff: float, cap: int | None, cut: int, truncate: bool
) -> tuple[Tensor, Tensor, NDArray[np.float64]]:
    """Split theta (l, 2, 2, r) into (l, 2, k) x (k, 2, r) keeping singular values
    above cutoff relative to the largest. The right factor has orthonormal rows."""
    left, _, _, right = theta.shape
    u, s, vh = np.linalg.svd(theta.reshape(left * 2, 2 * right), full_matrices=False)
    keep = int(np.sum(s > cutoff * s[0])) if s.size and s[0] > 0 else 1
    keep = max(keep, 1)
    if cap is not None and keep > cap:
        if not truncate:
            raise types.RankOverflow(cut, keep, cap)
        LOG.debug(f"Truncating cut {cut} from rank {keep} to {cap}")
        keep = cap
    a = (u[:, :keep] * s[:keep]).reshape(left, 2, keep)
    b = vh[:keep].reshape(keep, 2, right)
    return a, b, s[:keep]


def _canonical(
    sites: Sequence[Tensor],
    bond_cap: int | None,
    *,
    cutoff: float = types.DEFAULT_SCHMIDT_CUTOFF,
    truncate: bool = False,
) -> tuple[list[Tensor], list[NDArray[np.float64]]]:
    """Right canonical form with numerically zero Schmidt values dropped, and the
    Schmidt coefficients of every cut. Raises RankOverflow when a cut needs more
    than bond_cap unless truncate is set, in which case the smallest values go."""
    out = [np.array(a, dtype=complex) for a in sites]
    n = len(out)
    # Left to right QR leaves every site but the last left canonical
    for k in range(n - 1):
        left, _, right = out[k].shape
        q, r = np.linalg.qr(out[k].reshape(left * 2, right))
        out[k] = q.reshape(left, 2, q.shape[1])
        out[k + 1] = np.einsum("ab,bic->aic", r, out[k + 1])
    # Right to left SVD exposes the Schmidt values of each cut in turn
    spectra: list[NDArray[np.float64]] = [np.ones(1)] * (n - 1)
    for k in range(n - 1, 0, -1):
        left, _, right = out[k].shape
        u, s, vh = np.linalg.svd(out[k].reshape(left, 2 * right), full_matrices=False)
        total = float(np.linalg.norm(s))
        keep = max(int(np.sum(s > cutoff * s[0])), 1) if s[0] > 0 else 1
        if bond_cap is not None and keep > bond_cap:
            if not truncate:
                raise types.RankOverflow(k - 1, keep, bond_cap)
            LOG.debug(f"Truncating cut {k - 1} from rank {keep} to {bond_cap}")
            keep = bond_cap
        out[k] = vh[:keep].reshape(keep, 2, right)
        out[k - 1] = np.einsum("aib,bc->aic", out[k - 1], u[:, :keep] * s[:keep])
        spectra[k - 1] = s[:keep] / total if total > 0 else s[:keep]
    norm = float(np.linalg.norm(out[0]))
    if norm == 0:
        raise ValueError("Chain state has zero norm")
    out[0] = out[0] / norm
    return out, spectra


def _apply_one(sites: list[Tensor], u: Tensor, k: int) -> None:
    sites[k] = np.einsum("ij,ljr->lir", u, sites[k])


def _apply_adjacent(
    sites: list[Tensor],
    u: Tensor,
    k: int,
    *,
    cap: int | None = None,
    truncate: bool = False,
) -> None:
    """u acts on lines (k, k+1) with line k the more significant bit"""
    theta = np.einsum("lir,rjs->lijs", sites[k], sites[k + 1])
    theta = np.einsum("ijab,labs->lijs", u.reshape(2, 2, 2, 2), theta)
    sites[k], sites[k + 1], _ = _svd_split(theta, _SPLIT_CUTOFF, cap, k, truncate)


def _apply_gate_sites(sites: list[Tensor], gate: Gate) -> None:
    """Exact in place gate application, no bond cap. Non-adjacent gates are routed
    with SWAPs that move the second target next to the first and back."""
    u = gate.matrix()
    if len(gate.targets) == 1:
        _apply_one(sites, u, gate.targets[0])
        return
    a, b = gate.targets
    if a > b:
        u = _SWAP @ u @ _SWAP
        a, b = b, a
    for k in range(b - 1, a, -1):
        _apply_adjacent(sites, _SWAP, k)
    _apply_adjacent(sites, u, a)
    for k in range(a + 1, b):
        _apply_adjacent(sites, _SWAP, k)


##
# Construction


def chain_from_product(
    n: int, states: Sequence[NDArray[np.complex128]] | None = None, *, bond_cap: int = 1
) -> ChainState:
    """Product state, every rank 1. Default inputs are |0>."""
    if states is None:
        states = [oracle.ZERO_KET] * n
    if len(states) != n:
        raise ValueError(f"Need {n} single qubit states, got {len(states)}")
    sites = []
    for i, v in enumerate(states):
        v = np.asarray(v, dtype=complex)
        if v.shape != (2,) or abs(np.vdot(v, v).real - 1.0) > types.NORM_TOLERANCE:
            raise ValueError(f"Input {i} is not a normalized single qubit state")
        sites.append(v.reshape(1, 2, 1))
    return ChainState(n, bond_cap, tuple(sites))


def from_sites(
    sites: Sequence[Tensor],
    bond_cap: int,
    *,
    cutoff: float = types.DEFAULT_SCHMIDT_CUTOFF,
    truncate: bool = False,
) -> ChainState:
    """Canonicalize and normalize arbitrary site tensors"""
    out, _ = _canonical(sites, bond_cap, cutoff=cutoff, truncate=truncate)
    return ChainState(len(out), bond_cap, tuple(out))


def apply_gate(
    s: ChainState,
    g: Gate,
    *,
    truncate: bool = False,
    cutoff: float = types.DEFAULT_SCHMIDT_CUTOFF,
) -> ChainState:
    """New state after g. Raises RankOverflow when the exact result needs a Schmidt
    rank above the bond cap, unless truncate is set (lossy)."""
    if max(g.targets) >= s.n:
        raise ValueError(f"Gate targets {g.targets} outside chain of n={s.n}")
    sites = list(s.sites)
    if len(g.targets) == 1:
        _apply_one(sites, g.matrix(), g.targets[0])
        return ChainState(s.n, s.bond_cap, tuple(sites))
    _apply_gate_sites(sites, g)
    return from_sites(sites, s.bond_cap, cutoff=cutoff, truncate=truncate)


def apply_circuit(
    s: ChainState,
    circuit: Circuit,
    *,
    truncate: bool = False,
    cutoff: float = types.DEFAULT_SCHMIDT_CUTOFF,
) -> ChainState:
    if circuit.n != s.n:
        raise ValueError(f"Circuit on {circuit.n} lines applied to chain of n={s.n}")
    for g in circuit.gates:
        s = apply_gate(s, g, truncate=truncate, cutoff=cutoff)
    return s


def chain_from_circuit(
    circuit: Circuit,
    inputs: Sequence[NDArray[np.complex128]] | None = None,
    *,
    bond_cap: int,
    truncate: bool = False,
    cutoff: float = types.DEFAULT_SCHMIDT_CUTOFF,
) -> ChainState:
    start = chain_from_product(circuit.n, inputs, bond_cap=bond_cap)
    return apply_circuit(start, circuit, truncate=truncate, cutoff=cutoff)


def with_bond_cap(s: ChainState, bond_cap: int) -> ChainState:
    return ChainState(s.n, bond_cap, s.sites)


##
# Schmidt structure


def schmidt_spectrum(
    s: ChainState, *, cutoff: float = types.DEFAULT_SCHMIDT_CUTOFF
) -> list[NDArray[np.float64]]:
    """Schmidt weights (squared coefficients, summing to 1) of every cut, largest
    first, with numerically zero values dropped"""
    _, spectra = _canonical(s.sites, None, cutoff=cutoff)
    return [sp**2 for sp in spectra]


def schmidt_ranks(
    s: ChainState, *, cutoff: float = types.DEFAULT_SCHMIDT_CUTOFF
) -> list[int]:
    return [len(sp) for sp in schmidt_spectrum(s, cutoff=cutoff)]


def chain_to_dense(s: ChainState, *, cap: int = types.DEFAULT_ORACLE_CAP) -> oracle.DenseState:
    if s.n > cap:
        raise types.CapExceeded(f"Dense contraction limited to n <= {cap}, got n={s.n}")
    psi = np.ones((1, 1), dtype=complex)
    for a in s.sites:
        psi = np.einsum("pl,lir->pir", psi, a).reshape(-1, a.shape[2])
    return oracle.DenseState(s.n, psi.reshape(-1))


##
# Expectations


def _pauli_sites(sites: Sequence[Tensor], p: PauliString) -> list[Tensor]:
    out = list(sites)
    for k, m in enumerate(p.site_matrices()):
        if p.x_bits[k] or p.z_bits[k]:
            out[k] = np.einsum("ij,ljr->lir", m, sites[k])
    return out


def _zero_probability(sites: Sequence[Tensor], line: int) -> float:
    projected = list(sites)
    projected[line] = np.einsum("ij,ljr->lir", _PROJ0, sites[line])
    return _overlap(sites, projected).real / _norm_squared(sites)


def chain_expectation(
    s: ChainState,
    m: Measurement,
    *,
    max_bond: int | None = None,
    truncate: bool = False,
) -> float:
    """Tr(E |psi><psi|). Circuit-induced measurements apply U with the state's bond
    cap (or max_bond) and read the Z marginal of the measured line."""
    if m.n != s.n:
        raise ValueError(f"Measurement on {m.n} qubits applied to chain of n={s.n}")
    match m:
        case PauliMeasurement(pauli=p):
            value = 0.5 * (1.0 + p.sign * _overlap(s.sites, _pauli_sites(s.sites, p)).real)
        case CircuitMeasurement(circuit=c, line=line):
            evolved = with_bond_cap(s, max(max_bond or s.bond_cap, 1))
            evolved = apply_circuit(evolved, c, truncate=truncate)
            value = _zero_probability(evolved.sites, line)
        case _:
            raise TypeError(f"Not a measurement: {m!r}")
    return core.clamp_value(value)


def residual(s: ChainState, ex: TrainingExample, *, max_bond: int | None = None) -> float:
    return chain_expectation(s, ex.measurement, max_bond=max_bond) - ex.value


##
# Learning


def bond_dims(n: int, bond_cap: int) -> list[int]:
    """Largest useful rank per cut: min(L, 2^(k+1), 2^(n-k-1))"""
    return [min(bond_cap, 2 ** (k + 1), 2 ** (n - k - 1)) for k in range(n - 1)]


def _random_sites(n: int, dims: list[int], rng: np.random.Generator) -> list[Tensor]:
    full = [1] + dims + [1]
    return [
        (rng.standard_normal((full[k], 2, full[k + 1])) + 1j * rng.standard_normal((full[k], 2, full[k + 1])))
        for k in range(n)
    ]


def _project(sites: list[Tensor]) -> list[Tensor]:
    """Right canonical, unit norm, same shapes. LQ from the right."""
    out = [a.copy() for a in sites]
    for k in range(len(out) - 1, 0, -1):
        left, _, right = out[k].shape
        q, r = np.linalg.qr(out[k].reshape(left, 2 * right).conj().T)
        out[k] = q.conj().T.reshape(left, 2, right)
        out[k - 1] = np.einsum("aib,bc->aic", out[k - 1], r.conj().T)
    out[0] = out[0] / np.linalg.norm(out[0])
    return out


def _environments(
    bra: Sequence[Tensor], kets: Sequence[Tensor]
) -> tuple[list[Tensor], list[Tensor]]:
    """Batched left and right overlap environments. kets[k] has a leading batch axis."""
    n = len(bra)
    batch = kets[0].shape[0]
    left = [np.ones((batch, 1, 1), dtype=complex)]
    for k in range(n - 1):
        left.append(np.einsum("bxy,xiu,byiv->buv", left[k], bra[k].conj(), kets[k]))
    right = [np.ones((batch, 1, 1), dtype=complex)]
    for k in range(n - 1, 0, -1):
        right.append(np.einsum("xiu,byiv,buv->bxy", bra[k].conj(), kets[k], right[-1]))
    right.reverse()
    return left, right


def _overlap_gradients(
    bra: Sequence[Tensor], kets: Sequence[Tensor]
) -> tuple[NDArray[np.complex128], list[Tensor]]:
    """<bra|ket_b> for every batch entry and its derivative with respect to the
    conjugate of every bra site"""
    left, right = _environments(bra, kets)
    values = np.einsum("bxy,xiu,byiv,buv->b", left[0], bra[0].conj(), kets[0], right[0])
    grads = [np.einsum("bxy,byiv,buv->bxiu", left[k], kets[k], right[k]) for k in range(len(bra))]
    return values, grads


@dataclass
class _Objective:
    """Scale invariant least squares over training data.

    Pauli examples share one batched contraction; circuit-induced examples are
    evaluated one by one through E|psi> = U^dag P0 U |psi>."""

    n: int
    paulis: list[PauliString]
    pauli_targets: NDArray[np.float64]
    circuits: list[CircuitMeasurement]
    circuit_targets: NDArray[np.float64]

    @classmethod
    def from_training(cls, training: TrainingSet) -> "_Objective":
        paulis, pt, circuits, ct = [], [], [], []
        for ex in training.examples:
            match ex.measurement:
                case PauliMeasurement(pauli=p):
                    paulis.append(p)
                    pt.append(ex.value)
                case CircuitMeasurement() as cm:
                    circuits.append(cm)
                    ct.append(ex.value)
        return cls(training.n, paulis, np.array(pt), circuits, np.array(ct))

    def _pauli_kets(self, sites: list[Tensor]) -> list[Tensor]:
        signs = np.array([p.sign for p in self.paulis], dtype=complex)
        kets = []
        for k, a in enumerate(sites):
            mats = np.array([core.PAULI_MATRICES[(p.x_bits[k], p.z_bits[k])] for p in self.paulis])
            if k == 0:
                mats = mats * signs[:, None, None]
            kets.append(np.einsum("bij,ljr->blir", mats, a))
        return kets

    def _circuit_ket(self, sites: list[Tensor], cm: CircuitMeasurement) -> list[Tensor]:
        out = list(sites)
        for g in cm.circuit.gates:
            _apply_gate_sites(out, g)
        _apply_one(out, _PROJ0, cm.line)
        for g in cm.circuit.inverse().gates:
            _apply_gate_sites(out, g)
        return out

    def evaluate(
        self, sites: list[Tensor], with_grad: bool
    ) -> tuple[NDArray[np.float64], list[Tensor] | None]:
        """Residuals (Pauli examples first) and d(sum residual^2)/d conj(sites)"""
        norm_vals, norm_grads = _overlap_gradients(sites, [a[None] for a in sites])
        norm = float(norm_vals[0].real)
        residuals: list[NDArray[np.float64]] = []
        grads = [np.zeros_like(a) for a in sites] if with_grad else None
        weighted_total = 0.0

        if self.paulis:
            o, g = _overlap_gradients(sites, self._pauli_kets(sites))
            o = o.real
            res = 0.5 * (1 + o / norm) - self.pauli_targets
            residuals.append(res)
            if grads is not None:
                w = 2 * res * 0.5 / norm
                for k in range(self.n):
                    grads[k] += np.einsum("b,bxiu->xiu", w, g[k])
                weighted_total += float(np.sum(w * o))
        if self.circuits:
            res_c = np.zeros(len(self.circuits))
            for i, cm in enumerate(self.circuits):
                ket = self._circuit_ket(sites, cm)
                o_c, g_c = _overlap_gradients(sites, [a[None] for a in ket])
                value = float(o_c[0].real) / norm
                res_c[i] = value - self.circuit_targets[i]
                if grads is not None:
                    w_c = 2 * res_c[i] / norm
                    for k in range(self.n):
                        grads[k] += w_c * g_c[k][0]
                    weighted_total += w_c * float(o_c[0].real)
            residuals.append(res_c)
        if grads is not None:
            for k in range(self.n):
                grads[k] -= (weighted_total / norm) * norm_grads[k][0]
        all_res = np.concatenate(residuals) if residuals else np.zeros(0)
        return all_res, grads


@dataclass
class ChainBudget:
    restarts: int = 8
    max_iters: int = 500
    initial_step: float = 0.5
    min_step: float = 1e-12


def _descend(
    objective: _Objective,
    sites: list[Tensor],
    eta: float,
    budget: ChainBudget,
) -> tuple[list[Tensor], float]:
    """Step halving gradient descent with growth on acceptance. Returns the final
    sites and their max residual."""
    m = len(objective.paulis) + len(objective.circuits)
    step = budget.initial_step / max(m, 1)
    res, grads = objective.evaluate(sites, True)
    loss = float(np.sum(res**2))
    for _ in range(budget.max_iters):
        if np.max(np.abs(res)) <= eta:
            break
        assert grads is not None
        while step >= budget.min_step:
            trial = _project([a - step * g for a, g in zip(sites, grads)])
            trial_res, _ = objective.evaluate(trial, False)
            trial_loss = float(np.sum(trial_res**2))
            if trial_loss < loss:
                sites = trial
                step *= 2.0
                break
            step *= 0.5
        else:
            break
        res, grads = objective.evaluate(sites, True)
        loss = float(np.sum(res**2))
    return sites, float(np.max(np.abs(res))) if res.size else 0.0


def learn_chain(
    training: TrainingSet,
    bond_cap: int,
    eta: float,
    *,
    budget: ChainBudget | None = None,
    seed: int = 0,
    max_bond: int | None = None,
) -> ChainState:
    """Chain state with bond cap L whose predictions are within eta of every
    training value. Restarts run in index order and the first feasible one wins."""
    if eta <= 0:
        raise ValueError(f"eta must be > 0, got {eta}")
    if bond_cap < 1:
        raise ValueError(f"Bond cap must be >= 1, got {bond_cap}")
    n = training.n
    if len(training) == 0:
        return chain_from_product(n, bond_cap=bond_cap)
    budget = budget or ChainBudget()
    objective = _Objective.from_training(training)
    dims = bond_dims(n, bond_cap)
    best = float("inf")
    for i, restart_seed in enumerate(util.derive_seeds(seed, budget.restarts)):
        rng = np.random.default_rng(restart_seed)
        sites = _project(_random_sites(n, dims, rng))
        sites, worst = _descend(objective, sites, eta, budget)
        LOG.debug(f"learn_chain restart {i}: max residual {worst:.3g}")
        if worst <= eta:
            state = from_sites(sites, bond_cap)
            # Re-verify against the public evaluator
            verified = max(abs(residual(state, ex, max_bond=max_bond)) for ex in training.examples)
            if verified <= eta:
                return state
            worst = verified
        best = min(best, worst)
    LOG.warning(f"learn_chain found no eta={eta} feasible state, best max residual {best:.3g}")
    raise types.BudgetExhausted(best)


class ChainLearner(core.Learner[ChainState]):
    def __init__(
        self,
        bond_cap: int,
        *,
        budget: ChainBudget | None = None,
        seed: int = 0,
        max_bond: int | None = None,
    ) -> None:
        """max_bond bounds the intermediate rank when evaluating circuit-induced
        measurements; None uses the bond cap."""
        self.bond_cap = bond_cap
        self.budget = budget or ChainBudget()
        self.seed = seed
        self.max_bond = max_bond

    def fit(self, training: TrainingSet, eta: float) -> ChainState:
        return learn_chain(
            training,
            self.bond_cap,
            eta,
            budget=self.budget,
            seed=self.seed,
            max_bond=self.max_bond,
        )

    def predict(self, hypothesis: ChainState, measurement: Measurement) -> float:
        return chain_expectation(hypothesis, measurement, max_bond=self.max_bond)

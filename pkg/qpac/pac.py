"""Sample complexity bounds, random access code checks and an exhaustive
fat-shattering estimator for finite hypothesis classes.

All logarithms in the sample bounds are natural logarithms. Entropies are in bits.
"""

import itertools
import logging
import math
from dataclasses import dataclass
from typing import Any, Callable, Generic, Sequence, TypeVar

import numpy as np
from numpy.typing import NDArray

from . import core, eom, mps, oracle, stabilizer, types
from .types import DatasizeReading

LOG = logging.getLogger(__name__)

##
# Sample bounds


@dataclass(frozen=True)
class OccamParams:
    n: int
    epsilon: float
    delta: float
    gamma: float
    eta: float = 0.0
    c: float = types.DEFAULT_OCCAM_C
    k: float = types.DEFAULT_ANTHONY_K
    reading: DatasizeReading = DatasizeReading.GAMMA_SQUARED

    def __post_init__(self) -> None:
        if self.n < 1:
            raise ValueError(f"n must be >= 1, got {self.n}")
        for name in ("epsilon", "delta", "gamma"):
            v = getattr(self, name)
            if not 0 < v < 1:
                raise ValueError(f"{name} must lie in (0, 1), got {v}")
        if self.eta < 0:
            raise ValueError(f"eta must be >= 0, got {self.eta}")
        if self.eta >= self.gamma:
            raise ValueError(f"eta={self.eta} must be smaller than gamma={self.gamma}")
        if self.c <= 0 or self.k <= 0:
            raise ValueError(f"Constants must be positive: C={self.c}, K={self.k}")


@dataclass(frozen=True)
class OccamTerms:
    """m = prefactor * (complexity + confidence), before rounding up"""

    prefactor: float
    complexity: float
    confidence: float

    @property
    def value(self) -> float:
        return self.prefactor * (self.complexity + self.confidence)


def occam_terms(p: OccamParams) -> OccamTerms:
    if p.reading != DatasizeReading.GAMMA_SQUARED:
        raise ValueError(
            f"Datasize reading {p.reading} is not usable: sigma names the hypothesis state"
        )
    ge2 = (p.gamma * p.epsilon) ** 2
    return OccamTerms(
        prefactor=p.c / ge2,
        complexity=p.n / ge2 * math.log(1 / (p.gamma * p.epsilon)) ** 2,
        confidence=math.log(1 / p.delta),
    )


def occam_sample_bound(p: OccamParams) -> int:
    """Training set size after which any hypothesis consistent to gamma*eps/7 is
    eps-accurate on fresh measurements with probability 1 - delta"""
    return math.ceil(occam_terms(p).value)


def occam_consistency_tolerance(p: OccamParams) -> float:
    """How closely a hypothesis must fit the data for the Occam bound to apply"""
    return p.gamma * p.epsilon / 7


def anthony_sample_bound(p: OccamParams, fat: Callable[[float], int]) -> int:
    """Sample size from the fat-shattering dimension of the class at (gamma-eta)/8"""
    if p.gamma <= p.eta:
        raise ValueError(f"gamma={p.gamma} must exceed eta={p.eta}")
    margin = p.gamma - p.eta
    f = int(fat(margin / 8))
    if f < 0:
        raise ValueError(f"Fat-shattering dimension must be >= 0, got {f}")
    complexity = f * math.log(f / (margin * p.epsilon)) ** 2 if f > 0 else 0.0
    return math.ceil(p.k / p.epsilon * (complexity + math.log(1 / p.delta)))


##
# Bounds report

FAT_N_OVER_GAMMA_SQUARED = "n_over_gamma_squared"


def fat_function(spec: int | str, n: int) -> Callable[[float], int]:
    """A fat-shattering function from a bounds parameter file: a constant, or
    the poly(n)/gamma^2 growth of an efficient ontological model"""
    if isinstance(spec, bool):
        raise ValueError(f"Unsupported fat-shattering spec {spec!r}")
    if isinstance(spec, int):
        if spec < 0:
            raise ValueError(f"Fat-shattering constant must be >= 0, got {spec}")
        return lambda _g: spec
    if spec == FAT_N_OVER_GAMMA_SQUARED:
        return lambda g: math.ceil(n / g**2)
    raise ValueError(f"Unsupported fat-shattering spec {spec!r}")


@dataclass(frozen=True)
class BoundsReport:
    params: OccamParams
    m_occam: int
    m_anthony: int | None = None
    fat: int | str | None = None
    calibration_c: float = types.DEFAULT_OCCAM_C
    calibration_method: str = "configured"


def bounds_report(
    p: OccamParams, fat: int | str | None = None, *, method: str = "configured"
) -> BoundsReport:
    m_anthony = anthony_sample_bound(p, fat_function(fat, p.n)) if fat is not None else None
    return BoundsReport(
        params=p,
        m_occam=occam_sample_bound(p),
        m_anthony=m_anthony,
        fat=fat,
        calibration_c=p.c,
        calibration_method=method,
    )


##
# Random access codes


def binary_entropy(p: float) -> float:
    if not 0.0 <= p <= 1.0:
        raise ValueError(f"p must lie in [0, 1], got {p}")
    if p in (0.0, 1.0):
        return 0.0
    return -p * math.log2(p) - (1 - p) * math.log2(1 - p)


@dataclass(frozen=True)
class RacCheck:
    lhs: float
    rhs: float
    satisfied: bool


def rac_bound_check(k: int, lambda_size: int, p: float, *, slack: float = 0.0) -> RacCheck:
    """log2(lambda_size) >= (1 - H(p)) k: an ontic space of lambda_size states can
    carry at most that many bits of a k-bit string decoded bitwise with success p.
    The information direction is used; the reverse direction cannot hold for a
    perfect code of one bit into two states."""
    if k < 1 or lambda_size < 1:
        raise ValueError(f"Need k >= 1 and lambda_size >= 1, got {k}, {lambda_size}")
    if not 0.5 < p <= 1.0:
        raise ValueError(f"Success probability must lie in (0.5, 1], got {p}")
    lhs = math.log2(lambda_size)
    rhs = (1 - binary_entropy(p)) * k
    return RacCheck(lhs=lhs, rhs=rhs, satisfied=lhs >= rhs - slack)


def rac_success_probability(encoding: Sequence[int], k: int) -> float:
    """Mean per-bit success of the best decoder for a deterministic encoding.
    encoding[y] is the ontic state prepared for the k-bit string y (bit i of y is
    bit i of the integer). The best response guesses the majority value of each
    bit among strings mapped to the same state."""
    if len(encoding) != 2**k:
        raise ValueError(f"Encoding must list 2^k = {2**k} states, got {len(encoding)}")
    enc = np.asarray(encoding, dtype=np.int64)
    ys = np.arange(2**k)
    correct = 0
    for i in range(k):
        bits = (ys >> i) & 1
        ones = np.bincount(enc, weights=bits, minlength=int(enc.max()) + 1)
        totals = np.bincount(enc, minlength=int(enc.max()) + 1)
        correct += int(np.sum(np.maximum(ones, totals - ones)))
    return correct / (k * 2**k)


##
# Fat shattering

H = TypeVar("H")


@dataclass
class FunctionClassEvaluator(Generic[H]):
    """A finite hypothesis class and how each member answers a measurement"""

    name: str
    hypotheses: Sequence[H]
    evaluate: Callable[[H, Any], float]

    def value_matrix(self, pool: Sequence[Any]) -> NDArray[np.float64]:
        """values[h, j] = evaluate(hypotheses[h], pool[j])"""
        return np.array(
            [[self.evaluate(h, m) for m in pool] for h in self.hypotheses], dtype=float
        ).reshape(len(self.hypotheses), len(pool))


def _witness_labels(values: NDArray[np.float64], gamma: float) -> NDArray[np.int8]:
    """Distinct labelings of the hypotheses by one threshold alpha: +1 when
    g >= alpha + gamma, -1 when g <= alpha - gamma, 0 otherwise. Only labelings
    with both signs present can help shatter."""
    distinct = np.unique(values)
    alphas = np.concatenate([(distinct[:-1] + distinct[1:]) / 2, distinct - gamma, distinct + gamma])
    seen: dict[bytes, NDArray[np.int8]] = {}
    for alpha in np.sort(alphas):
        lab = np.where(
            values >= alpha + gamma - 1e-12, 1, np.where(values <= alpha - gamma + 1e-12, -1, 0)
        ).astype(np.int8)
        if np.any(lab > 0) and np.any(lab < 0):
            seen.setdefault(lab.tobytes(), lab)
    if not seen:
        return np.zeros((0, values.size), dtype=np.int8)
    return np.array(list(seen.values()))


def _shattered(labels: list[NDArray[np.int8]], n_hyp: int) -> bool:
    """Backtracking over one witness per coordinate. Branches whose realized sign
    patterns do not already cover every prefix are cut."""

    def search(j: int, alive: NDArray[np.bool_], codes: NDArray[np.int64]) -> bool:
        if j == len(labels):
            return True
        for lab in labels[j]:
            nxt_alive = alive & (lab != 0)
            nxt_codes = codes * 2 + (lab > 0)
            if np.unique(nxt_codes[nxt_alive]).size == 2 ** (j + 1):
                if search(j + 1, nxt_alive, nxt_codes):
                    return True
        return False

    return search(0, np.ones(n_hyp, dtype=bool), np.zeros(n_hyp, dtype=np.int64))


def fat_shattering_estimate(
    v: FunctionClassEvaluator[Any],
    pool: Sequence[Any],
    gamma: float,
    max_k: int,
    *,
    cap: int = types.DEFAULT_EXHAUSTIVE_CAP,
) -> int:
    """Largest k <= max_k such that some k measurements of the pool are gamma-fat
    shattered by the class. Exact for the given finite class and pool."""
    if len(pool) > cap:
        raise types.CapExceeded(f"Exhaustive search limited to pools of {cap}, got {len(pool)}")
    if not 0 <= max_k <= len(pool):
        raise ValueError(f"max_k must lie in [0, {len(pool)}], got {max_k}")
    if gamma <= 0:
        raise ValueError(f"gamma must be > 0, got {gamma}")
    values = v.value_matrix(pool)
    n_hyp = values.shape[0]
    labels = [_witness_labels(values[:, j], gamma) for j in range(len(pool))]
    best = 0
    for k in range(1, max_k + 1):
        if 2**k > n_hyp:
            break
        found = any(
            _shattered([labels[j] for j in subset], n_hyp)
            for subset in itertools.combinations(range(len(pool)), k)
            if all(labels[j].shape[0] for j in subset)
        )
        if not found:
            break
        best = k
    LOG.debug(f"fat_{gamma}({v.name}) = {best} on a pool of {len(pool)}")
    return best


##
# Hypothesis classes


def simplex_grid(size: int, mesh: int) -> list[NDArray[np.float64]]:
    """Every probability vector of length size with entries in multiples of 1/mesh"""
    out = []
    for cuts in itertools.combinations(range(mesh + size - 1), size - 1):
        parts = np.diff([-1, *cuts, mesh + size - 1]) - 1
        out.append(parts / mesh)
    return out


def eom_preparation_class(
    model: eom.OntModel, *, mesh: int = 16
) -> FunctionClassEvaluator[eom.Preparation]:
    """Preparations on the simplex grid of the given mesh"""
    preps = [eom.Preparation(p) for p in simplex_grid(model.lambda_size, mesh)]
    return FunctionClassEvaluator(
        f"eom(l={model.lambda_size}, mesh={mesh})",
        preps,
        lambda q, m: eom.eom_expectation(q, model, m),
    )


def stabilizer_class(n: int) -> FunctionClassEvaluator[stabilizer.StabilizerTableau]:
    return FunctionClassEvaluator(
        f"stabilizer(n={n})", stabilizer.stabilizer_states(n), stabilizer.stabilizer_value
    )


def bloch_grid(theta_steps: int = 2, phi_steps: int = 4) -> list[NDArray[np.complex128]]:
    """Single qubit states cos(t/2)|0> + e^{ip} sin(t/2)|1> on a grid, poles once"""
    kets = [np.array([1, 0], dtype=complex), np.array([0, 1], dtype=complex)]
    for i in range(1, theta_steps):
        t = math.pi * i / theta_steps
        for j in range(phi_steps):
            p = 2 * math.pi * j / phi_steps
            kets.append(np.array([math.cos(t / 2), np.exp(1j * p) * math.sin(t / 2)]))
    return kets


def chain_class(
    n: int, *, bond_cap: int = 2, theta_steps: int = 2, phi_steps: int = 4, cap: int = 3
) -> FunctionClassEvaluator[mps.ChainState]:
    """Product states on a Bloch grid, plus the same states after a CNOT on every
    adjacent pair when bond_cap >= 2"""
    if n > cap:
        raise types.CapExceeded(f"Chain enumeration limited to n <= {cap}, got n={n}")
    grid = bloch_grid(theta_steps, phi_steps)
    states: list[mps.ChainState] = []
    for inputs in itertools.product(grid, repeat=n):
        base = mps.chain_from_product(n, list(inputs), bond_cap=bond_cap)
        states.append(base)
        if bond_cap >= 2:
            for a in range(n - 1):
                states.append(mps.apply_gate(base, core.cnot(a, a + 1)))
    return FunctionClassEvaluator(
        f"chain(n={n}, L={bond_cap})",
        states,
        lambda s, m: mps.chain_expectation(s, m, max_bond=2**n),
    )


def dense_class(
    states: Sequence[oracle.DenseState], name: str = "dense"
) -> FunctionClassEvaluator[oracle.DenseState]:
    return FunctionClassEvaluator(name, list(states), oracle.dense_expectation)

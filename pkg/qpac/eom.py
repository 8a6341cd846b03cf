"""Efficient ontological models: a finite ontic space, a response table over a
prespecified measurement pool, and preparations (distributions over the ontic
states). Tr(E rho) = sum_lambda p(lambda) f(lambda, E)."""

import logging
from dataclasses import dataclass, field
from typing import Callable, Mapping, Sequence

import numpy as np
from numpy.typing import NDArray

from . import core, lp, types, util
from .core import Measurement, TrainingSet

LOG = logging.getLogger(__name__)

PROB_TOLERANCE = 1e-12


def _check_probs(probs: NDArray[np.float64], size: int, what: str, tolerance: float) -> None:
    if probs.shape != (size,):
        raise ValueError(f"{what} must have length {size}, got {probs.shape}")
    if np.any(probs < 0):
        raise ValueError(f"{what} has negative entries")
    if abs(float(probs.sum()) - 1.0) > tolerance:
        raise ValueError(f"{what} sums to {probs.sum()}, not 1")


@dataclass(frozen=True)
class Preparation:
    """Probability vector over the ontic states"""

    probs: NDArray[np.float64]

    def __post_init__(self) -> None:
        p = np.array(self.probs, dtype=float).reshape(-1)
        _check_probs(p, p.size, "Preparation", PROB_TOLERANCE)
        p.setflags(write=False)
        object.__setattr__(self, "probs", p)

    @property
    def size(self) -> int:
        return int(self.probs.size)

    @classmethod
    def uniform(cls, size: int) -> "Preparation":
        return cls(np.full(size, 1.0 / size))

    @classmethod
    def delta(cls, size: int, index: int) -> "Preparation":
        p = np.zeros(size)
        p[index] = 1.0
        return cls(p)


@dataclass(frozen=True)
class OntModel:
    """response[lambda, j] = f(lambda, pool[j]). Pool entries are measurement keys
    (see core.measurement_key). n, when known, is the qubit count the pool acts on."""

    lambda_size: int
    pool: tuple[str, ...]
    response: NDArray[np.float64]
    states: Mapping[str, NDArray[np.float64]] = field(default_factory=dict)
    n: int | None = None
    _index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        if self.lambda_size < 1:
            raise ValueError(f"Ontic space must be non-empty, got {self.lambda_size}")
        table = np.array(self.response, dtype=float)
        if table.shape != (self.lambda_size, len(self.pool)):
            raise ValueError(
                f"Response table must be {self.lambda_size}x{len(self.pool)}, got {table.shape}"
            )
        if np.any(table < 0) or np.any(table > 1):
            raise ValueError("Response values must lie in [0, 1]")
        if len(set(self.pool)) != len(self.pool):
            raise ValueError("Measurement pool has duplicate entries")
        table.setflags(write=False)
        object.__setattr__(self, "response", table)
        states = {}
        for name, probs in self.states.items():
            p = np.array(probs, dtype=float)
            _check_probs(p, self.lambda_size, f"State {name!r}", PROB_TOLERANCE)
            p.setflags(write=False)
            states[name] = p
        object.__setattr__(self, "states", states)
        object.__setattr__(self, "_index", {key: j for j, key in enumerate(self.pool)})

    def check_budget(self, factor: int = types.DEFAULT_LAMBDA_BUDGET_FACTOR) -> None:
        """Ontic space must stay polynomial: lambda_size <= factor * n^2"""
        if self.n is not None and self.lambda_size > factor * self.n**2:
            raise types.CapExceeded(
                f"Ontic space of {self.lambda_size} exceeds {factor} * n^2 = {factor * self.n**2}"
            )

    @classmethod
    def from_callback(
        cls,
        lambda_size: int,
        pool: Sequence[Measurement],
        f: Callable[[int, Measurement], float],
        *,
        states: Mapping[str, NDArray[np.float64]] | None = None,
        budget_factor: int = types.DEFAULT_LAMBDA_BUDGET_FACTOR,
    ) -> "OntModel":
        """Tabulate a response callback over the pool. The callback must be total."""
        table = np.array([[float(f(lam, m)) for m in pool] for lam in range(lambda_size)])
        model = cls(
            lambda_size,
            tuple(core.measurement_key(m) for m in pool),
            table.reshape(lambda_size, len(pool)),
            states or {},
            pool[0].n if pool else None,
        )
        model.check_budget(budget_factor)
        return model

    def column(self, m: Measurement | str) -> NDArray[np.float64]:
        """f(., m) over the ontic space"""
        key = m if isinstance(m, str) else core.measurement_key(m)
        j = self._index.get(key)
        if j is None:
            raise ValueError(f"Measurement {key} is not in the model's pool")
        return self.response[:, j]


def eom_expectation(q: Preparation, model: OntModel, m: Measurement | str) -> float:
    if q.size != model.lambda_size:
        raise ValueError(f"Preparation over {q.size} states, model has {model.lambda_size}")
    return core.clamp_value(float(q.probs @ model.column(m)))


def eom_sample_estimate(
    q: Preparation,
    model: OntModel,
    m: Measurement | str,
    shots: int,
    seed: int | np.random.Generator,
) -> float:
    """Weak simulation: draw lambda ~ q, then the outcome ~ Bernoulli(f(lambda, m)),
    and average over shots"""
    if shots < 1:
        raise ValueError(f"shots must be >= 1, got {shots}")
    if q.size != model.lambda_size:
        raise ValueError(f"Preparation over {q.size} states, model has {model.lambda_size}")
    rng = util.make_rng(seed)
    col = model.column(m)
    lam = rng.choice(model.lambda_size, size=shots, p=q.probs)
    hits = rng.random(shots) < col[lam]
    return float(np.mean(hits))


def learn_preparation(
    model: OntModel,
    training: TrainingSet,
    eta: float,
    *,
    feasibility_tolerance: float = types.DEFAULT_FEASIBILITY_TOLERANCE,
    pivot_tolerance: float = types.DEFAULT_PIVOT_TOLERANCE,
) -> Preparation:
    """Probability vector q with |sum_lambda q f(lambda, E_i) - d_i| <= eta for every
    example. An empty training set gives the uniform preparation."""
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")
    if len(training) == 0:
        return Preparation.uniform(model.lambda_size)
    a = np.array([model.column(m) for m in training.measurements()])
    b = training.values()
    try:
        x = lp.lp_feasibility(
            a,
            b,
            eta,
            simplex=True,
            feasibility_tolerance=feasibility_tolerance,
            pivot_tolerance=pivot_tolerance,
        )
    except types.Infeasible as e:
        LOG.warning(f"No preparation fits {len(training)} examples within eta={eta}: {e}")
        raise
    return Preparation(x)


def random_model(
    lambda_size: int,
    pool: Sequence[Measurement],
    rng: np.random.Generator,
    *,
    budget_factor: int = types.DEFAULT_LAMBDA_BUDGET_FACTOR,
) -> OntModel:
    """Response table with i.i.d. uniform [0, 1] entries"""
    model = OntModel(
        lambda_size,
        tuple(core.measurement_key(m) for m in pool),
        rng.random((lambda_size, len(pool))),
        n=pool[0].n if pool else None,
    )
    model.check_budget(budget_factor)
    return model


def random_preparation(lambda_size: int, rng: np.random.Generator) -> Preparation:
    """Dirichlet(1, ..., 1), uniform on the simplex"""
    return Preparation(rng.dirichlet(np.ones(lambda_size)))


class PreparationLearner(core.Learner[Preparation]):
    def __init__(
        self,
        model: OntModel,
        *,
        feasibility_tolerance: float = types.DEFAULT_FEASIBILITY_TOLERANCE,
        pivot_tolerance: float = types.DEFAULT_PIVOT_TOLERANCE,
    ) -> None:
        self.model = model
        self.feasibility_tolerance = feasibility_tolerance
        self.pivot_tolerance = pivot_tolerance

    def fit(self, training: TrainingSet, eta: float) -> Preparation:
        return learn_preparation(
            self.model,
            training,
            eta,
            feasibility_tolerance=self.feasibility_tolerance,
            pivot_tolerance=self.pivot_tolerance,
        )

    def predict(self, hypothesis: Preparation, measurement: Measurement) -> float:
        return eom_expectation(hypothesis, self.model, measurement)


@dataclass(frozen=True)
class FittedPreparation:
    """A learned preparation bundled with the model it answers through"""

    model: OntModel
    preparation: Preparation

    def __post_init__(self) -> None:
        if self.preparation.size != self.model.lambda_size:
            raise ValueError(
                f"Preparation over {self.preparation.size} states, "
                f"model has {self.model.lambda_size}"
            )

    def expectation(self, m: Measurement | str) -> float:
        return eom_expectation(self.preparation, self.model, m)

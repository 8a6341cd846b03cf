"""Defines some common types for the module"""

import enum
from typing import Final

# Project defines
DEFAULT_ORACLE_CAP: Final[int] = 12  # Largest n the dense oracle accepts
DEFAULT_EXHAUSTIVE_CAP: Final[int] = 12  # Largest pool for fat-shattering search
DEFAULT_VALUE_TOLERANCE: Final[float] = 1e-6  # Snapping stabilizer values to {0, 1/2, 1}
DEFAULT_SCHMIDT_CUTOFF: Final[float] = 1e-10  # Relative Schmidt value cutoff
DEFAULT_LAMBDA_BUDGET_FACTOR: Final[int] = 10  # |Lambda| <= factor * n^2
DEFAULT_OCCAM_C: Final[float] = 1.0
DEFAULT_ANTHONY_K: Final[float] = 1.0
DEFAULT_SHOT_SNAP_THRESHOLD: Final[float] = 0.15
DEFAULT_FEASIBILITY_TOLERANCE: Final[float] = 1e-9
DEFAULT_PIVOT_TOLERANCE: Final[float] = 1e-11
DEFAULT_HELDOUT: Final[int] = 500

# Slack allowed when clamping exact expectation values into [0, 1]
VALUE_SLACK: Final[float] = 1e-12
UNITARY_TOLERANCE: Final[float] = 1e-10
NORM_TOLERANCE: Final[float] = 1e-9


class StrEnumUpper(enum.StrEnum):
    """Like StrEnum, but the values are same as the enum rather than lowercase."""

    @staticmethod
    def _generate_next_value_(
        name: str, start: int, count: int, last_values: list[str]
    ) -> str:
        return name


class GateKind(StrEnumUpper):
    H = enum.auto()
    S = enum.auto()
    X = enum.auto()
    Y = enum.auto()
    Z = enum.auto()
    CNOT = enum.auto()
    CZ = enum.auto()
    SWAP = enum.auto()
    U1 = enum.auto()  # generic 1-qubit unitary
    U2 = enum.auto()  # generic 2-qubit unitary

    @property
    def arity(self) -> int:
        return 2 if self in TWO_QUBIT_KINDS else 1

    @property
    def is_clifford(self) -> bool:
        return self not in (GateKind.U1, GateKind.U2)


TWO_QUBIT_KINDS: Final[frozenset[GateKind]] = frozenset(
    {GateKind.CNOT, GateKind.CZ, GateKind.SWAP, GateKind.U2}
)


class Family(enum.StrEnum):
    """Learner / hypothesis family"""

    STABILIZER = enum.auto()
    CHAIN = enum.auto()
    EOM = enum.auto()


class DistributionKind(enum.StrEnum):
    UNIFORM_PAULI = enum.auto()
    CIRCUIT_FAMILY = enum.auto()


class DatasizeReading(enum.StrEnum):
    """How to read the leading denominator of the Occam sample bound."""

    GAMMA_SQUARED = enum.auto()
    LITERAL_SIGMA = enum.auto()  # Rejected at runtime


##
# Errors


class QpacError(Exception):
    """Base class for qpac errors"""


class DataError(QpacError):
    """Training data cannot be fit by the hypothesis class"""


class InconsistentData(DataError):
    pass


class CompletionFailed(DataError):
    pass


class BudgetExhausted(DataError):
    def __init__(self, best_residual: float, message: str | None = None) -> None:
        self.best_residual = best_residual
        super().__init__(
            message or f"No feasible point found within budget (best={best_residual})"
        )


class Infeasible(DataError):
    def __init__(self, objective: float, message: str | None = None) -> None:
        self.objective = objective  # Final phase-1 objective, the certificate
        super().__init__(message or f"Infeasible (phase-1 objective={objective})")


class RejectedData(DataError):
    """Noisy values could not be snapped to the hypothesis class alphabet"""


class CapExceeded(QpacError):
    pass


class RankOverflow(CapExceeded):
    def __init__(self, cut: int, needed: int, bond_cap: int) -> None:
        self.cut = cut
        self.needed = needed
        self.bond_cap = bond_cap
        super().__init__(
            f"Schmidt rank {needed} at cut {cut} exceeds bond cap L={bond_cap}"
        )


class FormatError(QpacError):
    pass


def status_name(exc: BaseException) -> str:
    """fit_status string for an exception, e.g. BudgetExhausted -> BUDGET_EXHAUSTED"""
    name = type(exc).__name__
    out = [name[0]]
    for ch in name[1:]:
        if ch.isupper():
            out.append("_")
        out.append(ch)
    return "".join(out).upper()

"""Linear feasibility by a dense phase-1 simplex with Bland's rule.

Finds x >= 0 with |A x - b| <= eta componentwise (and sum(x) = 1 when requested).
Each band becomes a <= row and a >= row; eta == 0 gives one equality row.
"""

import logging
from dataclasses import dataclass
from typing import Final

import numpy as np
from numpy.typing import NDArray

from . import types

LOG = logging.getLogger(__name__)

_LE: Final[str] = "<="
_GE: Final[str] = ">="
_EQ: Final[str] = "="


@dataclass
class _Tableau:
    """Rows are constraints, the last row is the phase-1 objective, the last
    column is the right hand side"""

    t: NDArray[np.float64]
    basis: list[int]
    n_vars: int
    artificial: list[int]
    pivot_tolerance: float

    def pivot(self, row: int, col: int) -> None:
        t = self.t
        t[row, :] /= t[row, col]
        for r in range(t.shape[0]):
            if r != row and t[r, col] != 0.0:
                t[r, :] -= t[r, col] * t[row, :]
        self.basis[row] = col

    def entering(self) -> int:
        # Bland: lowest index with a negative reduced cost
        cost = self.t[-1, :-1]
        hits = np.nonzero(cost < -self.pivot_tolerance)[0]
        return int(hits[0]) if hits.size else -1

    def leaving(self, col: int) -> int:
        # Min ratio, ties broken by lowest basic variable index
        best: tuple[float, int, int] | None = None
        for i in range(self.t.shape[0] - 1):
            a = self.t[i, col]
            if a > self.pivot_tolerance:
                key = (self.t[i, -1] / a, self.basis[i], i)
                if best is None or key[:2] < best[:2]:
                    best = key
        return -1 if best is None else best[2]

    def run(self, max_iters: int) -> None:
        for _ in range(max_iters):
            col = self.entering()
            if col < 0:
                return
            row = self.leaving(col)
            if row < 0:
                # Phase-1 objective is bounded below by 0, so this only happens
                # through round off
                LOG.warning("Phase-1 simplex saw an unbounded column, stopping")
                return
            self.pivot(row, col)
        LOG.warning(f"Phase-1 simplex hit its iteration limit ({max_iters})")

    @property
    def objective(self) -> float:
        """Sum of artificial variables at the current basis"""
        return float(-self.t[-1, -1])

    def solution(self) -> NDArray[np.float64]:
        x = np.zeros(self.n_vars)
        for row, var in enumerate(self.basis):
            if var < self.n_vars:
                x[var] = self.t[row, -1]
        return x


def _build(
    rows: list[tuple[NDArray[np.float64], str, float]], n_vars: int, pivot_tolerance: float
) -> _Tableau:
    m = len(rows)
    normalized = []
    for coeffs, sense, rhs in rows:
        if rhs < 0:
            coeffs, rhs = -coeffs, -rhs
            sense = {_LE: _GE, _GE: _LE, _EQ: _EQ}[sense]
        normalized.append((coeffs, sense, rhs))
    n_slack = sum(1 for _, s, _ in normalized if s in (_LE, _GE))
    n_art = sum(1 for _, s, _ in normalized if s in (_GE, _EQ))
    total = n_vars + n_slack + n_art
    t = np.zeros((m + 1, total + 1))
    basis: list[int] = []
    artificial: list[int] = []
    slack = n_vars
    art = n_vars + n_slack
    for i, (coeffs, sense, rhs) in enumerate(normalized):
        t[i, :n_vars] = coeffs
        t[i, -1] = rhs
        if sense == _LE:
            t[i, slack] = 1.0
            basis.append(slack)
            slack += 1
        else:
            if sense == _GE:
                t[i, slack] = -1.0
                slack += 1
            t[i, art] = 1.0
            basis.append(art)
            artificial.append(art)
            art += 1
    # Minimize the sum of artificials: reduced costs are minus the artificial rows
    for i, var in enumerate(basis):
        if var in artificial:
            t[-1, :] -= t[i, :]
    for var in artificial:
        t[-1, var] = 0.0
    return _Tableau(t, basis, n_vars, artificial, pivot_tolerance)


def lp_feasibility(
    a: NDArray[np.float64],
    b: NDArray[np.float64],
    eta: float,
    *,
    simplex: bool = True,
    feasibility_tolerance: float = types.DEFAULT_FEASIBILITY_TOLERANCE,
    pivot_tolerance: float = types.DEFAULT_PIVOT_TOLERANCE,
    max_iters: int | None = None,
) -> NDArray[np.float64]:
    """Some x >= 0 with |a x - b|_inf <= eta (and sum(x) = 1 if simplex). Raises
    Infeasible carrying the final phase-1 objective when none exists."""
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a.reshape(1, -1)
    b = np.asarray(b, dtype=float).reshape(-1)
    if a.shape[0] != b.shape[0]:
        raise ValueError(f"A has {a.shape[0]} rows but b has {b.shape[0]} entries")
    if not (np.all(np.isfinite(a)) and np.all(np.isfinite(b))):
        raise ValueError("A and b must be finite")
    if eta < 0:
        raise ValueError(f"eta must be >= 0, got {eta}")
    n_vars = a.shape[1]
    if n_vars == 0:
        raise ValueError("Need at least one variable")

    rows: list[tuple[NDArray[np.float64], str, float]] = []
    for coeffs, rhs in zip(a, b):
        if eta == 0:
            rows.append((coeffs.copy(), _EQ, float(rhs)))
        else:
            rows.append((coeffs.copy(), _LE, float(rhs + eta)))
            rows.append((coeffs.copy(), _GE, float(rhs - eta)))
    if simplex:
        rows.append((np.ones(n_vars), _EQ, 1.0))

    tab = _build(rows, n_vars, pivot_tolerance)
    tab.run(max_iters or 50 * (tab.t.shape[0] + tab.t.shape[1]))
    if tab.objective > feasibility_tolerance:
        LOG.debug(f"Infeasible: phase-1 objective {tab.objective:.3g}")
        raise types.Infeasible(tab.objective)

    x = np.clip(tab.solution(), 0.0, None)
    if simplex and x.sum() > 0:
        x = x / x.sum()
    # Never trust solver state: check the contract directly
    err = float(np.max(np.abs(a @ x - b))) if a.shape[0] else 0.0
    if err > eta + feasibility_tolerance or (simplex and abs(x.sum() - 1.0) > feasibility_tolerance):
        raise types.Infeasible(
            tab.objective, f"Solver point fails verification (residual {err:.3g} > eta={eta})"
        )
    return x

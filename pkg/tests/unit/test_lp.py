import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from qpac import lp, types


def test_single_row_simplex() -> None:
    x = lp.lp_feasibility(np.array([[1.0, 0.0]]), np.array([1.0]), 0.0)
    assert np.allclose(x, [1.0, 0.0])


def test_identity_rows() -> None:
    x = lp.lp_feasibility(np.eye(2), np.array([0.3, 0.7]), 0.0)
    assert np.allclose(x, [0.3, 0.7])


def test_simplex_forces_sum() -> None:
    with pytest.raises(types.Infeasible) as exc:
        lp.lp_feasibility(np.array([[1.0, 1.0]]), np.array([2.0]), 0.0)
    assert exc.value.objective > 0


def test_without_simplex_constraint() -> None:
    x = lp.lp_feasibility(np.array([[1.0, 1.0]]), np.array([2.0]), 0.0, simplex=False)
    assert x.sum() == pytest.approx(2.0)
    assert np.all(x >= 0)


def test_band() -> None:
    a = np.array([[0.5, 0.5]])
    with pytest.raises(types.Infeasible):
        lp.lp_feasibility(a, np.array([0.9]), 0.1)
    x = lp.lp_feasibility(a, np.array([0.55]), 0.1)
    assert abs(float(a @ x) - 0.55) <= 0.1 + 1e-9


def test_bad_input() -> None:
    with pytest.raises(ValueError):
        lp.lp_feasibility(np.eye(2), np.array([1.0]), 0.0)
    with pytest.raises(ValueError):
        lp.lp_feasibility(np.eye(2), np.array([0.5, np.nan]), 0.0)
    with pytest.raises(ValueError):
        lp.lp_feasibility(np.eye(2), np.array([0.5, 0.5]), -1.0)


@settings(max_examples=60, deadline=None)
@given(
    seed=st.integers(min_value=0, max_value=2**32 - 1),
    rows=st.integers(min_value=1, max_value=12),
    cols=st.integers(min_value=1, max_value=8),
    eta=st.sampled_from([0.0, 0.01, 0.1]),
)
def test_recovers_feasible_point(seed: int, rows: int, cols: int, eta: float) -> None:
    rng = np.random.default_rng(seed)
    a = rng.random((rows, cols))
    truth = rng.dirichlet(np.ones(cols))
    b = a @ truth
    x = lp.lp_feasibility(a, b, eta)
    assert np.all(x >= 0)
    assert x.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.max(np.abs(a @ x - b)) <= eta + types.DEFAULT_FEASIBILITY_TOLERANCE


def _random_instance(seed: int) -> tuple[np.ndarray, np.ndarray, float, np.random.Generator]:
    """Up to 60 rows over up to 30 simplex variables, feasible by construction"""
    rng = np.random.default_rng(seed)
    rows = int(rng.integers(1, 61))
    cols = int(rng.integers(1, 31))
    a = rng.random((rows, cols))
    b = a @ rng.dirichlet(np.ones(cols))
    eta = float(rng.choice([0.0, 0.01, 0.1]))
    return a, b, eta, rng


@pytest.mark.parametrize("seed", range(100))
def test_random_feasible_instances(seed: int) -> None:
    a, b, eta, _ = _random_instance(seed)
    x = lp.lp_feasibility(a, b, eta)
    assert np.all(x >= 0)
    assert x.sum() == pytest.approx(1.0, abs=1e-9)
    assert np.max(np.abs(a @ x - b)) <= eta + 1e-7


@pytest.mark.parametrize("seed", range(100))
def test_random_infeasible_instances(seed: int) -> None:
    a, b, eta, rng = _random_instance(seed)
    # On the simplex a row's value never exceeds its largest entry
    r = int(rng.integers(a.shape[0]))
    b[r] = a[r].max() + eta + 0.05
    with pytest.raises(types.Infeasible) as exc:
        lp.lp_feasibility(a, b, eta)
    assert exc.value.objective > 0

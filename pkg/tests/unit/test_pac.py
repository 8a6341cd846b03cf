import itertools
import math

import numpy as np
import pytest

from qpac import core, eom, pac, types
from qpac.pac import OccamParams
from qpac.types import DatasizeReading

Z = core.pauli_measurement("Z")
X = core.pauli_measurement("X")


def _grid() -> list[OccamParams]:
    return [
        OccamParams(n=n, epsilon=e, delta=d, gamma=g)
        for n in (1, 4, 16)
        for e in (0.05, 0.1, 0.2)
        for d in (0.01, 0.05, 0.2)
        for g in (0.05, 0.1, 0.2)
    ]


##
# Params


def test_params_validation() -> None:
    with pytest.raises(ValueError):
        OccamParams(n=0, epsilon=0.1, delta=0.1, gamma=0.1)
    with pytest.raises(ValueError):
        OccamParams(n=2, epsilon=1.0, delta=0.1, gamma=0.1)
    with pytest.raises(ValueError):
        OccamParams(n=2, epsilon=0.1, delta=0.1, gamma=0.1, eta=0.1)
    with pytest.raises(ValueError):
        OccamParams(n=2, epsilon=0.1, delta=0.1, gamma=0.1, c=0.0)


def test_literal_reading_rejected() -> None:
    p = OccamParams(n=2, epsilon=0.1, delta=0.1, gamma=0.1, reading=DatasizeReading.LITERAL_SIGMA)
    with pytest.raises(ValueError):
        pac.occam_sample_bound(p)


##
# Occam bound


def test_occam_hand_evaluation() -> None:
    p = OccamParams(n=8, epsilon=0.1, delta=0.05, gamma=0.1, c=1.0)
    ge2 = (0.1 * 0.1) ** 2
    expected = math.ceil(1 / ge2 * (8 / ge2 * math.log(1 / (0.1 * 0.1)) ** 2 + math.log(1 / 0.05)))
    assert pac.occam_sample_bound(p) == expected
    assert pac.occam_consistency_tolerance(p) == pytest.approx(0.01 / 7)


def test_occam_n_term_is_linear() -> None:
    a = pac.occam_terms(OccamParams(n=5, epsilon=0.1, delta=0.05, gamma=0.2))
    b = pac.occam_terms(OccamParams(n=10, epsilon=0.1, delta=0.05, gamma=0.2))
    assert b.complexity == pytest.approx(2 * a.complexity)
    assert b.confidence == a.confidence


def test_occam_halving_delta_increases() -> None:
    p = OccamParams(n=3, epsilon=0.2, delta=0.1, gamma=0.3)
    q = OccamParams(n=3, epsilon=0.2, delta=0.05, gamma=0.3)
    assert pac.occam_sample_bound(q) > pac.occam_sample_bound(p)


def test_occam_monotone() -> None:
    grid = _grid()
    for p, q in itertools.product(grid, repeat=2):
        dominated = q.n >= p.n and q.epsilon <= p.epsilon and q.delta <= p.delta and q.gamma <= p.gamma
        if dominated:
            assert pac.occam_sample_bound(q) >= pac.occam_sample_bound(p)
    base = OccamParams(n=4, epsilon=0.1, delta=0.05, gamma=0.1, c=1.0)
    doubled = OccamParams(n=4, epsilon=0.1, delta=0.05, gamma=0.1, c=2.0)
    assert pac.occam_sample_bound(doubled) >= pac.occam_sample_bound(base)


##
# Fat-shattering bound


def test_anthony_zero_fat() -> None:
    p = OccamParams(n=4, epsilon=0.1, delta=0.05, gamma=0.2)
    assert pac.anthony_sample_bound(p, lambda g: 0) == math.ceil(1 / 0.1 * math.log(1 / 0.05))


def test_anthony_linear_in_k() -> None:
    a = OccamParams(n=4, epsilon=0.1, delta=0.05, gamma=0.2, k=1.0)
    b = OccamParams(n=4, epsilon=0.1, delta=0.05, gamma=0.2, k=2.0)
    fat = pac.fat_function(3, 4)
    raw_a = pac.anthony_sample_bound(a, fat)
    raw_b = pac.anthony_sample_bound(b, fat)
    assert raw_b in (2 * raw_a - 1, 2 * raw_a)


def test_anthony_n_over_gamma_squared_hand_evaluation() -> None:
    p = OccamParams(n=8, epsilon=0.1, delta=0.05, gamma=0.2, eta=0.05, k=1.0)
    margin = 0.2 - 0.05
    f = math.ceil(8 / (margin / 8) ** 2)
    expected = math.ceil(1 / 0.1 * (f * math.log(f / (margin * 0.1)) ** 2 + math.log(1 / 0.05)))
    assert pac.anthony_sample_bound(p, pac.fat_function(pac.FAT_N_OVER_GAMMA_SQUARED, 8)) == expected


def test_anthony_monotone_in_fat() -> None:
    p = OccamParams(n=4, epsilon=0.1, delta=0.05, gamma=0.2, eta=0.05)
    bounds = [pac.anthony_sample_bound(p, pac.fat_function(f, 4)) for f in (0, 1, 5, 50, 500)]
    assert bounds == sorted(bounds)


def test_anthony_monotone_in_margin() -> None:
    fat = pac.fat_function(pac.FAT_N_OVER_GAMMA_SQUARED, 4)
    bounds = [
        pac.anthony_sample_bound(OccamParams(n=4, epsilon=0.1, delta=0.05, gamma=0.3, eta=eta), fat)
        for eta in (0.0, 0.1, 0.2, 0.25)
    ]
    assert bounds == sorted(bounds)


def test_fat_function_specs() -> None:
    assert pac.fat_function(7, 3)(0.5) == 7
    assert pac.fat_function(pac.FAT_N_OVER_GAMMA_SQUARED, 3)(0.5) == 12
    for bad in (-1, True, "n_over_gamma"):
        with pytest.raises(ValueError):
            pac.fat_function(bad, 3)


def test_bounds_report() -> None:
    p = OccamParams(n=2, epsilon=0.2, delta=0.1, gamma=0.3)
    r = pac.bounds_report(p)
    assert r.m_occam == pac.occam_sample_bound(p)
    assert r.m_anthony is None
    r = pac.bounds_report(p, 0, method="log-bisection")
    assert r.m_anthony == math.ceil(5 * math.log(10))
    assert r.calibration_method == "log-bisection"


##
# Entropy and random access codes


def test_binary_entropy_examples() -> None:
    assert pac.binary_entropy(0.5) == 1.0
    assert pac.binary_entropy(0.0) == 0.0
    assert pac.binary_entropy(1.0) == 0.0
    assert pac.binary_entropy(0.11) == pytest.approx(0.4999, abs=1e-3)
    with pytest.raises(ValueError):
        pac.binary_entropy(1.5)


def test_binary_entropy_concave_and_symmetric() -> None:
    ps = np.linspace(0, 1, 41)
    for a, b in itertools.combinations(ps, 2):
        mid = pac.binary_entropy((a + b) / 2)
        assert mid >= (pac.binary_entropy(a) + pac.binary_entropy(b)) / 2 - 1e-12
    for p in ps:
        assert pac.binary_entropy(p) == pytest.approx(pac.binary_entropy(1 - p), abs=1e-12)


def test_rac_examples() -> None:
    r = pac.rac_bound_check(1, 2, 1.0)
    assert (r.lhs, r.rhs, r.satisfied) == (1.0, 1.0, True)
    r = pac.rac_bound_check(10, 2, 1.0)
    assert r.rhs == 10.0
    assert not r.satisfied
    r = pac.rac_bound_check(4, 4, 0.89)
    assert r.rhs == pytest.approx(4 * (1 - pac.binary_entropy(0.89)))
    # H(0.89) is just under 1/2, so four such bits need slightly more than two
    assert not r.satisfied
    assert pac.rac_bound_check(10, 2, 1.0, slack=9.0).satisfied
    with pytest.raises(ValueError):
        pac.rac_bound_check(2, 2, 0.5)


def test_rac_success_probability() -> None:
    assert pac.rac_success_probability([0, 1], 1) == 1.0
    assert pac.rac_success_probability([0, 0], 1) == 0.5
    # State is bit 0 of the string: bit 0 perfect, bit 1 a coin flip
    assert pac.rac_success_probability([0, 1, 0, 1], 2) == 0.75
    with pytest.raises(ValueError):
        pac.rac_success_probability([0, 1, 0], 2)


def _brute_force_rac(k: int, lambda_size: int) -> None:
    for encoding in itertools.product(range(lambda_size), repeat=2**k):
        p = pac.rac_success_probability(encoding, k)
        if p <= 0.5:
            continue
        assert pac.rac_bound_check(k, lambda_size, p, slack=1e-12).satisfied, encoding


@pytest.mark.parametrize("k,lambda_size", [(1, 2), (2, 2), (2, 3), (2, 4), (3, 2), (3, 3)])
def test_rac_never_beaten(k: int, lambda_size: int) -> None:
    _brute_force_rac(k, lambda_size)


@pytest.mark.slow
@pytest.mark.parametrize("k,lambda_size", [(3, 4), (4, 2)])
def test_rac_never_beaten_large(k: int, lambda_size: int) -> None:
    _brute_force_rac(k, lambda_size)


##
# Fat shattering


def _deltas(columns: dict[str, list[float]]) -> tuple[pac.FunctionClassEvaluator, list[str]]:
    pool = [core.pauli_measurement(label) for label in columns]
    keys = [core.measurement_key(m) for m in pool]
    size = len(next(iter(columns.values())))
    model = eom.OntModel(size, tuple(keys), np.array(list(columns.values())).T)
    hyps = [eom.Preparation.delta(size, i) for i in range(size)]
    return pac.FunctionClassEvaluator("deltas", hyps, lambda q, m: eom.eom_expectation(q, model, m)), keys


def test_fat_singleton_class() -> None:
    v = pac.FunctionClassEvaluator("one", [eom.Preparation.delta(1, 0)], lambda q, m: 0.3)
    assert pac.fat_shattering_estimate(v, [Z, X], 0.01, 2) == 0


def test_fat_two_deltas() -> None:
    v, keys = _deltas({"Z": [0.0, 1.0]})
    assert pac.fat_shattering_estimate(v, keys, 0.4, 1) == 1
    assert pac.fat_shattering_estimate(v, keys, 0.6, 1) == 0


def test_fat_constant_coordinate() -> None:
    v, keys = _deltas({"Z": [0.0, 1.0], "X": [0.5, 0.5]})
    assert pac.fat_shattering_estimate(v, keys, 0.4, 2) == 1
    assert pac.fat_shattering_estimate(v, keys[1:], 0.4, 1) == 0


def test_fat_two_coordinates() -> None:
    # Four ontic states realizing every pattern on two measurements
    v, keys = _deltas({"Z": [0.0, 0.0, 1.0, 1.0], "X": [0.0, 1.0, 0.0, 1.0]})
    assert pac.fat_shattering_estimate(v, keys, 0.3, 2) == 2
    assert pac.fat_shattering_estimate(v, keys, 0.3, 1) == 1


def test_fat_errors() -> None:
    v, keys = _deltas({"Z": [0.0, 1.0]})
    with pytest.raises(ValueError):
        pac.fat_shattering_estimate(v, keys, 0.4, 2)
    with pytest.raises(ValueError):
        pac.fat_shattering_estimate(v, keys, 0.0, 1)
    with pytest.raises(types.CapExceeded):
        pac.fat_shattering_estimate(v, keys * 13, 0.4, 1, cap=12)


def test_fat_stabilizer_class() -> None:
    v = pac.stabilizer_class(1)
    assert len(v.hypotheses) == 6
    assert pac.fat_shattering_estimate(v, [Z], 0.4, 1) == 1


def test_fat_monotone(rng: np.random.Generator) -> None:
    pool = [core.pauli_measurement(s) for s in ("XI", "ZI", "IX", "IZ", "XX")]
    model = eom.random_model(3, pool, rng)
    v = pac.eom_preparation_class(model, mesh=6)
    keys = list(model.pool)
    by_gamma = [pac.fat_shattering_estimate(v, keys, g, len(keys)) for g in (0.02, 0.05, 0.1, 0.2, 0.3)]
    assert by_gamma == sorted(by_gamma, reverse=True)
    by_pool = [pac.fat_shattering_estimate(v, keys[:j], 0.05, j) for j in range(1, len(keys) + 1)]
    assert by_pool == sorted(by_pool)
    for j, k in enumerate(by_pool, start=1):
        assert k <= j


def test_fat_stays_under_n_over_gamma_squared(rng: np.random.Generator) -> None:
    gamma = 0.2
    pool = core.sample_measurements(core.MeasurementDistribution.uniform_pauli(), 2, 12, rng)
    pool = list({core.measurement_key(m): m for m in pool}.values())[:6]
    for lam in (2, 3, 4):
        model = eom.random_model(lam, pool, rng)
        v = pac.eom_preparation_class(model, mesh=8)
        k = pac.fat_shattering_estimate(v, list(model.pool), gamma, len(pool))
        assert k <= math.ceil(lam / gamma**2)


def test_class_builders() -> None:
    assert len(pac.bloch_grid()) == 6
    assert len(pac.simplex_grid(3, 2)) == 6
    assert all(p.sum() == pytest.approx(1.0) for p in pac.simplex_grid(4, 5))
    chains = pac.chain_class(2)
    assert len(chains.hypotheses) == 72
    assert len(pac.chain_class(2, bond_cap=1).hypotheses) == 36
    with pytest.raises(types.CapExceeded):
        pac.chain_class(4)
    values = pac.dense_class([], "empty").value_matrix([Z])
    assert values.shape == (0, 1)
